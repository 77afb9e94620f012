"""Batch GPTD predictors used as ground truth for the online recursion.

Rewards follow ``r = H v + n`` where ``H`` is the ``t x (t+1)`` bidiagonal
TD observation matrix and ``v`` are value-function evaluations at the ``t+1``
visited states.  :func:`batch_predict` conditions the exact GP prior on the
rewards at ``O(t^3)`` cost; :func:`batch_predict_rf` does the same with the
random-feature prior through a ``2D x 2D`` system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidArgumentError
from .kernels import KernelSpec, RFMap, _as_state, gram, standardized_kernel
from .linalg import spd_factor, spd_solve

DEFAULT_MAX_T = 2000


@dataclass(frozen=True)
class TrajectoryBatch:
    """States ``s_1..s_{t+1}``, rewards ``r_1..r_t`` and the discount.

    ``discount`` may be a scalar or one value per transition; a per-transition
    value of 0 marks an episode boundary.
    """

    states: np.ndarray
    rewards: np.ndarray
    discount: float | np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        rewards = np.asarray(self.rewards, dtype=float).reshape(-1)
        if states.shape[0] != rewards.shape[0] + 1:
            raise InvalidArgumentError(
                f"need one more state than rewards, got {states.shape[0]} states and {rewards.shape[0]} rewards")
        disc = np.asarray(self.discount, dtype=float)
        if disc.ndim and disc.shape != rewards.shape:
            raise InvalidArgumentError("per-transition discounts must match the number of rewards")
        if np.any(disc < 0) or np.any(disc >= 1):
            raise InvalidArgumentError("discount must lie in [0, 1)")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "discount", float(disc) if disc.ndim == 0 else disc)

    @property
    def t(self) -> int:
        return self.rewards.shape[0]

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]

    def prefix(self, t: int) -> "TrajectoryBatch":
        disc = self.discount if np.ndim(self.discount) == 0 else self.discount[:t]
        return TrajectoryBatch(self.states[: t + 1], self.rewards[:t], disc)


def build_H(t: int, gamma) -> np.ndarray:
    """The ``t x (t+1)`` matrix with 1 on the diagonal and ``-gamma`` beside it."""
    if int(t) != t or t < 1:
        raise InvalidArgumentError(f"t must be >= 1, got {t}")
    t = int(t)
    g = np.broadcast_to(np.asarray(gamma, dtype=float), (t,))
    if np.any(g < 0) or np.any(g >= 1):
        raise InvalidArgumentError("discount must lie in [0, 1)")
    H = np.zeros((t, t + 1))
    idx = np.arange(t)
    H[idx, idx] = 1.0
    H[idx, idx + 1] = -g
    return H


def _check_noise(noise_var):
    if not (np.isfinite(noise_var) and noise_var > 0):
        raise InvalidArgumentError(f"noise variance must be positive, got {noise_var}")


def batch_predict_from_gram(K: np.ndarray, k_s: np.ndarray, k_ss: float, H: np.ndarray,
                            rewards: np.ndarray, noise_var: float) -> tuple[float, float]:
    """GP conditioning given an arbitrary prior covariance.

    ``K`` is the prior covariance of ``v`` at the visited states, ``k_s`` the
    cross covariance with the query and ``k_ss`` its prior variance.
    """
    _check_noise(noise_var)
    Hk = H @ k_s
    Q = H @ K @ H.T + noise_var * np.eye(H.shape[0])
    sol = spd_solve(Q, np.column_stack([rewards, Hk]), "Q = H K H' + noise*I")
    mean = float(Hk @ sol[:, 0])
    var = float(k_ss - Hk @ sol[:, 1])
    return mean, var


def batch_predict(spec: KernelSpec, batch: TrajectoryBatch | None, s, noise_var: float,
                  max_t: int = DEFAULT_MAX_T) -> tuple[float, float]:
    """Exact GPTD predictive mean and variance at ``s``; ``O(t^3)``."""
    _check_noise(noise_var)
    s = _as_state(s)
    k_ss = spec.magnitude * float(standardized_kernel(spec, np.zeros_like(s)))
    if batch is None or batch.t == 0:
        return 0.0, k_ss
    if batch.t > max_t:
        raise InvalidArgumentError(f"exact oracle capped at t={max_t}, got t={batch.t}")
    s = _as_state(s, batch.state_dim)
    K = gram(spec, batch.states)
    k_s = gram(spec, batch.states, s[None, :])[:, 0]
    H = build_H(batch.t, batch.discount)
    return batch_predict_from_gram(K, k_s, k_ss, H, batch.rewards, noise_var)


def batch_values(spec: KernelSpec, batch: TrajectoryBatch, noise_var: float, query=None,
                 max_t: int = DEFAULT_MAX_T) -> np.ndarray:
    """Exact GPTD posterior means at many query states with one factorization.

    ``query`` defaults to the trajectory's own states.
    """
    _check_noise(noise_var)
    if batch.t > max_t:
        raise InvalidArgumentError(f"exact oracle capped at t={max_t}, got t={batch.t}")
    query = batch.states if query is None else np.atleast_2d(np.asarray(query, dtype=float))
    K = gram(spec, batch.states)
    H = build_H(batch.t, batch.discount)
    Q = H @ K @ H.T + noise_var * np.eye(batch.t)
    alpha = spd_solve(Q, batch.rewards, "Q = H K H' + noise*I")
    Kq = K if query is batch.states else gram(spec, query, batch.states)
    return Kq @ (H.T @ alpha)


def rf_posterior(rf: RFMap, batch: TrajectoryBatch, noise_var: float,
                 prior_var: float) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form RF weight posterior ``(mean, covariance)`` after the batch.

    mean = (P' H' H P + (noise/prior) I)^-1 P' H' r and
    cov  = noise * (P' H' H P + (noise/prior) I)^-1, with P the feature rows.
    """
    _check_noise(noise_var)
    if not (np.isfinite(prior_var) and prior_var > 0):
        raise InvalidArgumentError(f"prior variance must be positive, got {prior_var}")
    n = rf.feature_dim
    if batch is None or batch.t == 0:
        return np.zeros(n), prior_var * np.eye(n)
    if batch.state_dim != rf.state_dim:
        raise InvalidArgumentError(f"batch states have dimension {batch.state_dim}, map expects {rf.state_dim}")
    Phi = rf.transform(batch.states)
    HP = build_H(batch.t, batch.discount) @ Phi
    A = HP.T @ HP + (noise_var / prior_var) * np.eye(n)
    fac = spd_factor(A, "regularized RF information matrix")
    mean = scipy.linalg.cho_solve(fac, HP.T @ batch.rewards)
    cov = noise_var * scipy.linalg.cho_solve(fac, np.eye(n))
    return mean, 0.5 * (cov + cov.T)


def batch_predict_rf(rf: RFMap, batch: TrajectoryBatch | None, s, noise_var: float,
                     prior_var: float) -> tuple[float, float]:
    """Random-feature batch predictor; equals the recursive estimator's moments."""
    mean, cov = rf_posterior(rf, batch, noise_var, prior_var)
    phi = rf.transform(_as_state(s, rf.state_dim)[None, :])[0]
    return float(phi @ mean), float(phi @ cov @ phi)


def batch_posterior(spec: KernelSpec, batch: TrajectoryBatch | None, queries, noise_var: float,
                    max_t: int = DEFAULT_MAX_T) -> tuple[np.ndarray, np.ndarray]:
    """Exact GPTD means and variances at several query states, one factorization."""
    _check_noise(noise_var)
    Xq = np.atleast_2d(np.asarray(queries, dtype=float))
    prior = spec.magnitude * np.ones(Xq.shape[0])
    if batch is None or batch.t == 0:
        return np.zeros(Xq.shape[0]), prior
    if batch.t > max_t:
        raise InvalidArgumentError(f"exact oracle capped at t={max_t}, got t={batch.t}")
    if Xq.shape[1] != batch.state_dim:
        raise InvalidArgumentError(f"queries have dimension {Xq.shape[1]}, batch has {batch.state_dim}")
    H = build_H(batch.t, batch.discount)
    K = gram(spec, batch.states)
    HKq = H @ gram(spec, batch.states, Xq)
    Q = H @ K @ H.T + noise_var * np.eye(batch.t)
    sol = spd_solve(Q, np.column_stack([batch.rewards, HKq]), "Q = H K H' + noise*I")
    means = HKq.T @ sol[:, 0]
    variances = prior - np.einsum("ij,ij->j", HKq, sol[:, 1:])
    return means, variances
