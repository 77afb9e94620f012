"""Online Gaussian posterior over random-feature weights.

The value function is modelled as ``v(s) = phi(s).theta`` with prior
``theta ~ N(0, prior_var * I)``.  Each transition contributes the linear
Gaussian observation ``r_t = h_t.theta + noise`` with
``h_t = phi(s_t) - gamma * phi(s_{t+1})``, so the posterior stays Gaussian and
is corrected by a rank-one covariance downdate per slot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import IllConditionedError, InvalidArgumentError
from .kernels import RFMap, feature_map
from .linalg import spd_inverse, spd_solve

SYMMETRY_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class PosteriorState:
    """Mean and covariance of the weight posterior after ``slot`` corrections."""

    mean: np.ndarray
    covariance: np.ndarray
    slot: int
    noise_var: float
    prior_var: float

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def snapshot(self) -> dict:
        """Flat, JSON-friendly checkpoint (covariance stored row-major)."""
        return {
            "dim": self.dim,
            "slot": int(self.slot),
            "noise_var": float(self.noise_var),
            "prior_var": float(self.prior_var),
            "mean": self.mean.tolist(),
            "covariance": self.covariance.reshape(-1).tolist(),
        }

    @classmethod
    def restore(cls, snap: dict) -> "PosteriorState":
        n = int(snap["dim"])
        mean = np.asarray(snap["mean"], dtype=float)
        cov = np.asarray(snap["covariance"], dtype=float)
        if mean.shape != (n,) or cov.shape != (n * n,):
            raise InvalidArgumentError("snapshot arrays do not match the stated dimension")
        return cls(mean, cov.reshape(n, n), int(snap["slot"]), float(snap["noise_var"]),
                   float(snap["prior_var"]))

    def to_json(self) -> str:
        return json.dumps(self.snapshot())

    @classmethod
    def from_json(cls, text: str) -> "PosteriorState":
        return cls.restore(json.loads(text))


@dataclass(frozen=True)
class TransitionFeatures:
    h: np.ndarray
    reward: float


def init(prior_var: float, D: int, noise_var: float = 1.0) -> PosteriorState:
    """Prior state: zero mean and ``prior_var * I`` covariance of size ``2D``."""
    if not (np.isfinite(prior_var) and prior_var > 0):
        raise InvalidArgumentError(f"prior variance must be positive, got {prior_var}")
    if not (np.isfinite(noise_var) and noise_var > 0):
        raise InvalidArgumentError(f"noise variance must be positive, got {noise_var}")
    if int(D) != D or D < 1:
        raise InvalidArgumentError(f"D must be >= 1, got {D}")
    n = 2 * int(D)
    return PosteriorState(np.zeros(n), prior_var * np.eye(n), 0, float(noise_var), float(prior_var))


def transition_vector(phi_t, phi_next, gamma: float) -> np.ndarray:
    """``h = phi_t - gamma * phi_next``."""
    phi_t = np.asarray(phi_t, dtype=float)
    phi_next = np.asarray(phi_next, dtype=float)
    if phi_t.shape != phi_next.shape:
        raise InvalidArgumentError(f"feature shapes differ: {phi_t.shape} vs {phi_next.shape}")
    if not 0.0 <= gamma < 1.0:
        raise InvalidArgumentError(f"discount must lie in [0, 1), got {gamma}")
    return phi_t - gamma * phi_next


def _check_dim(state: PosteriorState, v: np.ndarray, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (state.dim,):
        raise InvalidArgumentError(f"{name} has shape {v.shape}, posterior has dimension {state.dim}")
    return v


def predict(state: PosteriorState, phi_s) -> tuple[float, float]:
    """Predictive mean ``phi.theta`` and variance ``phi' Sigma phi``."""
    phi_s = _check_dim(state, phi_s, "feature vector")
    return float(phi_s @ state.mean), float(phi_s @ state.covariance @ phi_s)


def predict_mean(state: PosteriorState, phi_s) -> float:
    return float(np.asarray(phi_s) @ state.mean)


def update(state: PosteriorState, tf: TransitionFeatures) -> PosteriorState:
    """Bayesian correction with one transition (rank-one downdate)."""
    h = _check_dim(state, tf.h, "transition vector")
    r = float(tf.reward)
    if not np.isfinite(r) or not np.all(np.isfinite(h)):
        raise InvalidArgumentError("transition has non-finite reward or features")
    return _downdate(state, h, r, state.covariance @ h)


def _downdate(state: PosteriorState, h: np.ndarray, r: float, Sh: np.ndarray) -> PosteriorState:
    # Sh = Sigma h, shared with the ensemble's predictive density
    denom = float(h @ Sh) + state.noise_var
    mean = state.mean + Sh * ((r - float(h @ state.mean)) / denom)
    # Sh Sh' is elementwise symmetric, so a symmetric covariance stays symmetric.
    down = np.multiply.outer(Sh, Sh)
    down /= denom
    cov = np.subtract(state.covariance, down, out=down)
    return PosteriorState(mean, cov, state.slot + 1, state.noise_var, state.prior_var)


def info_matrix(state: PosteriorState) -> np.ndarray:
    """Information matrix ``J = Sigma^-1``."""
    try:
        return spd_inverse(state.covariance, "posterior covariance")
    except IllConditionedError as exc:
        raise IllConditionedError("posterior covariance cannot be inverted", exc.condition,
                                  slot=state.slot) from None


def gradient_form_step(state: PosteriorState, tf: TransitionFeatures) -> PosteriorState:
    """The same correction written as a preconditioned gradient step.

    The information matrix grows by ``h h' / noise`` and the mean moves by
    ``-(1 / 2 noise) J^-1 grad`` where ``grad = 2 h (h.theta - r)`` is the
    gradient of the squared Bellman residual.
    """
    h = _check_dim(state, tf.h, "transition vector")
    r = float(tf.reward)
    if not np.isfinite(r) or not np.all(np.isfinite(h)):
        raise InvalidArgumentError("transition has non-finite reward or features")
    J = info_matrix(state) + np.outer(h, h) / state.noise_var
    grad = 2.0 * h * (float(h @ state.mean) - r)
    try:
        step = spd_solve(J, grad, "information matrix")
        cov = spd_inverse(J, "information matrix")
    except IllConditionedError as exc:
        raise IllConditionedError("information matrix is singular", exc.condition,
                                  slot=state.slot + 1) from None
    mean = state.mean - step / (2.0 * state.noise_var)
    return PosteriorState(mean, cov, state.slot + 1, state.noise_var, state.prior_var)


def check_invariants(state: PosteriorState, atol: float = 0.0) -> None:
    """Raise ``AssertionError`` if the covariance is asymmetric or out of range."""
    C = state.covariance
    scale = np.max(np.abs(C))
    assert np.max(np.abs(C - C.T)) <= SYMMETRY_RTOL * scale, "covariance is not symmetric"
    eig = np.linalg.eigvalsh(C)
    assert eig[0] > -atol, f"covariance has eigenvalue {eig[0]}"
    assert eig[-1] <= state.prior_var * (1 + 1e-9) + atol, f"covariance eigenvalue {eig[-1]} exceeds prior"


class OSGPTD:
    """Online value estimator bound to one random-feature map.

    Examples
    --------
    >>> from ostd.kernels import KernelSpec, sample_frequencies
    >>> rf = sample_frequencies(KernelSpec("gaussian", 1.0), D=10, d=2, seed=0)
    >>> est = OSGPTD(rf, noise_var=0.1)
    >>> mean, var = est.predict([0.0, 0.0])
    >>> mean, round(var, 12)
    (0.0, 1.0)
    """

    def __init__(self, rf: RFMap, noise_var: float, prior_var: float | None = None):
        self.rf = rf
        prior = rf.spec.magnitude if prior_var is None else prior_var
        self.state = init(prior, rf.num_features, noise_var)

    def predict(self, s) -> tuple[float, float]:
        mean, var = predict(self.state, feature_map(self.rf, s))
        return mean, var

    def value(self, s) -> float:
        return predict_mean(self.state, feature_map(self.rf, s))

    def observe(self, s, reward: float, s_next, gamma: float) -> PosteriorState:
        h = transition_vector(feature_map(self.rf, s), feature_map(self.rf, s_next), gamma)
        self.state = update(self.state, TransitionFeatures(h, reward))
        return self.state

    def reset(self) -> None:
        self.state = init(self.state.prior_var, self.rf.num_features, self.state.noise_var)
