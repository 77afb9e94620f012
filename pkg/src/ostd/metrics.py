"""Performance measures for online value estimation.

Errors are reported the way the benchmark curves are drawn: per trajectory
the running root-mean of squared errors ``sqrt(sum_{tau<=t} x_tau / t)``,
then the mean of those curves across trajectories.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgumentError, NumericError
from .linalg import spd_solve

TRUNCATION_TOL = 1e-3


def bellman_error(theta, h, r: float) -> float:
    """Squared TD residual ``(r - h.theta)^2``."""
    theta = np.asarray(theta, dtype=float)
    h = np.asarray(h, dtype=float)
    if theta.shape != h.shape:
        raise InvalidArgumentError(f"shape mismatch: theta {theta.shape} vs h {h.shape}")
    resid = r - float(h @ theta)
    return resid * resid


def empirical_values(rewards, gamma, episode_ends=None) -> np.ndarray:
    """Discounted future-reward sums by one backward pass, zero past the end.

    ``gamma`` may be a scalar or per-transition; ``episode_ends`` zeroes the
    continuation across episode boundaries.
    """
    r = np.asarray(rewards, dtype=float).reshape(-1)
    g = np.broadcast_to(np.asarray(gamma, dtype=float), r.shape).copy()
    if episode_ends is not None:
        g[np.asarray(episode_ends, dtype=bool)] = 0.0
    out = np.empty_like(r)
    acc = 0.0
    for t in range(r.shape[0] - 1, -1, -1):
        acc = r[t] + g[t] * acc
        out[t] = acc
    return out


def prediction_errors(predictions, rewards, gamma, episode_ends=None) -> np.ndarray:
    """``e_t = prediction_t - empirical_value_t``."""
    pred = np.asarray(predictions, dtype=float).reshape(-1)
    r = np.asarray(rewards, dtype=float).reshape(-1)
    if pred.shape != r.shape:
        raise InvalidArgumentError(f"{pred.shape[0]} predictions for {r.shape[0]} rewards")
    return pred - empirical_values(r, gamma, episode_ends)


def running_rms(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.sqrt(np.cumsum(x) / np.arange(1, x.shape[0] + 1))


def truncation_cutoff(horizon: int, gamma: float, tol: float = TRUNCATION_TOL) -> int:
    """Last slot whose empirical value is within ``tol * max|r|`` of the untruncated sum."""
    if gamma <= 0.0:
        return horizon
    return max(0, horizon - math.ceil(math.log(tol) / math.log(gamma)))


@dataclass(frozen=True)
class SlotRecord:
    slot: int
    predicted_value: float
    predicted_variance: float
    reward: float
    bellman_error: float
    prediction_error: float


@dataclass(eq=False)
class TrajectoryRecord:
    """Per-slot outputs of one estimator run over one trajectory."""

    predicted_value: np.ndarray
    predicted_variance: np.ndarray
    reward: np.ndarray
    bellman_error: np.ndarray
    prediction_error: np.ndarray

    def __post_init__(self):
        n = len(self.reward)
        for f in fields(self):
            arr = np.asarray(getattr(self, f.name), dtype=float)
            if arr.shape != (n,):
                raise InvalidArgumentError(f"{f.name} has {arr.shape[0]} entries, expected {n}")
            setattr(self, f.name, arr)
        if np.any(self.bellman_error < 0):
            raise InvalidArgumentError("Bellman errors must be non-negative")

    @property
    def horizon(self) -> int:
        return len(self.reward)

    def slots(self) -> Iterable[SlotRecord]:
        for t in range(self.horizon):
            yield SlotRecord(t + 1, float(self.predicted_value[t]), float(self.predicted_variance[t]),
                             float(self.reward[t]), float(self.bellman_error[t]),
                             float(self.prediction_error[t]))


@dataclass(eq=False)
class ErrorCurves:
    slot: np.ndarray
    avg_pred_error: np.ndarray
    avg_bellman_error: np.ndarray
    num_trajectories: int
    cutoff: int

    def at(self, slot: int) -> tuple[float, float]:
        i = int(slot) - 1
        return float(self.avg_pred_error[i]), float(self.avg_bellman_error[i])


def avg_error_curves(records: Sequence[TrajectoryRecord], gamma: float = 0.0) -> ErrorCurves:
    """Mean over trajectories of the per-trajectory running RMS errors.

    Trajectories of different length are averaged over those still running.
    """
    records = list(records)
    if not records:
        raise InvalidArgumentError("no trajectories to aggregate")
    T = max(r.horizon for r in records)
    pred_sum = np.zeros(T)
    bell_sum = np.zeros(T)
    count = np.zeros(T)
    for rec in records:
        n = rec.horizon
        pred_sum[:n] += running_rms(rec.prediction_error ** 2)
        bell_sum[:n] += running_rms(rec.bellman_error)
        count[:n] += 1
    return ErrorCurves(np.arange(1, T + 1), pred_sum / count, bell_sum / count, len(records),
                       truncation_cutoff(T, gamma))


def write_curves_csv(path, curves: ErrorCurves) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# schema=1\n")
        w = csv.writer(fh)
        w.writerow(["slot", "avg_pred_error", "avg_bellman_error", "tail_reliable"])
        for i, t in enumerate(curves.slot):
            w.writerow([int(t), repr(float(curves.avg_pred_error[i])),
                        repr(float(curves.avg_bellman_error[i])), int(t <= curves.cutoff)])


def read_curves_csv(path) -> ErrorCurves:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    slot = np.array([int(r["slot"]) for r in rows])
    reliable = [int(r["slot"]) for r in rows if r["tail_reliable"] == "1"]
    return ErrorCurves(slot, np.array([float(r["avg_pred_error"]) for r in rows]),
                       np.array([float(r["avg_bellman_error"]) for r in rows]), 0,
                       max(reliable) if reliable else 0)


# -- hindsight comparator and regret -----------------------------------------------

def hindsight_theta(hs, rewards, noise_var: float, prior_var: float) -> np.ndarray:
    """Best fixed weights in hindsight under the ridge-regularized Bellman loss.

    Minimizes ``sum_t (r_t - h_t.theta)^2 + (noise_var / prior_var) |theta|^2``;
    this coincides with the final online posterior mean.
    """
    Hm = np.atleast_2d(np.asarray(hs, dtype=float))
    r = np.asarray(rewards, dtype=float).reshape(-1)
    if Hm.shape[0] != r.shape[0] or r.shape[0] < 1:
        raise InvalidArgumentError("need one transition vector per reward and at least one transition")
    if noise_var <= 0 or prior_var <= 0:
        raise InvalidArgumentError("noise and prior variances must be positive")
    A = Hm.T @ Hm + (noise_var / prior_var) * np.eye(Hm.shape[1])
    return spd_solve(A, Hm.T @ r, "hindsight normal equations")


def lemma_bound(D: int, max_residual: float, horizon: int, gamma: float, noise_var: float,
                prior_var: float, theta_star_sq: float) -> float:
    """Logarithmic upper bound on the cumulative Bellman regret against ``theta*``.

    ``2 D B^2 log((1+gamma)^2 prior T / noise + 1) + c |theta*|^2`` with
    ``c = max(1/2, noise) / prior``; for ``noise <= 1/2`` this is the familiar
    ``|theta*|^2 / (2 prior)`` form.
    """
    log_term = math.log((1.0 + gamma) ** 2 * prior_var * horizon / noise_var + 1.0)
    c = max(0.5, noise_var) / prior_var
    return 2.0 * D * max_residual ** 2 * log_term + c * theta_star_sq


@dataclass(frozen=True)
class RegretReport:
    horizon: int
    cumulative_online_loss: float
    cumulative_hindsight_loss: float
    regret_rf: float
    lemma1_bound: float
    theta_star_norm: float  # squared norm |theta*|^2
    max_residual: float
    regret: float = float("nan")
    cumulative_rkhs_loss: float = float("nan")

    def as_row(self) -> dict:
        return asdict(self)


def regret_report(hs, rewards, thetas, noise_var: float, prior_var: float, D: int, gamma: float,
                  rkhs_losses=None) -> RegretReport:
    """Regret of the online estimates against the hindsight comparators.

    Parameters
    ----------
    hs : (T, 2D) array
        Transition vectors ``h_t``.
    rewards : (T,) array
    thetas : (T, 2D) array
        Online estimate in force *before* slot ``t``'s correction.
    rkhs_losses : (T,) array, optional
        Per-slot Bellman losses of the kernel-space comparator; when given,
        the full regret ``R(T)`` is filled in.

    Raises
    ------
    AssertionError
        If the measured ``R_1(T)`` exceeds the logarithmic bound.
    """
    Hm = np.atleast_2d(np.asarray(hs, dtype=float))
    r = np.asarray(rewards, dtype=float).reshape(-1)
    TH = np.atleast_2d(np.asarray(thetas, dtype=float))
    if TH.shape != Hm.shape:
        raise InvalidArgumentError("need one online estimate per transition")
    resid = r - np.einsum("ij,ij->i", Hm, TH)
    online = resid * resid
    theta_star = hindsight_theta(Hm, r, noise_var, prior_var)
    hind = (r - Hm @ theta_star) ** 2
    T = r.shape[0]
    b_e = float(np.max(np.abs(resid)))
    theta_sq = float(theta_star @ theta_star)
    bound = lemma_bound(D, b_e, T, gamma, noise_var, prior_var, theta_sq)
    r1 = float(online.sum() - hind.sum())
    if not r1 <= bound * (1 + 1e-12) + 1e-12:
        raise AssertionError(f"regret {r1:.6g} exceeds the logarithmic bound {bound:.6g} at T={T}")
    if rkhs_losses is not None:
        rk = float(np.sum(rkhs_losses))
        full = float(online.sum() - rk)
    else:
        rk = full = float("nan")
    return RegretReport(T, float(online.sum()), float(hind.sum()), r1, bound, theta_sq, b_e, full, rk)


# -- online stability -------------------------------------------------------------

@dataclass(frozen=True)
class StabilityReport:
    """Average squared one-step change of the estimate at the visited state."""

    horizon: int
    total: float
    cap_total: float

    @property
    def average(self) -> float:
        return self.total / self.horizon

    @property
    def cap(self) -> float:
        return self.cap_total / self.horizon

    @property
    def holds(self) -> bool:
        return self.total <= self.cap_total * (1 + 1e-9) + 1e-12


def online_stability_sum(values_after, values_before, max_residual: float = 0.0,
                         noise_var: float = 1.0, trace_drop: float = 0.0) -> StabilityReport:
    """Online stability ``sum_t (v_t(s_t) - v_{t-1}(s_t))^2`` and its cap.

    The cap is ``(B^2 / noise) * trace(Sigma_0 - Sigma_T)``.
    """
    a = np.asarray(values_after, dtype=float).reshape(-1)
    b = np.asarray(values_before, dtype=float).reshape(-1)
    if a.shape != b.shape or a.size == 0:
        raise InvalidArgumentError("value sequences must be aligned and non-empty")
    diff = a - b
    total = float(diff @ diff)
    cap = max_residual ** 2 / noise_var * trace_drop
    if not np.isfinite(total):
        raise NumericError("non-finite stability sum")
    return StabilityReport(a.shape[0], total, cap)


def prediction_error_ratio(errors, comparator_errors, gamma: float) -> float:
    """``mean(e^2) / (2 (1+g)^2 / (1-g)^2 * mean(e*^2))``; monitored, not asserted."""
    e = np.asarray(errors, dtype=float)
    es = np.asarray(comparator_errors, dtype=float)
    denom = 2.0 * (1.0 + gamma) ** 2 / (1.0 - gamma) ** 2 * float(np.mean(es * es))
    return float(np.mean(e * e)) / denom if denom > 0 else float("inf")
