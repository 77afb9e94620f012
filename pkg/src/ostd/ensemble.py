"""Ensemble of online GP experts with Bayesian model weights.

Each expert owns a kernel from a fixed dictionary, its own random-feature
draw and its own weight posterior.  Per slot the ensemble predicts with the
weight-averaged Gaussian mixture, then scores every expert by the predictive
density of the new reward (from its *pre-update* posterior), reweights, and
finally corrects every expert posterior.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import posterior as pst
from . import rng
from .errors import InvalidArgumentError, NumericError
from .kernels import KernelSpec, RFMap, feature_map, sample_frequencies

WEIGHT_FLOOR = 1e-12
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class ExpertState:
    kernel: KernelSpec
    rf: RFMap
    posterior: pst.PosteriorState
    index: int

    def features(self, s) -> np.ndarray:
        return feature_map(self.rf, s)

    def snapshot(self) -> dict:
        return {"index": self.index, "rf": self.rf.snapshot(), "posterior": self.posterior.snapshot()}

    @classmethod
    def restore(cls, snap: dict) -> "ExpertState":
        rf = RFMap.restore(snap["rf"])
        return cls(rf.spec, rf, pst.PosteriorState.restore(snap["posterior"]), int(snap["index"]))


@dataclass(frozen=True, eq=False)
class EnsembleState:
    experts: tuple[ExpertState, ...]
    weights: np.ndarray
    slot: int

    @property
    def size(self) -> int:
        return len(self.experts)

    def snapshot(self) -> dict:
        return {"slot": self.slot, "weights": self.weights.tolist(),
                "experts": [e.snapshot() for e in self.experts]}

    @classmethod
    def restore(cls, snap: dict) -> "EnsembleState":
        experts = tuple(ExpertState.restore(e) for e in snap["experts"])
        return cls(experts, np.asarray(snap["weights"], dtype=float), int(snap["slot"]))

    def to_json(self) -> str:
        return json.dumps(self.snapshot())

    @classmethod
    def from_json(cls, text: str) -> "EnsembleState":
        return cls.restore(json.loads(text))


def expert_seed(seed: int, index: int) -> int:
    """Seed of expert ``index``'s frequency draw; independent of the ensemble size."""
    return rng.derive_seed(seed, "expert-rf", index)


def init_ensemble(dictionary: Sequence[KernelSpec], D: int, d: int, noise_var: float,
                  seed: int) -> EnsembleState:
    """Uniform weights and one prior-initialized expert per dictionary kernel."""
    dictionary = list(dictionary)
    if not dictionary:
        raise InvalidArgumentError("kernel dictionary is empty")
    experts = []
    for m, spec in enumerate(dictionary):
        rf = sample_frequencies(spec, D, d, expert_seed(seed, m))
        experts.append(ExpertState(spec, rf, pst.init(spec.magnitude, D, noise_var), m))
    M = len(experts)
    return EnsembleState(tuple(experts), np.full(M, 1.0 / M), 0)


def mixture_moments(weights, means, variances) -> tuple[float, float]:
    """Mean and variance of a Gaussian mixture."""
    w = np.asarray(weights, dtype=float)
    mu = np.asarray(means, dtype=float)
    var = np.asarray(variances, dtype=float)
    mean = float(w @ mu)
    spread = mean - mu
    return mean, float(w @ (var + spread * spread))


def ensemble_predict(ens: EnsembleState, s):
    """Mixture predictive ``(mean, variance, [(mean_m, var_m), ...])`` at ``s``."""
    per_expert = [pst.predict(e.posterior, e.features(s)) for e in ens.experts]
    means, variances = zip(*per_expert)
    mean, var = mixture_moments(ens.weights, means, variances)
    return mean, var, per_expert


def ensemble_value(ens: EnsembleState, s) -> float:
    means = [pst.predict_mean(e.posterior, e.features(s)) for e in ens.experts]
    return float(ens.weights @ np.asarray(means))


def log_predictive_density(state: pst.PosteriorState, h: np.ndarray, reward: float) -> float:
    """``log N(r; h.theta, h' Sigma h + noise)`` under the current posterior."""
    return _log_density(state, h, reward, state.covariance @ h)


def _log_density(state, h, reward, Sh) -> float:
    var = float(h @ Sh) + state.noise_var
    z = reward - float(h @ state.mean)
    return -0.5 * (_LOG_2PI + np.log(var) + z * z / var)


def reweight(weights, log_likelihoods, slot: int | None = None) -> np.ndarray:
    """Posterior weights ``w_m * p_m / sum``, computed in log space.

    Weights under ``WEIGHT_FLOOR`` are lifted to it and the vector renormalized,
    so one outlier reward cannot permanently eliminate an expert.
    """
    w = np.asarray(weights, dtype=float)
    ll = np.asarray(log_likelihoods, dtype=float)
    live = np.isfinite(ll) & (w > 0)
    if np.any(np.isnan(ll)) or not np.any(live):
        raise NumericError("all expert predictive densities underflowed", slot=slot)
    # max-subtraction keeps the best expert's factor at exactly 1
    p = w * np.exp(ll - np.max(ll[live]))
    new = p / p.sum()
    if new.size > 1 and np.any(new < WEIGHT_FLOOR):
        new = np.maximum(new, WEIGHT_FLOOR)
        new /= new.sum()
    return new


def _transition_vectors(ens: EnsembleState, s_t, s_next, gamma):
    return [pst.transition_vector(e.features(s_t), e.features(s_next), gamma) for e in ens.experts]


def expert_update(expert: ExpertState, s_t, r_t: float, s_next, gamma: float) -> ExpertState:
    """Correct one expert's posterior with its own transition vector."""
    h = pst.transition_vector(expert.features(s_t), expert.features(s_next), gamma)
    post = pst.update(expert.posterior, pst.TransitionFeatures(h, r_t))
    return ExpertState(expert.kernel, expert.rf, post, expert.index)


def weight_update(ens: EnsembleState, s_t, r_t: float, s_next, gamma: float) -> np.ndarray:
    """Weights after observing ``(r_t, s_next)``, scored by pre-update posteriors."""
    hs = _transition_vectors(ens, s_t, s_next, gamma)
    ll = [log_predictive_density(e.posterior, h, r_t) for e, h in zip(ens.experts, hs)]
    return reweight(ens.weights, ll, slot=ens.slot + 1)


def step_with_vectors(ens: EnsembleState, hs: Sequence[np.ndarray], r_t: float) -> EnsembleState:
    """One slot given precomputed per-expert transition vectors."""
    r_t = float(r_t)
    hs = [np.asarray(h, dtype=float) for h in hs]
    if not np.isfinite(r_t) or not all(np.all(np.isfinite(h)) for h in hs):
        raise InvalidArgumentError("transition has non-finite reward or features")
    for e, h in zip(ens.experts, hs):
        if h.shape != (e.posterior.dim,):
            raise InvalidArgumentError(f"expert {e.index} got a transition vector of shape {h.shape}")
    Shs = [e.posterior.covariance @ h for e, h in zip(ens.experts, hs)]
    ll = [_log_density(e.posterior, h, r_t, Sh) for e, h, Sh in zip(ens.experts, hs, Shs)]
    weights = reweight(ens.weights, ll, slot=ens.slot + 1)
    experts = tuple(ExpertState(e.kernel, e.rf, pst._downdate(e.posterior, h, r_t, Sh), e.index)
                    for e, h, Sh in zip(ens.experts, hs, Shs))
    return EnsembleState(experts, weights, ens.slot + 1)


def step(ens: EnsembleState, s_t, r_t: float, s_next, gamma: float) -> EnsembleState:
    """Full slot: reweight from the old posteriors, then correct every expert."""
    return step_with_vectors(ens, _transition_vectors(ens, s_t, s_next, gamma), r_t)


def write_weights_csv(path, weights_history, first_slot: int = 1) -> None:
    """Write ``slot, w_1, ..., w_M`` rows, one per slot."""
    W = np.atleast_2d(np.asarray(weights_history, dtype=float))
    with open(path, "w", newline="") as fh:
        fh.write("# schema=1\n")
        writer = csv.writer(fh)
        writer.writerow(["slot"] + [f"w_{m + 1}" for m in range(W.shape[1])])
        for i, row in enumerate(W):
            writer.writerow([first_slot + i] + [repr(float(x)) for x in row])


class OSEGPTD:
    """Stateful wrapper around :func:`step` for interactive use."""

    def __init__(self, dictionary: Sequence[KernelSpec], D: int, d: int, noise_var: float, seed: int = 0):
        self.state = init_ensemble(dictionary, D, d, noise_var, seed)

    @property
    def weights(self) -> np.ndarray:
        return self.state.weights

    def predict(self, s) -> tuple[float, float]:
        mean, var, _ = ensemble_predict(self.state, s)
        return mean, var

    def observe(self, s, reward: float, s_next, gamma: float) -> EnsembleState:
        self.state = step(self.state, s, reward, s_next, gamma)
        return self.state
