"""Shift-invariant kernels and their random Fourier feature approximation.

A standardized kernel ``kbar(s - s')`` with ``kbar(0) = 1`` is the
characteristic function of a probability density over frequencies.  Drawing
``D`` frequencies from that density gives the real feature map

    phi(s) = D**-0.5 * [sin(z_1.s), cos(z_1.s), ..., sin(z_D.s), cos(z_D.s)]

whose inner products approximate ``kbar``.  The magnitude ``sigma_theta^2``
scales the kernel and becomes the prior variance of the feature weights.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import InvalidArgumentError


class KernelFamily(str, enum.Enum):
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"
    CAUCHY = "cauchy"

    @classmethod
    def parse(cls, value) -> "KernelFamily":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            names = ", ".join(f.value for f in cls)
            raise InvalidArgumentError(f"unknown kernel family {value!r}; expected one of {names}") from None


@dataclass(frozen=True)
class KernelSpec:
    """A standardized shift-invariant kernel scaled by ``magnitude``.

    Parameters
    ----------
    family : KernelFamily
        Gaussian ``exp(-|x|^2 / 2 l^2)``, Laplace ``exp(-|x|_1 / l)`` or
        Cauchy ``prod_i 1 / (1 + x_i^2 / l^2)``.
    lengthscale : float
        The characteristic length ``l``.
    magnitude : float
        Prior variance ``sigma_theta^2``; ``k(s, s) = magnitude``.
    """

    family: KernelFamily = KernelFamily.GAUSSIAN
    lengthscale: float = 1.0
    magnitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily.parse(self.family))
        if not (np.isfinite(self.lengthscale) and self.lengthscale > 0):
            raise InvalidArgumentError(f"lengthscale must be positive, got {self.lengthscale}")
        if not (np.isfinite(self.magnitude) and self.magnitude > 0):
            raise InvalidArgumentError(f"magnitude must be positive, got {self.magnitude}")

    def to_dict(self) -> dict:
        return {"family": self.family.value, "lengthscale": float(self.lengthscale),
                "magnitude": float(self.magnitude)}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(d["family"], float(d["lengthscale"]), float(d["magnitude"]))


def _as_state(s, d=None, name="state") -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.ndim == 0:
        s = s.reshape(1)
    if s.ndim != 1:
        raise InvalidArgumentError(f"{name} must be a vector, got shape {s.shape}")
    if d is not None and s.shape[0] != d:
        raise InvalidArgumentError(f"{name} has dimension {s.shape[0]}, expected {d}")
    return s


def standardized_kernel(spec: KernelSpec, diff: np.ndarray) -> np.ndarray:
    """Evaluate ``kbar`` on difference vectors (last axis is the state axis)."""
    diff = np.asarray(diff, dtype=float)
    scaled = diff / spec.lengthscale
    if spec.family is KernelFamily.GAUSSIAN:
        return np.exp(-0.5 * np.sum(scaled * scaled, axis=-1))
    if spec.family is KernelFamily.LAPLACE:
        return np.exp(-np.sum(np.abs(scaled), axis=-1))
    return np.prod(1.0 / (1.0 + scaled * scaled), axis=-1)


def exact_kernel(spec: KernelSpec, s, s_prime) -> float:
    """Closed-form ``k(s, s') = magnitude * kbar(s - s')``."""
    s = _as_state(s)
    s_prime = _as_state(s_prime, s.shape[0], "second state")
    return float(spec.magnitude * standardized_kernel(spec, s - s_prime))


def gram(spec: KernelSpec, A, B=None) -> np.ndarray:
    """Kernel matrix ``K[i, j] = k(A[i], B[j])`` (magnitude included)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = A if B is None else np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise InvalidArgumentError(f"state dimensions differ: {A.shape[1]} vs {B.shape[1]}")
    return spec.magnitude * standardized_kernel(spec, A[:, None, :] - B[None, :, :])


def _draw_frequencies(spec: KernelSpec, D: int, d: int, gen: np.random.Generator) -> np.ndarray:
    inv_l = 1.0 / spec.lengthscale
    if spec.family is KernelFamily.GAUSSIAN:
        return gen.standard_normal((D, d)) * inv_l
    u = gen.random((D, d))
    if spec.family is KernelFamily.LAPLACE:
        # Cauchy density, inverse CDF
        return inv_l * np.tan(np.pi * (u - 0.5))
    # Laplace density, inverse CDF
    c = u - 0.5
    return -inv_l * np.sign(c) * np.log1p(-2.0 * np.abs(c))


@dataclass(frozen=True, eq=False)
class RFMap:
    """A frozen draw of ``D`` spectral frequencies for a kernel.

    Build with :func:`sample_frequencies`; :meth:`from_frequencies` is for
    hand-made maps (tests, fixed designs) and carries no seed.
    """

    spec: KernelSpec
    num_features: int
    state_dim: int
    seed: int | None
    frequencies: np.ndarray = field(repr=False)

    def __post_init__(self):
        freq = np.array(self.frequencies, dtype=float)
        if freq.shape != (self.num_features, self.state_dim):
            raise InvalidArgumentError(
                f"frequencies have shape {freq.shape}, expected ({self.num_features}, {self.state_dim})")
        freq.setflags(write=False)
        object.__setattr__(self, "frequencies", freq)

    @classmethod
    def from_frequencies(cls, frequencies, spec: KernelSpec | None = None) -> "RFMap":
        freq = np.atleast_2d(np.asarray(frequencies, dtype=float))
        return cls(spec or KernelSpec(), freq.shape[0], freq.shape[1], None, freq)

    @property
    def feature_dim(self) -> int:
        return 2 * self.num_features

    def __call__(self, s) -> np.ndarray:
        return feature_map(self, s)

    def transform(self, states) -> np.ndarray:
        """Feature rows for a batch of states, shape ``(n, 2D)``."""
        S = np.atleast_2d(np.asarray(states, dtype=float))
        if S.shape[1] != self.state_dim:
            raise InvalidArgumentError(f"states have dimension {S.shape[1]}, expected {self.state_dim}")
        proj = S @ self.frequencies.T
        out = np.empty((S.shape[0], 2 * self.num_features))
        out[:, 0::2] = np.sin(proj)
        out[:, 1::2] = np.cos(proj)
        out *= 1.0 / np.sqrt(self.num_features)
        return out

    def snapshot(self) -> dict:
        """Serializable description; frequencies are re-derived from the seed."""
        if self.seed is None:
            raise InvalidArgumentError("hand-made RFMap has no seed and cannot be snapshotted")
        return {**self.spec.to_dict(), "num_features": self.num_features,
                "state_dim": self.state_dim, "seed": int(self.seed)}

    def to_json(self) -> str:
        return json.dumps(self.snapshot(), sort_keys=True)

    @classmethod
    def restore(cls, snap: dict) -> "RFMap":
        return sample_frequencies(KernelSpec.from_dict(snap), int(snap["num_features"]),
                                  int(snap["state_dim"]), int(snap["seed"]))

    @classmethod
    def from_json(cls, text: str) -> "RFMap":
        return cls.restore(json.loads(text))


def sample_frequencies(spec: KernelSpec, D: int, d: int, seed: int) -> RFMap:
    """Draw ``D`` i.i.d. frequency vectors from the spectral density of ``spec``.

    Deterministic in ``(spec, D, d, seed)``.
    """
    if int(D) != D or D < 1:
        raise InvalidArgumentError(f"number of features D must be >= 1, got {D}")
    if int(d) != d or d < 1:
        raise InvalidArgumentError(f"state dimension d must be >= 1, got {d}")
    gen = rng.stream(seed, "rf-frequencies")
    freq = _draw_frequencies(spec, int(D), int(d), gen)
    return RFMap(spec, int(D), int(d), int(seed), freq)


def feature_map(rf: RFMap, s) -> np.ndarray:
    """Unit-norm ``2D`` feature vector with interleaved sin/cos entries."""
    s = _as_state(s, rf.state_dim)
    proj = rf.frequencies @ s
    out = np.empty(2 * rf.num_features)
    out[0::2] = np.sin(proj)
    out[1::2] = np.cos(proj)
    out *= 1.0 / np.sqrt(rf.num_features)
    return out


def approx_kernel(rf: RFMap, s, s_prime) -> float:
    """Random-feature estimate ``phi(s).phi(s')`` of the standardized kernel."""
    s_prime = _as_state(s_prime, rf.state_dim, "second state")
    return float(feature_map(rf, s) @ feature_map(rf, s_prime))
