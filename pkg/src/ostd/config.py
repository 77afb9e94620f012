"""Experiment configuration: an INI file with one section per component.

Example::

    [experiment]
    estimator = os_egptd
    num_trajectories = 100
    horizon = 1000
    master_seed = 0

    [model]
    num_features = 100
    noise_var = 0.01
    lengthscales = 0.1, 1, 10

    [environment]
    kind = random_walk

    [random_walk]
    discount = 0.75

Any key can be overridden as ``section.key=value``.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .environments import Capsule, PuddleWorldConfig, RandomWalkConfig
from .errors import InvalidArgumentError
from .kernels import KernelFamily, KernelSpec

ESTIMATORS = ("os_gptd", "os_egptd", "batch_oracle")
ENVIRONMENTS = ("random_walk", "puddle_world")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    environment: str = "random_walk"
    random_walk: RandomWalkConfig = field(default_factory=RandomWalkConfig)
    puddle_world: PuddleWorldConfig = field(default_factory=PuddleWorldConfig)
    estimator: str = "os_egptd"
    kernel_family: str = "gaussian"
    lengthscales: tuple[float, ...] = (0.1, 1.0, 10.0)
    single_lengthscale: float | None = None
    magnitude: float = 1.0
    num_features: int = 100
    noise_var: float = 0.01
    num_trajectories: int = 100
    horizon: int = 1000
    master_seed: int = 0
    output_dir: str = "results"
    workers: int = 1
    max_oracle_t: int = 2000
    bench_trajectories: int = 3
    bench_oracle_horizon: int = 400

    def __post_init__(self):
        if self.environment not in ENVIRONMENTS:
            raise ConfigError(f"environment must be one of {ENVIRONMENTS}, got {self.environment!r}")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if not self.lengthscales:
            raise ConfigError("kernel dictionary (model.lengthscales) is empty")
        for name in ("num_features", "num_trajectories", "horizon", "workers",
                     "bench_trajectories", "bench_oracle_horizon", "max_oracle_t"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.noise_var <= 0:
            raise ConfigError("noise_var must be positive")
        try:
            self.dictionary
            self.single_kernel
        except InvalidArgumentError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def env_config(self):
        return self.random_walk if self.environment == "random_walk" else self.puddle_world

    @property
    def gamma(self) -> float:
        return self.env_config.discount

    @property
    def state_dim(self) -> int:
        return self.random_walk.state_dim if self.environment == "random_walk" else 2

    @property
    def dictionary(self) -> tuple[KernelSpec, ...]:
        return tuple(KernelSpec(self.kernel_family, l, self.magnitude) for l in self.lengthscales)

    @property
    def single_kernel(self) -> KernelSpec:
        """Kernel of the single-GP estimators: ``single_lengthscale`` or the first entry."""
        l = self.lengthscales[0] if self.single_lengthscale is None else self.single_lengthscale
        return KernelSpec(self.kernel_family, l, self.magnitude)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_EXPERIMENT_KEYS = {
    "estimator": str, "num_trajectories": int, "horizon": int, "master_seed": int,
    "output_dir": str, "workers": int, "bench_trajectories": int, "bench_oracle_horizon": int,
}
_MODEL_KEYS = {
    "num_features": int, "noise_var": float, "kernel_family": str, "lengthscales": "floats",
    "single_lengthscale": float, "magnitude": float, "max_oracle_t": int,
}
_RW_KEYS = {"num_states": int, "state_dim": int, "reward_low": float, "reward_high": float,
            "discount": float, "start": int}
_PW_KEYS = {"start_low": "floats", "start_high": "floats", "goal_center": "floats",
            "goal_radius": float, "step_size": float, "motion_noise_std": float,
            "boundary_margin": float, "discount": float, "continuing": bool, "puddles": "capsules"}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


def _parse_capsules(text: str) -> tuple[Capsule, ...]:
    # "ax ay bx by r; ax ay bx by r"
    caps = []
    for chunk in text.split(";"):
        vals = [float(x) for x in chunk.replace(",", " ").split()]
        if not vals:
            continue
        if len(vals) != 5:
            raise ValueError("each puddle needs 'ax ay bx by radius'")
        caps.append(Capsule((vals[0], vals[1]), (vals[2], vals[3]), vals[4]))
    return tuple(caps)


def _convert(kind, raw: str):
    if kind == "floats":
        return _parse_floats(raw)
    if kind == "capsules":
        return _parse_capsules(raw)
    if kind is bool:
        return _parse_bool(raw)
    if kind is int:
        return int(raw)
    if kind is str:
        return raw.strip()
    return kind(raw)


def _section(parser, name, schema, where) -> dict:
    out = {}
    if not parser.has_section(name):
        return out
    for key, raw in parser.items(name):
        if key not in schema:
            raise ConfigError(f"{where}: unknown key [{name}] {key}")
        if name == "model" and key == "single_lengthscale" and raw.strip().lower() in ("", "none"):
            out[key] = None
            continue
        if key == "start" and raw.strip().lower() in ("", "none"):
            out[key] = None
            continue
        try:
            out[key] = _convert(schema[key], raw)
        except ValueError as exc:
            raise ConfigError(f"{where}: bad value for [{name}] {key} = {raw!r}: {exc}") from None
    return out


def parse_config(text: str, overrides: Iterable[str] = (), where: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=where)
    except configparser.Error as exc:
        raise ConfigError(f"{where}: {exc}") from None
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        lhs, value = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key.strip(), value)

    known = {"experiment", "model", "environment", "random_walk", "puddle_world"}
    for sec in parser.sections():
        if sec not in known:
            raise ConfigError(f"{where}: unknown section [{sec}]")

    exp = _section(parser, "experiment", _EXPERIMENT_KEYS, where)
    model = _section(parser, "model", _MODEL_KEYS, where)
    env = _section(parser, "environment", {"kind": str}, where)
    rw = _section(parser, "random_walk", _RW_KEYS, where)
    pw = _section(parser, "puddle_world", _PW_KEYS, where)
    if "kernel_family" in model:
        try:
            model["kernel_family"] = KernelFamily.parse(model["kernel_family"]).value
        except InvalidArgumentError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    try:
        rw_cfg = RandomWalkConfig(**rw)
        pw_cfg = PuddleWorldConfig(**pw)
        return ExperimentConfig(environment=env.get("kind", "random_walk"), random_walk=rw_cfg,
                                puddle_world=pw_cfg, **exp, **model)
    except InvalidArgumentError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_config(path, overrides: Iterable[str] = ()) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    return parse_config(text, overrides, where=str(p))


def dump_config(cfg: ExperimentConfig) -> str:
    """Render a config back to INI text (round-trips through :func:`parse_config`)."""
    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, tuple) and v and isinstance(v[0], Capsule):
            return "; ".join(f"{c.a[0]} {c.a[1]} {c.b[0]} {c.b[1]} {c.radius}" for c in v)
        if isinstance(v, tuple):
            return ", ".join(repr(float(x)) for x in v)
        return "none" if v is None else str(v)

    lines = ["[experiment]"]
    lines += [f"{k} = {fmt(getattr(cfg, k))}" for k in _EXPERIMENT_KEYS]
    lines += ["", "[model]"]
    lines += [f"{k} = {fmt(getattr(cfg, k))}" for k in _MODEL_KEYS]
    lines += ["", "[environment]", f"kind = {cfg.environment}", "", "[random_walk]"]
    lines += [f"{k} = {fmt(getattr(cfg.random_walk, k))}" for k in _RW_KEYS]
    lines += ["", "[puddle_world]"]
    lines += [f"{k} = {fmt(getattr(cfg.puddle_world, k))}" for k in _PW_KEYS]
    return "\n".join(lines) + "\n"
