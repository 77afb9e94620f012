"""Benchmark trajectory generators: a ring random walk and Puddle World.

Both generators are pure functions of ``(config, horizon)``; every random
quantity comes from a named stream of the config seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import InvalidArgumentError


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States ``s_1..s_{T+1}`` and rewards ``r_1..r_T``.

    ``episode_ends[t]`` is true when the transition out of slot ``t`` ended an
    episode, so ``states[t + 1]`` carries no value continuation (the learner
    uses a zero discount for that transition).  ``terminated`` is true when the
    last transition reached a terminal state.
    """

    states: np.ndarray
    rewards: np.ndarray
    terminated: bool = False
    seed: int | None = None
    episode_ends: np.ndarray | None = None

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        rewards = np.asarray(self.rewards, dtype=float).reshape(-1)
        if states.shape[0] != rewards.shape[0] + 1:
            raise InvalidArgumentError("a trajectory needs exactly one more state than rewards")
        if not (np.all(np.isfinite(states)) and np.all(np.isfinite(rewards))):
            raise InvalidArgumentError("trajectory contains non-finite entries")
        ends = (np.zeros(rewards.shape[0], dtype=bool) if self.episode_ends is None
                else np.asarray(self.episode_ends, dtype=bool).reshape(-1))
        if ends.shape != rewards.shape:
            raise InvalidArgumentError("episode_ends must have one flag per reward")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "episode_ends", ends)

    @property
    def horizon(self) -> int:
        return self.rewards.shape[0]

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]

    def discounts(self, gamma: float) -> np.ndarray:
        """Per-transition discount: ``gamma``, or 0 across episode boundaries."""
        return np.where(self.episode_ends, 0.0, float(gamma))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("# schema=1\n")
            w = csv.writer(fh)
            w.writerow(["slot"] + [f"s_{i + 1}" for i in range(self.state_dim)] + ["reward", "terminated"])
            for t, s in enumerate(self.states):
                if t < self.horizon:
                    tail = [repr(float(self.rewards[t])), int(self.episode_ends[t])]
                else:
                    tail = ["", ""]
                w.writerow([t + 1] + [repr(float(x)) for x in s] + tail)

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
        body = rows[1:]
        states = np.array([[float(x) for x in r[1:-2]] for r in body])
        rewards = np.array([float(r[-2]) for r in body if r[-2] != ""])
        ends = np.array([r[-1] == "1" for r in body if r[-1] != ""], dtype=bool)
        return cls(states, rewards, bool(ends[-1]) if ends.size else False, None, ends)


# -- random walk ---------------------------------------------------------------

@dataclass(frozen=True)
class RandomWalkConfig:
    """Deterministic clockwise walk on a ring of ``num_states`` embedded states.

    Embeddings are standard normal and redrawn per trajectory seed; rewards
    are i.i.d. uniform per slot.  ``start`` fixes the initial ring position
    (``None`` draws it uniformly).
    """

    num_states: int = 50
    state_dim: int = 10
    reward_low: float = -3.0
    reward_high: float = 3.0
    discount: float = 0.75
    seed: int = 0
    start: int | None = None

    def __post_init__(self):
        if self.num_states < 2:
            raise InvalidArgumentError("random walk needs at least 2 states")
        if self.state_dim < 1:
            raise InvalidArgumentError("state_dim must be >= 1")
        if not self.reward_low < self.reward_high:
            raise InvalidArgumentError("reward_low must be below reward_high")
        if not 0.0 <= self.discount < 1.0:
            raise InvalidArgumentError("discount must lie in [0, 1)")
        if self.start is not None and not 0 <= self.start < self.num_states:
            raise InvalidArgumentError("start position outside the ring")


def random_walk_positions(cfg: RandomWalkConfig, horizon: int) -> np.ndarray:
    """Ring indices visited over ``horizon`` transitions (``horizon + 1`` entries)."""
    start = cfg.start
    if start is None:
        start = int(rng.stream(cfg.seed, "rw-start").integers(cfg.num_states))
    return (start + np.arange(horizon + 1)) % cfg.num_states


def gen_random_walk(cfg: RandomWalkConfig, horizon: int) -> Trajectory:
    if int(horizon) != horizon or horizon < 1:
        raise InvalidArgumentError(f"horizon must be >= 1, got {horizon}")
    embeddings = rng.stream(cfg.seed, "rw-embeddings").standard_normal((cfg.num_states, cfg.state_dim))
    positions = random_walk_positions(cfg, int(horizon))
    rewards = rng.stream(cfg.seed, "rw-rewards").uniform(cfg.reward_low, cfg.reward_high, int(horizon))
    return Trajectory(embeddings[positions], rewards, False, cfg.seed)


# -- puddle world ----------------------------------------------------------------

@dataclass(frozen=True)
class Capsule:
    """Points within ``radius`` of the segment ``a``-``b``."""

    a: tuple[float, float]
    b: tuple[float, float]
    radius: float

    def distance(self, p: np.ndarray) -> float:
        a = np.asarray(self.a, dtype=float)
        ab = np.asarray(self.b, dtype=float) - a
        denom = float(ab @ ab)
        u = 0.0 if denom == 0.0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
        return float(np.linalg.norm(p - (a + u * ab)))


DEFAULT_PUDDLES = (
    Capsule((0.10, 0.75), (0.45, 0.75), 0.10),
    Capsule((0.45, 0.40), (0.45, 0.80), 0.10),
)


@dataclass(frozen=True)
class PuddleWorldConfig:
    """Unit-square Puddle World under the fixed go-north-or-east policy.

    Step size, motion noise, puddle layout and boundary margin are not fixed
    by the benchmark description; the defaults are the classical layout.
    With ``continuing`` set, reaching the goal restarts the agent from a fresh
    start state and the trajectory runs on to the horizon; otherwise the
    trajectory stops at the goal.
    """

    start_low: tuple[float, float] = (0.0, 0.0)
    start_high: tuple[float, float] = (0.2, 0.2)
    goal_center: tuple[float, float] = (1.0, 1.0)
    goal_radius: float = 0.1
    step_size: float = 0.05
    motion_noise_std: float = 0.01
    puddles: tuple[Capsule, ...] = field(default=DEFAULT_PUDDLES)
    boundary_margin: float = 0.05
    discount: float = 0.7
    seed: int = 0
    continuing: bool = True

    def __post_init__(self):
        if self.goal_radius <= 0:
            raise InvalidArgumentError("goal_radius must be positive")
        lo, hi = np.asarray(self.start_low), np.asarray(self.start_high)
        if lo.shape != (2,) or hi.shape != (2,) or np.any(lo > hi) or np.any(lo < 0) or np.any(hi > 1):
            raise InvalidArgumentError("start region must be a box inside the unit square")
        if self.step_size <= 0 or self.motion_noise_std < 0 or self.boundary_margin < 0:
            raise InvalidArgumentError("step_size must be positive; noise and margin non-negative")
        if any(p.radius <= 0 for p in self.puddles):
            raise InvalidArgumentError("puddle radii must be positive")
        if not 0.0 <= self.discount < 1.0:
            raise InvalidArgumentError("discount must lie in [0, 1)")


def penetration(cfg: PuddleWorldConfig, s) -> float:
    """Largest relative penetration into a puddle or the boundary band, in [0, 1]."""
    p = np.asarray(s, dtype=float)
    depth = 0.0
    for puddle in cfg.puddles:
        depth = max(depth, (puddle.radius - puddle.distance(p)) / puddle.radius)
    if cfg.boundary_margin > 0:
        wall = min(p[0], 1.0 - p[0], p[1], 1.0 - p[1])
        depth = max(depth, (cfg.boundary_margin - wall) / cfg.boundary_margin)
    return min(1.0, max(0.0, depth))


def reward_shape(cfg: PuddleWorldConfig, s) -> float:
    """-1 off puddles, falling linearly to -2 at full penetration."""
    return -1.0 - penetration(cfg, s)


def in_goal(cfg: PuddleWorldConfig, s) -> bool:
    return bool(np.linalg.norm(np.asarray(s, dtype=float) - np.asarray(cfg.goal_center)) <= cfg.goal_radius)


def gen_puddle_world(cfg: PuddleWorldConfig, horizon: int) -> Trajectory:
    if int(horizon) != horizon or horizon < 1:
        raise InvalidArgumentError(f"horizon must be >= 1, got {horizon}")
    gen = rng.stream(cfg.seed, "puddle-world")
    lo, hi = np.asarray(cfg.start_low, dtype=float), np.asarray(cfg.start_high, dtype=float)
    moves = np.array([[0.0, 1.0], [1.0, 0.0]]) * cfg.step_size  # north, east

    pos = gen.uniform(lo, hi)
    states, rewards, ends = [pos], [], []
    terminated = False
    for _ in range(int(horizon)):
        nxt = pos + moves[gen.integers(2)] + cfg.motion_noise_std * gen.standard_normal(2)
        nxt = np.clip(nxt, 0.0, 1.0)
        rewards.append(reward_shape(cfg, nxt))
        done = in_goal(cfg, nxt)
        ends.append(done)
        if done and cfg.continuing:
            nxt = gen.uniform(lo, hi)
        states.append(nxt)
        pos = nxt
        if done and not cfg.continuing:
            terminated = True
            break
    return Trajectory(np.array(states), np.array(rewards), terminated, cfg.seed, np.array(ends))
