"""Experiment runner: trajectories x estimator -> aggregated CSV artifacts.

Every trajectory gets its own seed hashed from ``(master_seed, index)``, and
results are reduced in trajectory order, so outputs are byte-identical for a
fixed config regardless of the worker count.

Within a slot the estimator first predicts at ``s_t`` and only then sees
``(r_t, s_{t+1})``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import ensemble as ens_mod
from . import posterior as pst
from . import rng
from .config import ConfigError, ExperimentConfig
from .environments import Trajectory, gen_puddle_world, gen_random_walk
from .errors import NumericError
from .exact import TrajectoryBatch, batch_posterior, batch_values
from .kernels import sample_frequencies
from .metrics import (ErrorCurves, RegretReport, StabilityReport, TrajectoryRecord,
                      avg_error_curves, empirical_values, hindsight_theta,
                      online_stability_sum, prediction_error_ratio, prediction_errors,
                      regret_report, write_curves_csv)

log = logging.getLogger(__name__)

SCHEMA_LINE = "# schema=1\n"


@dataclass(eq=False)
class TrajectoryResult:
    index: int
    seed: int
    record: TrajectoryRecord
    slot_times: np.ndarray
    stability: list[StabilityReport] = field(default_factory=list)
    pred_ratio: list[float] = field(default_factory=list)
    weights: np.ndarray | None = None
    regret: list[RegretReport] = field(default_factory=list)


@dataclass
class RunSummary:
    method: str
    environment: str
    num_trajectories: int
    horizon: int
    final_pred_error: float
    final_bellman_error: float
    cutoff_slot: int
    cutoff_pred_error: float
    cutoff_bellman_error: float
    stability_holds: bool
    mean_final_weights: list[float] | None
    curves: ErrorCurves = field(repr=False)
    outputs: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k not in ("curves",)}
        return d


def trajectory_seed(master_seed: int, index: int) -> int:
    return rng.derive_seed(master_seed, "trajectory", index)


def make_trajectory(cfg: ExperimentConfig, index: int, horizon: int | None = None) -> tuple[int, Trajectory]:
    seed = trajectory_seed(cfg.master_seed, index)
    T = cfg.horizon if horizon is None else horizon
    if cfg.environment == "random_walk":
        return seed, gen_random_walk(replace(cfg.random_walk, seed=seed), T)
    return seed, gen_puddle_world(replace(cfg.puddle_world, seed=seed), T)


def _finish_record(traj: Trajectory, gamma, means, variances, bellman) -> TrajectoryRecord:
    errors = prediction_errors(means, traj.rewards, gamma, traj.episode_ends)
    return TrajectoryRecord(means, variances, traj.rewards, bellman, errors)


def _expert_diagnostics(Phi, hs, rewards, before, after, residual_max, trace_drop, noise_var,
                        prior_var, v_bar, gamma):
    stab = online_stability_sum(after, before, residual_max, noise_var, trace_drop)
    theta_star = hindsight_theta(hs, rewards, noise_var, prior_var)
    e_star = Phi[: len(rewards)] @ theta_star - v_bar
    ratio = prediction_error_ratio(before - v_bar, e_star, gamma)
    return stab, ratio


def run_os_gptd(cfg: ExperimentConfig, seed: int, traj: Trajectory, horizons: Sequence[int] = (),
                rkhs: bool = True) -> TrajectoryResult:
    spec = cfg.single_kernel
    rf = sample_frequencies(spec, cfg.num_features, traj.state_dim, ens_mod.expert_seed(seed, 0))
    Phi = rf.transform(traj.states)
    disc = traj.discounts(cfg.gamma)
    T = traj.horizon
    state = pst.init(spec.magnitude, cfg.num_features, cfg.noise_var)
    trace0 = float(np.trace(state.covariance))
    means = np.empty(T)
    variances = np.empty(T)
    bellman = np.empty(T)
    after = np.empty(T)
    times = np.empty(T)
    hs = np.empty((T, rf.feature_dim))
    keep_thetas = bool(horizons)
    thetas = np.empty((T, rf.feature_dim)) if keep_thetas else None
    resid_max = 0.0
    for t in range(T):
        mean, var = pst.predict(state, Phi[t])
        v_next = pst.predict_mean(state, Phi[t + 1])
        r = traj.rewards[t]
        resid = r - (mean - disc[t] * v_next)
        means[t], variances[t], bellman[t] = mean, var, resid * resid
        h = pst.transition_vector(Phi[t], Phi[t + 1], disc[t])
        hs[t] = h
        if keep_thetas:
            thetas[t] = state.mean
        resid_max = max(resid_max, abs(r - float(h @ state.mean)))
        t0 = time.perf_counter()
        state = pst.update(state, pst.TransitionFeatures(h, r))
        times[t] = time.perf_counter() - t0
        after[t] = pst.predict_mean(state, Phi[t])
    record = _finish_record(traj, cfg.gamma, means, variances, bellman)
    v_bar = empirical_values(traj.rewards, cfg.gamma, traj.episode_ends)
    stab, ratio = _expert_diagnostics(Phi, hs, traj.rewards, means, after, resid_max,
                                      trace0 - float(np.trace(state.covariance)), cfg.noise_var,
                                      spec.magnitude, v_bar, cfg.gamma)
    reports = []
    for H_T in horizons:
        H_T = min(H_T, T)
        rk = None
        if rkhs:
            batch = TrajectoryBatch(traj.states[: H_T + 1], traj.rewards[:H_T], disc[:H_T])
            v_star = batch_values(spec, batch, cfg.noise_var, max_t=cfg.max_oracle_t)
            rk = (traj.rewards[:H_T] - (v_star[:-1] - disc[:H_T] * v_star[1:])) ** 2
        reports.append(regret_report(hs[:H_T], traj.rewards[:H_T], thetas[:H_T], cfg.noise_var,
                                     spec.magnitude, cfg.num_features, cfg.gamma, rk))
    return TrajectoryResult(-1, seed, record, times, [stab], [ratio], None, reports)


def run_os_egptd(cfg: ExperimentConfig, seed: int, traj: Trajectory) -> TrajectoryResult:
    ens = ens_mod.init_ensemble(cfg.dictionary, cfg.num_features, traj.state_dim, cfg.noise_var, seed)
    M = ens.size
    Phis = [e.rf.transform(traj.states) for e in ens.experts]
    disc = traj.discounts(cfg.gamma)
    T = traj.horizon
    trace0 = [float(np.trace(e.posterior.covariance)) for e in ens.experts]
    means = np.empty(T)
    variances = np.empty(T)
    bellman = np.empty(T)
    times = np.empty(T)
    weights = np.empty((T + 1, M))
    weights[0] = ens.weights
    ex_before = np.empty((M, T))
    ex_after = np.empty((M, T))
    ex_hs = [np.empty((T, Phis[m].shape[1])) for m in range(M)]
    resid_max = np.zeros(M)
    for t in range(T):
        per = [pst.predict(e.posterior, Phis[m][t]) for m, e in enumerate(ens.experts)]
        mus, vs = zip(*per)
        mean, var = ens_mod.mixture_moments(ens.weights, mus, vs)
        nxt = np.array([pst.predict_mean(e.posterior, Phis[m][t + 1]) for m, e in enumerate(ens.experts)])
        v_next = float(ens.weights @ nxt)
        r = traj.rewards[t]
        resid = r - (mean - disc[t] * v_next)
        means[t], variances[t], bellman[t] = mean, var, resid * resid
        hs = [pst.transition_vector(Phis[m][t], Phis[m][t + 1], disc[t]) for m in range(M)]
        for m, e in enumerate(ens.experts):
            ex_hs[m][t] = hs[m]
            ex_before[m, t] = mus[m]
            resid_max[m] = max(resid_max[m], abs(r - float(hs[m] @ e.posterior.mean)))
        t0 = time.perf_counter()
        ens = ens_mod.step_with_vectors(ens, hs, r)
        times[t] = time.perf_counter() - t0
        weights[t + 1] = ens.weights
        for m, e in enumerate(ens.experts):
            ex_after[m, t] = pst.predict_mean(e.posterior, Phis[m][t])
    record = _finish_record(traj, cfg.gamma, means, variances, bellman)
    v_bar = empirical_values(traj.rewards, cfg.gamma, traj.episode_ends)
    stabs, ratios = [], []
    for m, e in enumerate(ens.experts):
        s, q = _expert_diagnostics(Phis[m], ex_hs[m], traj.rewards, ex_before[m], ex_after[m],
                                   resid_max[m], trace0[m] - float(np.trace(e.posterior.covariance)),
                                   cfg.noise_var, e.kernel.magnitude, v_bar, cfg.gamma)
        stabs.append(s)
        ratios.append(q)
    return TrajectoryResult(-1, seed, record, times, stabs, ratios, weights)


def run_batch_oracle(cfg: ExperimentConfig, seed: int, traj: Trajectory) -> TrajectoryResult:
    spec = cfg.single_kernel
    T = traj.horizon
    if T > cfg.max_oracle_t + 1:
        raise ConfigError(f"batch oracle is capped at horizon {cfg.max_oracle_t + 1}, got {T}")
    disc = traj.discounts(cfg.gamma)
    means = np.empty(T)
    variances = np.empty(T)
    bellman = np.empty(T)
    times = np.empty(T)
    for t in range(T):
        batch = TrajectoryBatch(traj.states[: t + 1], traj.rewards[:t], disc[:t]) if t else None
        t0 = time.perf_counter()
        mu, var = batch_posterior(spec, batch, traj.states[t: t + 2], cfg.noise_var, cfg.max_oracle_t)
        times[t] = time.perf_counter() - t0
        r = traj.rewards[t]
        resid = r - (mu[0] - disc[t] * mu[1])
        means[t], variances[t], bellman[t] = mu[0], var[0], resid * resid
    record = _finish_record(traj, cfg.gamma, means, variances, bellman)
    return TrajectoryResult(-1, seed, record, times)


_RUNNERS = {"os_gptd": run_os_gptd, "os_egptd": run_os_egptd, "batch_oracle": run_batch_oracle}


def run_trajectory(cfg: ExperimentConfig, index: int, method: str | None = None,
                   horizon: int | None = None) -> TrajectoryResult:
    method = method or cfg.estimator
    seed, traj = make_trajectory(cfg, index, horizon)
    try:
        res = _RUNNERS[method](cfg, seed, traj)
    except NumericError as exc:
        exc.trajectory = index
        raise
    res.index = index
    return res


def _regret_worker(args) -> TrajectoryResult:
    cfg, index, horizons = args
    seed, traj = make_trajectory(cfg, index, max(horizons))
    try:
        res = run_os_gptd(cfg, seed, traj, horizons)
    except NumericError as exc:
        exc.trajectory = index
        raise
    res.index = index
    return res


def _run_worker(args) -> TrajectoryResult:
    return run_trajectory(*args)


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def run_trajectories(cfg: ExperimentConfig, method: str | None = None, horizon: int | None = None,
                     count: int | None = None) -> list[TrajectoryResult]:
    n = cfg.num_trajectories if count is None else count
    jobs = [(cfg, i, method, horizon) for i in range(n)]
    return _map(_run_worker, jobs, cfg.workers)


# -- output writers ------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_rows(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(SCHEMA_LINE)
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def write_stability_csv(path: Path, results: Sequence[TrajectoryResult]) -> None:
    rows = []
    for res in results:
        for m, (s, q) in enumerate(zip(res.stability, res.pred_ratio)):
            rows.append((res.index, m + 1, s.horizon, s.total, s.cap_total, s.average, s.cap,
                         s.holds, q))
    _write_rows(path, ["trajectory", "expert", "T", "stability_sum", "cap_sum", "stability_avg",
                       "cap_avg", "holds", "pred_error_ratio"], rows)


def mean_weights(results: Sequence[TrajectoryResult]) -> np.ndarray:
    L = max(r.weights.shape[0] for r in results)
    M = results[0].weights.shape[1]
    acc = np.zeros((L, M))
    cnt = np.zeros((L, 1))
    for r in results:
        n = r.weights.shape[0]
        acc[:n] += r.weights
        cnt[:n] += 1
    return acc / cnt


def write_weights_csv(path: Path, results: Sequence[TrajectoryResult]) -> None:
    W = mean_weights(results)
    _write_rows(path, ["slot"] + [f"w_{m + 1}" for m in range(W.shape[1])],
                ((t, *row) for t, row in enumerate(W)))


# -- entry points ----------------------------------------------------------------------

def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> RunSummary:
    """Run every trajectory, aggregate, and write curves/stability/weights CSVs."""
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    log.info("running %d trajectories of %s on %s", cfg.num_trajectories, cfg.estimator, cfg.environment)
    results = run_trajectories(cfg)
    curves = avg_error_curves([r.record for r in results], cfg.gamma)
    outputs = {"curves": out / "curves.csv"}
    write_curves_csv(outputs["curves"], curves)
    if results[0].stability:
        outputs["stability"] = out / "stability.csv"
        write_stability_csv(outputs["stability"], results)
    final_w = None
    if results[0].weights is not None:
        outputs["weights"] = out / "weights.csv"
        write_weights_csv(outputs["weights"], results)
        final_w = [float(x) for x in np.mean([r.weights[-1] for r in results], axis=0)]
    T = len(curves.slot)
    cut = max(1, min(curves.cutoff, T))
    summary = RunSummary(
        method=cfg.estimator, environment=cfg.environment, num_trajectories=len(results), horizon=T,
        final_pred_error=float(curves.avg_pred_error[-1]),
        final_bellman_error=float(curves.avg_bellman_error[-1]),
        cutoff_slot=cut, cutoff_pred_error=float(curves.avg_pred_error[cut - 1]),
        cutoff_bellman_error=float(curves.avg_bellman_error[cut - 1]),
        stability_holds=all(s.holds for r in results for s in r.stability),
        mean_final_weights=final_w, curves=curves,
        outputs={k: str(v) for k, v in outputs.items()})
    summary.outputs["summary"] = str(out / "summary.json")
    (out / "summary.json").write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n")
    summary.results = results
    return summary


@dataclass(frozen=True)
class RegretRow:
    horizon: int
    regret: float
    regret_rf: float
    bound: float
    max_residual: float
    theta_star_norm: float
    regret_over_log_t: float
    num_trajectories: int
    worst_margin: float

    HEADER = ("T", "R", "R1", "bound", "Be", "theta_star_norm", "R_over_logT",
              "num_trajectories", "max_R1_minus_bound")

    def as_tuple(self):
        return (self.horizon, self.regret, self.regret_rf, self.bound, self.max_residual,
                self.theta_star_norm, self.regret_over_log_t, self.num_trajectories, self.worst_margin)


def run_regret_sweep(cfg: ExperimentConfig, horizons: Sequence[int],
                     out_dir: str | Path | None = None) -> list[RegretRow]:
    """Single-kernel regret at each horizon, averaged over trajectories.

    Each trajectory is generated once at the longest horizon; shorter horizons
    use its prefix, so rows share one seed family.
    """
    horizons = [int(h) for h in horizons]
    if not horizons or any(h < 1 for h in horizons) or horizons != sorted(horizons):
        raise ConfigError("horizons must be positive and ascending")
    if max(horizons) > cfg.max_oracle_t:
        raise ConfigError(f"regret comparator needs the exact oracle; horizons are capped at {cfg.max_oracle_t}")
    jobs = [(cfg, i, horizons) for i in range(cfg.num_trajectories)]
    results = _map(_regret_worker, jobs, cfg.workers)
    rows = []
    for k, T in enumerate(horizons):
        reps = [r.regret[k] for r in results]
        R = float(np.mean([x.regret for x in reps]))
        rows.append(RegretRow(
            T, R, float(np.mean([x.regret_rf for x in reps])),
            float(np.mean([x.lemma1_bound for x in reps])),
            float(np.mean([x.max_residual for x in reps])),
            float(np.mean([x.theta_star_norm for x in reps])),
            R / math.log(T) if T > 1 else float("nan"), len(reps),
            float(max(x.regret_rf - x.lemma1_bound for x in reps))))
    if out_dir is not None or cfg.output_dir:
        out = Path(out_dir or cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_rows(out / "regret.csv", RegretRow.HEADER, (r.as_tuple() for r in rows))
    return rows


@dataclass(frozen=True)
class TimingRow:
    method: str
    num_trajectories: int
    horizon: int
    median_slot_seconds: float
    early_slot: int
    early_median_seconds: float
    late_slot: int
    late_median_seconds: float

    HEADER = ("method", "num_trajectories", "horizon", "median_slot_seconds", "early_slot",
              "early_median_seconds", "late_slot", "late_median_seconds", "late_over_early")

    @property
    def growth(self) -> float:
        return self.late_median_seconds / self.early_median_seconds

    def as_tuple(self):
        return (self.method, self.num_trajectories, self.horizon, self.median_slot_seconds,
                self.early_slot, self.early_median_seconds, self.late_slot,
                self.late_median_seconds, self.growth)


def _window_median(times: np.ndarray, center: int, half: int) -> float:
    lo, hi = max(0, center - half), min(len(times), center + half)
    return float(np.median(times[lo:hi]))


def runtime_bench(cfg: ExperimentConfig, methods: Sequence[str],
                  out_dir: str | Path | None = None) -> list[TimingRow]:
    """Per-slot correction time of each method, median over trajectories.

    Early and late windows sit at 10% and 100% of the horizon so that growth
    with ``t`` is visible; the batch oracle runs at ``bench_oracle_horizon``.
    """
    if not methods:
        raise ConfigError("runtime bench needs at least one method")
    rows = []
    for method in methods:
        if method not in _RUNNERS:
            raise ConfigError(f"unknown method {method!r}")
        T = min(cfg.horizon, cfg.bench_oracle_horizon) if method == "batch_oracle" else cfg.horizon
        res = [run_trajectory(cfg, i, method, T) for i in range(cfg.bench_trajectories)]
        half = max(1, T // 20)
        early, late = max(half, T // 10), T - half
        rows.append(TimingRow(
            method, len(res), T,
            float(np.median([np.median(r.slot_times) for r in res])),
            early, float(np.median([_window_median(r.slot_times, early, half) for r in res])),
            late, float(np.median([_window_median(r.slot_times, late, half) for r in res]))))
    if out_dir is not None or cfg.output_dir:
        out = Path(out_dir or cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_rows(out / "timing.csv", TimingRow.HEADER, (r.as_tuple() for r in rows))
    return rows
