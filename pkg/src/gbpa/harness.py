"""Config-driven multi-seed experiments, bound overlays, and sweeps.

Per-run seeds come from the master seed as ``master XOR blake2b8(str(i))``.
Seeds run concurrently on a thread pool (the kernels release the GIL);
``GBPA_THREADS`` sets the pool size. Outputs are deterministic: the same
config and seeds give byte-identical ``report.json`` and ``curve.csv``.
"""

from __future__ import annotations

import copy
import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import rng
from .distributions import sup_hazard
from .engine import (
    PerturbationSmoother,
    RunTrace,
    SoftmaxSmoother,
    TsallisSmoother,
    penalty_decomposition,
    run,
    smoother_from_dict,
)
from .environments import EnvironmentSpec, generate
from .perturbation import gr_bias_bound, hazard_regret_bound
from .tsallis import exp3_regret_bound, tsallis_regret_bound

log = logging.getLogger(__name__)

THREADS_ENV = "GBPA_THREADS"
AXES = ("N", "T", "alpha", "eta", "distribution")

NO_GUARANTEE = "no guarantee; observed regret"


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        n = int(raw)
        if n < 1:
            raise ValueError(f"{THREADS_ENV} must be >= 1, got {raw!r}")
        return n
    return os.cpu_count() or 1


# --------------------------------------------------------------------------
# config
# --------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    N: int
    T: int
    smoother: dict
    environment: EnvironmentSpec
    seeds: list[int]
    output_path: str | None = None
    mc_settings: dict = field(default_factory=dict)
    master_seed: int = 0

    def __post_init__(self):
        if int(self.N) < 2 or int(self.T) < 1:
            raise ValueError(f"need N >= 2 and T >= 1, got N={self.N}, T={self.T}")
        if len(self.seeds) < 1:
            raise ValueError("need at least one seed")
        self.N, self.T = int(self.N), int(self.T)

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        missing = [k for k in ("N", "T", "smoother", "environment") if k not in d]
        if missing:
            raise ValueError(f"config is missing {missing}")
        master = int(d.get("master_seed", 0))
        seeds = d.get("seeds", 1)
        if isinstance(seeds, int):
            if seeds < 1:
                raise ValueError("seed count must be >= 1")
            seeds = rng.run_seeds(master, seeds)
        else:
            seeds = [int(s) for s in seeds]
        env = d["environment"]
        env = env if isinstance(env, EnvironmentSpec) else EnvironmentSpec.from_dict(env)
        return cls(N=d["N"], T=d["T"], smoother=dict(d["smoother"]), environment=env, seeds=seeds,
                   output_path=d.get("output_path"), mc_settings=dict(d.get("mc_settings", {})),
                   master_seed=master)

    @classmethod
    def load(cls, path: str | os.PathLike) -> ExperimentConfig:
        with open(path) as fh:
            d = json.load(fh)
        cfg = cls.from_dict(d)
        if cfg.output_path is not None and not os.path.isabs(cfg.output_path):
            cfg.output_path = str(Path(path).parent / cfg.output_path)
        return cfg

    def to_dict(self) -> dict[str, Any]:
        return {"N": self.N, "T": self.T, "smoother": self.smoother,
                "environment": self.environment.to_dict(), "seeds": list(self.seeds),
                "master_seed": self.master_seed, "output_path": self.output_path,
                "mc_settings": self.mc_settings}

    def build_smoother(self):
        return smoother_from_dict(self.smoother, self.N, self.T)

    def ledger_enabled(self, smoother) -> bool:
        flag = self.mc_settings.get("ledger", "auto")
        if flag == "auto":
            return not isinstance(smoother, PerturbationSmoother)
        return bool(flag)


# --------------------------------------------------------------------------
# bounds
# --------------------------------------------------------------------------

def theoretical_bound(smoother, N: int, T: int) -> tuple[float | None, str]:
    """The matching regret bound and a short label, or ``(None, note)``."""
    if isinstance(smoother, TsallisSmoother):
        c = smoother.config
        return tsallis_regret_bound(c.alpha, c.eta, N, T), "tsallis"
    if isinstance(smoother, SoftmaxSmoother):
        return exp3_regret_bound(smoother.eta, N, T), "exp3"
    c = smoother.config
    if math.isinf(sup_hazard(c.model)):
        return None, NO_GUARANTEE
    b = hazard_regret_bound(c.model, c.eta, N, T)
    if math.isinf(b):
        return None, NO_GUARANTEE
    return b + gr_bias_bound(N, T, c.gr_cap), "hazard+resampling"


# --------------------------------------------------------------------------
# run
# --------------------------------------------------------------------------

@dataclass
class RegretReport:
    mean_regret: float
    std_error: float
    per_seed_regrets: list[float]
    ledger_means: dict[str, float] | None
    theoretical_bound: float | None
    bound_satisfied: bool | None
    runtime: float
    bound_kind: str
    N: int
    T: int
    seeds: list[int]
    smoother: dict
    environment: dict
    curve_mean: np.ndarray = field(repr=False)
    curve_se: np.ndarray = field(repr=False)
    traces: list[RunTrace] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict[str, Any]:
        """JSON form; ``runtime`` is left out so reruns are byte-identical."""
        return {"mean_regret": self.mean_regret, "std_error": self.std_error,
                "per_seed_regrets": self.per_seed_regrets, "ledger_means": self.ledger_means,
                "theoretical_bound": self.theoretical_bound, "bound_satisfied": self.bound_satisfied,
                "bound_kind": self.bound_kind, "N": self.N, "T": self.T, "seeds": self.seeds,
                "smoother": self.smoother, "environment": self.environment}

    def curve_rows(self) -> list[tuple[int, float, float, float | None]]:
        t = np.arange(1, self.T + 1)
        if self.theoretical_bound is None:
            overlay = [None] * self.T
        else:
            overlay = (self.theoretical_bound * np.sqrt(t / self.T)).tolist()
        return list(zip(t.tolist(), self.curve_mean.tolist(), self.curve_se.tolist(), overlay))

    def write(self, out_dir: str | os.PathLike) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.json", "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(out / "curve.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["round", "mean_cum_regret", "se_cum_regret", "bound_cum"])
            for r, m, s, b in self.curve_rows():
                w.writerow([r, repr(m), repr(s), "" if b is None else repr(b)])


def _one_seed(cfg: ExperimentConfig, smoother, seed: int, ledger: bool) -> RunTrace:
    losses = generate(cfg.environment, cfg.N, cfg.T, seed)
    trace = run(losses, smoother, seed)
    if ledger:
        trace.ledger = penalty_decomposition(trace, smoother,
                                             samples=int(cfg.mc_settings.get("ledger_samples", 100_000)))
    return trace


def _mean_se(x: np.ndarray, axis=0):
    n = x.shape[axis]
    mean = x.mean(axis=axis)
    se = x.std(axis=axis, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    return mean, se


def run_experiment(config: ExperimentConfig, write: bool = True, threads: int | None = None,
                   keep_traces: bool = False) -> RegretReport:
    """One GBPA run per seed, aggregated, with the matching bound attached."""
    start = time.perf_counter()
    smoother = config.build_smoother()
    ledger = config.ledger_enabled(smoother)
    workers = threads or thread_count()
    log.info("running %d seeds, N=%d T=%d, %s, %d threads", len(config.seeds), config.N, config.T,
             smoother.kind, workers)
    if workers > 1 and len(config.seeds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(lambda s: _one_seed(config, smoother, s, ledger), config.seeds))
    else:
        traces = [_one_seed(config, smoother, s, ledger) for s in config.seeds]

    regrets = np.array([t.regret for t in traces])
    mean, se = _mean_se(regrets)
    curves = np.stack([t.cumulative_regret() for t in traces])
    curve_mean, curve_se = _mean_se(curves)
    ledger_means = None
    if ledger:
        keys = ("overestimation", "underestimation", "divergence_total")
        ledger_means = {k: float(np.mean([getattr(t.ledger, k) for t in traces])) for k in keys}
    bound, kind = theoretical_bound(smoother, config.N, config.T)
    satisfied = None if bound is None else bool(mean + 2.0 * se <= bound)
    report = RegretReport(
        mean_regret=float(mean), std_error=float(se), per_seed_regrets=regrets.tolist(),
        ledger_means=ledger_means, theoretical_bound=bound, bound_satisfied=satisfied,
        runtime=time.perf_counter() - start, bound_kind=kind, N=config.N, T=config.T,
        seeds=list(config.seeds), smoother=smoother.to_dict(), environment=config.environment.to_dict(),
        curve_mean=curve_mean, curve_se=curve_se, traces=traces if keep_traces else [])
    if write and config.output_path:
        report.write(config.output_path)
        if config.mc_settings.get("save_traces"):
            with open(Path(config.output_path) / "traces.jsonl", "w") as fh:
                for t in traces:
                    fh.write(json.dumps(t.to_record(), sort_keys=True) + "\n")
    return report


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------

def parse_axis_value(axis: str, raw: str):
    if axis in ("N", "T"):
        return int(float(raw))
    if axis in ("alpha", "eta"):
        try:
            return float(raw)
        except ValueError:
            return raw
    if axis == "distribution":
        raw = raw.strip()
        return json.loads(raw) if raw.startswith("{") else raw
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {AXES}")


def with_axis(config: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    cfg = copy.deepcopy(config)
    if axis in ("N", "T"):
        setattr(cfg, axis, int(value))
        if cfg.environment.kind == "stochastic_iid" and axis == "N":
            raise ValueError("an N sweep needs an environment that does not fix per-arm means")
    elif axis in ("alpha", "eta", "distribution"):
        cfg.smoother[axis] = value
    else:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {AXES}")
    cfg.__post_init__()
    return cfg


@dataclass
class SweepResult:
    axis: str
    values: list
    reports: list[RegretReport]
    slope: float | None = None

    def rows(self) -> list[dict[str, Any]]:
        return [{"value": v, "mean_regret": r.mean_regret, "std_error": r.std_error,
                 "theoretical_bound": r.theoretical_bound, "bound_satisfied": r.bound_satisfied}
                for v, r in zip(self.values, self.reports)]

    def to_dict(self) -> dict[str, Any]:
        return {"axis": self.axis, "rows": self.rows(), "loglog_slope": self.slope}

    def write(self, out_dir: str | os.PathLike) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep.json", "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(out / "sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([self.axis, "mean_regret", "std_error", "theoretical_bound", "bound_satisfied"])
            for row in self.rows():
                v = row["value"]
                w.writerow([json.dumps(v, sort_keys=True) if isinstance(v, dict) else v,
                            repr(row["mean_regret"]), repr(row["std_error"]),
                            "" if row["theoretical_bound"] is None else repr(row["theoretical_bound"]),
                            "" if row["bound_satisfied"] is None else row["bound_satisfied"]])


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log(y) against log(x)."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])


def _label(value) -> str:
    if isinstance(value, dict):
        return value.get("family", "custom")
    return str(value)


def sweep(config: ExperimentConfig, axis: str, values: Sequence, write: bool = True,
          threads: int | None = None) -> SweepResult:
    """One report per axis value; T sweeps also fit the log-log regret slope."""
    if axis not in AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {AXES}")
    if not values:
        raise ValueError("no sweep values")
    reports = []
    for v in values:
        cfg = with_axis(config, axis, v)
        if write and config.output_path:
            cfg.output_path = str(Path(config.output_path) / f"{axis}={_label(v)}")
        reports.append(run_experiment(cfg, write=write, threads=threads))
    result = SweepResult(axis, list(values), reports)
    if axis == "T" and len(values) >= 2:
        means = [r.mean_regret for r in reports]
        if all(m > 0 for m in means):
            result.slope = loglog_slope(values, means)
    if write and config.output_path:
        result.write(config.output_path)
    return result
