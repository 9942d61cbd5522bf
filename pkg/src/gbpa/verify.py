"""Self-check battery: every numeric invariant the library relies on.

Each check returns a dict ``{"name", "passed", "detail"}``; a check that
raises is recorded as failed with the error text. ``overrides`` lets tests
inject faults, e.g. ``{"tsallis_tol": 1e-2}`` loosens the dual solve.
"""

from __future__ import annotations

import itertools
import math
import time
from typing import Any, Callable

import numpy as np
from scipy import stats

from . import kernels, rng
from .distributions import (
    FAMILIES,
    PerturbationModel,
    condition_above,
    mirror,
    model,
    numeric_sup_hazard,
)
from .engine import (
    PerturbationSmoother,
    SoftmaxSmoother,
    TsallisSmoother,
    check_differential_consistency,
    penalty_ledger,
    random_probes,
)
from .environments import EnvironmentSpec
from .harness import NO_GUARANTEE, ExperimentConfig, run_experiment
from .perturbation import (
    PerturbationConfig,
    ftpl_gradient_mc,
    truncated_geometric_mean,
    truncated_geometric_pmf,
    two_arm_gradient_quadrature,
)
from .tables import tabulate, table_passed
from .tsallis import TsallisConfig, softmax_distribution, tsallis_distribution, tsallis_potential

FD_STEP = 1e-5


def family_zoo() -> list[PerturbationModel]:
    """One representative per family and adapter combination."""
    return [
        model("gumbel", loc=0.0), model("gumbel", loc=1.0), model("frechet", alpha=2.0),
        model("weibull", k=0.5), model("weibull_modified", k=0.5), model("weibull_modified", k=1.0),
        model("pareto", alpha=2.0, x_m=1.0), model("pareto_modified", alpha=3.0),
        model("gamma", alpha=2.0, beta=1.0), model("gamma", alpha=1.0, beta=2.0),
        model("exponential", rate=1.0), model("gaussian", mu=0.0, sigma=1.0),
        mirror(model("exponential", rate=1.0)), mirror(model("weibull_modified", k=0.5)),
        condition_above(model("exponential", rate=1.0)), condition_above(model("weibull", k=0.5)),
        condition_above(model("pareto_modified", alpha=2.0)),
    ]


def support_grid(m: PerturbationModel, n: int = 400) -> np.ndarray:
    lo, hi = m.support()
    if math.isinf(lo):
        return np.linspace(-8.0, 20.0, n)
    return lo + np.geomspace(1e-3, 50.0, n)


# --------------------------------------------------------------------------
# individual checks
# --------------------------------------------------------------------------

def check_tsallis_gradient(tol: float = 1e-13, probes: int = 100, seed: int = 11) -> dict:
    """Central-difference gradient of the potential equals the distribution."""
    gen = rng.generator(seed, rng.ANALYSIS)
    worst = 0.0
    for _ in range(probes):
        N = int(gen.integers(2, 7))
        cfg = TsallisConfig(float(gen.uniform(0.05, 0.95)), float(gen.uniform(0.2, 5.0)), newton_tol=tol)
        G = -10.0 * gen.random(N)
        fd = np.empty(N)
        for i in range(N):
            e = np.zeros(N)
            e[i] = FD_STEP
            fd[i] = (tsallis_potential(G + e, cfg) - tsallis_potential(G - e, cfg)) / (2 * FD_STEP)
        worst = max(worst, float(np.abs(fd - tsallis_distribution(G, cfg)).max()))
    return {"passed": worst <= 1e-6, "detail": {"max_abs_error": worst, "probes": probes, "tolerance": 1e-6}}


def simplex_grid(N: int, step: float) -> np.ndarray:
    """Interior points of the simplex on a lattice of spacing ``step`` (N = 2 or 3)."""
    if N not in (2, 3):
        raise ValueError("grid oracle supports N = 2 or 3")
    k = int(round(1.0 / step))
    if N == 2:
        q = np.arange(1, k) * step
        return np.column_stack([q, 1.0 - q])
    pts = [(a, b, k - a - b) for a in range(1, k) for b in range(1, k - a)]
    return np.asarray(pts, dtype=float) * step


def grid_maximizer(G, cfg: TsallisConfig, step: float) -> tuple[np.ndarray, float]:
    P = simplex_grid(len(G), step)
    obj = P @ np.asarray(G) + cfg.eta * (np.sum(P ** cfg.alpha, axis=1) - 1.0) / (1.0 - cfg.alpha)
    j = int(np.argmax(obj))
    return P[j], float(obj[j])


def check_tsallis_grid(tol: float = 1e-13, seed: int = 12) -> dict:
    gen = rng.generator(seed, rng.ANALYSIS)
    cases = [(np.array([-1.0, 0.0]), TsallisConfig(0.5, 1.0, newton_tol=tol), 1e-4)]
    for N, step in ((2, 1e-4), (3, 1e-3)):
        for _ in range(5):
            cases.append((-3.0 * gen.random(N), TsallisConfig(float(gen.uniform(0.2, 0.8)), 1.0, newton_tol=tol), step))
    worst = 0.0
    ok = True
    for G, cfg, step in cases:
        p_grid, _ = grid_maximizer(G, cfg, step)
        err = float(np.abs(tsallis_distribution(G, cfg) - p_grid).max())
        worst = max(worst, err / step)
        ok &= err <= 2.0 * step
    return {"passed": bool(ok), "detail": {"max_error_in_grid_steps": worst, "cases": len(cases)}}


def check_hazard_identity() -> dict:
    worst = 0.0
    for m in family_zoo():
        x = support_grid(m)
        sf = m.sf(x)
        keep = sf > 1e-300
        h, f = m.hazard(x)[keep], m.pdf(x)[keep]
        worst = max(worst, float(np.abs(h * (1.0 - m.cdf(x)[keep]) - f).max()))
    return {"passed": worst <= 1e-12, "detail": {"max_abs_error": worst}}


def check_inverse_cdf() -> dict:
    u = np.concatenate([[1e-6, 1e-4], np.linspace(0.01, 0.99, 99), [1 - 1e-4, 1 - 1e-6]])
    worst = 0.0
    for m in family_zoo():
        worst = max(worst, float(np.abs(m.cdf(m.quantile(u)) - u).max()))
    return {"passed": worst <= 1e-10, "detail": {"max_abs_error": worst}}


def check_adapter_laws() -> dict:
    errs = {}
    for base in (model("exponential", rate=1.0), model("weibull_modified", k=0.5), model("gamma", alpha=2.0, beta=1.0)):
        y = np.linspace(0.0, 15.0, 301)
        Y = mirror(base)
        errs[f"mirror {base.label}"] = float(np.abs(Y.hazard(y) - base.hazard(y)).max())
        below = Y.hazard(-y[1:]) - base.hazard(y[1:])
        errs[f"mirror below {base.label}"] = max(0.0, float(below.max()))
    for base, c in ((model("exponential", rate=1.0), 1.0), (model("weibull", k=0.5), 1.0),
                    (model("pareto_modified", alpha=2.0), 1.0), (model("gamma", alpha=2.0, beta=1.0), 0.5)):
        y = np.linspace(1e-3, 15.0, 300)
        errs[f"condition {base.label}"] = float(np.abs(condition_above(base, c).hazard(y) - base.hazard(c + y)).max())
    e = model("exponential", rate=1.0)
    y = np.linspace(0.0, 30.0, 301)
    ce = condition_above(e)
    memoryless = max(float(np.abs(ce.cdf(y) - e.cdf(y)).max()), float(np.abs(ce.hazard(y[1:]) - 1.0).max()))
    errs["memoryless exponential"] = memoryless
    passed = all(v <= 1e-10 for k, v in errs.items() if k != "memoryless exponential") and memoryless <= 1e-15
    return {"passed": passed, "detail": errs}


def check_distribution_table(samples: int = 10 ** 6) -> dict:
    rows = tabulate((10, 100), samples)
    return {"passed": table_passed(rows),
            "detail": {r["label"]: {"sup_numeric": r["sup_numeric"], "sup_ok": r["sup_ok"]} for r in rows}}


def gr_law(p: float, M: int, n: int, seed: int) -> dict:
    """K-statistics at a controlled probability p, using Gumbel noise on two arms."""
    G = np.array([math.log(p), math.log1p(-p)])
    K = kernels.gr_counts(G, model("gumbel").program(), 1.0, 0, M, n, rng.bit_generator(seed, rng.ANALYSIS))
    obs = np.bincount(K, minlength=M + 1)[1:].astype(float)
    exp = truncated_geometric_pmf(p, M) * n
    # merge tail cells until every expected count is >= 5
    o_cells, e_cells, o_acc, e_acc = [], [], 0.0, 0.0
    for o, e in zip(obs, exp):
        o_acc += o
        e_acc += e
        if e_acc >= 5.0:
            o_cells.append(o_acc)
            e_cells.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0.0:
        if e_cells:
            o_cells[-1] += o_acc
            e_cells[-1] += e_acc
        else:
            o_cells.append(o_acc)
            e_cells.append(e_acc)
    if len(e_cells) > 1:
        pval = float(stats.chisquare(o_cells, e_cells).pvalue)
    else:
        pval = 1.0
    mean = float(K.mean())
    se = float(K.std(ddof=1) / math.sqrt(n))
    target = truncated_geometric_mean(p, M)
    return {"p": p, "M": M, "chi2_pvalue": pval, "mean": mean, "se": se, "expected_mean": target,
            "passed": pval >= 0.01 and abs(mean - target) <= 3.0 * se + 1e-12}


def check_gr_law(n: int = 100_000) -> dict:
    cells = [gr_law(p, M, n, seed=100 + j) for j, (p, M) in enumerate(itertools.product((0.1, 0.5), (2, 10, 100)))]
    return {"passed": all(c["passed"] for c in cells), "detail": cells}


def check_gumbel_softmax(probes: int = 20, samples: int = 10 ** 6, seed: int = 13) -> dict:
    gen = rng.generator(seed, rng.ANALYSIS)
    cfg = PerturbationConfig(model("gumbel"), 1.0, 1)
    worst = 0.0
    for k in range(probes):
        G = -5.0 * gen.random(5)
        p = softmax_distribution(G, 1.0)
        est = ftpl_gradient_mc(G, cfg, samples, seed * 1000 + k)
        se = np.sqrt(p * (1.0 - p) / samples)
        worst = max(worst, float(np.abs(est.frequencies - p).max() / se.max()))
    return {"passed": worst <= 3.0, "detail": {"max_linf_in_se": worst, "probes": probes, "samples": samples}}


def check_two_arm_quadrature(samples: int = 10 ** 6) -> dict:
    cfg = PerturbationConfig(mirror(model("exponential", rate=1.0)), 1.0, 1)
    G = np.array([-0.5, 0.0])
    exact = two_arm_gradient_quadrature(G, cfg)
    est = ftpl_gradient_mc(G, cfg, samples, 14)
    z = float(np.abs(est.frequencies - exact).max() / est.se.max())
    return {"passed": z <= 3.0, "detail": {"quadrature": exact.tolist(), "mc": est.frequencies.tolist(), "z": z}}


def check_telescoping(tol: float = 1e-13, sequences: int = 20, seed: int = 15) -> dict:
    gen = rng.generator(seed, rng.ANALYSIS)
    worst = 0.0
    for _ in range(sequences):
        N = int(gen.integers(2, 7))
        T = int(gen.integers(1, 60))
        s = TsallisSmoother(TsallisConfig(float(gen.uniform(0.1, 0.9)), float(gen.uniform(0.5, 5.0)), newton_tol=tol))
        inc = np.zeros((T, N))
        inc[np.arange(T), gen.integers(0, N, T)] = -5.0 * gen.random(T)
        led = penalty_ledger(inc, s.value_and_gradient)
        direct = s.value_and_gradient(inc.sum(axis=0))[0]
        worst = max(worst, abs(direct - (led.overestimation + led.linear_total + led.divergence_total)))
    return {"passed": worst <= 1e-8, "detail": {"max_residual": worst, "sequences": sequences}}


def check_consistency(tol: float = 1e-13, probes: int = 20, samples: int = 200_000) -> dict:
    out = {}
    smoothers = {
        "tsallis": TsallisSmoother(TsallisConfig(0.5, 1.0, newton_tol=tol)),
        "tsallis_a0.2": TsallisSmoother(TsallisConfig(0.2, 2.0, newton_tol=tol)),
        "softmax": SoftmaxSmoother(1.0),
        "ftpl_exponential": PerturbationSmoother(PerturbationConfig(model("exponential", rate=1.0), 1.0, 1)),
        "ftpl_gumbel": PerturbationSmoother(PerturbationConfig(model("gumbel"), 1.0, 1)),
    }
    for k, (name, s) in enumerate(smoothers.items()):
        gamma, C = s.consistency_constants()
        rep = check_differential_consistency(s, random_probes(4, probes, 20 + k), gamma, C, samples=samples, seed=k)
        out[name] = rep.to_dict()
    return {"passed": all(v["passed"] for v in out.values()), "detail": out}


def gaussian_probe(N: int = 5, T: int = 2000, seeds: int = 10) -> dict:
    """Observed regret with Gaussian noise; reported, never judged."""
    cfg = ExperimentConfig.from_dict({
        "N": N, "T": T, "seeds": seeds, "master_seed": 99,
        "smoother": {"kind": "perturbation", "distribution": "gaussian",
                     "eta": math.sqrt(T), "gr_cap": "auto"},
        "environment": {"kind": "best_arm_gap", "params": {"mu": 0.5, "gap": 0.2}},
    })
    rep = run_experiment(cfg, write=False, threads=1)
    return {"passed": True, "descriptive": True,
            "detail": {"status": NO_GUARANTEE, "mean_regret": rep.mean_regret, "std_error": rep.std_error,
                       "theoretical_bound": rep.theoretical_bound, "N": N, "T": T, "seeds": seeds}}


# --------------------------------------------------------------------------
# suite
# --------------------------------------------------------------------------

def _checks(o: dict) -> dict[str, Callable[[], dict]]:
    tol = float(o.get("tsallis_tol", 1e-13))
    return {
        "tsallis_gradient": lambda: check_tsallis_gradient(tol),
        "tsallis_grid_oracle": lambda: check_tsallis_grid(tol),
        "hazard_identity": check_hazard_identity,
        "inverse_cdf": check_inverse_cdf,
        "adapter_laws": check_adapter_laws,
        "distribution_table": lambda: check_distribution_table(int(o.get("table_samples", 10 ** 6))),
        "gr_law": lambda: check_gr_law(int(o.get("gr_samples", 100_000))),
        "gumbel_softmax": lambda: check_gumbel_softmax(samples=int(o.get("gumbel_samples", 10 ** 6))),
        "two_arm_quadrature": check_two_arm_quadrature,
        "telescoping": lambda: check_telescoping(tol),
        "differential_consistency": lambda: check_consistency(tol),
        "gaussian_probe": gaussian_probe,
    }


CHECK_NAMES = tuple(_checks({}).keys())


def verify_suite(overrides: dict | None = None, only: list[str] | None = None) -> dict[str, Any]:
    """Run the battery; ``passed`` is true iff every non-descriptive check passed."""
    checks = _checks(overrides or {})
    names = list(only) if only else list(checks)
    unknown = [n for n in names if n not in checks]
    if unknown:
        raise ValueError(f"unknown checks {unknown}; available: {list(checks)}")
    results = []
    for name in names:
        t0 = time.perf_counter()
        try:
            res = checks[name]()
        except Exception as exc:  # a crashing check is a failed check
            res = {"passed": False, "detail": {"error": f"{type(exc).__name__}: {exc}"}}
        res = {"name": name, **res, "seconds": round(time.perf_counter() - t0, 3)}
        results.append(res)
    return {"passed": all(r["passed"] for r in results), "backend": kernels.BACKEND, "checks": results}
