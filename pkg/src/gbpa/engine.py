"""The GBPA round loop, run traces, regret, and the penalty ledger.

Each round the learner samples an arm from the gradient of a smoothed
potential at the cumulative loss estimate, observes that arm's loss, and
adds an inverse-probability (or Geometric Resampling) estimate to the
played coordinate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence, Union

import numpy as np

from . import kernels, rng
from .distributions import PerturbationModel, family_name, model as make_model, sup_hazard
from .exceptions import LossRangeError, SimplexError
from .perturbation import (
    PerturbationConfig,
    conditional_gradient,
    default_gr_cap,
    ftpl_gradient_mc,
    ftpl_sample,
    resample_count,
    tune_eta,
)
from .tsallis import (
    TsallisConfig,
    exp3_eta,
    minimax_eta,
    softmax_distribution,
    softmax_potential,
    tsallis_entropy,
)

SIMPLEX_TOL = 1e-10
DIVERGENCE_SLACK = 1e-8


# --------------------------------------------------------------------------
# value checks
# --------------------------------------------------------------------------

def check_losses(losses) -> np.ndarray:
    """Return ``losses`` as a float array, rejecting anything outside [-1, 0]."""
    g = np.asarray(losses, dtype=np.float64)
    if g.ndim not in (1, 2) or g.shape[-1] < 2:
        raise LossRangeError(f"loss vectors need N >= 2 entries, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise LossRangeError("losses must be finite")
    bad = (g < -1.0) | (g > 0.0)
    if bad.any():
        where = tuple(int(k) for k in np.argwhere(bad)[0])
        raise LossRangeError(f"loss {g[where]!r} at {where} lies outside [-1, 0]")
    return g


def check_simplex(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if not np.all(p > 0.0):
        raise SimplexError(f"sampling distribution has non-positive entries: {p}")
    if abs(p.sum() - 1.0) > SIMPLEX_TOL:
        raise SimplexError(f"sampling distribution sums to {p.sum()!r}")
    return p


def pick_arm(p: np.ndarray, u: float) -> int:
    """Inverse-CDF draw; exact ties in the cumulative sums go to the lower index."""
    i = int(np.searchsorted(np.cumsum(p), u, side="right"))
    if i >= p.shape[0]:
        i = int(np.flatnonzero(p > 0.0)[-1])
    return i


# --------------------------------------------------------------------------
# smoothers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TsallisSmoother:
    config: TsallisConfig
    kind: str = field(default="tsallis", init=False)

    def distribution(self, G) -> np.ndarray:
        p, _ = kernels.tsallis_solve(np.asarray(G, dtype=np.float64), self.config.alpha,
                                     self.config.eta, self.config.newton_tol, self.config.max_iter)
        return p

    def value_and_gradient(self, G) -> tuple[float, np.ndarray]:
        g = np.asarray(G, dtype=np.float64)
        p = self.distribution(g)
        return float(p @ g - self.config.eta * tsallis_entropy(p, self.config.alpha)), p

    def consistency_constants(self) -> tuple[float, float]:
        a = self.config.alpha
        return 2.0 - a, 1.0 / (self.config.eta * a)

    def to_dict(self) -> dict[str, Any]:
        c = self.config
        return {"kind": "tsallis", "alpha": c.alpha, "eta": c.eta,
                "newton_tol": c.newton_tol, "max_iter": c.max_iter}


@dataclass(frozen=True)
class SoftmaxSmoother:
    """EXP3: ``eta`` is the learning rate in exp(eta * G)."""

    eta: float
    kind: str = field(default="softmax", init=False)

    def __post_init__(self):
        if not self.eta > 0.0:
            raise ValueError(f"eta must be positive, got {self.eta}")

    def distribution(self, G) -> np.ndarray:
        return softmax_distribution(G, self.eta)

    def value_and_gradient(self, G) -> tuple[float, np.ndarray]:
        return softmax_potential(G, self.eta), softmax_distribution(G, self.eta)

    def consistency_constants(self) -> tuple[float, float]:
        return 1.0, self.eta

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "softmax", "eta": self.eta}


@dataclass(frozen=True, eq=False)
class PerturbationSmoother:
    config: PerturbationConfig
    kind: str = field(default="perturbation", init=False)

    def distribution(self, G, seed: int = 0) -> np.ndarray:
        """Monte Carlo gradient (floored for reporting); see :func:`ftpl_gradient_mc`."""
        return ftpl_gradient_mc(G, self.config, self.config.mc_samples, seed).probs

    def crn_evaluator(self, N: int, samples: int, seed: int) -> Callable[[np.ndarray], tuple[float, np.ndarray]]:
        """Potential and gradient under one fixed set of noise draws.

        The estimate ``mean_s max_i (G_i + eta Z_si)`` is itself a convex,
        piecewise-linear function of G whose gradient is the argmax
        frequency vector, so Bregman terms computed from it are >= 0.
        """
        z = self.config.eta * self.config.model.draw((samples, N), rng.generator(seed, rng.ANALYSIS))

        def evaluate(G):
            v = np.asarray(G, dtype=np.float64) + z
            best = np.argmax(v, axis=1)
            value = float(v[np.arange(samples), best].mean())
            return value, np.bincount(best, minlength=N) / samples

        return evaluate

    def consistency_constants(self) -> tuple[float, float]:
        return 1.0, sup_hazard(self.config.model) / self.config.eta

    def to_dict(self) -> dict[str, Any]:
        c = self.config
        return {"kind": "perturbation", "distribution": c.model.to_dict(), "eta": c.eta,
                "gr_cap": c.gr_cap, "mc_samples": c.mc_samples}


Smoother = Union[TsallisSmoother, SoftmaxSmoother, PerturbationSmoother]


def _distribution_from(spec) -> PerturbationModel:
    if isinstance(spec, PerturbationModel):
        return spec
    if isinstance(spec, str):
        return make_model(family_name(spec))
    return PerturbationModel.from_dict(spec)


def smoother_from_dict(d: dict, N: int | None = None, T: int | None = None) -> Smoother:
    """Build a smoother from its JSON form.

    ``eta`` may be a number or a rule resolved against (N, T):
    ``"minimax"`` (Tsallis), ``"exp3"`` (softmax) or ``"tuned"``
    (perturbation). ``gr_cap`` may be ``"auto"`` for ceil(sqrt(N T)).
    """
    kind = str(d.get("kind", "")).lower()
    eta = d.get("eta")

    def need_nt(rule):
        if N is None or T is None:
            raise ValueError(f"eta rule {rule!r} needs N and T")

    if kind == "tsallis":
        alpha = float(d["alpha"])
        if eta == "minimax":
            need_nt(eta)
            eta = minimax_eta(alpha, N, T)
        elif isinstance(eta, str):
            raise ValueError(f"unknown eta rule {eta!r} for the Tsallis smoother")
        return TsallisSmoother(TsallisConfig(alpha, float(eta), float(d.get("newton_tol", 1e-13)),
                                             int(d.get("max_iter", 200))))
    if kind in ("softmax", "exp3"):
        if eta == "exp3":
            need_nt(eta)
            eta = exp3_eta(N, T)
        elif isinstance(eta, str):
            raise ValueError(f"unknown eta rule {eta!r} for the softmax smoother")
        return SoftmaxSmoother(float(eta))
    if kind in ("perturbation", "ftpl"):
        m = _distribution_from(d["distribution"])
        if eta == "tuned":
            need_nt(eta)
            eta = tune_eta(m, N, T)
        elif isinstance(eta, str):
            raise ValueError(f"unknown eta rule {eta!r} for the perturbation smoother")
        cap = d.get("gr_cap", "auto")
        if cap == "auto":
            need_nt(cap)
            cap = default_gr_cap(N, T)
        return PerturbationSmoother(PerturbationConfig(m, float(eta), int(cap),
                                                       int(d.get("mc_samples", 100_000))))
    raise ValueError(f"unknown smoother kind {d.get('kind')!r}")


# --------------------------------------------------------------------------
# state and a single round
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EstimateState:
    cumulative: np.ndarray
    round: int = 0

    def __post_init__(self):
        c = np.array(self.cumulative, dtype=np.float64)
        if c.ndim != 1 or c.shape[0] < 2:
            raise ValueError("cumulative estimate must be a vector with N >= 2")
        if np.any(c > 0.0) or not np.all(np.isfinite(c)):
            raise ValueError("cumulative loss estimates must be finite and <= 0")
        if self.round < 0:
            raise ValueError("round must be >= 0")
        c.setflags(write=False)
        object.__setattr__(self, "cumulative", c)

    @classmethod
    def initial(cls, N: int) -> EstimateState:
        return cls(np.zeros(N), 0)


def run_round(state: EstimateState, smoother: Smoother, loss, rng_seed: int) -> tuple[int, float, EstimateState]:
    """One GBPA round; returns ``(chosen_arm, incurred_loss, new_state)``."""
    g = check_losses(loss)
    if g.ndim != 1 or g.shape[0] != state.cumulative.shape[0]:
        raise LossRangeError("loss vector length does not match the state")
    G = state.cumulative
    new = G.copy()
    if isinstance(smoother, PerturbationSmoother):
        arm = ftpl_sample(G, smoother.config, rng_seed)
        if g[arm] != 0.0:
            new[arm] += resample_count(G, smoother.config, arm, rng_seed) * g[arm]
    else:
        p = check_simplex(smoother.distribution(G))
        arm = pick_arm(p, rng.generator(rng_seed, rng.SAMPLING).random())
        new[arm] += g[arm] / p[arm]
    return arm, float(g[arm]), EstimateState(new, state.round + 1)


# --------------------------------------------------------------------------
# full runs
# --------------------------------------------------------------------------

@dataclass
class PenaltyLedger:
    overestimation: float
    underestimation: float
    divergence_total: float
    per_round_divergence: np.ndarray
    linear_total: float = 0.0
    potential_final: float = 0.0

    @property
    def residual(self) -> float:
        """Φ̃(L_T) minus (Φ̃(0) + linear terms + divergences); zero up to rounding."""
        return self.potential_final - (self.overestimation + self.linear_total + self.divergence_total)

    def to_dict(self, per_round: bool = False) -> dict[str, Any]:
        out = {"overestimation": self.overestimation, "underestimation": self.underestimation,
               "divergence_total": self.divergence_total, "linear_total": self.linear_total,
               "potential_final": self.potential_final, "residual": self.residual}
        if per_round:
            out["per_round_divergence"] = self.per_round_divergence.tolist()
        return out


@dataclass
class RunTrace:
    seed: int
    smoother: dict
    losses: np.ndarray
    chosen_arms: np.ndarray
    estimates: np.ndarray
    chosen_probs: np.ndarray | None = None
    gr_counts: np.ndarray | None = None
    ledger: PenaltyLedger | None = None

    @property
    def T(self) -> int:
        return self.losses.shape[0]

    @property
    def N(self) -> int:
        return self.losses.shape[1]

    @property
    def incurred_losses(self) -> np.ndarray:
        return self.losses[np.arange(self.T), self.chosen_arms]

    def increments(self) -> np.ndarray:
        """The per-round estimate vectors, T x N, nonzero only at the played arm."""
        inc = np.zeros((self.T, self.N))
        inc[np.arange(self.T), self.chosen_arms] = self.estimates
        return inc

    def cumulative_regret(self) -> np.ndarray:
        """R_t = max_i sum_{s<=t} g_{s,i} - sum_{s<=t} g_{s,i_s}, for t = 1..T."""
        return np.cumsum(self.losses, axis=0).max(axis=1) - np.cumsum(self.incurred_losses)

    @property
    def regret(self) -> float:
        if self.T == 0:
            return 0.0
        return float(self.losses.sum(axis=0).max() - self.incurred_losses.sum())

    def to_record(self, include_estimates: bool = True) -> dict[str, Any]:
        rec = {"seed": int(self.seed), "N": self.N, "T": self.T, "smoother": self.smoother,
               "chosen_arms": self.chosen_arms.tolist(),
               "incurred_losses": self.incurred_losses.tolist(),
               "regret": self.regret,
               "ledger": self.ledger.to_dict() if self.ledger is not None else None}
        if include_estimates:
            rec["estimates"] = self.estimates.tolist()
        if self.gr_counts is not None:
            rec["gr_counts"] = self.gr_counts.tolist()
        return rec


def _closed_args(smoother) -> tuple:
    if isinstance(smoother, TsallisSmoother):
        c = smoother.config
        return 0, c.alpha, c.eta, c.newton_tol, c.max_iter
    return 1, 0.0, smoother.eta, 0.0, 1


def run(losses, smoother: Smoother, seed: int) -> RunTrace:
    """Full GBPA run over a T x N loss matrix using the kernel back-end."""
    g = check_losses(losses)
    if g.ndim != 2:
        raise LossRangeError("expected a T x N loss matrix")
    g = np.ascontiguousarray(g)
    if isinstance(smoother, PerturbationSmoother):
        c = smoother.config
        arms, est, counts = kernels.run_ftpl(g, c.model.program(), c.eta, c.gr_cap,
                                             rng.bit_generator(seed, rng.SAMPLING),
                                             rng.bit_generator(seed, rng.RESAMPLING))
        return RunTrace(seed, smoother.to_dict(), g, arms, est, gr_counts=counts)
    arms, est, probs = kernels.run_closed(g, *_closed_args(smoother), rng.bit_generator(seed, rng.SAMPLING))
    return RunTrace(seed, smoother.to_dict(), g, arms, est, chosen_probs=probs)


def expected_regret(traces: Sequence[RunTrace], comparator: int | str = "best-fixed") -> tuple[float, float]:
    """Mean regret over traces and its standard error."""
    traces = list(traces)
    if not traces:
        raise ValueError("no traces")
    shapes = {t.losses.shape for t in traces}
    if len(shapes) != 1:
        raise ValueError(f"traces disagree on (T, N): {sorted(shapes)}")
    if comparator == "best-fixed":
        r = np.array([t.regret for t in traces])
    else:
        k = int(comparator)
        r = np.array([float(t.losses[:, k].sum() - t.incurred_losses.sum()) for t in traces])
    se = float(r.std(ddof=1) / math.sqrt(r.size)) if r.size > 1 else 0.0
    return float(r.mean()), se


# --------------------------------------------------------------------------
# penalty ledger
# --------------------------------------------------------------------------

def penalty_ledger(increments, evaluate: Callable[[np.ndarray], tuple[float, np.ndarray]]) -> PenaltyLedger:
    """Ledger for an arbitrary sequence of estimate vectors.

    ``evaluate(G)`` returns the smoothed potential and its gradient.
    """
    inc = np.asarray(increments, dtype=np.float64)
    T, N = inc.shape
    L = np.zeros(N)
    value, grad = evaluate(L)
    start = value
    div = np.empty(T)
    linear = 0.0
    for t in range(T):
        step = grad @ inc[t]
        L = L + inc[t]
        new_value, new_grad = evaluate(L)
        div[t] = new_value - value - step
        linear += step
        value, grad = new_value, new_grad
    return _ledger(start, value, L, div, linear)


def _ledger(start, value, L, div, linear) -> PenaltyLedger:
    if not np.all(np.isfinite(div)):
        raise FloatingPointError(f"round {int(np.argmin(np.isfinite(div)))}: non-finite divergence")
    if div.size and div.min() < -DIVERGENCE_SLACK:
        t = int(np.argmin(div))
        raise ArithmeticError(f"round {t}: divergence {div[t]!r} < 0, gradient and potential disagree")
    return PenaltyLedger(overestimation=float(start), underestimation=float(L.max() - value),
                         divergence_total=float(div.sum()), per_round_divergence=div,
                         linear_total=float(linear), potential_final=float(value))


def penalty_decomposition(trace: RunTrace | np.ndarray, smoother: Smoother,
                          samples: int = 100_000, seed: int | None = None) -> PenaltyLedger:
    """Penalty ledger of a run (or of a T x N matrix of estimate vectors).

    Closed-form smoothers use the exact potential. The perturbation smoother
    uses common-random-number Monte Carlo with ``samples`` noise rows.
    """
    if isinstance(trace, RunTrace):
        if not isinstance(smoother, PerturbationSmoother):
            start, value, L, div, linear = kernels.closed_ledger(
                trace.chosen_arms, trace.estimates, trace.N, *_closed_args(smoother))
            return _ledger(start, value, L, div, linear)
        inc = trace.increments()
        seed = trace.seed if seed is None else seed
    else:
        inc = np.asarray(trace, dtype=np.float64)
    if isinstance(smoother, PerturbationSmoother):
        evaluate = smoother.crn_evaluator(inc.shape[1], samples, 0 if seed is None else seed)
    else:
        evaluate = smoother.value_and_gradient
    return penalty_ledger(inc, evaluate)


# --------------------------------------------------------------------------
# differential consistency
# --------------------------------------------------------------------------

@dataclass
class ConsistencyReport:
    gamma: float
    C: float
    probes: np.ndarray
    gradients: np.ndarray
    hessians: np.ndarray
    ratios: np.ndarray
    flags: np.ndarray
    tolerance: np.ndarray

    @property
    def passed(self) -> bool:
        return not bool(self.flags.any())

    @property
    def max_ratio(self) -> float:
        return float(self.ratios.max())

    def to_dict(self) -> dict[str, Any]:
        return {"gamma": self.gamma, "C": self.C, "max_ratio": self.max_ratio,
                "flagged": int(self.flags.sum()), "checked": int(self.flags.size), "passed": self.passed}


def random_probes(N: int, count: int, seed: int, low: float = -10.0) -> np.ndarray:
    """Probe points drawn uniformly from (low, 0]^N."""
    u = rng.generator(seed, rng.ANALYSIS).random((count, N))
    return low * u


def check_differential_consistency(smoother: Smoother, probe_points: Iterable, gamma: float, C: float,
                                   step: float = 1e-5, samples: int = 200_000, seed: int = 0,
                                   n_se: float = 5.0) -> ConsistencyReport:
    """Compare Hessian diagonals with C * gradient^gamma at each probe.

    Closed-form smoothers use central differences of the exact gradient.
    The perturbation smoother differentiates the smooth conditional
    gradient estimator under common random numbers and allows ``n_se``
    Monte Carlo standard errors on top of the relative 1e-3 slack.
    """
    P = np.atleast_2d(np.asarray(list(probe_points), dtype=np.float64))
    grads = np.empty_like(P)
    hess = np.empty_like(P)
    tol = np.zeros_like(P)
    for k, G in enumerate(P):
        if isinstance(smoother, PerturbationSmoother):
            g, g_se, h, h_se = conditional_gradient(G, smoother.config, samples, seed + k, step=step)
            tol[k] = n_se * np.sqrt(h_se ** 2 + (C * gamma * np.abs(g) ** (gamma - 1.0) * g_se) ** 2)
        else:
            g = smoother.distribution(G)
            h = np.empty_like(g)
            for i in range(g.shape[0]):
                e = np.zeros_like(g)
                e[i] = step
                h[i] = (smoother.distribution(G + e)[i] - smoother.distribution(G - e)[i]) / (2.0 * step)
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(g))):
            raise FloatingPointError(f"non-finite finite-difference value at probe {G}")
        grads[k], hess[k] = g, h
    with np.errstate(divide="ignore", invalid="ignore"):
        bound = C * np.abs(grads) ** gamma
        ratios = hess / np.abs(grads) ** gamma
    flags = hess > bound * (1.0 + 1e-3) + tol
    return ConsistencyReport(gamma, C, P, grads, hess, ratios, flags, tol)
