"""Stochastic smoothing: Follow the Perturbed Leader for bandits.

The smoothed potential is ``E max_i (G_i + eta Z_i)`` with iid noise Z.
Sampling from its gradient is a single noisy argmax; the learner never
needs the gradient itself because Geometric Resampling estimates the
inverse probability of the played arm by counting redraws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import kernels, rng
from .distributions import PerturbationModel, expected_max_value, sup_hazard


@dataclass(frozen=True, eq=False)
class PerturbationConfig:
    model: PerturbationModel
    eta: float
    gr_cap: int
    mc_samples: int = 100_000

    def __post_init__(self):
        if not self.eta > 0.0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if int(self.gr_cap) < 1:
            raise ValueError(f"gr_cap must be >= 1, got {self.gr_cap}")
        if int(self.mc_samples) < 1:
            raise ValueError("mc_samples must be >= 1")
        object.__setattr__(self, "gr_cap", int(self.gr_cap))
        object.__setattr__(self, "mc_samples", int(self.mc_samples))


def default_gr_cap(N: int, T: int) -> int:
    """ceil(sqrt(N T))."""
    return max(1, math.ceil(math.sqrt(N * T)))


def _g(G):
    g = np.asarray(G, dtype=np.float64)
    if g.ndim != 1 or not np.all(np.isfinite(g)):
        raise ValueError("G must be a finite vector")
    return g


# --------------------------------------------------------------------------
# sampling and gradient estimates
# --------------------------------------------------------------------------

def ftpl_sample(G, cfg: PerturbationConfig, seed: int) -> int:
    """argmax_i (G_i + eta Z_i) for one fresh noise vector."""
    counts = kernels.ftpl_argmax_counts(_g(G), cfg.model.program(), cfg.eta, 1,
                                        rng.bit_generator(seed, rng.SAMPLING))
    return int(np.argmax(counts))


@dataclass
class GradientEstimate:
    counts: np.ndarray
    samples: int
    probs: np.ndarray = field(init=False)
    frequencies: np.ndarray = field(init=False)
    se: np.ndarray = field(init=False)

    def __post_init__(self):
        n = self.samples
        self.frequencies = self.counts / n
        self.se = np.sqrt(self.frequencies * (1.0 - self.frequencies) / n)
        floored = np.maximum(self.frequencies, 1.0 / (10.0 * n))
        self.probs = floored / floored.sum()


def ftpl_gradient_mc(G, cfg: PerturbationConfig, samples: int, seed: int) -> GradientEstimate:
    """Argmax frequencies over ``samples`` noise draws.

    ``frequencies`` are the raw empirical gradient. ``probs`` floors every
    entry at 1/(10 samples) and renormalizes; it is for reporting only.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    counts = kernels.ftpl_argmax_counts(_g(G), cfg.model.program(), cfg.eta, samples,
                                        rng.bit_generator(seed, rng.SAMPLING))
    return GradientEstimate(counts, samples)


def conditional_gradient(G, cfg: PerturbationConfig, samples: int, seed: int, step: float = 0.0):
    """Gradient via E[1 - F_eta(max_{j != i}(G_j + eta Z_j) - G_i)].

    Integrating out each coordinate's own noise gives a smooth estimator
    (common random numbers across coordinates). With ``step > 0`` it also
    returns a central finite-difference Hessian diagonal of that smooth
    estimate and per-sample standard errors.

    Returns ``(grad, grad_se)`` or ``(grad, grad_se, hess, hess_se)``.
    """
    g = _g(G)
    N = g.shape[0]
    gen = rng.generator(seed, rng.SAMPLING)
    model, eta = cfg.model, cfg.eta
    grad = np.empty(N)
    grad_se = np.empty(N)
    hess = np.empty(N)
    hess_se = np.empty(N)
    z = model.draw((samples, N), gen) * eta
    v = g + z
    for i in range(N):
        others = np.delete(v, i, axis=1).max(axis=1)
        x = others - g[i]
        s = model.sf(x / eta)
        grad[i] = s.mean()
        grad_se[i] = s.std(ddof=1) / math.sqrt(samples) if samples > 1 else 0.0
        if step > 0.0:
            d = (model.sf((x - step) / eta) - model.sf((x + step) / eta)) / (2.0 * step)
            hess[i] = d.mean()
            hess_se[i] = d.std(ddof=1) / math.sqrt(samples) if samples > 1 else 0.0
    if step > 0.0:
        return grad, grad_se, hess, hess_se
    return grad, grad_se


def two_arm_gradient_quadrature(G, cfg: PerturbationConfig) -> np.ndarray:
    """Exact gradient at N = 2 by one-dimensional quadrature.

    p_1 = int P(eta Z_1 > G_2 - G_1 + eta z) f(z) dz; p_2 = 1 - p_1.
    """
    g = _g(G)
    if g.shape[0] != 2:
        raise ValueError("quadrature oracle is for N = 2")
    model, eta = cfg.model, cfg.eta
    shift = (g[1] - g[0]) / eta
    lo, hi = model.support()

    def integrand(z):
        return float(model.sf(shift + z)) * float(model.pdf(z))

    pts = [p for p in (0.0, -shift) if lo < p < hi]
    if math.isinf(lo) or math.isinf(hi):
        a = lo if math.isfinite(lo) else -60.0
        b = hi if math.isfinite(hi) else 200.0
        if model.family in ("frechet", "pareto", "pareto_modified"):
            b = 1e6
    else:
        a, b = lo, hi
    pts = sorted(p for p in pts if a < p < b)
    p1, _ = integrate.quad(integrand, a, b, points=pts or None, limit=500, epsabs=1e-13, epsrel=1e-12)
    return np.array([p1, 1.0 - p1])


# --------------------------------------------------------------------------
# Geometric Resampling
# --------------------------------------------------------------------------

def resample_count(G, cfg: PerturbationConfig, chosen_arm: int, seed: int) -> int:
    """Redraws (1..M) until the noisy argmax returns ``chosen_arm`` again."""
    K = kernels.gr_counts(_g(G), cfg.model.program(), cfg.eta, int(chosen_arm), cfg.gr_cap, 1,
                          rng.bit_generator(seed, rng.RESAMPLING))
    return int(K[0])


def geometric_resampling_estimate(G, cfg: PerturbationConfig, chosen_arm: int,
                                  incurred_loss: float, seed: int) -> np.ndarray:
    """K * incurred_loss * e_{chosen_arm}, K = capped redraw count from a fresh noise stream."""
    g = _g(G)
    est = np.zeros(g.shape[0])
    est[chosen_arm] = resample_count(g, cfg, chosen_arm, seed) * incurred_loss
    return est


def truncated_geometric_mean(p: float, M: int) -> float:
    """E[min(Geometric(p), M)] = (1 - (1-p)^M) / p."""
    return -math.expm1(M * math.log1p(-p)) / p if p < 1.0 else 1.0


def truncated_geometric_pmf(p: float, M: int) -> np.ndarray:
    """P(K = k) for k = 1..M, the mass beyond M collapsed onto M."""
    k = np.arange(1, M + 1)
    pmf = p * (1.0 - p) ** (k - 1)
    pmf[-1] = (1.0 - p) ** (M - 1)
    return pmf


def gr_bias_bound(N: int, T: int, M: int) -> float:
    """Extra regret from capping resampling at M: N T / (e M)."""
    return N * T / (math.e * M)


# --------------------------------------------------------------------------
# hazard-rate regret bound
# --------------------------------------------------------------------------

def scaled_expected_max(model: PerturbationModel, eta: float, N: int) -> float:
    """E[max_i eta Z_i] = eta E[max_i Z_i]."""
    return eta * expected_max_value(model, N)[0]


def scaled_sup_hazard(model: PerturbationModel, eta: float) -> float:
    """sup h of eta Z = (sup h of Z) / eta."""
    return sup_hazard(model) / eta


def hazard_regret_bound(model: PerturbationModel, eta: float, N: int, T: int) -> float:
    """eta E[max Z] + N (sup h) T / eta; ``inf`` when either ingredient is unbounded."""
    if T == 0 and eta == 0.0:
        return 0.0
    if not eta > 0.0:
        return math.inf
    emax, _ = expected_max_value(model, N)
    h = sup_hazard(model)
    if math.isinf(emax) or math.isinf(h):
        return math.inf
    return eta * emax + N * h * T / eta


def tune_eta(model: PerturbationModel, N: int, T: int) -> float:
    """sqrt(N (sup h) T / E[max Z]), the minimizer of the two-term bound."""
    if T == 0:
        return 0.0
    emax, _ = expected_max_value(model, N)
    h = sup_hazard(model)
    if math.isinf(emax) or math.isinf(h) or not emax > 0.0:
        raise ValueError(f"bound for {model!r} is unbounded or degenerate (E[max]={emax}, sup h={h})")
    return math.sqrt(N * h * T / emax)
