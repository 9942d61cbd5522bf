"""Tsallis-entropy smoothing of max(G) and its softmax (EXP3) limit.

The smoothed potential is ``max_{p in simplex} <p, G> - eta * S_alpha(p)``
with ``S_alpha(p) = (1 - sum p_i^alpha) / (1 - alpha)``, a non-positive
regularizer minimized at the uniform point. Its gradient is the sampling
distribution of the bandit learner.

Two step-size conventions are in play and kept apart on purpose:

* Tsallis ``eta`` multiplies the regularizer (larger = smoother);
* :func:`softmax_distribution` takes a learning rate, ``exp(eta * G)``.

As ``alpha -> 1`` the Tsallis smoother with weight ``w`` tends to
``softmax_distribution(G, 1 / w)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import kernels


@dataclass(frozen=True)
class TsallisConfig:
    alpha: float
    eta: float
    newton_tol: float = 1e-13
    max_iter: int = 200

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie strictly inside (0, 1), got {self.alpha}; use the softmax path for alpha = 1")
        if not self.eta > 0.0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not self.newton_tol > 0.0 or self.max_iter < 1:
            raise ValueError("newton_tol must be positive and max_iter >= 1")


def _vector(G) -> np.ndarray:
    g = np.asarray(G, dtype=np.float64)
    if g.ndim != 1 or g.shape[0] < 1:
        raise ValueError("G must be a non-empty vector")
    if not np.all(np.isfinite(g)):
        raise ValueError("G must be finite")
    return g


def tsallis_distribution(G, cfg: TsallisConfig) -> np.ndarray:
    """The maximizer p*(G); strictly positive and summing to one.

    Only differences between entries of G matter, so any finite G is
    accepted even though the bandit only visits G <= 0.
    """
    p, _ = kernels.tsallis_solve(_vector(G), cfg.alpha, cfg.eta, cfg.newton_tol, cfg.max_iter)
    return p


def tsallis_entropy(p, alpha: float) -> float:
    """S_alpha(p), written with expm1 so it stays accurate for alpha near 1."""
    p = np.asarray(p, dtype=np.float64)
    p = p[p > 0]
    return float(-np.sum(p * np.expm1((alpha - 1.0) * np.log(p))) / (1.0 - alpha))


def tsallis_potential(G, cfg: TsallisConfig) -> float:
    g = _vector(G)
    p = tsallis_distribution(g, cfg)
    return float(p @ g - cfg.eta * tsallis_entropy(p, cfg.alpha))


def tsallis_hessian_diag(G, cfg: TsallisConfig) -> np.ndarray:
    """Exact diagonal of the potential's Hessian.

    With D = diag(p^(2-alpha)) / (eta*alpha), the inverse regularizer
    curvature, the Hessian is D - D 1 1^T D / (1^T D 1).
    """
    p = tsallis_distribution(G, cfg)
    d = p ** (2.0 - cfg.alpha) / (cfg.eta * cfg.alpha)
    return d - d * d / d.sum()


def softmax_distribution(G, eta: float) -> np.ndarray:
    """exp(eta G_i) / sum_j exp(eta G_j), max-shifted."""
    if not eta > 0.0:
        raise ValueError("eta must be positive")
    return kernels.softmax(_vector(G), eta)


def softmax_potential(G, eta: float) -> float:
    """(1/eta) log sum_i exp(eta G_i)."""
    return float(logsumexp(eta * _vector(G)) / eta)


# --------------------------------------------------------------------------
# regret bounds
# --------------------------------------------------------------------------

def overestimation_term(alpha: float, eta: float, N: int) -> float:
    """eta (N^(1-alpha) - 1) / (1 - alpha) = -eta * min S_alpha."""
    return eta * math.expm1((1.0 - alpha) * math.log(N)) / (1.0 - alpha)


def tsallis_regret_bound(alpha: float, eta: float, N: int, T: int) -> float:
    """eta (N^(1-alpha) - 1)/(1-alpha) + N^alpha T / (2 eta alpha)."""
    if not (0.0 < alpha < 1.0 and eta > 0.0 and N >= 1 and T >= 0):
        raise ValueError("need 0 < alpha < 1, eta > 0, N >= 1, T >= 0")
    return overestimation_term(alpha, eta, N) + N ** alpha * T / (2.0 * eta * alpha)


def minimax_eta(alpha: float, N: int, T: int) -> float:
    """sqrt(T (1-alpha) / (2 alpha)) * N^(alpha - 1/2)."""
    return math.sqrt(T * (1.0 - alpha) / (2.0 * alpha)) * N ** (alpha - 0.5)


def corollary_bound(alpha: float, N: int, T: int) -> float:
    """sqrt(2 T N / (alpha (1 - alpha))); 2 sqrt(2 T N) at alpha = 1/2."""
    return math.sqrt(2.0 * T * N / (alpha * (1.0 - alpha)))


def exp3_eta(N: int, T: int) -> float:
    """sqrt(N log N / T), the EXP3 step used by the harness for the softmax path."""
    return math.sqrt(N * math.log(N) / T)


def exp3_regret_bound(eta: float, N: int, T: int) -> float:
    """Tsallis bound in the alpha -> 1 limit, expressed for a softmax learning rate.

    The limit smoother with regularizer weight w = 1/eta has bound
    w log N + N T / (2 w).
    """
    w = 1.0 / eta
    return w * math.log(N) + N * T / (2.0 * w)


def exp3_limit_bound(N: int, T: int) -> float:
    """2 sqrt(T N log N)."""
    return 2.0 * math.sqrt(T * N * math.log(N))
