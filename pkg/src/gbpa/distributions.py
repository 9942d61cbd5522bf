"""Perturbation distributions: density, CDF, hazard, quantile, sup-hazard, E[max].

A :class:`PerturbationModel` is a base family plus an ordered tuple of
adapters (applied first to last):

* :class:`Mirror` -- density ``f(|y|)/2`` on the whole line, for base laws
  supported on the positive half-line;
* :class:`ConditionAbove` -- ``X - c`` given ``X > c``;
* :class:`Scale` -- ``c * X``.

Sampling is inverse-CDF with exactly one uniform per draw; the quantile is
evaluated by the kernel back-end from a flat "noise program" so the same
code path drives the FTPL loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import integrate, optimize, special

from . import _codes as C
from . import kernels, rng
from .exceptions import UnavailableError

EULER_GAMMA = float(np.euler_gamma)


def harmonic(n: int) -> float:
    return float(np.sum(1.0 / np.arange(1, n + 1)))


# --------------------------------------------------------------------------
# base families
# --------------------------------------------------------------------------

class _Family:
    name = ""
    code = -1
    defaults: dict = {}
    trend = "unimodal"  # hazard shape: "increasing", "decreasing", "constant", "unimodal"

    def check(self, p):
        pass

    def support(self, p):
        return 0.0, math.inf

    def program_params(self, p):
        raise NotImplementedError

    def sup_hazard(self, p):
        raise UnavailableError(f"no analytic sup-hazard for {self.name}")

    def hazard(self, x, p):
        return self.pdf(x, p) / self.sf(x, p)

    def closed_form_max(self, N, p):
        raise UnavailableError(f"no closed-form E[max] for {self.name}")

    def bound_max(self, N, p):
        return self.closed_form_max(N, p)


def _nonneg(x):
    return np.where(x >= 0, x, np.nan)


class _Gumbel(_Family):
    name, code = "gumbel", C.GUMBEL
    defaults = {"loc": 0.0}
    trend = "increasing"

    def support(self, p):
        return -math.inf, math.inf

    def program_params(self, p):
        return p["loc"], 0.0

    def pdf(self, x, p):
        z = x - p["loc"]
        return np.exp(-z - np.exp(-z))

    def cdf(self, x, p):
        return np.exp(-np.exp(-(x - p["loc"])))

    def sf(self, x, p):
        return -np.expm1(-np.exp(-(x - p["loc"])))

    def hazard(self, x, p):
        s = np.exp(-(np.asarray(x, dtype=float) - p["loc"]))
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            h = s / np.expm1(s)
        return np.where(s == 0.0, 1.0, h)

    def sup_hazard(self, p):
        # s / (e^s - 1) < 1, tending to 1 as x -> +inf
        return 1.0

    def closed_form_max(self, N, p):
        return math.log(N) + EULER_GAMMA + p["loc"]


class _Frechet(_Family):
    name, code = "frechet", C.FRECHET
    defaults = {"alpha": 2.0}

    def check(self, p):
        if not p["alpha"] > 1.0:
            raise ValueError(f"Frechet requires alpha > 1, got {p['alpha']}")

    def program_params(self, p):
        return p["alpha"], 0.0

    def pdf(self, x, p):
        a = p["alpha"]
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            v = a * np.power(x, -a - 1.0) * np.exp(-np.power(x, -a))
        return np.where(x > 0, np.nan_to_num(v, nan=0.0), 0.0)

    def cdf(self, x, p):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(x > 0, np.exp(-np.power(np.maximum(x, 0.0), -p["alpha"])), 0.0)

    def sf(self, x, p):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(x > 0, -np.expm1(-np.power(np.maximum(x, 0.0), -p["alpha"])), 1.0)

    def hazard(self, x, p):
        a = p["alpha"]
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            w = np.power(x, -a)
            h = a / x * w / np.expm1(w)
        return np.where(x > 0, np.nan_to_num(h, nan=0.0, posinf=0.0), 0.0)

    def sup_hazard(self, p):
        a = p["alpha"]
        grid = np.geomspace(1e-4, 50.0, 2000)
        value = _refine_max(lambda x: float(self.hazard(x, p)), grid, self.hazard(grid, p))
        if value > 2.0 * a * (1.0 + 1e-12):
            raise ArithmeticError(f"Frechet sup-hazard {value} exceeds the 2*alpha cap {2 * a}")
        return value

    def closed_form_max(self, N, p):
        a = p["alpha"]
        return N ** (1.0 / a) * math.gamma(1.0 - 1.0 / a)


class _Weibull(_Family):
    """Plain Weibull(k), scale 1. Hazard k x^(k-1) is unbounded near 0 when k < 1."""

    name, code = "weibull", C.WEIBULL
    defaults = {"k": 1.0}

    def check(self, p):
        if not p["k"] > 0.0:
            raise ValueError(f"Weibull requires k > 0, got {p['k']}")

    def program_params(self, p):
        return p["k"], 0.0

    def pdf(self, x, p):
        k = p["k"]
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = k * np.power(np.maximum(x, 0.0), k - 1.0) * np.exp(-np.power(np.maximum(x, 0.0), k))
        return np.where(x >= 0, v, 0.0)

    def cdf(self, x, p):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, -np.expm1(-np.power(np.maximum(x, 0.0), p["k"])), 0.0)

    def sf(self, x, p):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, np.exp(-np.power(np.maximum(x, 0.0), p["k"])), 1.0)

    def hazard(self, x, p):
        k = p["k"]
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(x >= 0, k * np.power(np.maximum(x, 0.0), k - 1.0), np.nan)

    def sup_hazard(self, p):
        if p["k"] == 1.0:
            return 1.0
        return math.inf

    def closed_form_max(self, N, p):
        if p["k"] == 1.0:
            return harmonic(N)
        raise UnavailableError("no closed-form E[max] for Weibull with k != 1")


class _WeibullModified(_Family):
    """Weibull conditioned on X > 1 and shifted: CDF 1 - exp(1 - (y+1)^k)."""

    name, code = "weibull_modified", C.WEIBULL_MODIFIED
    defaults = {"k": 1.0}
    trend = "decreasing"

    def check(self, p):
        if not 0.0 < p["k"] <= 1.0:
            raise ValueError(f"modified Weibull requires 0 < k <= 1, got {p['k']}")

    def program_params(self, p):
        return p["k"], 0.0

    def pdf(self, x, p):
        k = p["k"]
        x = np.asarray(x, dtype=float)
        v = k * np.power(np.maximum(x, 0.0) + 1.0, k - 1.0) * np.exp(1.0 - np.power(np.maximum(x, 0.0) + 1.0, k))
        return np.where(x >= 0, v, 0.0)

    def cdf(self, x, p):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, -np.expm1(1.0 - np.power(np.maximum(x, 0.0) + 1.0, p["k"])), 0.0)

    def sf(self, x, p):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, np.exp(1.0 - np.power(np.maximum(x, 0.0) + 1.0, p["k"])), 1.0)

    def hazard(self, x, p):
        k = p["k"]
        return k * np.power(_nonneg(np.asarray(x, dtype=float)) + 1.0, k - 1.0)

    def sup_hazard(self, p):
        return p["k"]

    def closed_form_max(self, N, p):
        if p["k"] == 1.0:
            return harmonic(N)
        raise UnavailableError("modified Weibull has only a bound on E[max] unless k = 1")

    def bound_max(self, N, p):
        m = round(1.0 / p["k"])
        if abs(1.0 / p["k"] - m) > 1e-9:
            raise UnavailableError("the E[max] bound needs k = 1/m for an integer m")
        return 10.0 * math.factorial(m) * math.log(N) ** m


class _Pareto(_Family):
    """Plain Pareto(alpha, x_m): CDF 1 - (x_m/x)^alpha on x >= x_m."""

    name, code = "pareto", C.PARETO
    defaults = {"alpha": 2.0, "x_m": 1.0}
    trend = "decreasing"

    def check(self, p):
        if not (p["alpha"] > 0.0 and p["x_m"] > 0.0):
            raise ValueError("Pareto requires alpha > 0 and x_m > 0")

    def support(self, p):
        return p["x_m"], math.inf

    def program_params(self, p):
        return p["alpha"], p["x_m"]

    def pdf(self, x, p):
        a, m = p["alpha"], p["x_m"]
        x = np.asarray(x, dtype=float)
        return np.where(x >= m, a * m ** a / np.power(np.maximum(x, m), a + 1.0), 0.0)

    def cdf(self, x, p):
        a, m = p["alpha"], p["x_m"]
        x = np.asarray(x, dtype=float)
        return np.where(x >= m, 1.0 - np.power(m / np.maximum(x, m), a), 0.0)

    def sf(self, x, p):
        a, m = p["alpha"], p["x_m"]
        x = np.asarray(x, dtype=float)
        return np.where(x >= m, np.power(m / np.maximum(x, m), a), 1.0)

    def hazard(self, x, p):
        x = np.asarray(x, dtype=float)
        return np.where(x >= p["x_m"], p["alpha"] / x, np.nan)

    def sup_hazard(self, p):
        return p["alpha"] / p["x_m"]

    def closed_form_max(self, N, p):
        a = p["alpha"]
        if a <= 1.0:
            return math.inf
        # E[max] = x_m * N * B(N, 1 - 1/a)
        return p["x_m"] * N * math.exp(special.betaln(N, 1.0 - 1.0 / a))


class _ParetoModified(_Family):
    """Lomax form: CDF 1 - (1+x)^-alpha on x > 0."""

    name, code = "pareto_modified", C.PARETO_MODIFIED
    defaults = {"alpha": 2.0}
    trend = "decreasing"

    def check(self, p):
        if not p["alpha"] > 1.0:
            raise ValueError(f"modified Pareto requires alpha > 1, got {p['alpha']}")

    def program_params(self, p):
        return p["alpha"], 0.0

    def pdf(self, x, p):
        a = p["alpha"]
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, a / np.power(np.maximum(x, 0.0) + 1.0, a + 1.0), 0.0)

    def cdf(self, x, p):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, -np.expm1(-p["alpha"] * np.log1p(np.maximum(x, 0.0))), 0.0)

    def sf(self, x, p):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, np.power(np.maximum(x, 0.0) + 1.0, -p["alpha"]), 1.0)

    def hazard(self, x, p):
        return p["alpha"] / (_nonneg(np.asarray(x, dtype=float)) + 1.0)

    def sup_hazard(self, p):
        return p["alpha"]

    def bound_max(self, N, p):
        a = p["alpha"]
        return a * N ** (1.0 / a) / (a - 1.0)


class _Gamma(_Family):
    """Gamma with shape ``alpha`` and rate ``beta``."""

    name, code = "gamma", C.GAMMA
    defaults = {"alpha": 2.0, "beta": 1.0}
    trend = "increasing"

    def check(self, p):
        if not (p["alpha"] >= 1.0 and p["beta"] > 0.0):
            raise ValueError("Gamma requires alpha >= 1 and beta > 0")

    def program_params(self, p):
        return p["alpha"], p["beta"]

    def pdf(self, x, p):
        a, b = p["alpha"], p["beta"]
        x = np.asarray(x, dtype=float)
        xs = np.maximum(x, 0.0)
        with np.errstate(divide="ignore"):
            logf = a * math.log(b) + special.xlogy(a - 1.0, xs) - b * xs - special.gammaln(a)
        return np.where(x >= 0, np.exp(logf), 0.0)

    def cdf(self, x, p):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, special.gammainc(p["alpha"], p["beta"] * np.maximum(x, 0.0)), 0.0)

    def sf(self, x, p):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, special.gammaincc(p["alpha"], p["beta"] * np.maximum(x, 0.0)), 1.0)

    def hazard(self, x, p):
        a, b = p["alpha"], p["beta"]
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x)
        s = self.sf(flat, p)
        with np.errstate(divide="ignore", invalid="ignore"):
            h = self.pdf(flat, p) / s
        for j in np.flatnonzero((s < 1e-250) & (flat > 0)):
            # 1/h(x) = int_0^inf (1 + t/x)^(a-1) e^(-b t) dt, free of underflow
            xx = flat[j]
            inv, _ = integrate.quad(lambda t: (1.0 + t / xx) ** (a - 1.0) * math.exp(-b * t), 0.0, math.inf)
            h[j] = 1.0 / inv
        h = np.where(flat >= 0, h, np.nan)
        return h.reshape(x.shape)

    def sup_hazard(self, p):
        return p["beta"]

    def closed_form_max(self, N, p):
        if p["alpha"] == 1.0:
            return harmonic(N) / p["beta"]
        raise UnavailableError("Gamma E[max] is only available as an asymptotic approximation")

    def asymptotic_max(self, N, p):
        a, b = p["alpha"], p["beta"]
        if N < 2:
            raise UnavailableError("asymptotic Gamma E[max] needs N >= 2")
        return (math.log(N) + (a - 1.0) * math.log(math.log(N)) - math.lgamma(a) + EULER_GAMMA) / b


class _Exponential(_Family):
    name, code = "exponential", C.EXPONENTIAL
    defaults = {"rate": 1.0}
    trend = "constant"

    def check(self, p):
        if not p["rate"] > 0.0:
            raise ValueError("Exponential requires rate > 0")

    def program_params(self, p):
        return p["rate"], 0.0

    def pdf(self, x, p):
        r = p["rate"]
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, r * np.exp(-r * np.maximum(x, 0.0)), 0.0)

    def cdf(self, x, p):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, -np.expm1(-p["rate"] * np.maximum(x, 0.0)), 0.0)

    def sf(self, x, p):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, np.exp(-p["rate"] * np.maximum(x, 0.0)), 1.0)

    def hazard(self, x, p):
        return np.where(np.asarray(x, dtype=float) >= 0, p["rate"], np.nan)

    def sup_hazard(self, p):
        return p["rate"]

    def closed_form_max(self, N, p):
        return harmonic(N) / p["rate"]


class _Gaussian(_Family):
    """Normal noise. Its hazard grows without bound; kept as a conjecture probe only."""

    name, code = "gaussian", C.GAUSSIAN
    defaults = {"mu": 0.0, "sigma": 1.0}
    trend = "increasing"

    def check(self, p):
        if not p["sigma"] > 0.0:
            raise ValueError("Gaussian requires sigma > 0")

    def support(self, p):
        return -math.inf, math.inf

    def program_params(self, p):
        return p["mu"], p["sigma"]

    def pdf(self, x, p):
        z = (np.asarray(x, dtype=float) - p["mu"]) / p["sigma"]
        return np.exp(-0.5 * z * z) / (p["sigma"] * math.sqrt(2.0 * math.pi))

    def cdf(self, x, p):
        return special.ndtr((np.asarray(x, dtype=float) - p["mu"]) / p["sigma"])

    def sf(self, x, p):
        return special.ndtr(-(np.asarray(x, dtype=float) - p["mu"]) / p["sigma"])

    def hazard(self, x, p):
        z = (np.asarray(x, dtype=float) - p["mu"]) / p["sigma"]
        return math.sqrt(2.0 / math.pi) / special.erfcx(z / math.sqrt(2.0)) / p["sigma"]

    def sup_hazard(self, p):
        return math.inf

    def closed_form_max(self, N, p):
        if N == 1:
            return p["mu"]
        if N == 2:
            return p["mu"] + p["sigma"] / math.sqrt(math.pi)
        raise UnavailableError("Gaussian E[max] has no closed form for N > 2")


FAMILIES: dict[str, _Family] = {
    f.name: f for f in (
        _Gumbel(), _Frechet(), _Weibull(), _WeibullModified(), _Pareto(),
        _ParetoModified(), _Gamma(), _Exponential(), _Gaussian(),
    )
}

_ALIASES = {name.replace("_", ""): name for name in FAMILIES}
_ALIASES.update({"normal": "gaussian", "lomax": "pareto_modified"})


def family_name(name: str) -> str:
    key = "".join(ch for ch in name.lower() if ch.isalnum())
    try:
        return _ALIASES[key]
    except KeyError:
        raise ValueError(f"unknown distribution family {name!r}") from None


# --------------------------------------------------------------------------
# adapters and the model
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Mirror:
    kind = "mirror"

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class ConditionAbove:
    threshold: float = 1.0
    kind = "condition_above"

    def to_dict(self):
        return {"kind": self.kind, "threshold": self.threshold}


@dataclass(frozen=True)
class Scale:
    factor: float
    kind = "scale"

    def to_dict(self):
        return {"kind": self.kind, "factor": self.factor}


@dataclass(frozen=True, eq=False)
class PerturbationModel:
    family: str
    params: dict = field(default_factory=dict)
    adapters: tuple = ()

    def __post_init__(self):
        name = family_name(self.family)
        fam = FAMILIES[name]
        unknown = set(self.params) - set(fam.defaults)
        if unknown:
            raise ValueError(f"unknown parameters for {name}: {sorted(unknown)}")
        merged = {**fam.defaults, **{k: float(v) for k, v in self.params.items()}}
        fam.check(merged)
        object.__setattr__(self, "family", name)
        object.__setattr__(self, "params", merged)
        object.__setattr__(self, "adapters", tuple(self.adapters))

    def __eq__(self, other):
        return (isinstance(other, PerturbationModel) and self.family == other.family
                and self.params == other.params and self.adapters == other.adapters)

    def __repr__(self):
        params = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        ads = "".join(f" -> {a.kind}" + (f"({a.threshold:g})" if isinstance(a, ConditionAbove) else "")
                      + (f"({a.factor:g})" if isinstance(a, Scale) else "") for a in self.adapters)
        return f"{self.family}({params}){ads}"

    @property
    def label(self) -> str:
        return repr(self)

    # -- structure --------------------------------------------------------

    @property
    def base(self) -> _Family:
        return FAMILIES[self.family]

    @property
    def inner(self) -> PerturbationModel:
        """The model with its last adapter removed."""
        if not self.adapters:
            raise ValueError("base model has no inner model")
        return PerturbationModel(self.family, self.params, self.adapters[:-1])

    def with_adapter(self, adapter) -> PerturbationModel:
        return PerturbationModel(self.family, self.params, self.adapters + (adapter,))

    def support(self) -> tuple[float, float]:
        if not self.adapters:
            return self.base.support(self.params)
        lo, hi = self.inner.support()
        last = self.adapters[-1]
        if isinstance(last, Mirror):
            return -hi, hi
        if isinstance(last, ConditionAbove):
            return 0.0, hi - last.threshold
        return last.factor * lo, last.factor * hi

    def program(self) -> np.ndarray:
        """Flat noise program for the kernels (see ``_codes``)."""
        p0, p1 = self.base.program_params(self.params)
        prog = [float(self.base.code), p0, p1, float(len(self.adapters))]
        for j, a in enumerate(self.adapters):
            if isinstance(a, Mirror):
                prog += [float(C.MIRROR), 0.0, 0.0]
            elif isinstance(a, ConditionAbove):
                below = PerturbationModel(self.family, self.params, self.adapters[:j])
                prog += [float(C.CONDITION), a.threshold, float(below.cdf(a.threshold))]
            else:
                prog += [float(C.SCALE), a.factor, 0.0]
        return np.array(prog, dtype=np.float64)

    # -- pointwise functions ----------------------------------------------

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if not self.adapters:
            return self.base.pdf(x, self.params)
        inner, last = self.inner, self.adapters[-1]
        if isinstance(last, Mirror):
            return 0.5 * inner.pdf(np.abs(x))
        if isinstance(last, ConditionAbove):
            c = last.threshold
            return np.where(x >= 0, inner.pdf(c + np.maximum(x, 0.0)) / inner.sf(c), 0.0)
        return inner.pdf(x / last.factor) / last.factor

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if not self.adapters:
            return self.base.cdf(x, self.params)
        inner, last = self.inner, self.adapters[-1]
        if isinstance(last, Mirror):
            return 0.5 * (1.0 + np.sign(x) * inner.cdf(np.abs(x)))
        if isinstance(last, ConditionAbove):
            c = last.threshold
            Fc = inner.cdf(c)
            return np.where(x > 0, (inner.cdf(c + np.maximum(x, 0.0)) - Fc) / (1.0 - Fc), 0.0)
        return inner.cdf(x / last.factor)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        if not self.adapters:
            return self.base.sf(x, self.params)
        inner, last = self.inner, self.adapters[-1]
        if isinstance(last, Mirror):
            s = inner.sf(np.abs(x))
            return np.where(x >= 0, 0.5 * s, 1.0 - 0.5 * s)
        if isinstance(last, ConditionAbove):
            c = last.threshold
            return np.where(x > 0, inner.sf(c + np.maximum(x, 0.0)) / inner.sf(c), 1.0)
        return inner.sf(x / last.factor)

    def hazard(self, x):
        """``pdf / (1 - cdf)``; adapters use the exact transformation rules."""
        x = np.asarray(x, dtype=float)
        if not self.adapters:
            return self.base.hazard(x, self.params)
        inner, last = self.inner, self.adapters[-1]
        if isinstance(last, Mirror):
            ax = np.abs(x)
            neg = 0.5 * inner.pdf(ax) / (1.0 - 0.5 * inner.sf(ax))
            return np.where(x >= 0, inner.hazard(ax), neg)
        if isinstance(last, ConditionAbove):
            return np.where(x >= 0, inner.hazard(last.threshold + np.maximum(x, 0.0)), np.nan)
        return inner.hazard(x / last.factor) / last.factor

    def quantile(self, u):
        return kernels.quantile(self.program(), u)

    def sample(self, u):
        """Inverse-CDF draw: one uniform in, one variate out."""
        return self.quantile(u)

    def draw(self, size, gen: np.random.Generator):
        return self.quantile(gen.random(size) + C.UNIFORM_OFFSET)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "params": dict(self.params),
                "adapters": [a.to_dict() for a in self.adapters]}

    @classmethod
    def from_dict(cls, d: dict) -> PerturbationModel:
        model = cls(d["family"], dict(d.get("params", {})))
        for a in d.get("adapters", []):
            kind = a["kind"].lower()
            if kind == "mirror":
                model = mirror(model)
            elif kind in ("condition_above", "conditionabove", "condition"):
                model = condition_above(model, a.get("threshold", 1.0))
            elif kind == "scale":
                model = scaled(model, a["factor"])
            else:
                raise ValueError(f"unknown adapter {a['kind']!r}")
        return model


def model(family: str, **params) -> PerturbationModel:
    return PerturbationModel(family, params)


def mirror(m: PerturbationModel) -> PerturbationModel:
    lo, _ = m.support()
    if not lo >= 0.0:
        raise ValueError(f"mirroring needs a base supported on the positive half-line; {m!r} has lower end {lo}")
    return m.with_adapter(Mirror())


def condition_above(m: PerturbationModel, threshold: float = 1.0) -> PerturbationModel:
    threshold = float(threshold)
    lo, _ = m.support()
    if not math.isfinite(threshold) or threshold < lo:
        raise ValueError(f"degenerate threshold {threshold} for support starting at {lo}")
    if not float(m.cdf(threshold)) < 1.0 or not float(m.sf(threshold)) > 0.0:
        raise ValueError(f"no mass above threshold {threshold}")
    return m.with_adapter(ConditionAbove(threshold))


def scaled(m: PerturbationModel, factor: float) -> PerturbationModel:
    if not factor > 0.0:
        raise ValueError("scale factor must be positive")
    return m.with_adapter(Scale(float(factor)))


# --------------------------------------------------------------------------
# sup-hazard
# --------------------------------------------------------------------------

def _refine_max(h, grid, values):
    values = np.asarray(values, dtype=float)
    values = np.where(np.isnan(values), -np.inf, values)
    j = int(np.argmax(values))
    best = float(values[j])
    if math.isfinite(best) and 0 < j < len(grid) - 1 and -np.inf < values[j - 1] < best and -np.inf < values[j + 1] < best:
        x = optimize.golden(lambda t: -h(t), brack=(grid[j - 1], grid[j], grid[j + 1]), tol=1e-10)
        best = max(best, h(x))
    return best


def hazard_grid(m: PerturbationModel, points: int = 2000, x_hi: float = 1e6) -> np.ndarray:
    lo, hi = m.support()
    hi = min(hi, x_hi)
    if math.isinf(lo):
        return np.concatenate([-np.geomspace(50.0, 1e-4, points // 2), [0.0], np.geomspace(1e-4, hi, points // 2)])
    return np.concatenate([[lo], lo + np.geomspace(1e-4, hi - lo, points)])


def numeric_sup_hazard(m: PerturbationModel, points: int = 2000, x_hi: float = 1e6) -> float:
    """Grid scan plus golden-section refinement of the hazard rate."""
    grid = hazard_grid(m, points, x_hi)
    return _refine_max(lambda x: float(m.hazard(x)), grid, m.hazard(grid))


def sup_hazard(m: PerturbationModel) -> float:
    """Supremum of the hazard rate: analytic where known, numeric otherwise."""
    if not m.adapters:
        return m.base.sup_hazard(m.params)
    inner, last = m.inner, m.adapters[-1]
    if isinstance(last, Mirror):
        return sup_hazard(inner)
    if isinstance(last, Scale):
        return sup_hazard(inner) / last.factor
    if not inner.adapters:
        trend = inner.base.trend
        if inner.family == "weibull":
            trend = "decreasing" if inner.params["k"] <= 1.0 else "increasing"
        if trend == "decreasing":
            return float(inner.hazard(last.threshold))
        if trend in ("increasing", "constant"):
            return sup_hazard(inner)
    return numeric_sup_hazard(m)


# --------------------------------------------------------------------------
# expected maximum of N iid draws
# --------------------------------------------------------------------------

def expected_max(m: PerturbationModel, N: int, method: str = "closed_form",
                 samples: int = 10 ** 6, seed: int = 0) -> float:
    """E[max of N iid draws].

    ``closed_form``  exact expression (Gumbel, Frechet, Exponential, ...);
    ``bound``        an upper bound (modified Weibull, modified Pareto,
                     mirrored laws), or the exact value when one exists;
    ``asymptotic``   extreme-value approximation (Gamma);
    ``monte_carlo``  sample mean, see :func:`expected_max_mc`.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if method == "monte_carlo":
        return expected_max_mc(m, N, samples, seed)[0]
    if method == "asymptotic":
        if m.adapters or m.family != "gamma":
            raise UnavailableError("asymptotic E[max] is only provided for Gamma")
        return m.base.asymptotic_max(N, m.params)
    if method not in ("closed_form", "bound"):
        raise ValueError(f"unknown method {method!r}")
    if not m.adapters:
        if method == "closed_form":
            return m.base.closed_form_max(N, m.params)
        return m.base.bound_max(N, m.params)
    inner, last = m.inner, m.adapters[-1]
    if isinstance(last, Scale):
        return last.factor * expected_max(inner, N, method)
    if isinstance(last, Mirror) and method == "bound":
        try:
            return expected_max(inner, N, "closed_form")
        except UnavailableError:
            return expected_max(inner, N, "bound")
    raise UnavailableError(f"no {method} E[max] for {m!r}")


def expected_max_value(m: PerturbationModel, N: int, samples: int = 10 ** 6, seed: int = 0) -> tuple[float, str]:
    """Best available E[max]: closed form, then bound, then asymptotic, then Monte Carlo."""
    for method in ("closed_form", "bound", "asymptotic"):
        try:
            return expected_max(m, N, method), method
        except UnavailableError:
            continue
    return expected_max_mc(m, N, samples, seed)[0], "monte_carlo"


def expected_max_mc(m: PerturbationModel, N: int, samples: int = 10 ** 6, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo E[max] with its standard error.

    The maximum of N iid draws has CDF F^N, so it is drawn directly as
    ``quantile(U ** (1/N))``.
    """
    u = rng.generator(seed, rng.ANALYSIS).random(samples) + C.UNIFORM_OFFSET
    x = m.quantile(np.exp(np.log(u) / N))
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(samples))
