"""Oblivious loss sequences in [-1, 0]^N.

Stochastic environments draw g_{t,i} = -Bernoulli(mu_{t,i}), so a larger
``mu`` means a worse arm. The matrix is fixed before the learner runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import rng

KINDS = ("stochastic_iid", "best_arm_gap", "switching", "deterministic")

_ALIASES = {k.replace("_", ""): k for k in KINDS}


@dataclass(frozen=True)
class EnvironmentSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        key = str(self.kind).lower().replace("_", "").replace("-", "")
        if key not in _ALIASES:
            raise ValueError(f"unknown environment {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "kind", _ALIASES[key])

    def to_dict(self) -> dict[str, Any]:
        params = {k: (np.asarray(v).tolist() if isinstance(v, np.ndarray) else v)
                  for k, v in self.params.items()}
        return {"kind": self.kind, "params": params}

    @classmethod
    def from_dict(cls, d: dict) -> EnvironmentSpec:
        return cls(d["kind"], dict(d.get("params", {})))


def _check_mean(mu, name="mu"):
    mu = np.asarray(mu, dtype=np.float64)
    if np.any(mu < 0.0) or np.any(mu > 1.0) or not np.all(np.isfinite(mu)):
        raise ValueError(f"{name} must lie in [0, 1], got {mu}")
    return mu


def _gap_params(params):
    mu = float(_check_mean(params.get("mu", 0.5)))
    gap = float(params.get("gap", 0.2))
    if gap < 0.0:
        raise ValueError(f"gap must be >= 0, got {gap}")
    if gap >= mu and gap > 0.0:
        raise ValueError(f"gap {gap} must be smaller than mu {mu}")
    return mu, gap


def mean_matrix(spec: EnvironmentSpec, N: int, T: int) -> np.ndarray:
    """Bernoulli parameters mu_{t,i} (T x N) of a stochastic environment."""
    p = spec.params
    if spec.kind == "stochastic_iid":
        mu = _check_mean(p["means"], "means")
        if mu.shape != (N,):
            raise ValueError(f"need {N} means, got {mu.shape}")
        return np.broadcast_to(mu, (T, N))
    mu, gap = _gap_params(p)
    out = np.full((T, N), mu)
    if spec.kind == "best_arm_gap":
        best = int(p.get("best_arm", 0))
        if not 0 <= best < N:
            raise ValueError(f"best_arm {best} out of range")
        out[:, best] = mu - gap
        return out
    if spec.kind == "switching":
        period = int(p.get("period", max(1, T // 4)))
        if period < 1:
            raise ValueError("period must be >= 1")
        arms = [int(a) for a in p.get("arms", (0, 1))]
        if not arms or any(not 0 <= a < N for a in arms):
            raise ValueError(f"switching arms {arms} out of range")
        best = np.asarray(arms)[(np.arange(T) // period) % len(arms)]
        out[np.arange(T), best] = mu - gap
        return out
    raise ValueError(f"{spec.kind} has no mean matrix")


def generate(spec: EnvironmentSpec, N: int, T: int, seed: int) -> np.ndarray:
    """T x N loss matrix; identical for identical (spec, N, T, seed)."""
    if N < 2 or T < 0:
        raise ValueError("need N >= 2 and T >= 0")
    if spec.kind == "deterministic":
        g = np.array(spec.params["losses"], dtype=np.float64)
        if g.shape != (T, N):
            raise ValueError(f"loss matrix has shape {g.shape}, expected {(T, N)}")
        if np.any(g < -1.0) or np.any(g > 0.0) or not np.all(np.isfinite(g)):
            raise ValueError("deterministic losses must lie in [-1, 0]")
        return g
    mu = mean_matrix(spec, N, T)
    u = rng.generator(seed, rng.ENVIRONMENT).random((T, N))
    return -(u < mu).astype(np.float64)
