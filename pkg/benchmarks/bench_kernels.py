"""Compiled kernels against the numpy fallback on the hot paths.

    python benchmarks/bench_kernels.py [--repeat 3] [--json out.json]

Each case is timed with both back-ends on identical inputs and seeds and
the outputs are compared. For full runs the comparison covers the rounds
before the first differing arm: the back-ends agree to rounding at every
step, but EXP3-style 1/p estimates amplify last-bit differences between
numpy's vectorized exp/sum and libm, so long softmax trajectories can
eventually branch. The ``same arms`` column reports that prefix length.
"""

from __future__ import annotations

import argparse
import json
import math
import time

import numpy as np

from gbpa import _pykernels, rng
from gbpa.distributions import model
from gbpa.environments import EnvironmentSpec, generate

try:
    from gbpa import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _best_of(fn, repeat):
    best, out = math.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases():
    N, T = 10, 10_000
    losses = generate(EnvironmentSpec("best_arm_gap", {"mu": 0.5, "gap": 0.2}), N, T, seed=1)
    G = -10.0 * rng.generator(2, rng.ANALYSIS).random(N)
    expo = model("exponential", rate=1.0).program()
    gumbel = model("gumbel").program()
    eta_t = math.sqrt(T / 2)
    return {
        "tsallis_solve x1000": (lambda k: [k.tsallis_solve(G, 0.5, 3.0, 1e-13, 200) for _ in range(1000)],
                                lambda out: (None, np.concatenate([p for p, _ in out]))),
        "run_closed tsallis T=1e4": (lambda k: k.run_closed(losses, 0, 0.5, eta_t, 1e-13, 200, rng.bit_generator(3, 0)),
                                     lambda out: (out[0], out[1])),
        "run_closed softmax T=1e4": (lambda k: k.run_closed(losses, 1, 0.0, 0.048, 0.0, 1, rng.bit_generator(3, 0)),
                                     lambda out: (out[0], out[1])),
        "run_ftpl exponential T=1e4": (lambda k: k.run_ftpl(losses, expo, 185.0, 317, rng.bit_generator(3, 0),
                                                            rng.bit_generator(3, 1)),
                                       lambda out: (out[0], out[1])),
        "ftpl_argmax_counts gumbel 1e6": (lambda k: k.ftpl_argmax_counts(G, gumbel, 1.0, 10 ** 6, rng.bit_generator(4, 0)),
                                          lambda out: (None, out)),
        "gr_counts gumbel 1e5": (lambda k: k.gr_counts(np.log([0.1, 0.9]), gumbel, 1.0, 0, 100, 10 ** 5,
                                                       rng.bit_generator(5, 1)),
                                 lambda out: (None, out)),
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="write results here")
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not importable; build with `pip install -e . --no-build-isolation`")
        return 1
    rows = []
    print(f"{'case':<34}{'python s':>11}{'cython s':>11}{'speedup':>10}{'same arms':>11}{'max rel diff':>14}")
    for name, (call, key) in cases().items():
        tp, op = _best_of(lambda: call(_pykernels), args.repeat)
        tc, oc = _best_of(lambda: call(_ckernels), args.repeat)
        (arms_p, vp), (arms_c, vc) = key(op), key(oc)
        vp, vc = np.asarray(vp, float), np.asarray(vc, float)
        prefix = None
        if arms_p is not None:
            split = np.flatnonzero(arms_p != arms_c)
            prefix = int(split[0]) if split.size else len(arms_p)
            vp, vc = vp[:prefix], vc[:prefix]
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(vp == vc, 0.0, np.abs(vp - vc) / np.maximum(np.abs(vp), np.abs(vc)))
        diff = float(rel.max()) if rel.size else 0.0
        rows.append({"case": name, "python_s": tp, "cython_s": tc, "speedup": tp / tc,
                     "identical_arm_prefix": prefix, "max_rel_diff": diff})
        shown = "-" if prefix is None else str(prefix)
        print(f"{name:<34}{tp:>11.4f}{tc:>11.4f}{tp / tc:>9.1f}x{shown:>11}{diff:>14.2e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
