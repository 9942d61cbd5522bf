"""Pure numpy implementation of the hot kernels.

Mirrors ``_ckernels.pyx`` function for function. Random draws are consumed
in the same order as the compiled loops (one ``next_double`` per uniform,
row-major), so both back-ends see the same uniforms for the same bit
generator state.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from . import _codes as C
from .exceptions import MonotonicityError, RootFindingError, SimplexError

BACKEND = "python"

_MONO_SLACK = 1e-12
# probabilities are floored here so underflow never produces an exact zero
_P_FLOOR = np.finfo(np.float64).tiny


# --------------------------------------------------------------------------
# noise programs
# --------------------------------------------------------------------------

def _base_quantile(code, p0, p1, u):
    if code == C.GUMBEL:
        return p0 - np.log(-np.log(u))
    if code == C.FRECHET:
        return np.power(-np.log(u), -1.0 / p0)
    if code == C.WEIBULL:
        return np.power(-np.log1p(-u), 1.0 / p0)
    if code == C.WEIBULL_MODIFIED:
        return np.power(1.0 - np.log1p(-u), 1.0 / p0) - 1.0
    if code == C.PARETO:
        return p1 * np.exp(-np.log1p(-u) / p0)
    if code == C.PARETO_MODIFIED:
        return np.expm1(-np.log1p(-u) / p0)
    if code == C.GAMMA:
        return special.gammaincinv(p0, u) / p1
    if code == C.EXPONENTIAL:
        return -np.log1p(-u) / p0
    if code == C.GAUSSIAN:
        return p0 + p1 * special.ndtri(u)
    raise ValueError(f"unknown family code {code}")


def quantile(program, u):
    """Quantile of the noise program at uniforms ``u`` (any shape)."""
    prog = np.asarray(program, dtype=np.float64)
    u = np.array(u, dtype=np.float64, copy=True)
    n_ad = int(prog[3])
    scale = np.ones_like(u)
    shift = np.zeros_like(u)
    for j in range(n_ad - 1, -1, -1):
        off = C.HEADER + C.ADAPTER_WIDTH * j
        code, a0, a1 = int(prog[off]), prog[off + 1], prog[off + 2]
        if code == C.MIRROR:
            upper = u >= 0.5
            u = np.where(upper, 2.0 * u - 1.0, 1.0 - 2.0 * u)
            scale = np.where(upper, scale, -scale)
        elif code == C.CONDITION:
            u = a1 + u * (1.0 - a1)
            shift = shift - scale * a0
        elif code == C.SCALE:
            scale = scale * a0
        else:
            raise ValueError(f"unknown adapter code {code}")
    x = _base_quantile(int(prog[0]), prog[1], prog[2], u)
    return scale * x + shift


def _noise(program, u, eta):
    z = quantile(program, u + C.UNIFORM_OFFSET)
    if not np.all(np.isfinite(z)):
        raise FloatingPointError("non-finite noise draw")
    return eta * z


# --------------------------------------------------------------------------
# closed-form smoothers
# --------------------------------------------------------------------------

def softmax(G, eta):
    g = np.asarray(G, dtype=np.float64)
    w = np.exp(eta * (g - g.max()))
    return np.maximum(w / w.sum(), _P_FLOOR)


def tsallis_solve(G, alpha, eta, tol, max_iter):
    """Maximizer of <p, G> - eta * S_alpha(p) over the simplex.

    Stationarity gives p_i = (c / (lam - G_i))^(1/(1-alpha)) with
    c = eta*alpha/(1-alpha). Writing lam = max(G) + c*(1 + y) turns the
    normalizer into f(y) = sum_i (1 + y + d_i)^(-1/(1-alpha)) - 1 with
    d_i = (max(G) - G_i)/c, which is convex and decreasing on y >= 0.
    Returns ``(p, iterations)``.
    """
    g = np.asarray(G, dtype=np.float64)
    n = g.shape[0]
    c = eta * alpha / (1.0 - alpha)
    beta = 1.0 / (1.0 - alpha)
    d = (g.max() - g) / c

    def f_and_slope(y):
        t = np.log1p(y + d)
        p = np.exp(-beta * t)
        return p.sum() - 1.0, -beta * np.sum(p / (1.0 + y + d))

    lo = 0.0
    f_lo, _ = f_and_slope(lo)
    hi = math.expm1((1.0 - alpha) * math.log(n))
    f_hi, _ = f_and_slope(hi)
    while f_hi > 0.0:
        lo, f_lo = hi, f_hi
        hi = 2.0 * hi + 1.0
        f_hi, _ = f_and_slope(hi)

    y = lo
    iters = 0
    while True:
        f, slope = f_and_slope(y)
        iters += 1
        if f > f_lo + _MONO_SLACK or f < f_hi - _MONO_SLACK:
            raise MonotonicityError(
                f"normalizer not monotone on bracket: f({y!r})={f!r} outside [{f_hi!r}, {f_lo!r}]")
        if abs(f) <= tol:
            break
        if f > 0.0:
            lo, f_lo = y, f
        else:
            hi, f_hi = y, f
        if iters >= max_iter:
            raise RootFindingError(
                f"Tsallis dual solve did not converge in {max_iter} iterations",
                bracket=(lo, hi), iterations=iters)
        y_new = y - f / slope if slope < 0.0 else 0.5 * (lo + hi)
        if not (lo < y_new < hi):
            y_new = 0.5 * (lo + hi)
        if y_new == y:
            break
        y = y_new

    p = np.exp(-beta * np.log1p(y + d))
    return np.maximum(p / p.sum(), _P_FLOOR), iters


def _pick(p, u):
    # first index whose cumulative mass exceeds u; ties go to the lower index
    acc = 0.0
    last = -1
    for i in range(p.shape[0]):
        if p[i] > 0.0:
            last = i
        acc += p[i]
        if u < acc:
            return i
    return last


def run_closed(losses, mode, alpha, eta, tol, max_iter, bitgen):
    """GBPA loop for the Tsallis (mode 0) and softmax (mode 1) smoothers.

    Returns ``(arms, estimates, chosen_probs)``.
    """
    losses = np.ascontiguousarray(losses, dtype=np.float64)
    T, N = losses.shape
    rng = np.random.Generator(bitgen)
    uniforms = rng.random(T)
    cum = np.zeros(N)
    arms = np.empty(T, dtype=np.int64)
    est = np.empty(T)
    chosen = np.empty(T)
    for t in range(T):
        if mode == 0:
            p, _ = tsallis_solve(cum, alpha, eta, tol, max_iter)
        else:
            p = softmax(cum, eta)
        if not np.all(p > 0.0):
            raise SimplexError(f"round {t}: non-positive sampling probability")
        i = _pick(p, uniforms[t])
        arms[t] = i
        chosen[t] = p[i]
        est[t] = losses[t, i] / p[i]
        cum[i] += est[t]
    return arms, est, chosen


def _closed_value(G, mode, alpha, eta, p):
    if mode == 0:
        s = -np.sum(p * np.expm1((alpha - 1.0) * np.log(p))) / (1.0 - alpha)
        return float(p @ G - eta * s)
    m = G.max()
    return float(m + math.log(np.exp(eta * (G - m)).sum()) / eta)


def closed_ledger(arms, estimates, N, mode, alpha, eta, tol, max_iter):
    """Potential path along one-hot estimate increments.

    Returns ``(start_value, final_value, final_G, divergences, linear_total)``.
    """
    arms = np.asarray(arms, dtype=np.int64)
    est = np.asarray(estimates, dtype=np.float64)
    T = arms.shape[0]

    def grad(G):
        return tsallis_solve(G, alpha, eta, tol, max_iter)[0] if mode == 0 else softmax(G, eta)

    G = np.zeros(N)
    p = grad(G)
    value = start = _closed_value(G, mode, alpha, eta, p)
    div = np.empty(T)
    linear = 0.0
    for t in range(T):
        i = arms[t]
        step = p[i] * est[t]
        G[i] += est[t]
        p = grad(G)
        new_value = _closed_value(G, mode, alpha, eta, p)
        div[t] = new_value - value - step
        linear += step
        value = new_value
    return start, value, G, div, linear


# --------------------------------------------------------------------------
# perturbation smoother
# --------------------------------------------------------------------------

class _RowStream:
    """Sequential rows of N uniforms, drawn from ``rng`` in blocks.

    Block draws consume the generator exactly like row-by-row draws, so the
    row sequence equals the compiled kernel's.
    """

    def __init__(self, rng, N, block=1024):
        self.rng = rng
        self.N = N
        self.block = block
        self.buf = np.empty((0, N))
        self.pos = 0

    def peek(self, k):
        if self.pos + k > self.buf.shape[0]:
            need = max(self.block, k)
            self.buf = np.concatenate([self.buf[self.pos:], self.rng.random((need, self.N))])
            self.pos = 0
        return self.buf[self.pos:self.pos + k]

    def advance(self, k):
        self.pos += k


def _redraw_count(stream, G, program, eta, arm, M):
    used = 0
    window = 4
    while used < M:
        k = min(window, M - used)
        rows = stream.peek(k)
        hits = np.argmax(G + _noise(program, rows, eta), axis=1) == arm
        if hits.any():
            j = int(np.argmax(hits))
            stream.advance(j + 1)
            return used + j + 1
        stream.advance(k)
        used += k
        window *= 4
    return M


def run_ftpl(losses, program, eta, M, bitgen_sample, bitgen_gr):
    """FTPL loop with Geometric Resampling estimates.

    Rounds with zero incurred loss skip resampling (their estimate is zero
    whatever the count); K is recorded as 0 for them.
    Returns ``(arms, estimates, counts)``.
    """
    losses = np.ascontiguousarray(losses, dtype=np.float64)
    T, N = losses.shape
    sample_rows = np.random.Generator(bitgen_sample).random((T, N))
    stream = _RowStream(np.random.Generator(bitgen_gr), N)
    cum = np.zeros(N)
    arms = np.empty(T, dtype=np.int64)
    est = np.empty(T)
    counts = np.zeros(T, dtype=np.int64)
    for t in range(T):
        i = int(np.argmax(cum + _noise(program, sample_rows[t], eta)))
        arms[t] = i
        g = losses[t, i]
        if g != 0.0:
            k = _redraw_count(stream, cum, program, eta, i, M)
            counts[t] = k
            est[t] = k * g
        else:
            est[t] = 0.0
        cum[i] += est[t]
    return arms, est, counts


def ftpl_argmax_counts(G, program, eta, n, bitgen):
    """Histogram of argmax_i(G_i + eta Z_i) over n independent noise rows."""
    G = np.asarray(G, dtype=np.float64)
    N = G.shape[0]
    rng = np.random.Generator(bitgen)
    counts = np.zeros(N, dtype=np.int64)
    chunk = max(1, 2 ** 20 // N)
    done = 0
    while done < n:
        k = min(chunk, n - done)
        rows = rng.random((k, N))
        counts += np.bincount(np.argmax(G + _noise(program, rows, eta), axis=1), minlength=N)
        done += k
    return counts


def gr_counts(G, program, eta, arm, M, n, bitgen):
    """n independent Geometric Resampling counts for ``arm`` at G."""
    G = np.asarray(G, dtype=np.float64)
    stream = _RowStream(np.random.Generator(bitgen), G.shape[0], block=8192)
    out = np.empty(n, dtype=np.int64)
    for j in range(n):
        out[j] = _redraw_count(stream, G, program, eta, arm, M)
    return out
