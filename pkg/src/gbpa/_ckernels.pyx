# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.

Same surface and the same random-number consumption order as
``_pykernels.py``. Loops run without the GIL; each bit generator's lock is
held for the duration of a call.
"""

from libc.float cimport DBL_MIN
from libc.math cimport exp, expm1, fabs, isfinite, log, log1p, pow
from cpython.pycapsule cimport PyCapsule_GetPointer
from numpy.random cimport bitgen_t
from scipy.special.cython_special cimport gammaincinv, ndtri

import numpy as np

from .exceptions import MonotonicityError, RootFindingError, SimplexError

BACKEND = "cython"

# keep in sync with _codes.py
cdef enum:
    GUMBEL = 0
    FRECHET = 1
    WEIBULL = 2
    WEIBULL_MODIFIED = 3
    PARETO = 4
    PARETO_MODIFIED = 5
    GAMMA = 6
    EXPONENTIAL = 7
    GAUSSIAN = 8

cdef enum:
    MIRROR = 1
    CONDITION = 2
    SCALE = 3
    HEADER = 4
    ADAPTER_WIDTH = 3

cdef enum:
    OK = 0
    NO_CONVERGENCE = 1
    NOT_MONOTONE = 2
    NOT_POSITIVE = 3
    NOT_FINITE = 4

cdef double UNIFORM_OFFSET = 2.0 ** -54
cdef double MONO_SLACK = 1e-12


cdef bitgen_t* _bitgen(object bg) except NULL:
    return <bitgen_t*> PyCapsule_GetPointer(bg.capsule, "BitGenerator")


# --------------------------------------------------------------------------
# noise programs
# --------------------------------------------------------------------------

cdef inline double _base_q(int code, double p0, double p1, double u) noexcept nogil:
    if code == GUMBEL:
        return p0 - log(-log(u))
    if code == FRECHET:
        return pow(-log(u), -1.0 / p0)
    if code == WEIBULL:
        return pow(-log1p(-u), 1.0 / p0)
    if code == WEIBULL_MODIFIED:
        return pow(1.0 - log1p(-u), 1.0 / p0) - 1.0
    if code == PARETO:
        return p1 * exp(-log1p(-u) / p0)
    if code == PARETO_MODIFIED:
        return expm1(-log1p(-u) / p0)
    if code == GAMMA:
        return gammaincinv(p0, u) / p1
    if code == EXPONENTIAL:
        return -log1p(-u) / p0
    if code == GAUSSIAN:
        return p0 + p1 * ndtri(u)
    return 0.0 / 0.0


cdef double _prog_q(const double* prog, double u) noexcept nogil:
    cdef int n_ad = <int> prog[3]
    cdef int j, off, code
    cdef double scale = 1.0, shift = 0.0
    for j in range(n_ad - 1, -1, -1):
        off = HEADER + ADAPTER_WIDTH * j
        code = <int> prog[off]
        if code == MIRROR:
            if u >= 0.5:
                u = 2.0 * u - 1.0
            else:
                u = 1.0 - 2.0 * u
                scale = -scale
        elif code == CONDITION:
            u = prog[off + 2] + u * (1.0 - prog[off + 2])
            shift = shift - scale * prog[off + 1]
        elif code == SCALE:
            scale = scale * prog[off + 1]
    return scale * _base_q(<int> prog[0], prog[1], prog[2], u) + shift


cdef inline int _noisy_argmax(const double* G, int N, const double* prog, double eta,
                              bitgen_t* rng, int* status) noexcept nogil:
    # one uniform per coordinate, in coordinate order; ties to the lower index
    cdef int i, best = 0
    cdef double z, v, best_v = 0.0
    for i in range(N):
        z = _prog_q(prog, rng.next_double(rng.state) + UNIFORM_OFFSET)
        if not isfinite(z):
            status[0] = NOT_FINITE
        v = G[i] + eta * z
        if i == 0 or v > best_v:
            best_v = v
            best = i
    return best


def quantile(program, u):
    cdef const double[::1] prog = np.ascontiguousarray(program, dtype=np.float64)
    arr = np.array(u, dtype=np.float64, copy=True)
    cdef double[::1] flat = arr.reshape(-1)
    cdef Py_ssize_t k, n = flat.shape[0]
    with nogil:
        for k in range(n):
            flat[k] = _prog_q(&prog[0], flat[k])
    return arr


# --------------------------------------------------------------------------
# closed-form smoothers
# --------------------------------------------------------------------------

cdef void _softmax(const double* G, int N, double eta, double* p) noexcept nogil:
    cdef int i
    cdef double m = G[0], s = 0.0
    for i in range(1, N):
        if G[i] > m:
            m = G[i]
    for i in range(N):
        p[i] = exp(eta * (G[i] - m))
        s += p[i]
    for i in range(N):
        p[i] /= s
        if p[i] < DBL_MIN:  # underflow floor keeps every entry strictly positive
            p[i] = DBL_MIN


cdef inline void _f_slope(const double* d, int N, double beta, double y,
                          double* p, double* f, double* slope) noexcept nogil:
    cdef int i
    cdef double s = 0.0, ds = 0.0
    for i in range(N):
        p[i] = exp(-beta * log1p(y + d[i]))
        s += p[i]
        ds += p[i] / (1.0 + y + d[i])
    f[0] = s - 1.0
    slope[0] = -beta * ds


cdef int _tsallis(const double* G, int N, double alpha, double eta, double tol, int max_iter,
                  double* p, double* d, double* bracket, int* iters) noexcept nogil:
    cdef int i
    cdef double c = eta * alpha / (1.0 - alpha)
    cdef double beta = 1.0 / (1.0 - alpha)
    cdef double gmax = G[0]
    cdef double lo, hi, f_lo, f_hi, f, slope, y, y_new, s
    for i in range(1, N):
        if G[i] > gmax:
            gmax = G[i]
    for i in range(N):
        d[i] = (gmax - G[i]) / c

    lo = 0.0
    _f_slope(d, N, beta, lo, p, &f_lo, &slope)
    hi = expm1((1.0 - alpha) * log(<double> N))
    _f_slope(d, N, beta, hi, p, &f_hi, &slope)
    while f_hi > 0.0:
        lo = hi
        f_lo = f_hi
        hi = 2.0 * hi + 1.0
        _f_slope(d, N, beta, hi, p, &f_hi, &slope)

    y = lo
    iters[0] = 0
    while True:
        _f_slope(d, N, beta, y, p, &f, &slope)
        iters[0] += 1
        if f > f_lo + MONO_SLACK or f < f_hi - MONO_SLACK:
            bracket[0] = lo
            bracket[1] = hi
            return NOT_MONOTONE
        if fabs(f) <= tol:
            break
        if f > 0.0:
            lo = y
            f_lo = f
        else:
            hi = y
            f_hi = f
        if iters[0] >= max_iter:
            bracket[0] = lo
            bracket[1] = hi
            return NO_CONVERGENCE
        if slope < 0.0:
            y_new = y - f / slope
        else:
            y_new = 0.5 * (lo + hi)
        if not (lo < y_new < hi):
            y_new = 0.5 * (lo + hi)
        if y_new == y:
            break
        y = y_new

    s = 0.0
    for i in range(N):
        p[i] = exp(-beta * log1p(y + d[i]))
        s += p[i]
    for i in range(N):
        p[i] /= s
        if p[i] < DBL_MIN:
            p[i] = DBL_MIN
    return OK


cdef _raise_tsallis(int status, double* bracket, int iters, int max_iter):
    if status == NO_CONVERGENCE:
        raise RootFindingError(
            f"Tsallis dual solve did not converge in {max_iter} iterations",
            bracket=(bracket[0], bracket[1]), iterations=iters)
    if status == NOT_MONOTONE:
        raise MonotonicityError(
            f"normalizer not monotone on bracket [{bracket[0]!r}, {bracket[1]!r}]")


def softmax(G, double eta):
    cdef const double[::1] g = np.ascontiguousarray(G, dtype=np.float64)
    out = np.empty(g.shape[0])
    cdef double[::1] p = out
    _softmax(&g[0], <int> g.shape[0], eta, &p[0])
    return out


def tsallis_solve(G, double alpha, double eta, double tol, int max_iter):
    cdef const double[::1] g = np.ascontiguousarray(G, dtype=np.float64)
    cdef int N = <int> g.shape[0]
    out = np.empty(N)
    work = np.empty(N)
    cdef double[::1] p = out
    cdef double[::1] d = work
    cdef double bracket[2]
    cdef int iters = 0, status
    with nogil:
        status = _tsallis(&g[0], N, alpha, eta, tol, max_iter, &p[0], &d[0], bracket, &iters)
    if status != OK:
        _raise_tsallis(status, bracket, iters, max_iter)
    return out, iters


cdef inline int _pick(const double* p, int N, double u) noexcept nogil:
    cdef int i, last = -1
    cdef double acc = 0.0
    for i in range(N):
        if p[i] > 0.0:
            last = i
        acc += p[i]
        if u < acc:
            return i
    return last


def run_closed(losses, int mode, double alpha, double eta, double tol, int max_iter, bitgen):
    cdef const double[:, ::1] g = np.ascontiguousarray(losses, dtype=np.float64)
    cdef Py_ssize_t T = g.shape[0]
    cdef int N = <int> g.shape[1]
    arms_out = np.empty(T, dtype=np.int64)
    est_out = np.empty(T)
    chosen_out = np.empty(T)
    cdef long long[::1] arms = arms_out
    cdef double[::1] est = est_out
    cdef double[::1] chosen = chosen_out
    cdef double[::1] cum = np.zeros(N)
    cdef double[::1] p = np.empty(N)
    cdef double[::1] d = np.empty(N)
    cdef double bracket[2]
    cdef int iters = 0, status = OK, i, j
    cdef Py_ssize_t t, bad_round = -1
    cdef double u
    cdef bitgen_t* rng = _bitgen(bitgen)
    with bitgen.lock, nogil:
        for t in range(T):
            if mode == 0:
                status = _tsallis(&cum[0], N, alpha, eta, tol, max_iter, &p[0], &d[0], bracket, &iters)
                if status != OK:
                    bad_round = t
                    break
            else:
                _softmax(&cum[0], N, eta, &p[0])
            for j in range(N):
                if not (p[j] > 0.0):
                    status = NOT_POSITIVE
            if status != OK:
                bad_round = t
                break
            u = rng.next_double(rng.state)
            i = _pick(&p[0], N, u)
            arms[t] = i
            chosen[t] = p[i]
            est[t] = g[t, i] / p[i]
            cum[i] += est[t]
    if status == NOT_POSITIVE:
        raise SimplexError(f"round {bad_round}: non-positive sampling probability")
    if status != OK:
        _raise_tsallis(status, bracket, iters, max_iter)
    return arms_out, est_out, chosen_out


cdef double _closed_value(const double* G, int N, int mode, double alpha, double eta,
                         const double* p) noexcept nogil:
    cdef int i
    cdef double v = 0.0, s = 0.0, m
    if mode == 0:
        for i in range(N):
            v += p[i] * G[i]
            s -= p[i] * expm1((alpha - 1.0) * log(p[i]))
        return v - eta * s / (1.0 - alpha)
    m = G[0]
    for i in range(1, N):
        if G[i] > m:
            m = G[i]
    for i in range(N):
        s += exp(eta * (G[i] - m))
    return m + log(s) / eta


def closed_ledger(arms, estimates, int N, int mode, double alpha, double eta, double tol, int max_iter):
    """Potential path along one-hot estimate increments.

    Returns ``(start_value, final_value, final_G, divergences, linear_total)``.
    """
    cdef const long long[::1] a = np.ascontiguousarray(arms, dtype=np.int64)
    cdef const double[::1] e = np.ascontiguousarray(estimates, dtype=np.float64)
    cdef Py_ssize_t T = a.shape[0]
    div_out = np.empty(T)
    G_out = np.zeros(N)
    cdef double[::1] div = div_out
    cdef double[::1] G = G_out
    cdef double[::1] p = np.empty(N)
    cdef double[::1] d = np.empty(N)
    cdef double bracket[2]
    cdef int iters = 0, status = OK, i
    cdef Py_ssize_t t
    cdef double value, start, new_value, step, linear = 0.0
    with nogil:
        if mode == 0:
            status = _tsallis(&G[0], N, alpha, eta, tol, max_iter, &p[0], &d[0], bracket, &iters)
        else:
            _softmax(&G[0], N, eta, &p[0])
        if status == OK:
            value = _closed_value(&G[0], N, mode, alpha, eta, &p[0])
            start = value
            for t in range(T):
                i = <int> a[t]
                step = p[i] * e[t]
                G[i] += e[t]
                if mode == 0:
                    status = _tsallis(&G[0], N, alpha, eta, tol, max_iter, &p[0], &d[0], bracket, &iters)
                    if status != OK:
                        break
                else:
                    _softmax(&G[0], N, eta, &p[0])
                new_value = _closed_value(&G[0], N, mode, alpha, eta, &p[0])
                div[t] = new_value - value - step
                linear += step
                value = new_value
    if status != OK:
        _raise_tsallis(status, bracket, iters, max_iter)
    return start, value, G_out, div_out, linear


# --------------------------------------------------------------------------
# perturbation smoother
# --------------------------------------------------------------------------

cdef inline long long _redraw_count(const double* G, int N, const double* prog, double eta,
                                    int arm, long long M, bitgen_t* rng, int* status) noexcept nogil:
    cdef long long k = 0
    while k < M:
        k += 1
        if _noisy_argmax(G, N, prog, eta, rng, status) == arm:
            break
    return k


def run_ftpl(losses, program, double eta, long long M, bitgen_sample, bitgen_gr):
    cdef const double[:, ::1] g = np.ascontiguousarray(losses, dtype=np.float64)
    cdef const double[::1] prog = np.ascontiguousarray(program, dtype=np.float64)
    cdef Py_ssize_t T = g.shape[0]
    cdef int N = <int> g.shape[1]
    arms_out = np.empty(T, dtype=np.int64)
    est_out = np.empty(T)
    counts_out = np.zeros(T, dtype=np.int64)
    cdef long long[::1] arms = arms_out
    cdef double[::1] est = est_out
    cdef long long[::1] counts = counts_out
    cdef double[::1] cum = np.zeros(N)
    cdef bitgen_t* rs = _bitgen(bitgen_sample)
    cdef bitgen_t* rg = _bitgen(bitgen_gr)
    cdef int status = OK, i
    cdef long long k
    cdef Py_ssize_t t
    cdef double loss
    with bitgen_sample.lock, bitgen_gr.lock, nogil:
        for t in range(T):
            i = _noisy_argmax(&cum[0], N, &prog[0], eta, rs, &status)
            arms[t] = i
            loss = g[t, i]
            if loss != 0.0:
                k = _redraw_count(&cum[0], N, &prog[0], eta, i, M, rg, &status)
                counts[t] = k
                est[t] = k * loss
            else:
                est[t] = 0.0
            cum[i] += est[t]
            if status != OK:
                break
    if status == NOT_FINITE:
        raise FloatingPointError("non-finite noise draw")
    return arms_out, est_out, counts_out


def ftpl_argmax_counts(G, program, double eta, long long n, bitgen):
    cdef const double[::1] g = np.ascontiguousarray(G, dtype=np.float64)
    cdef const double[::1] prog = np.ascontiguousarray(program, dtype=np.float64)
    cdef int N = <int> g.shape[0]
    counts_out = np.zeros(N, dtype=np.int64)
    cdef long long[::1] counts = counts_out
    cdef bitgen_t* rng = _bitgen(bitgen)
    cdef int status = OK
    cdef long long j
    with bitgen.lock, nogil:
        for j in range(n):
            counts[_noisy_argmax(&g[0], N, &prog[0], eta, rng, &status)] += 1
    if status == NOT_FINITE:
        raise FloatingPointError("non-finite noise draw")
    return counts_out


def gr_counts(G, program, double eta, int arm, long long M, long long n, bitgen):
    cdef const double[::1] g = np.ascontiguousarray(G, dtype=np.float64)
    cdef const double[::1] prog = np.ascontiguousarray(program, dtype=np.float64)
    cdef int N = <int> g.shape[0]
    out = np.empty(n, dtype=np.int64)
    cdef long long[::1] k = out
    cdef bitgen_t* rng = _bitgen(bitgen)
    cdef int status = OK
    cdef long long j
    with bitgen.lock, nogil:
        for j in range(n):
            k[j] = _redraw_count(&g[0], N, &prog[0], eta, arm, M, rng, &status)
    if status == NOT_FINITE:
        raise FloatingPointError("non-finite noise draw")
    return out
