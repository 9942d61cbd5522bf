"""Integer codes for the flat noise-program arrays consumed by the kernels.

A program is a float64 vector::

    [family, p0, p1, n_adapters, a_code, a0, a1, a_code, a0, a1, ...]

Adapters are listed innermost first. Both kernel back-ends hard-code the
same numbers; keep them in sync with ``_ckernels.pyx``.
"""

GUMBEL = 0
FRECHET = 1
WEIBULL = 2
WEIBULL_MODIFIED = 3
PARETO = 4
PARETO_MODIFIED = 5
GAMMA = 6
EXPONENTIAL = 7
GAUSSIAN = 8

MIRROR = 1
CONDITION = 2
SCALE = 3

HEADER = 4
ADAPTER_WIDTH = 3

# Half-ulp offset keeping noise uniforms strictly inside (0, 1).
UNIFORM_OFFSET = 2.0 ** -54
