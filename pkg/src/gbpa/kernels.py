"""Kernel back-end selected at import.

The compiled ``_ckernels`` extension is used when it is importable; the
numpy fallback ``_pykernels`` otherwise. Setting ``GBPA_PURE_PYTHON=1``
forces the fallback.
"""

import os

if os.environ.get("GBPA_PURE_PYTHON", "") not in ("", "0"):
    from . import _pykernels as _impl
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        from . import _pykernels as _impl

BACKEND = _impl.BACKEND

quantile = _impl.quantile
softmax = _impl.softmax
tsallis_solve = _impl.tsallis_solve
run_closed = _impl.run_closed
run_ftpl = _impl.run_ftpl
ftpl_argmax_counts = _impl.ftpl_argmax_counts
gr_counts = _impl.gr_counts
closed_ledger = _impl.closed_ledger
