"""Selects the compiled kernels when available, else the pure-Python ones.

Set ``SEXISM_ENSEMBLE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels
if os.environ.get("SEXISM_ENSEMBLE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        pass

wordpiece_ids = _impl.wordpiece_ids
majority_correct_count = _impl.majority_correct_count
confusion_counts = _impl.confusion_counts
