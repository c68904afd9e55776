"""Demeaning kernel with backend selection at import time.

The compiled Cython kernel is used when available; otherwise the numpy
fallback takes over.  Set ``CUGRAVITY_NO_EXTENSION=1`` to force the fallback
(used by the backend-parity tests and the benchmark).
"""

import os

from ._demean_np import demean_inplace as demean_inplace_np

if os.environ.get("CUGRAVITY_NO_EXTENSION"):
    demean_inplace = demean_inplace_np
    BACKEND = "numpy"
else:
    try:
        from ._demean_cy import demean_inplace

        BACKEND = "cython"
    except ImportError:
        demean_inplace = demean_inplace_np
        BACKEND = "numpy"

__all__ = ["demean_inplace", "demean_inplace_np", "BACKEND"]
