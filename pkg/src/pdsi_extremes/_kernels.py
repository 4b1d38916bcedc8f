"""Select the kernel backend at import time.

The compiled extension is preferred; set ``PDSI_EXTREMES_PURE=1`` to force the
numpy fallback (useful for benchmarking and cross-checking).
"""

import logging
import os

from . import _pycore

_logger = logging.getLogger(__name__)

try:
    from . import _ccore
except ImportError:  # extension not built
    _ccore = None

if _ccore is not None and not os.environ.get("PDSI_EXTREMES_PURE"):
    _impl = _ccore
    BACKEND = "cython"
else:
    _impl = _pycore
    BACKEND = "python"
    _logger.debug("using pure-Python kernels")

mk_score = _impl.mk_score
assign_nearest = _impl.assign_nearest
silhouette_samples = _impl.silhouette_samples


def available_backends():
    """Mapping of backend name to kernel module for every importable backend."""
    found = {"python": _pycore}
    if _ccore is not None:
        found["cython"] = _ccore
    return found
