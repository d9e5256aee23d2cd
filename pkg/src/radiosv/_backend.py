"""Kernel backend selection.

The compiled extension is preferred.  Set ``RADIOSV_BACKEND=python`` to force
the pure-Python fallback (useful for debugging and for the benchmark).
"""

import logging
import os

from . import _fallback

logger = logging.getLogger(__name__)

_forced = os.environ.get("RADIOSV_BACKEND", "").strip().lower()

if _forced == "python":
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        logger.debug("compiled kernels unavailable, using pure-Python fallback")
        _impl = _fallback
        BACKEND = "python"

sosfilt = _impl.sosfilt
jacobi_sweeps = _impl.jacobi_sweeps


def available_backends():
    """Map backend name to kernel module for every importable backend."""
    backends = {"python": _fallback}
    try:
        from . import _kernels

        backends["compiled"] = _kernels
    except ImportError:
        pass
    return backends
