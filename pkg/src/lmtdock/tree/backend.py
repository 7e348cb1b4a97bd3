"""Split-kernel backend selection: compiled extension with numpy fallback.

The active backend is chosen at import time; set LMTDOCK_KERNEL=numpy or
=compiled to force one (forcing a missing compiled kernel raises).
"""

from __future__ import annotations

import os

from . import _split_numpy

try:
    from . import _splitkern

    _COMPILED = _splitkern
except ImportError:
    _COMPILED = None

_BACKENDS = {"numpy": _split_numpy}
if _COMPILED is not None:
    _BACKENDS["compiled"] = _COMPILED


def available_backends():
    return tuple(sorted(_BACKENDS))


def default_backend() -> str:
    forced = os.environ.get("LMTDOCK_KERNEL")
    if forced:
        if forced not in _BACKENDS:
            raise RuntimeError(
                f"LMTDOCK_KERNEL={forced!r} unavailable (have: {', '.join(available_backends())})"
            )
        return forced
    return "compiled" if _COMPILED is not None else "numpy"


def get_kernel(name: str = None):
    """Return (backend_name, segment_prefix_stats callable)."""
    name = name or default_backend()
    if name not in _BACKENDS:
        raise RuntimeError(f"unknown kernel backend {name!r}")
    return name, _BACKENDS[name].segment_prefix_stats
