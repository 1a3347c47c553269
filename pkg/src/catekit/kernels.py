"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
implementation takes over.  Set ``CATEKIT_PURE_PYTHON=1`` to force the
fallback.
"""
from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("CATEKIT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"

CRIT_MSE = _pykernels.CRIT_MSE
CRIT_CAUSAL = _pykernels.CRIT_CAUSAL

grow_tree = _impl.grow_tree
apply_tree = _impl.apply_tree
enet_cd_gram = _impl.enet_cd_gram
kendall_counts = _impl.kendall_counts


def backends() -> dict:
    """Both kernel modules keyed by name (only ``python`` when not compiled)."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
