"""Backend selection for the pointwise stage kernels.

The compiled extension is used when it was built; set
``BEQT_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

from . import _kernels_py

if os.environ.get("BEQT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "cython"

stage_a = _impl.stage_a
stage_b = _impl.stage_b
stage_c = _impl.stage_c
stage_d = _impl.stage_d
STAGE_A_OUTPUTS = _kernels_py.STAGE_A_OUTPUTS


def backends():
    """Available implementations, keyed by name."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels

        out["cython"] = _kernels
    except ImportError:
        pass
    return out
