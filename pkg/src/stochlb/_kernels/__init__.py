"""Hot kernels: compiled extension when built, numpy fallback otherwise.

Set ``STOCHLB_PURE=1`` to force the fallback.
"""
import os

from . import _pure

if os.environ.get("STOCHLB_PURE", "") not in ("", "0"):
    _impl = _pure
    BACKEND = "python"
else:
    try:
        from . import _ext as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pure
        BACKEND = "python"

merge_sorted = _impl.merge_sorted
convolve = _impl.convolve
log_mean_exp = _impl.log_mean_exp
l_function = _impl.l_function
log_mgf = _impl.log_mgf
expected_norm = _impl.expected_norm

__all__ = [
    "BACKEND",
    "convolve",
    "expected_norm",
    "l_function",
    "log_mean_exp",
    "log_mgf",
    "merge_sorted",
]
