"""Backend dispatch for the hot kernels.

The compiled extension is preferred when importable; the numpy fallback is
always available. Set ``BOGATSE_KERNELS=python`` or ``=compiled`` to force a
backend (forcing ``compiled`` raises if the extension is missing, instead of
silently degrading).
"""

import os

from . import _fallback

_requested = os.environ.get("BOGATSE_KERNELS", "auto").lower()
if _requested not in ("auto", "python", "compiled"):
    raise ImportError(
        f"BOGATSE_KERNELS must be auto, python or compiled, got {_requested!r}"
    )

_impl = None
if _requested in ("auto", "compiled"):
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        if _requested == "compiled":
            raise ImportError(
                "BOGATSE_KERNELS=compiled but the compiled extension is not built"
            )
if _impl is None:
    _impl = _fallback

BACKEND = _impl.BACKEND
box_sum_3d = _impl.box_sum_3d
ratio_combine = _impl.ratio_combine
verbatim_combine = _impl.verbatim_combine


def get_backends():
    """All importable backends as {name: module}, for benchmarks and tests."""
    backends = {"python": _fallback}
    try:
        from . import _core
        backends["compiled"] = _core
    except ImportError:
        pass
    return backends


__all__ = [
    "BACKEND",
    "box_sum_3d",
    "ratio_combine",
    "verbatim_combine",
    "get_backends",
]
