"""Backend selection for the numerical hot loops.

The compiled Cython extension is used when it imports; otherwise the
pure-Python twin in ``_pykernels`` takes over.  Set ``FLOWOBS_PURE_PYTHON=1``
to force the fallback.
"""
import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)

KIND_NONE = _pykernels.KIND_NONE
KIND_LINEAR = _pykernels.KIND_LINEAR
KIND_PARAMETRIC = _pykernels.KIND_PARAMETRIC

_impl = _pykernels
BACKEND = "python"
if os.environ.get("FLOWOBS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        log.debug("compiled kernels unavailable, using pure-Python fallback")

plant_rk4 = _impl.plant_rk4
observer_rk4 = _impl.observer_rk4
jacobi_eigh = _impl.jacobi_eigh


def backends():
    """Return ``{name: module}`` for every kernel backend importable here."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:  # pragma: no cover
        return found
    found["cython"] = _ckernels
    return found
