"""Hot kernels: thresholding, labeling, k-NN matching and rigid fitting.

The compiled extension is used when it was built; otherwise the numpy
fallback is imported.  Set ``METEORFLOW_PURE_PYTHON=1`` to force the
fallback.  ``BACKEND`` names the implementation in use.
"""
import os

from . import _py

if os.environ.get("METEORFLOW_PURE_PYTHON", "") not in ("", "0"):
    _impl = _py
else:
    try:
        from . import _ext as _impl
    except ImportError:
        _impl = _py

BACKEND = "cython" if _impl is not _py else "python"

binarize = _impl.binarize
label = _impl.label
mutual_knn = _impl.mutual_knn
rigid_fit = _impl.rigid_fit
rigid_residuals = _impl.rigid_residuals


def available_backends():
    """Map backend name to kernel module for every importable backend."""
    out = {"python": _py}
    try:
        from . import _ext
    except ImportError:
        pass
    else:
        out["cython"] = _ext
    return out


def use(name):
    """Switch the active backend (``"cython"`` or ``"python"``) in place."""
    global BACKEND, binarize, label, mutual_knn, rigid_fit, rigid_residuals
    impl = available_backends()[name]
    BACKEND = name
    binarize = impl.binarize
    label = impl.label
    mutual_knn = impl.mutual_knn
    rigid_fit = impl.rigid_fit
    rigid_residuals = impl.rigid_residuals
