"""Kernel backend selection.

The compiled extension is preferred; the NumPy fallback is used when the
extension was not built.  Both backends implement the same four functions
over the unordered pair list and are exercised against each other by the
test suite.  ``use_backend`` exists for tests and benchmarks; a run should
stay on one backend throughout.
"""

from . import _kernels_py

try:
    from . import _kernels

    _impl = _kernels
except ImportError:  # extension not built
    _kernels = None
    _impl = _kernels_py


def available_backends():
    names = ["python"]
    if _kernels is not None:
        names.insert(0, "cython")
    return names


def backend():
    """Name of the active backend ("cython" or "python")."""
    return _impl.BACKEND


def use_backend(name):
    """Switch the active backend; returns the previous backend name."""
    global _impl
    previous = _impl.BACKEND
    if name == "python":
        _impl = _kernels_py
    elif name == "cython":
        if _kernels is None:
            raise RuntimeError("compiled kernel extension is not available")
        _impl = _kernels
    else:
        raise ValueError(f"unknown kernel backend {name!r}")
    return previous


def pair_apply(ii, jj, w, x):
    return _impl.pair_apply(ii, jj, w, x)


def pair_gram_apply(ii, jj, w, x):
    return _impl.pair_gram_apply(ii, jj, w, x)


def pair_sq_rowsums(ii, jj, w, x):
    return _impl.pair_sq_rowsums(ii, jj, w, x)


def pair_loss_sq(ii, jj, x, x_ref, e):
    return _impl.pair_loss_sq(ii, jj, x, x_ref, e)
