"""Backend selection for the hot loops.

The compiled extension ``_kernels`` is used when it was built; otherwise, or
when the environment variable ``UNCERTAINTY_LAB_PURE`` is set to a non-empty
value other than ``0``, the numpy implementations are used. Both backends take
and return the same array types, and wrappers here normalise dtypes and
memory layout so callers never have to.
"""

import os

import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None

_force_pure = os.environ.get("UNCERTAINTY_LAB_PURE", "") not in ("", "0")

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

BACKEND = "python" if (_force_pure or _compiled is None) else "compiled"
_impl = BACKENDS[BACKEND]


def _get(backend):
    return _impl if backend is None else BACKENDS[backend]


def expsum_eval(points, omegas, coeffs, backend=None):
    """Evaluate ``sum_k c_k exp(i w_k . z)`` at complex points ``z`` (shape ``(P, d)``)."""
    points = np.ascontiguousarray(points, dtype=np.complex128)
    omegas = np.ascontiguousarray(omegas, dtype=np.float64)
    coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
    if points.ndim == 1:
        points = points[:, None]
    if omegas.ndim == 1:
        omegas = omegas[:, None]
    return _get(backend).expsum_eval(points, omegas, coeffs)


def poly_expsum_eval(x, poly, lambdas, backend=None):
    """Evaluate ``sum_k p_k(x) exp(i lambda_k x)`` at complex points ``x``."""
    x = np.ascontiguousarray(np.ravel(x), dtype=np.complex128)
    poly = np.ascontiguousarray(poly, dtype=np.complex128)
    lambdas = np.ascontiguousarray(lambdas, dtype=np.complex128)
    return _get(backend).poly_expsum_eval(x, poly, lambdas)


def periodic_window_sum(arr, w, axis, backend=None):
    """Sum of `w` consecutive entries (with wrap-around) starting at each index along `axis`."""
    arr = np.asarray(arr, dtype=np.float64)
    n = arr.shape[axis]
    if not 1 <= w <= n:
        raise ValueError(f"window length {w} outside [1, {n}]")
    moved = np.moveaxis(arr, axis, 0)
    shape = moved.shape
    outer = 1
    inner = int(np.prod(shape[1:], dtype=np.int64))
    arr3 = np.ascontiguousarray(moved.reshape(outer, n, inner))
    res = _get(backend).periodic_window_sum(arr3, int(w))
    return np.moveaxis(np.asarray(res).reshape(shape), 0, axis)


def ray_density(weights, h, origin, directions, lengths, per_unit, backend=None):
    """Average of grid `weights` (nearest-point lookup, periodic) along each ray."""
    weights = np.asarray(weights, dtype=np.float64)
    d = weights.ndim
    N = weights.shape[0]
    flat = np.ascontiguousarray(weights.ravel())
    origin = np.ascontiguousarray(origin, dtype=np.float64)
    directions = np.ascontiguousarray(directions, dtype=np.float64)
    lengths = np.ascontiguousarray(lengths, dtype=np.float64)
    return np.asarray(
        _get(backend).ray_density(flat, N, d, float(h), origin, directions, lengths, float(per_unit))
    )
