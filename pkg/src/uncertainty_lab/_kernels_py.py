"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np

_CHUNK = 1 << 14


def expsum_eval(points, omegas, coeffs):
    """Evaluate ``sum_k coeffs[k] * exp(i omegas[k] . z)`` at each row ``z`` of `points`."""
    points = np.asarray(points, dtype=np.complex128)
    out = np.empty(points.shape[0], dtype=np.complex128)
    for start in range(0, points.shape[0], _CHUNK):
        block = points[start:start + _CHUNK]
        out[start:start + _CHUNK] = np.exp(1j * (block @ omegas.T)) @ coeffs
    return out


def poly_expsum_eval(x, poly, lambdas):
    """Evaluate ``sum_k p_k(x) exp(i lambda_k x)``; ``poly[k]`` holds ascending coefficients."""
    x = np.asarray(x, dtype=np.complex128)
    out = np.zeros(x.shape[0], dtype=np.complex128)
    for k in range(poly.shape[0]):
        pv = np.zeros_like(x)
        for c in poly[k, ::-1]:
            pv = pv * x + c
        out += pv * np.exp(1j * lambdas[k] * x)
    return out


def periodic_window_sum(arr, w):
    """Periodic running sum of length `w` along axis 1 of a 3-d array."""
    n = arr.shape[1]
    ext = np.concatenate([arr, arr[:, :w]], axis=1)
    cs = np.concatenate([np.zeros_like(arr[:, :1]), np.cumsum(ext, axis=1)], axis=1)
    return cs[:, w:w + n] - cs[:, :n]


def ray_density(weights, N, d, h, origin, directions, lengths, per_unit):
    """Mean grid weight sampled at midpoints along rays from `origin`."""
    out = np.zeros(directions.shape[0])
    counts = np.maximum(np.ceil(lengths * per_unit).astype(np.int64), 1)
    for r in range(directions.shape[0]):
        ns = counts[r]
        t = (np.arange(ns) + 0.5) / ns * lengths[r]
        pts = origin[None, :] + t[:, None] * directions[r][None, :]
        idx = np.floor(pts / h + 0.5).astype(np.int64) % N
        flat = np.zeros(ns, dtype=np.int64)
        for j in range(d):
            flat = flat * N + idx[:, j]
        out[r] = weights[flat].mean()
    return out
