# cython: language_level=3
"""Compiled inner loops. Every function here has a numpy twin in
``_kernels_py`` with the identical signature; ``kernels`` picks one at import.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, cos, sin, floor, ceil, fmod

cnp.import_array()


def expsum_eval(const double complex[:, ::1] points,
                const double[:, ::1] omegas,
                const double complex[::1] coeffs):
    cdef Py_ssize_t P = points.shape[0]
    cdef Py_ssize_t d = points.shape[1]
    cdef Py_ssize_t m = omegas.shape[0]
    cdef Py_ssize_t i, k, j
    cdef double re, im, mag
    cdef double complex acc
    out = np.empty(P, dtype=np.complex128)
    cdef double complex[::1] res = out
    for i in range(P):
        acc = 0
        for k in range(m):
            re = 0.0
            im = 0.0
            for j in range(d):
                re = re + omegas[k, j] * points[i, j].real
                im = im + omegas[k, j] * points[i, j].imag
            # exp(i w.z) = exp(-w.Im z) * (cos(w.Re z) + i sin(w.Re z))
            mag = exp(-im)
            acc = acc + coeffs[k] * (mag * cos(re) + 1j * mag * sin(re))
        res[i] = acc
    return out


def poly_expsum_eval(const double complex[::1] x,
                     const double complex[:, ::1] poly,
                     const double complex[::1] lambdas):
    cdef Py_ssize_t P = x.shape[0]
    cdef Py_ssize_t n = poly.shape[0]
    cdef Py_ssize_t m = poly.shape[1]
    cdef Py_ssize_t i, k, j
    cdef double complex z, arg, pv, acc, e
    cdef double mag
    out = np.empty(P, dtype=np.complex128)
    cdef double complex[::1] res = out
    for i in range(P):
        z = x[i]
        acc = 0
        for k in range(n):
            pv = poly[k, m - 1]
            for j in range(m - 2, -1, -1):
                pv = pv * z + poly[k, j]
            arg = 1j * lambdas[k] * z
            mag = exp(arg.real)
            e = mag * cos(arg.imag) + 1j * mag * sin(arg.imag)
            acc = acc + pv * e
        res[i] = acc
    return out


def periodic_window_sum(const double[:, :, ::1] arr, Py_ssize_t w):
    cdef Py_ssize_t A = arr.shape[0]
    cdef Py_ssize_t N = arr.shape[1]
    cdef Py_ssize_t B = arr.shape[2]
    cdef Py_ssize_t a, s, b, t
    cdef double run
    out = np.empty((A, N, B), dtype=np.float64)
    cdef double[:, :, ::1] res = out
    for a in range(A):
        for b in range(B):
            run = 0.0
            for t in range(w):
                run = run + arr[a, t % N, b]
            res[a, 0, b] = run
            for s in range(1, N):
                run = run - arr[a, s - 1, b] + arr[a, (s - 1 + w) % N, b]
                res[a, s, b] = run
    return out


def ray_density(const double[::1] weights,
                Py_ssize_t N,
                Py_ssize_t d,
                double h,
                const double[::1] origin,
                const double[:, ::1] directions,
                const double[::1] lengths,
                double per_unit):
    cdef Py_ssize_t D = directions.shape[0]
    cdef Py_ssize_t r, s, j, ns, flat, idx
    cdef double t, x, total
    out = np.zeros(D, dtype=np.float64)
    cdef double[::1] res = out
    for r in range(D):
        ns = <Py_ssize_t> ceil(lengths[r] * per_unit)
        if ns < 1:
            ns = 1
        total = 0.0
        for s in range(ns):
            t = (s + 0.5) / ns * lengths[r]
            flat = 0
            for j in range(d):
                x = origin[j] + t * directions[r, j]
                idx = <Py_ssize_t> floor(x / h + 0.5)
                idx = idx % N
                if idx < 0:
                    idx = idx + N
                flat = flat * N + idx
            total = total + weights[flat]
        res[r] = total / ns
    return out
