# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled mesh kernels; see ``specbound._kernels_py`` for the reference versions."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef inline double _heron(double x, double y, double z) noexcept nogil:
    cdef double a = x, b = y, c = z, tmp, prod
    if a < b:
        tmp = a; a = b; b = tmp
    if b < c:
        tmp = b; b = c; c = tmp
    if a < b:
        tmp = a; a = b; b = tmp
    prod = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))
    if prod > 0 and c > 0:
        return 0.25 * sqrt(prod)
    return -1.0


def triangle_areas(lengths):
    cdef const double[:, ::1] L = np.ascontiguousarray(lengths, dtype=np.float64)
    cdef Py_ssize_t nf = L.shape[0], f
    out = np.empty(nf)
    cdef double[::1] A = out
    with nogil:
        for f in range(nf):
            A[f] = _heron(L[f, 0], L[f, 1], L[f, 2])
    return out


def cotan_assemble(faces, lengths):
    cdef const long long[:, ::1] F = np.ascontiguousarray(faces, dtype=np.int64)
    cdef const double[:, ::1] L = np.ascontiguousarray(lengths, dtype=np.float64)
    cdef Py_ssize_t nf = F.shape[0], f, j, a, b, k
    area_arr = triangle_areas(L)
    cdef double[::1] area = area_arr
    if nf and np.min(area_arr) <= 0:
        raise ValueError("degenerate triangle in assembly")
    rows_arr = np.empty(12 * nf, dtype=np.int64)
    cols_arr = np.empty(12 * nf, dtype=np.int64)
    vals_arr = np.empty(12 * nf)
    cdef long long[::1] rows = rows_arr, cols = cols_arr
    cdef double[::1] vals = vals_arr
    cdef long long nv = (np.max(faces) + 1) if nf else 0
    mass_arr = np.zeros(nv)
    cdef double[::1] mass = mass_arr
    cdef double w, la, lb, lj, third
    cdef long long va, vb
    with nogil:
        for f in range(nf):
            for j in range(3):
                a = (j + 1) % 3
                b = (j + 2) % 3
                la = L[f, a] * L[f, a]
                lb = L[f, b] * L[f, b]
                lj = L[f, j] * L[f, j]
                w = (la + lb - lj) / (4.0 * area[f]) / 2.0
                va = F[f, a]
                vb = F[f, b]
                k = 12 * f + 4 * j
                rows[k] = va; cols[k] = vb; vals[k] = -w
                rows[k + 1] = vb; cols[k + 1] = va; vals[k + 1] = -w
                rows[k + 2] = va; cols[k + 2] = va; vals[k + 2] = w
                rows[k + 3] = vb; cols[k + 3] = vb; vals[k + 3] = w
        # lumped mass accumulated face by face in the same order as np.add.at per corner
        for j in range(3):
            for f in range(nf):
                third = area[f] / 3.0
                mass[F[f, j]] += third
    return rows_arr, cols_arr, vals_arr, mass_arr, area_arr
