# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled implementations of the hot kernels.

Same contracts as the numpy fallback: C-contiguous float64/complex128 in,
(image, valid) or summed array out, floor applied to the channel power.
"""

import numpy as np

BACKEND = "compiled"


cdef void _line_boxsum(const double* src, double* dst, Py_ssize_t n,
                       Py_ssize_t stride, Py_ssize_t half) noexcept nogil:
    # running window sum, window shrunk at the borders
    cdef double s = 0.0
    cdef Py_ssize_t k
    cdef Py_ssize_t hi = half if half < n - 1 else n - 1
    for k in range(hi + 1):
        s += src[k * stride]
    dst[0] = s
    for k in range(1, n):
        if k + half < n:
            s += src[(k + half) * stride]
        if k - half - 1 >= 0:
            s -= src[(k - half - 1) * stride]
        dst[k * stride] = s


def box_sum_3d(values, half):
    """Sum over the (2*half+1)^3 box around each voxel, shrunk at borders."""
    cdef Py_ssize_t h = half
    if h < 0:
        raise ValueError("half must be >= 0")
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError("box_sum_3d expects a 3-d array")
    tmp = np.empty_like(arr)
    out = np.empty_like(arr)
    cdef const double[:, :, ::1] a = arr
    cdef double[:, :, ::1] t = tmp
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t nx = a.shape[0], ny = a.shape[1], nz = a.shape[2]
    cdef Py_ssize_t i, j, k
    cdef const double* pa = &a[0, 0, 0]
    cdef double* pt = &t[0, 0, 0]
    cdef double* po = &o[0, 0, 0]
    with nogil:
        for i in range(nx):
            for j in range(ny):
                _line_boxsum(pa + (i * ny + j) * nz, po + (i * ny + j) * nz, nz, 1, h)
        for i in range(nx):
            for k in range(nz):
                _line_boxsum(po + i * ny * nz + k, pt + i * ny * nz + k, ny, nz, h)
        for j in range(ny):
            for k in range(nz):
                _line_boxsum(pt + j * nz + k, po + j * nz + k, nx, ny * nz, h)
    return out


cdef inline double _power(double complex x3, double complex x4) noexcept nogil:
    return (x3.real * x3.real + x3.imag * x3.imag
            + x4.real * x4.real + x4.imag * x4.imag)


def _as_flat_complex(name, x, Py_ssize_t n):
    arr = np.ascontiguousarray(x, dtype=np.complex128)
    if n >= 0 and arr.size != n:
        raise ValueError(f"{name} has {arr.size} samples, expected {n}")
    return arr


def ratio_combine(s1, s2, s3, s4, double floor):
    """Field-free combination of the four acquisitions.

    I = (S4* (S1+S2) - S3* (S1-S2)) / (2 (|S3|^2 + |S4|^2)); voxels whose
    channel power falls below ``floor``, or is exactly zero, come back
    invalid and zeroed.
    """
    a1 = _as_flat_complex("s1", s1, -1)
    a2 = _as_flat_complex("s2", s2, a1.size)
    a3 = _as_flat_complex("s3", s3, a1.size)
    a4 = _as_flat_complex("s4", s4, a1.size)
    out = np.empty_like(a1)
    valid = np.empty(a1.shape, dtype=np.uint8)
    cdef const double complex[::1] v1 = a1.ravel()
    cdef const double complex[::1] v2 = a2.ravel()
    cdef const double complex[::1] v3 = a3.ravel()
    cdef const double complex[::1] v4 = a4.ravel()
    cdef double complex[::1] vo = out.ravel()
    cdef unsigned char[::1] vv = valid.ravel()
    cdef Py_ssize_t i, n = v1.shape[0]
    cdef double p
    cdef double complex x1, x2, x3, x4, num
    with nogil:
        for i in range(n):
            x1 = v1[i]; x2 = v2[i]; x3 = v3[i]; x4 = v4[i]
            p = _power(x3, x4)
            if p >= floor and p > 0.0:
                num = x4.conjugate() * (x1 + x2) - x3.conjugate() * (x1 - x2)
                vo[i] = num / (2.0 * p)
                vv[i] = 1
            else:
                vo[i] = 0.0
                vv[i] = 0
    return out, valid.view(np.bool_)


def verbatim_combine(s1, s2, s3, s4, double floor):
    """Four-bracket combination with the conjugate-symmetrized average.

    C1 = S3* S1 + S4* S2*,  D1 = S3* S1 - S4* S2*
    C2 = S4* S1 - S3* S2*,  D2 = S4* S1 + S3* S2*
    I = (C1+D1+C2+D2 + (C1-D1+C2-D2)*) / (4 (|S3|^2 + |S4|^2))
    """
    a1 = _as_flat_complex("s1", s1, -1)
    a2 = _as_flat_complex("s2", s2, a1.size)
    a3 = _as_flat_complex("s3", s3, a1.size)
    a4 = _as_flat_complex("s4", s4, a1.size)
    out = np.empty_like(a1)
    valid = np.empty(a1.shape, dtype=np.uint8)
    cdef const double complex[::1] v1 = a1.ravel()
    cdef const double complex[::1] v2 = a2.ravel()
    cdef const double complex[::1] v3 = a3.ravel()
    cdef const double complex[::1] v4 = a4.ravel()
    cdef double complex[::1] vo = out.ravel()
    cdef unsigned char[::1] vv = valid.ravel()
    cdef Py_ssize_t i, n = v1.shape[0]
    cdef double p
    cdef double complex x1, x2c, c3, c4, c1t, d1t, c2t, d2t, num
    with nogil:
        for i in range(n):
            x1 = v1[i]; x2c = v2[i].conjugate()
            c3 = v3[i].conjugate(); c4 = v4[i].conjugate()
            p = _power(v3[i], v4[i])
            if p >= floor and p > 0.0:
                c1t = c3 * x1 + c4 * x2c
                d1t = c3 * x1 - c4 * x2c
                c2t = c4 * x1 - c3 * x2c
                d2t = c4 * x1 + c3 * x2c
                num = c1t + d1t + c2t + d2t + (c1t - d1t + c2t - d2t).conjugate()
                vo[i] = num / (4.0 * p)
                vv[i] = 1
            else:
                vo[i] = 0.0
                vv[i] = 0
    return out, valid.view(np.bool_)
