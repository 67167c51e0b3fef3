"""Pure numpy implementations of the hot kernels.

Kept signature-compatible with the compiled extension so the dispatcher can
swap either in. All functions take and return C-contiguous float64 or
complex128 arrays.
"""

import numpy as np

BACKEND = "python"


def box_sum_3d(values: np.ndarray, half: int) -> np.ndarray:
    """Sum over the (2*half+1)^3 box around each voxel, shrunk at borders.

    Implemented as three passes of a padded cumulative sum, which keeps the
    cost independent of box size.
    """
    out = np.asarray(values, dtype=np.float64)
    w = 2 * half + 1
    for axis in range(3):
        n = out.shape[axis]
        pad = np.zeros_like(np.take(out, [0] * half, axis=axis))
        padded = np.concatenate([pad, out, pad], axis=axis)
        c = np.cumsum(padded, axis=axis)
        zero = np.zeros_like(np.take(c, [0], axis=axis))
        c = np.concatenate([zero, c], axis=axis)
        hi = np.take(c, np.arange(w, w + n), axis=axis)
        lo = np.take(c, np.arange(0, n), axis=axis)
        out = hi - lo
    return np.ascontiguousarray(out)


def ratio_combine(s1, s2, s3, s4, floor):
    """Field-free combination of the four acquisitions.

    I = (S4* (S1+S2) - S3* (S1-S2)) / (2 (|S3|^2 + |S4|^2)); voxels whose
    channel power |S3|^2+|S4|^2 falls below ``floor``, or is exactly zero,
    come back invalid and zeroed. Returns (image, valid).
    """
    p = np.abs(s3) ** 2 + np.abs(s4) ** 2
    valid = (p >= floor) & (p > 0)
    num = np.conj(s4) * (s1 + s2) - np.conj(s3) * (s1 - s2)
    den = 2.0 * np.where(valid, p, 1.0)
    image = np.where(valid, num / den, 0.0 + 0.0j)
    return np.ascontiguousarray(image), np.ascontiguousarray(valid)


def verbatim_combine(s1, s2, s3, s4, floor):
    """Four-bracket combination with the conjugate-symmetrized average.

    C1 = S3* S1 + S4* S2*,  D1 = S3* S1 - S4* S2*
    C2 = S4* S1 - S3* S2*,  D2 = S4* S1 + S3* S2*
    I = (C1+D1+C2+D2 + (C1-D1+C2-D2)*) / (4 (|S3|^2 + |S4|^2))

    Same floor handling as ratio_combine. Returns (image, valid).
    """
    p = np.abs(s3) ** 2 + np.abs(s4) ** 2
    valid = (p >= floor) & (p > 0)
    c1 = np.conj(s3) * s1 + np.conj(s4) * np.conj(s2)
    d1 = np.conj(s3) * s1 - np.conj(s4) * np.conj(s2)
    c2 = np.conj(s4) * s1 - np.conj(s3) * np.conj(s2)
    d2 = np.conj(s4) * s1 + np.conj(s3) * np.conj(s2)
    num = c1 + d1 + c2 + d2 + np.conj(c1 - d1 + c2 - d2)
    den = 4.0 * np.where(valid, p, 1.0)
    image = np.where(valid, num / den, 0.0 + 0.0j)
    return np.ascontiguousarray(image), np.ascontiguousarray(valid)
