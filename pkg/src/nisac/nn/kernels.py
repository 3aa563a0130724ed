"""Gather/scatter kernels behind the convolution layers (channels-last layout).

``im2col`` turns an [N, H, W, C] batch into rows of k*k*C patch values
(order ky, kx, c) for a stride-1 "same" convolution; ``col2im`` is its
adjoint and accumulates patch gradients back into the image. The matrix
products themselves go through BLAS.
"""

import numpy as np

from .._accel import HAVE_NUMBA, njit


@njit(cache=True)
def _im2col_loops(x, k):
    n, h, w, c = x.shape
    pad = k // 2
    cols = np.zeros((n, h, w, k, k, c), dtype=x.dtype)
    for b in range(n):
        for i in range(h):
            for j in range(w):
                for ky in range(k):
                    ii = i + ky - pad
                    if ii < 0 or ii >= h:
                        continue
                    for kx in range(k):
                        jj = j + kx - pad
                        if jj < 0 or jj >= w:
                            continue
                        for ch in range(c):
                            cols[b, i, j, ky, kx, ch] = x[b, ii, jj, ch]
    return cols.reshape(n * h * w, k * k * c)


@njit(cache=True)
def _col2im_loops(cols, n, h, w, c, k):
    pad = k // 2
    cols6 = cols.reshape(n, h, w, k, k, c)
    x = np.zeros((n, h, w, c), dtype=cols.dtype)
    for b in range(n):
        for i in range(h):
            for j in range(w):
                for ky in range(k):
                    ii = i + ky - pad
                    if ii < 0 or ii >= h:
                        continue
                    for kx in range(k):
                        jj = j + kx - pad
                        if jj < 0 or jj >= w:
                            continue
                        for ch in range(c):
                            x[b, ii, jj, ch] += cols6[b, i, j, ky, kx, ch]
    return x


def _im2col_numpy(x, k):
    n, h, w, c = x.shape
    pad = k // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    cols = np.empty((n, h, w, k, k, c), dtype=x.dtype)
    for ky in range(k):
        for kx in range(k):
            cols[:, :, :, ky, kx, :] = xp[:, ky:ky + h, kx:kx + w, :]
    return cols.reshape(n * h * w, k * k * c)


def _col2im_numpy(cols, n, h, w, c, k):
    pad = k // 2
    cols6 = cols.reshape(n, h, w, k, k, c)
    xp = np.zeros((n, h + 2 * pad, w + 2 * pad, c), dtype=cols.dtype)
    for ky in range(k):
        for kx in range(k):
            xp[:, ky:ky + h, kx:kx + w, :] += cols6[:, :, :, ky, kx, :]
    return xp[:, pad:pad + h, pad:pad + w, :]


def im2col(x: np.ndarray, k: int, use_numba: bool = HAVE_NUMBA) -> np.ndarray:
    x = np.ascontiguousarray(x)
    if k == 1:
        return x.reshape(-1, x.shape[-1])
    if use_numba:
        return _im2col_loops(x, k)
    return _im2col_numpy(x, k)


def col2im(cols: np.ndarray, shape, k: int, use_numba: bool = HAVE_NUMBA) -> np.ndarray:
    n, h, w, c = shape
    if k == 1:
        return cols.reshape(n, h, w, c)
    cols = np.ascontiguousarray(cols)
    if use_numba:
        return _col2im_loops(cols, n, h, w, c, k)
    return _col2im_numpy(cols, n, h, w, c, k)
