"""Numba-backed convolution kernels, the default backend.

The forward kernel accumulates per output element in (channel, tap-row,
tap-col) order starting from the bias, exactly like a naive six-nested-loop
convolution; fastmath stays off there so LLVM cannot re-associate or fuse
the adds, which keeps the output bit-identical to that oracle (and to the
numpy backend).  The stride-1 case gets its own kernel so the inner loop
vectorizes.

Backward has no bit-exactness contract, only determinism, so gradients are
lowered to GEMM: grad-weights contracts grad_out against im2col patches,
grad-input expands grad_out through the kernel and scatter-adds with
col2im.  im2col/col2im are jitted copies, the contractions run in BLAS.
"""

import numpy as np
from numba import njit, prange

NAME = "numba"


@njit(parallel=True, cache=True)
def _fwd_s1(x_pad, w, b, out):
    n, c, hp, wp = x_pad.shape
    d, _, kh, kw = w.shape
    _, _, oh, ow = out.shape
    for ni in prange(n):
        for di in range(d):
            plane = out[ni, di]
            for i in range(oh):
                for j in range(ow):
                    plane[i, j] = b[di]
            for ci in range(c):
                xp = x_pad[ni, ci]
                for ki in range(kh):
                    for kj in range(kw):
                        wv = w[di, ci, ki, kj]
                        for i in range(oh):
                            xrow = xp[i + ki]
                            prow = plane[i]
                            for j in range(ow):
                                prow[j] += xrow[j + kj] * wv


@njit(parallel=True, cache=True)
def _fwd_gen(x_pad, w, b, sy, sx, out):
    n, c, hp, wp = x_pad.shape
    d, _, kh, kw = w.shape
    _, _, oh, ow = out.shape
    for ni in prange(n):
        for di in range(d):
            plane = out[ni, di]
            for i in range(oh):
                for j in range(ow):
                    plane[i, j] = b[di]
            for ci in range(c):
                xp = x_pad[ni, ci]
                for ki in range(kh):
                    for kj in range(kw):
                        wv = w[di, ci, ki, kj]
                        for i in range(oh):
                            xrow = xp[i * sy + ki]
                            prow = plane[i]
                            for j in range(ow):
                                prow[j] += xrow[j * sx + kj] * wv


def conv2d_forward(x_pad, w, b, sy, sx, out):
    if sy == 1 and sx == 1:
        _fwd_s1(x_pad, w, b, out)
    else:
        _fwd_gen(x_pad, w, b, sy, sx, out)


@njit(parallel=True, cache=True, fastmath=True)
def _im2col(x_pad, kh, kw, sy, sx, oh, ow, cols):
    # cols: (n, oh*ow, c*kh*kw)
    n, c, hp, wp = x_pad.shape
    for ni in prange(n):
        for i in range(oh):
            for j in range(ow):
                r = i * ow + j
                k = 0
                for ci in range(c):
                    for ki in range(kh):
                        xrow = x_pad[ni, ci, i * sy + ki]
                        for kj in range(kw):
                            cols[ni, r, k] = xrow[j * sx + kj]
                            k += 1


@njit(parallel=True, cache=True, fastmath=True)
def _col2im_add(cols, kh, kw, sy, sx, oh, ow, gx_pad):
    n, c, hp, wp = gx_pad.shape
    for ni in prange(n):
        for i in range(oh):
            for j in range(ow):
                r = i * ow + j
                k = 0
                for ci in range(c):
                    for ki in range(kh):
                        grow = gx_pad[ni, ci, i * sy + ki]
                        for kj in range(kw):
                            grow[j * sx + kj] += cols[ni, r, k]
                            k += 1


def conv2d_backward_input(grad_out, w, sy, sx, gx_pad):
    n, d, oh, ow = grad_out.shape
    _, c, kh, kw = w.shape
    go2 = grad_out.reshape(n, d, oh * ow)
    w2 = w.reshape(d, c * kh * kw)
    cols = np.matmul(go2.transpose(0, 2, 1), w2)  # (n, oh*ow, c*kh*kw)
    _col2im_add(cols, kh, kw, sy, sx, oh, ow, gx_pad)


def conv2d_backward_weights(x_pad, grad_out, sy, sx, gw, gb):
    n, d, oh, ow = grad_out.shape
    _, c, kh, kw = gw.shape
    cols = np.empty((n, oh * ow, c * kh * kw), dtype=x_pad.dtype)
    _im2col(x_pad, kh, kw, sy, sx, oh, ow, cols)
    go_flat = np.ascontiguousarray(
        grad_out.transpose(1, 0, 2, 3).reshape(d, n * oh * ow)
    )
    gw += (go_flat @ cols.reshape(n * oh * ow, -1)).reshape(gw.shape)
    gb += grad_out.sum(axis=(0, 2, 3), dtype=gb.dtype)


def warmup():
    """Trigger JIT compilation on tiny inputs (first call is slow otherwise)."""
    for dt in (np.float64, np.float32):
        x = np.zeros((1, 1, 4, 4), dtype=dt)
        w = np.zeros((1, 1, 2, 2), dtype=dt)
        b = np.zeros(1, dtype=dt)
        for stride in (1, 2):
            oh = (4 - 2) // stride + 1
            out = np.zeros((1, 1, oh, oh), dtype=dt)
            conv2d_forward(x, w, b, stride, stride, out)
            conv2d_backward_input(out, w, stride, stride, x.copy())
            conv2d_backward_weights(x, out, stride, stride, w.copy(), b.copy())
