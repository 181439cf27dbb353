"""Pure-numpy convolution kernels.

Fallback path when numba is unavailable or LOWRANKCNN_BACKEND=numpy.  The
forward kernel accumulates one (channel, tap-row, tap-col) contribution per
step, in that order, starting from the bias.  Each output element therefore
sees exactly the same sequence of rounded multiply-then-add operations as a
naive six-nested-loop convolution, so the two agree bit for bit.
"""

import numpy as np

NAME = "numpy"


def conv2d_forward(x_pad, w, b, sy, sx, out):
    n, c, hp, wp = x_pad.shape
    d, _, kh, kw = w.shape
    _, _, oh, ow = out.shape
    out[:] = b.reshape(1, d, 1, 1)
    for ci in range(c):
        for ki in range(kh):
            for kj in range(kw):
                xs = x_pad[:, ci, ki : ki + (oh - 1) * sy + 1 : sy,
                           kj : kj + (ow - 1) * sx + 1 : sx]
                out += xs[:, None, :, :] * w[:, ci, ki, kj].reshape(1, d, 1, 1)


def conv2d_backward_input(grad_out, w, sy, sx, gx_pad):
    d, c, kh, kw = w.shape
    _, _, oh, ow = grad_out.shape
    for ki in range(kh):
        for kj in range(kw):
            # (n,d,oh,ow) x (d,c) -> (n,oh,ow,c)
            contrib = np.tensordot(grad_out, w[:, :, ki, kj], axes=([1], [0]))
            gx_pad[:, :, ki : ki + (oh - 1) * sy + 1 : sy,
                   kj : kj + (ow - 1) * sx + 1 : sx] += contrib.transpose(0, 3, 1, 2)


def conv2d_backward_weights(x_pad, grad_out, sy, sx, gw, gb):
    d, c, kh, kw = gw.shape
    _, _, oh, ow = grad_out.shape
    gb += grad_out.sum(axis=(0, 2, 3), dtype=gb.dtype)
    for ki in range(kh):
        for kj in range(kw):
            xs = x_pad[:, :, ki : ki + (oh - 1) * sy + 1 : sy,
                       kj : kj + (ow - 1) * sx + 1 : sx]
            # (n,d,oh,ow) x (n,c,oh,ow) -> (d,c)
            gw[:, :, ki, kj] += np.tensordot(
                grad_out, xs, axes=([0, 2, 3], [0, 2, 3])
            )
