"""Primitive layer operations on dense (batch, channel, row, col) arrays.

Every forward op here has an exact backward counterpart; the test suite
checks each pair against central finite differences.  Tensors are plain
numpy arrays in row-major (n, c, h, w) order.  Verification paths run in
float64; float32 is accepted everywhere for training speed.

Convolution is cross-correlation (no kernel flip) with zero padding, the
convention of every mainstream CNN framework.
"""

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import ShapeError

_FLOAT_DTYPES = (np.float32, np.float64)


def check_tensor(t, op="op"):
    """Assert `t` is a 4-d float array; returns it for chaining."""
    if not isinstance(t, np.ndarray) or t.ndim != 4:
        raise ShapeError(op, "ndim", 4, getattr(t, "ndim", type(t).__name__))
    if t.dtype.type not in _FLOAT_DTYPES:
        raise ShapeError(op, "dtype", "float32/float64", str(t.dtype))
    return t


@dataclass
class ConvWeights:
    """Filter bank: weights (d, c, kh, kw) and per-filter bias (d,)."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if self.weights.ndim != 4:
            raise ShapeError("ConvWeights", "weights.ndim", 4, self.weights.ndim)
        if self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(
                "ConvWeights", "bias", (self.weights.shape[0],), self.bias.shape
            )

    @property
    def d(self):
        return self.weights.shape[0]

    @property
    def c(self):
        return self.weights.shape[1]

    @property
    def kh(self):
        return self.weights.shape[2]

    @property
    def kw(self):
        return self.weights.shape[3]


@dataclass
class GradBundle:
    """Gradients of a conv layer; shapes mirror the forward arguments."""

    grad_input: np.ndarray
    grad_weights: np.ndarray
    grad_bias: np.ndarray


def same_pad(kh, kw):
    """Padding that preserves spatial dims at stride 1 for odd kernels."""
    return kh // 2, kw // 2


def conv_out_shape(h, w, kh, kw, stride, pad):
    sy, sx = stride
    py, px = pad
    return (h + 2 * py - kh) // sy + 1, (w + 2 * px - kw) // sx + 1


def _pad(x, py, px):
    if py == 0 and px == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (py, py), (px, px)))


def _check_conv_args(x, w, stride, pad, op):
    check_tensor(x, op)
    if w.weights.dtype != x.dtype:
        raise ShapeError(op, "weights.dtype", str(x.dtype), str(w.weights.dtype))
    if w.c != x.shape[1]:
        raise ShapeError(op, "input channels", w.c, x.shape[1])
    sy, sx = stride
    py, px = pad
    if sy < 1 or sx < 1:
        raise ShapeError(op, "stride", ">= 1", stride)
    oh, ow = conv_out_shape(x.shape[2], x.shape[3], w.kh, w.kw, stride, pad)
    if oh < 1 or ow < 1:
        raise ShapeError(
            op, "kernel extent", f"<= padded input {x.shape[2] + 2 * py}x{x.shape[3] + 2 * px}",
            f"{w.kh}x{w.kw}",
        )
    return oh, ow


def conv2d_forward(x, w, stride=(1, 1), pad=(0, 0)):
    """Cross-correlate `x` with the filter bank `w`.

    Output shape is (n, d, (h+2*py-kh)//sy+1, (w+2*px-kw)//sx+1); bias is
    added per output channel.
    """
    oh, ow = _check_conv_args(x, w, stride, pad, "conv2d_forward")
    x_pad = _pad(x, *pad)
    out = np.empty((x.shape[0], w.d, oh, ow), dtype=x.dtype)
    backend.active().conv2d_forward(x_pad, w.weights, w.bias, stride[0], stride[1], out)
    return out


def conv2d_backward(x, w, grad_out, stride=(1, 1), pad=(0, 0)):
    """Exact gradients of sum(grad_out * conv2d_forward(x, w)) w.r.t. x, w, b."""
    oh, ow = _check_conv_args(x, w, stride, pad, "conv2d_backward")
    expect = (x.shape[0], w.d, oh, ow)
    if grad_out.shape != expect:
        raise ShapeError("conv2d_backward", "grad_out shape", expect, grad_out.shape)
    py, px = pad
    x_pad = _pad(x, py, px)
    kern = backend.active()
    gx_pad = np.zeros_like(x_pad)
    gw = np.zeros_like(w.weights)
    gb = np.zeros_like(w.bias)
    grad_out = np.ascontiguousarray(grad_out)
    kern.conv2d_backward_input(grad_out, w.weights, stride[0], stride[1], gx_pad)
    kern.conv2d_backward_weights(x_pad, grad_out, stride[0], stride[1], gw, gb)
    if py or px:
        gx = gx_pad[:, :, py : py + x.shape[2], px : px + x.shape[3]].copy()
    else:
        gx = gx_pad
    return GradBundle(gx, gw, gb)


def maxpool_forward(x):
    """2x2 max pooling at stride 2.

    Returns (output, indices) where indices holds, per output element, the
    flat h*w position of the window maximum in the input plane.  Ties go to
    the first element in row-major scan order (argmax semantics).
    """
    check_tensor(x, "maxpool_forward")
    n, c, h, w = x.shape
    if h < 2 or w < 2:
        raise ShapeError("maxpool_forward", "spatial dims", ">= 2", (h, w))
    oh, ow = h // 2, w // 2
    xt = x[:, :, : oh * 2, : ow * 2]
    win = (
        xt.reshape(n, c, oh, 2, ow, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, oh, ow, 4)
    )
    k = win.argmax(axis=-1)
    out = np.take_along_axis(win, k[..., None], axis=-1)[..., 0]
    rows = np.arange(oh).reshape(1, 1, oh, 1) * 2 + k // 2
    cols = np.arange(ow).reshape(1, 1, 1, ow) * 2 + k % 2
    idx = (rows * w + cols).astype(np.int64)
    return out, idx


def maxpool_backward(idx, grad_out, input_shape):
    """Route each grad_out element to its stored argmax position."""
    n, c, h, w = input_shape
    gx = np.zeros((n, c, h * w), dtype=grad_out.dtype)
    np.put_along_axis(
        gx, idx.reshape(n, c, -1), grad_out.reshape(n, c, -1), axis=2
    )
    return gx.reshape(n, c, h, w)


def global_maxpool_forward(x):
    """Per-channel spatial max to (n, c, 1, 1); ties to first scan position."""
    check_tensor(x, "global_maxpool_forward")
    n, c, h, w = x.shape
    flat = x.reshape(n, c, h * w)
    idx = flat.argmax(axis=2)
    out = np.take_along_axis(flat, idx[..., None], axis=2).reshape(n, c, 1, 1)
    return out, idx.astype(np.int64)


def global_maxpool_backward(idx, grad_out, input_shape):
    n, c, h, w = input_shape
    gx = np.zeros((n, c, h * w), dtype=grad_out.dtype)
    np.put_along_axis(gx, idx[..., None], grad_out.reshape(n, c, 1), axis=2)
    return gx.reshape(n, c, h, w)


def relu_forward(x):
    return np.maximum(x, 0)


def relu_backward(x, grad_out):
    """Multiply by the indicator x > 0; the subgradient at 0 is 0."""
    return np.where(x > 0, grad_out, 0)


def dense_forward(x, weights, bias):
    """Affine map on flattened input: (n, k) @ (k, m) + (m,)."""
    x2 = x.reshape(x.shape[0], -1)
    if x2.shape[1] != weights.shape[0]:
        raise ShapeError("dense_forward", "fan-in", weights.shape[0], x2.shape[1])
    return x2 @ weights + bias


def dense_backward(x, weights, grad_out):
    x2 = x.reshape(x.shape[0], -1)
    gx = (grad_out @ weights.T).reshape(x.shape)
    gw = x2.T @ grad_out
    gb = grad_out.sum(axis=0)
    return gx, gw, gb


def softmax_xent(logits, labels):
    """Mean cross-entropy of softmax(logits) against integer labels.

    Returns (loss, grad_logits) with grad = (softmax - onehot) / n.  Uses
    max subtraction so large logits cannot overflow.
    """
    n, k = logits.shape
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ShapeError("softmax_xent", "labels shape", (n,), labels.shape)
    if labels.min() < 0 or labels.max() >= k:
        raise ShapeError("softmax_xent", "label range", f"[0, {k})",
                         (int(labels.min()), int(labels.max())))
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    z = exp.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(z)
    loss = -float(log_probs[np.arange(n), labels].mean())
    grad = exp / z
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, grad.astype(logits.dtype)


def softmax_probs(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def concat_channels(parts):
    """Concatenate along the channel axis; all parts must share n, h, w."""
    if not parts:
        raise ShapeError("concat_channels", "parts", ">= 1 tensor", 0)
    first = parts[0]
    for i, p in enumerate(parts[1:], start=1):
        for axis, name in ((0, "batch"), (2, "rows"), (3, "cols")):
            if p.shape[axis] != first.shape[axis]:
                raise ShapeError(
                    "concat_channels", f"part {i} {name}", first.shape[axis], p.shape[axis]
                )
    return np.concatenate(parts, axis=1)


def split_channels(x, sizes):
    """Exact inverse of concat_channels for the given channel sizes."""
    if sum(sizes) != x.shape[1]:
        raise ShapeError("split_channels", "channel total", x.shape[1], sum(sizes))
    splits = np.cumsum(sizes[:-1])
    return [np.ascontiguousarray(p) for p in np.split(x, splits, axis=1)]
