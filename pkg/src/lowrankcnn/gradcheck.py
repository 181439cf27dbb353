"""Finite-difference verification of every backward operation.

Each op is scalarized as J = sum(R * f(x)) for a fixed random projection R;
the analytic gradient comes from the op's backward with grad_out = R, the
numerical one from central differences (f(x + eps) - f(x - eps)) / (2 eps)
per element.  Everything runs in float64.  The reported error is the max
absolute deviation divided by the largest gradient magnitude involved.
"""

from dataclasses import dataclass

import numpy as np

from . import composite, ops
from .composite import CompositeConvSpec, FilterGroup
from .ops import ConvWeights
from .rng import Rng

EPSILON = 1e-5
TOLERANCE = 1e-6


def numerical_grad(f, x, epsilon=EPSILON):
    """Central-difference gradient of scalar f w.r.t. every element of x."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + epsilon
        hi = f()
        flat[i] = orig - epsilon
        lo = f()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * epsilon)
    return g


def rel_error(analytic, numeric):
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-8)
    return float(np.abs(analytic - numeric).max() / scale)


def _rand(rng, shape):
    return rng.normal(int(np.prod(shape))).reshape(shape)


def _randint(rng, lo, hi):
    """One int uniform on [lo, hi)."""
    return lo + int(rng.integers(1, hi - lo)[0])


def _spread(rng, shape):
    """Random tensor whose elements are pairwise separated by >= 0.4.

    Max-pool gradients are only differentiable while the argmax is stable;
    spacing the values keeps a +-eps probe from flipping any window winner.
    """
    size = int(np.prod(shape))
    vals = rng.permutation(size).astype(np.float64) * 0.5
    return vals.reshape(shape) + _rand(rng, shape) * 1e-4


def check_conv(rng):
    c, d = _randint(rng, 1, 4), _randint(rng, 1, 4)
    kh, kw = _randint(rng, 1, 4), _randint(rng, 1, 4)
    h = kh + _randint(rng, 1, 5)
    w = kw + _randint(rng, 1, 5)
    stride = (_randint(rng, 1, 3), _randint(rng, 1, 3))
    pad = (kh // 2, kw // 2)
    x = _rand(rng, (2, c, h, w))
    wt = ConvWeights(_rand(rng, (d, c, kh, kw)), _rand(rng, (d,)))
    out = ops.conv2d_forward(x, wt, stride, pad)
    r = _rand(rng, out.shape)

    def j():
        return float((ops.conv2d_forward(x, wt, stride, pad) * r).sum())

    b = ops.conv2d_backward(x, wt, r, stride, pad)
    return max(
        rel_error(b.grad_input, numerical_grad(j, x)),
        rel_error(b.grad_weights, numerical_grad(j, wt.weights)),
        rel_error(b.grad_bias, numerical_grad(j, wt.bias)),
    )


def _random_composite(rng, with_join):
    c = _randint(rng, 1, 4)
    n_groups = _randint(rng, 1, 4)
    groups = []
    for _ in range(n_groups):
        # odd kernels so "same" padding keeps group outputs aligned
        kh = 2 * _randint(rng, 0, 2) + 1
        kw = 2 * _randint(rng, 0, 2) + 1
        groups.append(FilterGroup(kh, kw, _randint(rng, 1, 4)))
    join = _randint(rng, 1, 5) if with_join else None
    spec = CompositeConvSpec(tuple(groups), (1, 1), join)
    params = composite.init_zero_params(spec, c)
    for gw in params.groups:
        gw.weights[:] = _rand(rng, gw.weights.shape)
        gw.bias[:] = _rand(rng, gw.bias.shape)
    if params.join is not None:
        params.join.weights[:] = _rand(rng, params.join.weights.shape)
        params.join.bias[:] = _rand(rng, params.join.bias.shape)
    h, w = _randint(rng, 3, 7), _randint(rng, 3, 7)
    x = _rand(rng, (2, c, h, w))
    return spec, params, x


def check_composite(rng, with_join):
    spec, params, x = _random_composite(rng, with_join)
    out = composite.composite_forward(x, spec, params)
    r = _rand(rng, out.shape)

    def j():
        return float((composite.composite_forward(x, spec, params) * r).sum())

    grad_input, bundles, join_b = composite.composite_backward(x, spec, params, r)
    errs = [rel_error(grad_input, numerical_grad(j, x))]
    for gw, b in zip(params.groups, bundles):
        errs.append(rel_error(b.grad_weights, numerical_grad(j, gw.weights)))
        errs.append(rel_error(b.grad_bias, numerical_grad(j, gw.bias)))
    if join_b is not None:
        errs.append(rel_error(join_b.grad_weights,
                              numerical_grad(j, params.join.weights)))
        errs.append(rel_error(join_b.grad_bias,
                              numerical_grad(j, params.join.bias)))
    return max(errs)


def check_maxpool(rng):
    h, w = 2 * _randint(rng, 1, 4), 2 * _randint(rng, 1, 4)
    x = _spread(rng, (2, 2, h, w))
    out, idx = ops.maxpool_forward(x)
    r = _rand(rng, out.shape)

    def j():
        return float((ops.maxpool_forward(x)[0] * r).sum())

    g = ops.maxpool_backward(idx, r, x.shape)
    return rel_error(g, numerical_grad(j, x))


def check_global_maxpool(rng):
    h, w = _randint(rng, 2, 6), _randint(rng, 2, 6)
    x = _spread(rng, (2, 3, h, w))
    out, idx = ops.global_maxpool_forward(x)
    r = _rand(rng, out.shape)

    def j():
        return float((ops.global_maxpool_forward(x)[0] * r).sum())

    g = ops.global_maxpool_backward(idx, r, x.shape)
    return rel_error(g, numerical_grad(j, x))


def check_relu(rng):
    x = _rand(rng, (2, 3, 4, 4))
    # differentiability holds only away from the kink at 0
    x = x + np.sign(x) * 1e-2 + (x == 0) * 1e-2
    r = _rand(rng, x.shape)

    def j():
        return float((ops.relu_forward(x) * r).sum())

    g = ops.relu_backward(x, r)
    return rel_error(g, numerical_grad(j, x))


def check_dense(rng):
    n, k, m = 2, _randint(rng, 2, 9), _randint(rng, 2, 6)
    x = _rand(rng, (n, 1, 1, k))
    w = _rand(rng, (k, m))
    b = _rand(rng, (m,))
    r = _rand(rng, (n, m))

    def j():
        return float((ops.dense_forward(x, w, b) * r).sum())

    gx, gw, gb = ops.dense_backward(x, w, r)
    return max(
        rel_error(gx, numerical_grad(j, x)),
        rel_error(gw, numerical_grad(j, w)),
        rel_error(gb, numerical_grad(j, b)),
    )


def check_softmax_xent(rng):
    n, k = 3, 4
    logits = _rand(rng, (n, k))
    labels = rng.integers(n, k)

    def j():
        return ops.softmax_xent(logits, labels)[0]

    _, grad = ops.softmax_xent(logits, labels)
    return rel_error(grad, numerical_grad(j, logits))


@dataclass(frozen=True)
class SuiteRow:
    op: str
    cases: int
    max_rel_err: float


_CHECKS = [
    ("conv2d", check_conv, 30),
    ("composite", lambda rng: check_composite(rng, False), 15),
    ("composite-join", lambda rng: check_composite(rng, True), 15),
    ("maxpool", check_maxpool, 10),
    ("global-maxpool", check_global_maxpool, 10),
    ("relu", check_relu, 10),
    ("dense", check_dense, 10),
    ("softmax-xent", check_softmax_xent, 10),
]


def run_suite(seed=0, scale=1):
    """Run every check `scale` x its default case count; returns SuiteRows."""
    rows = []
    for name, fn, cases in _CHECKS:
        n = max(1, int(cases * scale))
        worst = 0.0
        for case in range(n):
            rng = Rng(seed).derive(name, case)
            worst = max(worst, fn(rng))
        rows.append(SuiteRow(name, n, worst))
    return rows
