"""Forward and backward execution of an ArchSpec over a parameter list.

Parameters are a list aligned with arch.layers; each entry is a dict from
role name ("weight", "bias", "group0.weight", "join.bias", ...) to a numpy
array, empty for parameterless layers.  Gradients mirror that structure
exactly.  Dense layers flatten (n, c, h, w) input to (n, c*h*w) row-major.
"""

import numpy as np

from . import composite, ops, zoo
from .composite import CompositeParams
from .errors import ArchError
from .ops import ConvWeights


def as_conv_weights(block, prefix=""):
    return ConvWeights(block[prefix + "weight"], block[prefix + "bias"])


def as_composite_params(spec, block):
    groups = [
        as_conv_weights(block, f"group{gi}.") for gi in range(len(spec.groups))
    ]
    join = as_conv_weights(block, "join.") if spec.join is not None else None
    return CompositeParams(groups, join)


def cast_params(params, dtype):
    """Copy of `params` with every array converted to `dtype`."""
    return [{k: v.astype(dtype) for k, v in block.items()} for block in params]


def zero_like_params(params):
    return [{k: np.zeros_like(v) for k, v in block.items()} for block in params]


def forward(arch, params, x, want_cache=False):
    """Run `x` through every layer; returns logits (softmax is a marker).

    With `want_cache`, also returns the per-layer state backward needs:
    each entry stores the layer input plus op-specific extras.
    """
    if x.shape[1:] != tuple(arch.input_shape):
        raise ArchError(
            f"{arch.name}: input shape {x.shape[1:]} != declared {tuple(arch.input_shape)}"
        )
    cache = [] if want_cache else None
    cur = x
    for layer, block in zip(arch.layers, params):
        extra = None
        if isinstance(layer, zoo.Conv):
            nxt = ops.conv2d_forward(
                cur, as_conv_weights(block), layer.stride,
                ops.same_pad(layer.kh, layer.kw),
            )
        elif isinstance(layer, zoo.CompositeConv):
            cp = as_composite_params(layer.spec, block)
            nxt, concat = composite.composite_forward(
                cur, layer.spec, cp, want_cache=True
            )
            extra = concat
        elif isinstance(layer, zoo.MaxPool):
            nxt, extra = ops.maxpool_forward(cur)
        elif isinstance(layer, zoo.GlobalMaxPool):
            nxt, extra = ops.global_maxpool_forward(cur)
        elif isinstance(layer, zoo.ReLU):
            nxt = ops.relu_forward(cur)
        elif isinstance(layer, zoo.Dense):
            nxt = ops.dense_forward(cur, block["weight"], block["bias"])
        elif isinstance(layer, zoo.Softmax):
            nxt = cur  # loss/eval consume logits directly
        else:
            raise ArchError(f"cannot execute layer {type(layer).__name__}")
        if want_cache:
            cache.append((cur, extra))
        cur = nxt
    if want_cache:
        return cur, cache
    return cur


def backward(arch, params, cache, grad_out, want_grad_input=False):
    """Gradients of sum(grad_out * logits) w.r.t. every parameter.

    Returns (grads, input_grads); input_grads[i] is the gradient at layer
    i's input (only populated when `want_grad_input`, else None).
    """
    grads = [dict() for _ in arch.layers]
    input_grads = [None] * len(arch.layers) if want_grad_input else None
    g = grad_out
    for i in range(len(arch.layers) - 1, -1, -1):
        layer = arch.layers[i]
        x, extra = cache[i]
        block = params[i]
        if isinstance(layer, zoo.Conv):
            b = ops.conv2d_backward(
                x, as_conv_weights(block), g, layer.stride,
                ops.same_pad(layer.kh, layer.kw),
            )
            grads[i] = {"weight": b.grad_weights, "bias": b.grad_bias}
            g = b.grad_input
        elif isinstance(layer, zoo.CompositeConv):
            cp = as_composite_params(layer.spec, block)
            g, bundles, join_b = composite.composite_backward(
                x, layer.spec, cp, g, concat=extra
            )
            for gi, b in enumerate(bundles):
                grads[i][f"group{gi}.weight"] = b.grad_weights
                grads[i][f"group{gi}.bias"] = b.grad_bias
            if join_b is not None:
                grads[i]["join.weight"] = join_b.grad_weights
                grads[i]["join.bias"] = join_b.grad_bias
        elif isinstance(layer, zoo.MaxPool):
            g = ops.maxpool_backward(extra, g, x.shape)
        elif isinstance(layer, zoo.GlobalMaxPool):
            g = ops.global_maxpool_backward(extra, g, x.shape)
        elif isinstance(layer, zoo.ReLU):
            g = ops.relu_backward(x, g)
        elif isinstance(layer, zoo.Dense):
            g, gw, gb = ops.dense_backward(x, block["weight"], g)
            grads[i] = {"weight": gw, "bias": gb}
        elif isinstance(layer, zoo.Softmax):
            pass
        if want_grad_input:
            input_grads[i] = g
    return grads, input_grads
