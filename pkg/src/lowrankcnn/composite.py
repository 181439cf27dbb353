"""Composite convolutional layers.

A composite layer convolves one input with N groups of filters of differing
spatial shapes (for example 3x1 and 1x3) and concatenates the group outputs
along the channel axis.  An optional join is a following 1x1 convolution
that linearly recombines the concatenated basis responses; omitting it
leaves the combination to whatever layer comes next.

Each group gets "same" padding for its own kernel shape, so group outputs
always share spatial dims and concatenation is well defined at any common
stride.
"""

from dataclasses import dataclass

import numpy as np

from . import ops
from .errors import ShapeError
from .ops import ConvWeights


@dataclass(frozen=True)
class FilterGroup:
    """One homogeneous set of `d` filters of spatial shape kh x kw."""

    kh: int
    kw: int
    d: int

    def __post_init__(self):
        if self.kh < 1 or self.kw < 1 or self.d < 1:
            raise ValueError(f"FilterGroup dims must be >= 1, got {self}")

    def __str__(self):
        return f"{self.kh}x{self.kw}x{self.d}"


@dataclass(frozen=True)
class CompositeConvSpec:
    """Ordered filter groups plus an optional 1x1 join layer.

    `join` is the output-channel count of the join, or None for the
    join-free (implicitly combined) variant.  All groups run at the same
    stride; the concatenated channel count is sum of group d's.
    """

    groups: tuple
    stride: tuple = (1, 1)
    join: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        if not self.groups:
            raise ValueError("composite layer needs at least one filter group")
        if self.join is not None and self.join < 1:
            raise ValueError(f"join channel count must be >= 1, got {self.join}")

    @property
    def concat_channels(self):
        return sum(g.d for g in self.groups)

    @property
    def out_channels(self):
        return self.join if self.join is not None else self.concat_channels

    def __str__(self):
        body = "|".join(str(g) for g in self.groups)
        return body + (f" join={self.join}" if self.join is not None else "")


@dataclass
class CompositeParams:
    """Weights for one composite layer: one ConvWeights per group (+ join)."""

    groups: list
    join: ConvWeights | None = None


def init_zero_params(spec, in_channels, dtype=np.float64):
    """All-zero parameter block with the right shapes (tests, plumbing)."""
    groups = [
        ConvWeights(
            np.zeros((g.d, in_channels, g.kh, g.kw), dtype=dtype),
            np.zeros(g.d, dtype=dtype),
        )
        for g in spec.groups
    ]
    join = None
    if spec.join is not None:
        join = ConvWeights(
            np.zeros((spec.join, spec.concat_channels, 1, 1), dtype=dtype),
            np.zeros(spec.join, dtype=dtype),
        )
    return CompositeParams(groups, join)


def composite_forward(x, spec, params, want_cache=False):
    """Concatenated group responses, then the join conv if present.

    No nonlinearity sits between the groups and the join; activation
    placement is the caller's business.  With `want_cache` the pre-join
    concatenation is also returned (needed for backward).
    """
    if len(params.groups) != len(spec.groups):
        raise ShapeError("composite_forward", "group count",
                         len(spec.groups), len(params.groups))
    outs = []
    shape0 = None
    for g, gw in zip(spec.groups, params.groups):
        out = ops.conv2d_forward(x, gw, spec.stride, ops.same_pad(g.kh, g.kw))
        if shape0 is None:
            shape0 = out.shape
        elif out.shape[2:] != shape0[2:]:
            raise ShapeError("composite_forward", f"group {g} spatial dims",
                             shape0[2:], out.shape[2:])
        outs.append(out)
    concat = ops.concat_channels(outs)
    y = concat
    if spec.join is not None:
        y = ops.conv2d_forward(concat, params.join)
    if want_cache:
        return y, concat
    return y


def composite_backward(x, spec, params, grad_out, concat=None):
    """Gradients for every group (and the join) plus grad w.r.t. the input.

    Returns (grad_input, group_bundles, join_bundle).  grad_input is the sum
    over groups of each group's own input gradient.
    """
    if concat is None:
        _, concat = composite_forward(x, spec, params, want_cache=True)
    join_bundle = None
    if spec.join is not None:
        join_bundle = ops.conv2d_backward(concat, params.join, grad_out)
        grad_concat = join_bundle.grad_input
    else:
        grad_concat = grad_out
    pieces = ops.split_channels(grad_concat, [g.d for g in spec.groups])
    grad_input = np.zeros_like(x)
    bundles = []
    for g, gw, piece in zip(spec.groups, params.groups, pieces):
        b = ops.conv2d_backward(x, gw, piece, spec.stride, ops.same_pad(g.kh, g.kw))
        grad_input += b.grad_input
        bundles.append(b)
    return grad_input, bundles, join_bundle


def effective_filters(spec, params):
    """Spatial kernels realized by a horizontal/vertical pair plus join.

    For a composite of exactly one 1xk (horizontal) and one kx1 (vertical)
    group followed by a join, each join output channel is a linear
    combination of the 1-d bases.  Summing the bases scaled by their join
    weights gives one dense kh x kw kernel per (join channel, input channel)
    pair; the center cell receives both contributions.  Returns an array of
    shape (join_d, in_channels, kh, kw).
    """
    if spec.join is None or len(spec.groups) != 2:
        raise ValueError(
            "effective_filters needs exactly two groups and a join layer"
        )
    horiz = vert = None
    horiz_p = vert_p = None
    for g, p in zip(spec.groups, params.groups):
        if g.kh == 1 and g.kw > 1 and horiz is None:
            horiz, horiz_p = g, p
        elif g.kw == 1 and g.kh > 1 and vert is None:
            vert, vert_p = g, p
        else:
            raise ValueError(
                f"effective_filters needs one 1xk and one kx1 group, got {spec}"
            )
    kh, kw = vert.kh, horiz.kw
    in_c = horiz_p.weights.shape[1]
    jw = params.join.weights[:, :, 0, 0]  # (join_d, concat)
    n_out = jw.shape[0]
    kernels = np.zeros((n_out, in_c, kh, kw), dtype=jw.dtype)
    # channel order inside the concat follows spec.groups order
    offsets = np.cumsum([0] + [g.d for g in spec.groups])
    for gi, (g, p) in enumerate(zip(spec.groups, params.groups)):
        coeff = jw[:, offsets[gi] : offsets[gi + 1]]  # (join_d, g.d)
        # (join_d, g.d) x (g.d, in_c, kh_g, kw_g) -> (join_d, in_c, kh_g, kw_g)
        mixed = np.tensordot(coeff, p.weights, axes=([1], [0]))
        if g is horiz:
            kernels[:, :, kh // 2, :] += mixed[:, :, 0, :]
        else:
            kernels[:, :, :, kw // 2] += mixed[:, :, :, 0]
    return kernels


def filters_csv(kernels):
    """CSV text for effective_filters output: one row-major block per kernel.

    Blocks are separated by a comment line naming (output, input) channel.
    """
    lines = []
    n_out, in_c, kh, kw = kernels.shape
    for o in range(n_out):
        for i in range(in_c):
            lines.append(f"# kernel out={o} in={i} shape={kh}x{kw}")
            for r in range(kh):
                lines.append(",".join(repr(float(v)) for v in kernels[o, i, r]))
    return "\n".join(lines) + "\n"
