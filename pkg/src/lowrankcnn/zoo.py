"""Architecture specs: layer types, validation, and the built-in models.

The VGG-derived family comes in eight variants that differ only in how each
3x3 convolution row is realized (full rank, sequential separable pair,
low-rank composite with or without a 1x1 join, mixtures, embeddings).  Two
small CIFAR-scale networks, desk-full and desk-lr, exist for training tests
that finish on a workstation.
"""

from dataclasses import dataclass, field

from .composite import CompositeConvSpec, FilterGroup
from .errors import ArchError, UnknownModelError


@dataclass(frozen=True)
class Conv:
    """Full-rank conv layer: d filters of kh x kw, "same" padding."""

    d: int
    kh: int
    kw: int
    stride: tuple = (1, 1)


@dataclass(frozen=True)
class CompositeConv:
    spec: CompositeConvSpec


@dataclass(frozen=True)
class MaxPool:
    """2x2 max pooling at stride 2."""


@dataclass(frozen=True)
class GlobalMaxPool:
    """Per-channel spatial max to 1x1."""


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class Dense:
    in_features: int
    out_features: int


@dataclass(frozen=True)
class Softmax:
    pass


@dataclass(frozen=True)
class ArchSpec:
    """Named layer list plus the (c, h, w) input it is declared for."""

    name: str
    input_shape: tuple
    layers: tuple = field(default_factory=tuple)


def shape_after(layer, shape):
    """(c, h, w) after `layer`, or raise ArchError naming the problem."""
    c, h, w = shape
    if isinstance(layer, Conv):
        sy, sx = layer.stride
        oh = (h + 2 * (layer.kh // 2) - layer.kh) // sy + 1
        ow = (w + 2 * (layer.kw // 2) - layer.kw) // sx + 1
        if oh < 1 or ow < 1:
            raise ArchError(f"conv {layer.kh}x{layer.kw} does not fit {h}x{w}")
        return layer.d, oh, ow
    if isinstance(layer, CompositeConv):
        spec = layer.spec
        sy, sx = spec.stride
        dims = set()
        for g in spec.groups:
            oh = (h + 2 * (g.kh // 2) - g.kh) // sy + 1
            ow = (w + 2 * (g.kw // 2) - g.kw) // sx + 1
            dims.add((oh, ow))
        if len(dims) != 1:
            raise ArchError(f"composite groups disagree on spatial dims: {sorted(dims)}")
        oh, ow = dims.pop()
        if oh < 1 or ow < 1:
            raise ArchError(f"composite output would be empty at input {h}x{w}")
        return spec.out_channels, oh, ow
    if isinstance(layer, MaxPool):
        if h < 2 or w < 2:
            raise ArchError(f"2x2 maxpool needs spatial dims >= 2, got {h}x{w}")
        return c, h // 2, w // 2
    if isinstance(layer, GlobalMaxPool):
        return c, 1, 1
    if isinstance(layer, ReLU):
        return shape
    if isinstance(layer, Dense):
        flat = c * h * w
        if flat != layer.in_features:
            raise ArchError(
                f"dense fan-in {layer.in_features} != flattened input {flat} "
                f"(= {c}x{h}x{w})"
            )
        return layer.out_features, 1, 1
    if isinstance(layer, Softmax):
        return shape
    raise ArchError(f"unknown layer type {type(layer).__name__}")


def shape_trace(arch):
    """List of (c, h, w) for the input and after every layer."""
    shapes = [tuple(arch.input_shape)]
    for i, layer in enumerate(arch.layers):
        try:
            shapes.append(shape_after(layer, shapes[-1]))
        except ArchError as e:
            raise ArchError(f"{arch.name} layer {i}: {e}") from None
    return shapes


def validate(arch):
    """Collect validation errors; empty list means the arch is buildable."""
    errors = []
    shape = tuple(arch.input_shape)
    if len(shape) != 3 or any(s < 1 for s in shape):
        return [f"input shape must be (c, h, w) of positives, got {shape}"]
    for i, layer in enumerate(arch.layers):
        try:
            shape = shape_after(layer, shape)
        except ArchError as e:
            errors.append(f"layer {i}: {e}")
            return errors
        if isinstance(layer, Softmax) and i != len(arch.layers) - 1:
            errors.append(f"layer {i}: softmax must be the final layer")
    return errors


def _lr_groups(half_d, join=None, stride=(1, 1)):
    spec = CompositeConvSpec(
        (FilterGroup(3, 1, half_d), FilterGroup(1, 3, half_d)),
        stride=stride,
        join=join,
    )
    return CompositeConv(spec)


def _wfull_groups(rect_d, full_d, join):
    spec = CompositeConvSpec(
        (FilterGroup(3, 1, rect_d), FilterGroup(1, 3, rect_d),
         FilterGroup(3, 3, full_d)),
        join=join,
    )
    return CompositeConv(spec)


# width of each VGG conv row and whether a pool follows it
_VGG_ROWS = [(64, True), (128, True), (256, False), (256, True),
             (512, False), (512, True), (512, False), (512, True)]


def _vgg_tail(fc6_in, classes=1000):
    return [
        Dense(fc6_in, 4096), ReLU(),
        Dense(4096, 4096), ReLU(),
        Dense(4096, classes), Softmax(),
    ]


def _vgg_family(conv_row, final_pool_global, fc6_in, first_stride=(1, 1)):
    """Assemble a VGG-11 variant from a per-row conv builder.

    `conv_row(d, stride)` returns the layer list replacing one "3x3, d" row
    (excluding the ReLU, which is shared by all variants).
    """
    layers = []
    for i, (d, pool_after) in enumerate(_VGG_ROWS):
        stride = first_stride if i == 0 else (1, 1)
        layers.extend(conv_row(d, stride))
        layers.append(ReLU())
        if pool_after:
            is_last = i == len(_VGG_ROWS) - 1
            if is_last and final_pool_global:
                layers.append(GlobalMaxPool())
            else:
                layers.append(MaxPool())
    layers.extend(_vgg_tail(fc6_in))
    return layers


def _build_vgg(name):
    if name == "vgg11":
        layers = _vgg_family(
            lambda d, s: [Conv(d, 3, 3, s)], final_pool_global=False,
            fc6_in=7 * 7 * 512,
        )
    elif name == "vgg-gmp":
        layers = _vgg_family(
            lambda d, s: [Conv(d, 3, 3, s)], final_pool_global=True, fc6_in=512
        )
    elif name == "vgg-gmp-sf":
        # horizontal 1x3 layer then vertical 3x1 layer, no ReLU in between
        layers = _vgg_family(
            lambda d, s: [Conv(d, 1, 3, s), Conv(d, 3, 1)],
            final_pool_global=True, fc6_in=512,
        )
    elif name == "vgg-gmp-lr":
        layers = _vgg_family(
            lambda d, s: [_lr_groups(d // 2, stride=s)],
            final_pool_global=True, fc6_in=512,
        )
    elif name == "vgg-gmp-lr-2x":
        # twice the filters of vgg-gmp-lr; channel chain doubles downstream,
        # so fc6 reads 1024 features after global pooling
        layers = _vgg_family(
            lambda d, s: [_lr_groups(d, stride=s)],
            final_pool_global=True, fc6_in=1024,
        )
    elif name == "vgg-gmp-lr-join":
        layers = _vgg_family(
            lambda d, s: [_lr_groups(d // 2, join=d, stride=s)],
            final_pool_global=True, fc6_in=512,
        )
    elif name == "vgg-gmp-lr-lde":
        # joins emit half the row width (low-dimensional embeddings) and
        # conv1 runs at stride 2; fc6 reads the halved 256 features
        layers = _vgg_family(
            lambda d, s: [_lr_groups(d // 2, join=d // 2, stride=s)],
            final_pool_global=True, fc6_in=256, first_stride=(2, 2),
        )
    elif name == "vgg-gmp-lr-join-wfull":
        # 75% rectangular / 25% square filters, row width preserved
        layers = _vgg_family(
            lambda d, s: [_wfull_groups(3 * d // 8, d // 4, join=d)],
            final_pool_global=True, fc6_in=512,
        )
    else:
        return None
    return ArchSpec(name, (3, 224, 224), tuple(layers))


def _desk_conv_block(full_rank):
    def block(d):
        if full_rank:
            return [Conv(d, 3, 3)]
        return [_lr_groups(d // 2)]

    return block


def _build_desk(name):
    if name not in ("desk-full", "desk-lr"):
        return None
    block = _desk_conv_block(full_rank=name == "desk-full")
    layers = (
        block(32) + [ReLU(), MaxPool()]
        + block(64) + [ReLU(), MaxPool()]
        + block(128) + [ReLU(), GlobalMaxPool()]
        + [Dense(128, 10), Softmax()]
    )
    return ArchSpec(name, (3, 32, 32), tuple(layers))


_ALIASES = {"vgg-11": "vgg11"}

MODEL_NAMES = (
    "desk-full", "desk-lr",
    "vgg-gmp", "vgg-gmp-lr", "vgg-gmp-lr-2x", "vgg-gmp-lr-join",
    "vgg-gmp-lr-join-wfull", "vgg-gmp-lr-lde", "vgg-gmp-sf", "vgg11",
)


def build(name):
    """Return the named architecture spec, or raise UnknownModelError."""
    canon = _ALIASES.get(name, name)
    arch = _build_vgg(canon) or _build_desk(canon)
    if arch is None:
        raise UnknownModelError(name, MODEL_NAMES)
    return arch


def build_desk(name):
    """CIFAR-scale models only; same names as build() exposes."""
    arch = _build_desk(name)
    if arch is None:
        raise UnknownModelError(name, ("desk-full", "desk-lr"))
    return arch


def composite_stack(depth, channels, classes=None):
    """Stack of `depth` low-rank composite+ReLU units at constant width.

    The initialization probe runs on these; input and output channel count
    stay at `channels` so gradient variance ratios are directly comparable
    layer to layer.  With `classes`, a global pool and dense head are
    appended to make the stack trainable.
    """
    layers = []
    for _ in range(depth):
        layers.append(_lr_groups(channels // 2))
        layers.append(ReLU())
    if classes is not None:
        layers += [GlobalMaxPool(), Dense(channels, classes), Softmax()]
    return ArchSpec(f"composite-stack-{depth}", (channels, 16, 16), tuple(layers))
