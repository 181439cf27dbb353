"""Structured text format for architectures and training configs.

One syntax serves both: `key = value` lines, `#` comments, and repeated
`layer = <kind> <args>` lines for architectures.  Round-trips exactly
through load/save.

Layer grammar (all dims are rows x cols, matching the model tables):

    conv KHxKWxD [stride=SYxSX]
    composite KHxKWxD|KHxKWxD[|...] [join=D] [stride=SYxSX]
    relu
    maxpool
    globalmaxpool
    dense INxOUT
    softmax
"""

from . import zoo
from .composite import CompositeConvSpec, FilterGroup
from .errors import ArchError
from .zoo import (ArchSpec, CompositeConv, Conv, Dense, GlobalMaxPool,
                  MaxPool, ReLU, Softmax)


def parse_kv(text):
    """Split text into ({key: value}, [layer line, ...])."""
    scalars, layers = {}, []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ArchError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "layer":
            layers.append((lineno, value))
        elif key in scalars:
            raise ArchError(f"line {lineno}: duplicate key {key!r}")
        else:
            scalars[key] = value
    return scalars, layers


def _dims(token, n):
    parts = token.split("x")
    if len(parts) != n or not all(p.isdigit() for p in parts):
        raise ArchError(f"expected {n} x-separated ints, got {token!r}")
    return tuple(int(p) for p in parts)


def _parse_layer(lineno, text):
    tokens = text.split()
    kind, args = tokens[0], tokens[1:]
    opts = {}
    pos = []
    for t in args:
        if "=" in t:
            k, v = t.split("=", 1)
            opts[k] = v
        else:
            pos.append(t)
    try:
        if kind == "conv":
            kh, kw, d = _dims(pos[0], 3)
            stride = _dims(opts["stride"], 2) if "stride" in opts else (1, 1)
            return Conv(d, kh, kw, stride)
        if kind == "composite":
            groups = tuple(FilterGroup(*_dims(g, 3)) for g in pos[0].split("|"))
            stride = _dims(opts["stride"], 2) if "stride" in opts else (1, 1)
            join = int(opts["join"]) if "join" in opts else None
            return CompositeConv(CompositeConvSpec(groups, stride, join))
        if kind == "relu":
            return ReLU()
        if kind == "maxpool":
            return MaxPool()
        if kind == "globalmaxpool":
            return GlobalMaxPool()
        if kind == "dense":
            fan_in, fan_out = _dims(pos[0], 2)
            return Dense(fan_in, fan_out)
        if kind == "softmax":
            return Softmax()
    except (IndexError, ArchError, ValueError) as e:
        raise ArchError(f"line {lineno}: bad layer spec {text!r}: {e}") from None
    raise ArchError(f"line {lineno}: unknown layer kind {kind!r}")


def loads_arch(text):
    scalars, layer_lines = parse_kv(text)
    if "name" not in scalars or "input" not in scalars:
        raise ArchError("architecture file needs 'name' and 'input' keys")
    input_shape = _dims(scalars["input"], 3)
    layers = tuple(_parse_layer(ln, txt) for ln, txt in layer_lines)
    return ArchSpec(scalars["name"], input_shape, layers)


def _layer_line(layer):
    if isinstance(layer, Conv):
        s = f"conv {layer.kh}x{layer.kw}x{layer.d}"
        if layer.stride != (1, 1):
            s += f" stride={layer.stride[0]}x{layer.stride[1]}"
        return s
    if isinstance(layer, CompositeConv):
        spec = layer.spec
        s = "composite " + "|".join(f"{g.kh}x{g.kw}x{g.d}" for g in spec.groups)
        if spec.join is not None:
            s += f" join={spec.join}"
        if spec.stride != (1, 1):
            s += f" stride={spec.stride[0]}x{spec.stride[1]}"
        return s
    if isinstance(layer, ReLU):
        return "relu"
    if isinstance(layer, MaxPool):
        return "maxpool"
    if isinstance(layer, GlobalMaxPool):
        return "globalmaxpool"
    if isinstance(layer, Dense):
        return f"dense {layer.in_features}x{layer.out_features}"
    if isinstance(layer, Softmax):
        return "softmax"
    raise ArchError(f"cannot serialize layer {type(layer).__name__}")


def dumps_arch(arch):
    lines = [
        f"name = {arch.name}",
        "input = " + "x".join(str(s) for s in arch.input_shape),
    ]
    lines += [f"layer = {_layer_line(l)}" for l in arch.layers]
    return "\n".join(lines) + "\n"


def load_arch(path):
    with open(path, "r", encoding="utf-8") as f:
        return loads_arch(f.read())


def save_arch(arch, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps_arch(arch))


def resolve_model(name_or_path):
    """Model-zoo name, or a path to an architecture file."""
    import os

    if os.path.exists(name_or_path):
        return load_arch(name_or_path)
    return zoo.build(name_or_path)
