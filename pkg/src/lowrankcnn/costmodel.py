"""Static multiply-accumulate and parameter counting.

A conv layer costs H_out * W_out * d * kh * kw * c MACs per image; a
composite layer is the sum of its groups counted the same way, plus its
join counted as a 1x1 conv; dense layers cost in * out.  Pooling, ReLU,
softmax and bias additions count zero.  All numbers are per image (batch
dimension excluded).
"""

import io
from dataclasses import dataclass

from . import zoo
from .errors import ArchError
from .zoo import (ArchSpec, CompositeConv, Conv, Dense, GlobalMaxPool,
                  MaxPool, ReLU, Softmax)


@dataclass(frozen=True)
class CostRow:
    name: str
    out_shape: tuple  # (c, h, w)
    macs: int
    params: int


@dataclass(frozen=True)
class CostReport:
    arch_name: str
    input_shape: tuple
    rows: tuple

    @property
    def total_macs(self):
        return sum(r.macs for r in self.rows)

    @property
    def total_params(self):
        return sum(r.params for r in self.rows)


def _layer_cost(layer, in_shape, out_shape):
    c = in_shape[0]
    _, oh, ow = out_shape
    if isinstance(layer, Conv):
        macs = oh * ow * layer.d * layer.kh * layer.kw * c
        params = layer.d * c * layer.kh * layer.kw + layer.d
        return macs, params
    if isinstance(layer, CompositeConv):
        spec = layer.spec
        macs = sum(oh * ow * g.d * g.kh * g.kw * c for g in spec.groups)
        params = sum(g.d * c * g.kh * g.kw + g.d for g in spec.groups)
        if spec.join is not None:
            m = spec.concat_channels
            macs += oh * ow * spec.join * m
            params += spec.join * m + spec.join
        return macs, params
    if isinstance(layer, Dense):
        return layer.in_features * layer.out_features, (
            layer.in_features * layer.out_features + layer.out_features
        )
    if isinstance(layer, (MaxPool, GlobalMaxPool, ReLU, Softmax)):
        return 0, 0
    raise TypeError(f"no cost rule for {type(layer).__name__}")


def _layer_name(i, layer):
    if isinstance(layer, Conv):
        kind = f"conv{layer.kh}x{layer.kw}x{layer.d}"
        if layer.stride != (1, 1):
            kind += f"/{layer.stride[0]}"
    elif isinstance(layer, CompositeConv):
        kind = f"composite[{layer.spec}]"
    elif isinstance(layer, Dense):
        kind = f"dense{layer.in_features}x{layer.out_features}"
    elif isinstance(layer, MaxPool):
        kind = "maxpool2x2/2"
    elif isinstance(layer, GlobalMaxPool):
        kind = "globalmaxpool"
    else:
        kind = type(layer).__name__.lower()
    return f"{i:02d}.{kind}"


def analyze(arch, input_shape=None):
    """Per-layer and total MAC / parameter counts for `arch`.

    `input_shape` overrides the spec's declared (c, h, w); the arch must
    validate at whichever shape is used.
    """
    if input_shape is not None:
        arch = ArchSpec(arch.name, tuple(input_shape), arch.layers)
    problems = zoo.validate(arch)
    if problems:
        raise ArchError(f"{arch.name}: " + "; ".join(problems))
    shapes = zoo.shape_trace(arch)
    rows = []
    for i, layer in enumerate(arch.layers):
        macs, params = _layer_cost(layer, shapes[i], shapes[i + 1])
        rows.append(CostRow(_layer_name(i, layer), shapes[i + 1], macs, params))
    return CostReport(arch.name, tuple(arch.input_shape), tuple(rows))


@dataclass(frozen=True)
class Savings:
    mac_savings_fraction: float
    param_savings_fraction: float


def compare(a, b):
    """Signed fractional savings of `b` relative to `a` (positive = cheaper)."""
    return Savings(
        1.0 - b.total_macs / a.total_macs,
        1.0 - b.total_params / a.total_params,
    )


def report_csv(report):
    """Deterministic CSV: header, one row per layer, totals row last."""
    buf = io.StringIO()
    buf.write("layer,out_shape,macs,params\n")
    for r in report.rows:
        shape = "x".join(str(s) for s in r.out_shape)
        buf.write(f"{r.name},{shape},{r.macs},{r.params}\n")
    buf.write(f"total,,{report.total_macs},{report.total_params}\n")
    return buf.getvalue()


def diff_table(a, b):
    """Side-by-side per-layer MAC comparison for attributing discrepancies.

    Rows align by index; a missing row on either side shows as '-'.  Used by
    the acceptance suite when a savings check misses its target.
    """
    lines = [f"{'idx':>3} {'[' + a.arch_name + ']':>42} {'macs':>14} "
             f"{'[' + b.arch_name + ']':>42} {'macs':>14}"]
    for i in range(max(len(a.rows), len(b.rows))):
        ra = a.rows[i] if i < len(a.rows) else None
        rb = b.rows[i] if i < len(b.rows) else None
        lines.append(
            f"{i:>3} {(ra.name if ra else '-'):>42} "
            f"{(ra.macs if ra else '-'):>14} "
            f"{(rb.name if rb else '-'):>42} "
            f"{(rb.macs if rb else '-'):>14}"
        )
    lines.append(
        f"{'':>3} {'TOTAL':>42} {a.total_macs:>14} {'TOTAL':>42} {b.total_macs:>14}"
    )
    return "\n".join(lines)
