"""Variance-preserving weight initialization and the probe that checks it.

For a conv layer followed by a ReLU, keeping backward gradient variance
constant requires zero-mean Gaussian weights with sigma = sqrt(2 / n), where
n counts the layer's outgoing connections per input pixel: kh * kw * d.  A
composite layer of heterogeneous groups must be treated as a single layer
with n summed over groups, sqrt(2 / sum(kh_i * kw_i * d_i)); initializing
each group as if it stood alone mis-scales the layer.  The variance probe
measures realized backward variance ratios layer by layer, so a bad scheme
shows up as ratios drifting from 1.
"""

import io
import math
from dataclasses import dataclass

import numpy as np

from . import network, zoo
from .rng import Rng, mix_seed

SCHEMES = ("composite-he", "he-fanin")


@dataclass(frozen=True)
class InitSpec:
    """Scheme name plus the 64-bit seed that pins every draw.

    composite-he: the summed-group rule above (the correct one).
    he-fanin: each filter group initialized as its own layer with its own
    n = kh * kw * d, ignoring siblings; identical to composite-he for
    non-composite layers, kept for controlled comparisons.
    """

    scheme: str = "composite-he"
    seed: int = 0
    sigma_scale: float = 1.0  # deliberate mis-scaling for probe controls

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme}")


def he_stddev(n_hat):
    """sqrt(2 / n_hat) for a layer with n_hat connections before a ReLU."""
    if n_hat < 1:
        raise ValueError(f"n_hat must be >= 1, got {n_hat}")
    return math.sqrt(2.0 / n_hat)


def composite_stddev(groups):
    """Shared sigma for a composite layer: sqrt(2 / sum(kh*kw*d)).

    The sum runs over each group's outgoing connection count; group order
    is irrelevant.  A single k x k group reduces to he_stddev(k*k*d).
    """
    groups = list(groups)
    if not groups:
        raise ValueError("composite_stddev needs at least one filter group")
    return he_stddev(sum(g.kh * g.kw * g.d for g in groups))


def _normal(rng, shape, sigma, dtype):
    return (rng.normal(int(np.prod(shape))) * sigma).reshape(shape).astype(dtype)


def _dense_sigma(arch, index, layer):
    # hidden dense layers feed a ReLU: backward-mode n is the fan-out; the
    # final dense feeds the softmax, where the ReLU factor has no basis, so
    # it falls back to fan-in
    for later in arch.layers[index + 1 :]:
        if isinstance(later, zoo.ReLU):
            return he_stddev(layer.out_features)
        if isinstance(later, (zoo.Dense, zoo.Softmax)):
            break
    return he_stddev(layer.in_features)


def init_network(arch, init):
    """Parameters for every layer of `arch` drawn per the init scheme.

    Weights are N(0, sigma^2) with sigma chosen per layer; all biases start
    at zero.  The same (arch, InitSpec) always yields bit-identical arrays.
    """
    if isinstance(init, int):
        init = InitSpec(seed=init)
    shapes = zoo.shape_trace(arch)
    root = Rng(init.seed)
    params = []
    for i, layer in enumerate(arch.layers):
        c = shapes[i][0]
        block = {}
        if isinstance(layer, zoo.Conv):
            sigma = he_stddev(layer.kh * layer.kw * layer.d) * init.sigma_scale
            block["weight"] = _normal(
                root.derive(i, 0), (layer.d, c, layer.kh, layer.kw), sigma, np.float64
            )
            block["bias"] = np.zeros(layer.d)
        elif isinstance(layer, zoo.CompositeConv):
            spec = layer.spec
            shared = composite_stddev(spec.groups)
            for gi, g in enumerate(spec.groups):
                if init.scheme == "composite-he":
                    sigma = shared
                else:
                    sigma = he_stddev(g.kh * g.kw * g.d)
                sigma *= init.sigma_scale
                block[f"group{gi}.weight"] = _normal(
                    root.derive(i, gi), (g.d, c, g.kh, g.kw), sigma, np.float64
                )
                block[f"group{gi}.bias"] = np.zeros(g.d)
            if spec.join is not None:
                sigma = he_stddev(spec.join) * init.sigma_scale
                block["join.weight"] = _normal(
                    root.derive(i, len(spec.groups)),
                    (spec.join, spec.concat_channels, 1, 1), sigma, np.float64,
                )
                block["join.bias"] = np.zeros(spec.join)
        elif isinstance(layer, zoo.Dense):
            sigma = _dense_sigma(arch, i, layer) * init.sigma_scale
            block["weight"] = _normal(
                root.derive(i, 0), (layer.in_features, layer.out_features),
                sigma, np.float64,
            )
            block["bias"] = np.zeros(layer.out_features)
        params.append(block)
    return params


@dataclass(frozen=True)
class ProbeRow:
    layer_index: int
    ratio_mean: float
    ratio_std: float


def variance_probe(arch, trials, seed, init=None):
    """Backward variance ratios Var[dx_l] / Var[dx_(l+1)] per weighted layer.

    Each trial re-initializes the network, feeds a unit-variance Gaussian
    input, injects a unit-variance Gaussian gradient at the output and runs
    backward.  dx_l is the gradient at layer l's input; for the last
    weighted layer the denominator is the injected gradient itself.  Rows
    are averaged over trials.
    """
    weighted = [
        i for i, l in enumerate(arch.layers)
        if isinstance(l, (zoo.Conv, zoo.CompositeConv, zoo.Dense))
    ]
    ratios = np.empty((trials, len(weighted)))
    n, (c, h, w) = 2, arch.input_shape
    for t in range(trials):
        trial_rng = Rng(mix_seed(seed, 101, t))
        spec = init or InitSpec()
        trial_init = InitSpec(spec.scheme, mix_seed(spec.seed, t), spec.sigma_scale)
        params = init_network(arch, trial_init)
        x = trial_rng.derive("x").normal(n * c * h * w).reshape(n, c, h, w)
        out, cache = network.forward(arch, params, x, want_cache=True)
        g = trial_rng.derive("g").normal(out.size).reshape(out.shape)
        _, grad_in = network.backward(arch, params, cache, g, want_grad_input=True)
        variances = [float(np.var(grad_in[i])) for i in weighted]
        downstream = variances[1:] + [float(np.var(g))]
        ratios[t] = [v / dv for v, dv in zip(variances, downstream)]
    return [
        ProbeRow(li, float(ratios[:, j].mean()), float(ratios[:, j].std()))
        for j, li in enumerate(weighted)
    ]


def probe_csv(rows):
    buf = io.StringIO()
    buf.write("layer_index,ratio_mean,ratio_std\n")
    for r in rows:
        buf.write(f"{r.layer_index},{r.ratio_mean!r},{r.ratio_std!r}\n")
    return buf.getvalue()
