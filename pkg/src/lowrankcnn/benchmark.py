"""Benchmark the numba kernels against the pure-numpy fallback.

Run as `python -m lowrankcnn.benchmark [--repeat N]`.  Times the conv
forward/backward pair on shapes drawn from the desk-scale and VGG-scale
models and prints a CSV table plus the speedup.  Both backends produce
bit-identical forward results, so the comparison is purely about speed.
"""

import argparse
import time

import numpy as np

from . import backend, ops
from .ops import ConvWeights

CASES = [
    # (label, n, c, h, w, d, kh, kw)
    ("desk-conv1", 64, 3, 32, 32, 32, 3, 3),
    ("desk-conv2", 64, 32, 16, 16, 64, 3, 3),
    ("desk-conv3", 64, 64, 8, 8, 128, 3, 3),
    ("lowrank-3x1", 64, 32, 16, 16, 32, 3, 1),
    ("lowrank-1x3", 64, 32, 16, 16, 32, 1, 3),
    ("vgg-conv5", 4, 512, 14, 14, 512, 3, 3),
]


def _best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_case(label, n, c, h, w, d, kh, kw, repeat, dtype=np.float32):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((n, c, h, w)).astype(dtype)
    wt = ConvWeights(
        rng.standard_normal((d, c, kh, kw)).astype(dtype) * 0.05,
        np.zeros(d, dtype=dtype),
    )
    pad = ops.same_pad(kh, kw)
    out = ops.conv2d_forward(x, wt, (1, 1), pad)
    go = rng.standard_normal(out.shape).astype(dtype)
    macs = n * d * out.shape[2] * out.shape[3] * kh * kw * c
    rows = {}
    for name in ("numpy", "numba"):
        try:
            backend.use(name)
        except ImportError:
            continue
        ops.conv2d_forward(x, wt, (1, 1), pad)  # warm (JIT / cache)
        ops.conv2d_backward(x, wt, go, (1, 1), pad)
        fwd = _best_of(lambda: ops.conv2d_forward(x, wt, (1, 1), pad), repeat)
        bwd = _best_of(lambda: ops.conv2d_backward(x, wt, go, (1, 1), pad), repeat)
        rows[name] = (fwd, bwd)
    return label, macs, rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    print("case,backend,fwd_ms,bwd_ms,fwd_gmacs,speedup_vs_numpy")
    for case in CASES:
        label, macs, rows = run_case(*case, repeat=args.repeat)
        base_fwd = rows.get("numpy", (float("nan"),))[0]
        for name, (fwd, bwd) in rows.items():
            speed = base_fwd / fwd if fwd else float("nan")
            print(
                f"{label},{name},{fwd * 1e3:.2f},{bwd * 1e3:.2f},"
                f"{macs / fwd / 1e9:.2f},{speed:.2f}"
            )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
