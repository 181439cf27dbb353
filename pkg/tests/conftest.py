"""Shared fixtures and independent oracles for the test suite."""

import os

import numpy as np
import pytest

from lowrankcnn import backend
from lowrankcnn.rng import Rng


def naive_conv2d(x, weights, bias, stride=(1, 1), pad=(0, 0)):
    """Six-nested-loop convolution oracle.

    Deliberately written as scalar loops: per output element, start from
    the bias and accumulate input * weight in (channel, tap-row, tap-col)
    order.  Production implementations must match this bit for bit.
    """
    n, c, h, w = x.shape
    d, _, kh, kw = weights.shape
    sy, sx = stride
    py, px = pad
    xp = np.pad(x, ((0, 0), (0, 0), (py, py), (px, px)))
    oh = (h + 2 * py - kh) // sy + 1
    ow = (w + 2 * px - kw) // sx + 1
    out = np.empty((n, d, oh, ow), dtype=x.dtype)
    for ni in range(n):
        for di in range(d):
            for i in range(oh):
                for j in range(ow):
                    acc = bias[di]
                    for ci in range(c):
                        for ki in range(kh):
                            for kj in range(kw):
                                acc = acc + xp[ni, ci, i * sy + ki, j * sx + kj] \
                                    * weights[di, ci, ki, kj]
                    out[ni, di, i, j] = acc
    return out


def rand_tensor(seed, shape, scale=1.0):
    rng = Rng(seed)
    return rng.normal(int(np.prod(shape))).reshape(shape) * scale


def available_backends():
    names = ["numpy"]
    try:
        import numba  # noqa: F401

        names.append("numba")
    except ImportError:
        pass
    return names


@pytest.fixture(params=available_backends())
def any_backend(request):
    """Run the test once per available kernel backend."""
    backend.use(request.param)
    yield request.param
    backend.reset()


# --- synthetic CIFAR-format data -------------------------------------------

def synth_records(n, seed, classes=10):
    """CIFAR-binary records for a learnable synthetic 10-class task."""
    rng = Rng(seed)
    labels = rng.integers(n, classes)
    noise = rng.uniform(n * 3072).reshape(n, 3, 32, 32) * 0.25
    images = noise
    for i in range(n):
        cls = int(labels[i])
        images[i, cls % 3, 3 * (cls // 3) : 3 * (cls // 3) + 8, :] += 0.6
        images[i, (cls + 1) % 3, :, 3 * cls % 24 : 3 * cls % 24 + 6] += 0.4
    pixels = np.clip(images * 255, 0, 255).astype(np.uint8)
    records = np.empty((n, 3073), dtype=np.uint8)
    records[:, 0] = labels.astype(np.uint8)
    records[:, 1:] = pixels.reshape(n, -1)
    return records


def write_synth_cifar(directory, per_batch=60, test_n=100, seed=0):
    """Write a miniature dataset in the standard CIFAR-10 binary layout."""
    os.makedirs(directory, exist_ok=True)
    for b in range(1, 6):
        recs = synth_records(per_batch, seed=seed + b)
        with open(os.path.join(directory, f"data_batch_{b}.bin"), "wb") as f:
            f.write(recs.tobytes())
    recs = synth_records(test_n, seed=seed + 99)
    with open(os.path.join(directory, "test_batch.bin"), "wb") as f:
        f.write(recs.tobytes())
    return directory


@pytest.fixture(scope="session")
def synth_cifar_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("synthcifar")
    return write_synth_cifar(str(path))


def locate_cifar10():
    """Directory with the real CIFAR-10 binary batches, if one exists."""
    candidates = [os.environ.get("CIFAR10_DIR", "")]
    here = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    candidates += [
        os.path.join(here, "data", "cifar-10-batches-bin"),
        "data/cifar-10-batches-bin",
    ]
    for cand in candidates:
        if cand and os.path.exists(os.path.join(cand, "data_batch_1.bin")):
            return cand
    return None


def require_cifar10():
    path = locate_cifar10()
    if path is None:
        pytest.skip(
            "real CIFAR-10 binaries not found (set CIFAR10_DIR or place "
            "cifar-10-batches-bin under ./data); this environment has no "
            "network access to fetch them"
        )
    return path
