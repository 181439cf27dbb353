"""CIFAR-10 ingestion, ZCA whitening, crop/mirror augmentation.

The CIFAR-10 binary format is a sequence of 3073-byte records: one label
byte (0..9) then 3072 channel-major pixel bytes (3 x 32 x 32, red plane
first).  Pixels are scaled to [0, 1] floats on load.
"""

import os
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError

RECORD_BYTES = 3073
IMAGE_SHAPE = (3, 32, 32)
TRAIN_FILES = [f"data_batch_{i}.bin" for i in range(1, 6)]
TEST_FILES = ["test_batch.bin"]


def load_batch_file(path, dtype=np.float32):
    """Parse one binary batch file into (images, labels).

    Raises DataFormatError with the byte offset of the first violation:
    truncated trailing record or a label outside [0, 10).
    """
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) == 0 or len(raw) % RECORD_BYTES != 0:
        raise DataFormatError(
            path, (len(raw) // RECORD_BYTES) * RECORD_BYTES,
            f"truncated record: file size {len(raw)} is not a multiple of {RECORD_BYTES}",
        )
    records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, RECORD_BYTES)
    labels = records[:, 0].astype(np.int64)
    bad = np.nonzero(labels >= 10)[0]
    if bad.size:
        raise DataFormatError(
            path, int(bad[0]) * RECORD_BYTES,
            f"label {labels[bad[0]]} outside [0, 10) in record {bad[0]}",
        )
    images = records[:, 1:].reshape(-1, *IMAGE_SHAPE).astype(dtype) / dtype(255)
    return images, labels


def load_cifar10(directory, dtype=np.float32):
    """Load the standard train/test split from `directory`.

    Returns ((train_images, train_labels), (test_images, test_labels)).
    """
    def load_files(names):
        parts = []
        for name in names:
            path = os.path.join(directory, name)
            if not os.path.exists(path):
                raise DataFormatError(path, 0, "missing batch file")
            parts.append(load_batch_file(path, dtype))
        xs = np.concatenate([p[0] for p in parts])
        ys = np.concatenate([p[1] for p in parts])
        return xs, ys

    return load_files(TRAIN_FILES), load_files(TEST_FILES)


@dataclass
class ZcaTransform:
    """Whitening fitted on training pixels: x -> matrix @ (x - mean)."""

    mean: np.ndarray      # (features,)
    matrix: np.ndarray    # (features, features), symmetric
    inverse: np.ndarray   # (features, features)
    epsilon: float

    def apply(self, images):
        flat = images.reshape(images.shape[0], -1).astype(np.float64)
        out = (flat - self.mean) @ self.matrix.T
        return out.reshape(images.shape).astype(images.dtype)

    def invert(self, images):
        flat = images.reshape(images.shape[0], -1).astype(np.float64)
        out = flat @ self.inverse.T + self.mean
        return out.reshape(images.shape).astype(images.dtype)


def zca_fit(images, epsilon=1e-2):
    """Fit ZCA whitening on training images only.

    Computes the per-pixel mean and C = cov of the centered pixels, then
    the symmetric whitening root U (L + eps I)^(-1/2) U^T.  `epsilon`
    regularizes tiny eigenvalues; its shrinkage is visible as per-dimension
    variances slightly below 1 after whitening.
    """
    if images.shape[0] == 0:
        raise ValueError("zca_fit needs at least one image")
    flat = images.reshape(images.shape[0], -1).astype(np.float64)
    mean = flat.mean(axis=0)
    centered = flat - mean
    cov = centered.T @ centered / flat.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    eigvals = np.maximum(eigvals, 0.0)  # eigh noise can dip below zero
    scale = 1.0 / np.sqrt(eigvals + epsilon)
    matrix = (eigvecs * scale) @ eigvecs.T
    inverse = (eigvecs * np.sqrt(eigvals + epsilon)) @ eigvecs.T
    return ZcaTransform(mean, matrix, inverse, float(epsilon))


def zca_apply(transform, images):
    return transform.apply(images)


def mirror(image):
    """Horizontal flip (reverse columns)."""
    return image[..., ::-1]


def augment(image, rng, pad=4, crop=True, do_mirror=True):
    """Random shifted crop plus coin-flip horizontal mirror of one image.

    Zero-pads by `pad` pixels on every spatial edge and cuts a crop of the
    original size at offsets uniform on [0, 2*pad]; mirrors with p = 0.5.
    No scale or photometric changes.
    """
    c, h, w = image.shape
    out = image
    if crop and pad > 0:
        padded = np.pad(out, ((0, 0), (pad, pad), (pad, pad)))
        oy, ox = rng.integers(2, 2 * pad + 1)
        out = padded[:, oy : oy + h, ox : ox + w]
    if do_mirror and bool(rng.coin(1)[0]):
        out = mirror(out)
    return np.ascontiguousarray(out)


def augment_batch(images, rng, pad=4, crop=True, do_mirror=True):
    """Vectorized-ish augment over the batch; one rng draw stream per batch."""
    n = images.shape[0]
    h, w = images.shape[2], images.shape[3]
    out = images
    if crop and pad > 0:
        padded = np.pad(images, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        offs = rng.integers(2 * n, 2 * pad + 1).reshape(n, 2)
        out = np.empty_like(images)
        for i in range(n):
            oy, ox = offs[i]
            out[i] = padded[i, :, oy : oy + h, ox : ox + w]
    flips = rng.coin(n) if do_mirror else np.zeros(n, bool)
    if flips.any():
        out = out.copy() if out is images else out
        out[flips] = out[flips, :, :, ::-1]
    return out
