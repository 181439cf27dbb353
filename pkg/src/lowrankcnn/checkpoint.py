"""Checkpoint file format.

Layout, all integers little-endian:

    bytes 0..3   magic "LRCF"
    u16          format version (currently 1)
    u32          architecture text length, then that many UTF-8 bytes
                 (the archfile serialization)
    u32          block count
    per block:   u16 tag length + tag UTF-8 ("L03.group0.weight", ...),
                 u8 dtype code (0 = float32, 1 = float64),
                 u8 ndim, then ndim u32 dims, then raw array bytes
    u32          CRC32 (zlib) of everything before it

Writing is deterministic: blocks are ordered by layer index then sorted
role name, so save -> load -> save reproduces the file byte for byte.
"""

import struct
import zlib

import numpy as np

from . import archfile
from .errors import CheckpointError

MAGIC = b"LRCF"
VERSION = 1
# stored form is always little-endian, whatever the host order
_STORED_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODE_BY_KIND = {("f", 4): 0, ("f", 8): 1}


def _pack_block(tag, arr):
    kind = (arr.dtype.kind, arr.dtype.itemsize)
    if kind not in _CODE_BY_KIND:
        raise CheckpointError(f"block {tag}: unsupported dtype {arr.dtype}")
    code = _CODE_BY_KIND[kind]
    tag_b = tag.encode()
    head = struct.pack("<H", len(tag_b)) + tag_b
    head += struct.pack("<BB", code, arr.ndim)
    head += struct.pack(f"<{arr.ndim}I", *arr.shape)
    data = np.ascontiguousarray(arr, dtype=_STORED_DTYPES[code]).tobytes()
    return head + data


def serialize(arch, params, extra=None):
    """Checkpoint bytes for (arch, params) plus optional extra blocks.

    `extra` is a dict of tag -> array for state outside the layer list,
    for example fitted preprocessing statistics.
    """
    blocks = []
    for i, block in enumerate(params):
        for role in sorted(block):
            blocks.append((f"L{i:02d}.{role}", block[role]))
    for tag in sorted(extra or {}):
        blocks.append((tag, extra[tag]))
    arch_text = archfile.dumps_arch(arch).encode()
    body = MAGIC + struct.pack("<H", VERSION)
    body += struct.pack("<I", len(arch_text)) + arch_text
    body += struct.pack("<I", len(blocks))
    for tag, arr in blocks:
        body += _pack_block(tag, arr)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, buf, path):
        self.buf, self.pos, self.path = buf, 0, path

    def take(self, n, what):
        if self.pos + n > len(self.buf):
            raise CheckpointError(
                f"{self.path}: truncated while reading {what} at byte {self.pos}"
            )
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def deserialize(buf, path="<bytes>"):
    """Parse checkpoint bytes into (arch, params, extra).

    Magic and CRC are verified before anything is interpreted, so corrupt
    files never yield a partial load.
    """
    if len(buf) < len(MAGIC) + 6 or buf[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint file")
    stored_crc = struct.unpack("<I", buf[-4:])[0]
    if zlib.crc32(buf[:-4]) != stored_crc:
        raise CheckpointError(f"{path}: CRC mismatch, file is corrupt")
    r = _Reader(buf[:-4], path)
    r.take(len(MAGIC), "magic")
    (version,) = r.unpack("<H", "version")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    (arch_len,) = r.unpack("<I", "arch length")
    arch = archfile.loads_arch(r.take(arch_len, "arch text").decode())
    (n_blocks,) = r.unpack("<I", "block count")
    params = [dict() for _ in arch.layers]
    extra = {}
    for _ in range(n_blocks):
        (tag_len,) = r.unpack("<H", "tag length")
        tag = r.take(tag_len, "tag").decode()
        code, ndim = r.unpack("<BB", "dtype/ndim")
        if code not in _STORED_DTYPES:
            raise CheckpointError(f"{path}: block {tag}: unknown dtype code {code}")
        shape = r.unpack(f"<{ndim}I", "dims")
        dtype = _STORED_DTYPES[code]
        nbytes = int(np.prod(shape)) * dtype.itemsize
        arr = np.frombuffer(r.take(nbytes, f"block {tag}"), dtype=dtype)
        arr = arr.reshape(shape).astype(dtype.newbyteorder("="))
        head, _, role = tag.partition(".")
        if role and head[:1] == "L" and head[1:].isdigit():
            idx = int(head[1:])
            if idx >= len(params):
                raise CheckpointError(f"{path}: block {tag} beyond layer count")
            params[idx][role] = arr
        else:
            extra[tag] = arr
    if r.pos != len(r.buf):
        raise CheckpointError(f"{path}: {len(r.buf) - r.pos} trailing bytes")
    return arch, params, extra


def save_checkpoint(path, arch, params, extra=None):
    data = serialize(arch, params, extra)
    with open(path, "wb") as f:
        f.write(data)


def load_checkpoint(path):
    with open(path, "rb") as f:
        buf = f.read()
    return deserialize(buf, path=str(path))
