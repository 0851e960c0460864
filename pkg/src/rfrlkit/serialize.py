"""Binary persistence.

Portable tensor format (one array):
  magic "RFT1" | u32 LE rank | rank x u32 LE extents | u8 dtype tag
  (0 = float32, 1 = float64) | raw little-endian row-major values.
Rank 0 (a scalar) is legal: zero extent words, one value.

Checkpoint format (model + optimizer + config):
  magic "RFRLCKPT" | u16 LE format version (currently 1)
  | u32 LE config byte length | config UTF-8 text (key=value lines)
  | u32 LE tensor count | per tensor: u32 LE name byte length,
    name UTF-8, one portable tensor record.

Reads and writes are byte-exact: round-tripping reproduces the same
file bit for bit, which the training loop relies on for resumable,
deterministic runs.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .errors import ContractError, FormatError

TENSOR_MAGIC = b"RFT1"
CKPT_MAGIC = b"RFRLCKPT"
CKPT_VERSION = 1

_DTYPE_TAGS = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_TAG_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_MAX_RANK = 32


def tensor_to_bytes(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    if arr.dtype not in _DTYPE_TAGS:
        raise ContractError(f"only float32/float64 serialize, got {arr.dtype}")
    tag = _DTYPE_TAGS[arr.dtype]
    head = [TENSOR_MAGIC, struct.pack("<I", arr.ndim)]
    head += [struct.pack("<I", e) for e in arr.shape]
    head.append(struct.pack("<B", tag))
    payload = np.ascontiguousarray(arr).astype(_TAG_DTYPES[tag], copy=False)
    return b"".join(head) + payload.tobytes()


def tensor_from_bytes(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Parse one record starting at offset; returns (array, next offset)."""
    if buf[offset:offset + 4] != TENSOR_MAGIC:
        raise FormatError(f"bad tensor magic at offset {offset}")
    offset += 4
    try:
        (rank,) = struct.unpack_from("<I", buf, offset)
        offset += 4
        if rank > _MAX_RANK:
            raise FormatError(f"implausible tensor rank {rank}")
        shape = struct.unpack_from(f"<{rank}I", buf, offset)
        offset += 4 * rank
        (tag,) = struct.unpack_from("<B", buf, offset)
        offset += 1
    except struct.error:
        raise FormatError("truncated tensor header") from None
    if tag not in _TAG_DTYPES:
        raise FormatError(f"unknown dtype tag {tag}")
    dtype = _TAG_DTYPES[tag]
    count = int(np.prod(shape, dtype=np.int64)) if rank else 1
    nbytes = count * dtype.itemsize
    raw = buf[offset:offset + nbytes]
    if len(raw) < nbytes:
        raise FormatError("truncated tensor payload")
    arr = np.frombuffer(raw, dtype=dtype).reshape(shape)
    native = np.float32 if tag == 0 else np.float64
    return arr.astype(native, copy=True), offset + nbytes


def write_tensor_file(path: str | os.PathLike, arr: np.ndarray) -> None:
    with open(os.fspath(path), "wb") as fh:
        fh.write(tensor_to_bytes(arr))


def read_tensor_file(path: str | os.PathLike) -> np.ndarray:
    with open(os.fspath(path), "rb") as fh:
        buf = fh.read()
    arr, end = tensor_from_bytes(buf, 0)
    if end != len(buf):
        raise FormatError(f"{len(buf) - end} trailing bytes in {path}")
    return arr


def save_checkpoint(path: str | os.PathLike, config_text: str,
                    tensors: list[tuple[str, np.ndarray]]) -> None:
    chunks = [CKPT_MAGIC, struct.pack("<H", CKPT_VERSION)]
    cfg = config_text.encode("utf-8")
    chunks.append(struct.pack("<I", len(cfg)))
    chunks.append(cfg)
    chunks.append(struct.pack("<I", len(tensors)))
    for name, arr in tensors:
        nb = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(nb)))
        chunks.append(nb)
        chunks.append(tensor_to_bytes(arr))
    with open(os.fspath(path), "wb") as fh:
        fh.write(b"".join(chunks))


def load_checkpoint(path: str | os.PathLike) -> tuple[str, dict[str, np.ndarray]]:
    """Returns (config text, name -> array in file order)."""
    with open(os.fspath(path), "rb") as fh:
        buf = fh.read()
    if buf[:8] != CKPT_MAGIC:
        raise FormatError(f"not a checkpoint file: {path}")
    try:
        (version,) = struct.unpack_from("<H", buf, 8)
        if version != CKPT_VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        (cfg_len,) = struct.unpack_from("<I", buf, 10)
        offset = 14
        config_text = buf[offset:offset + cfg_len].decode("utf-8")
        if len(config_text.encode("utf-8")) < cfg_len:
            raise FormatError("truncated config block")
        offset += cfg_len
        (count,) = struct.unpack_from("<I", buf, offset)
        offset += 4
    except struct.error:
        raise FormatError(f"truncated checkpoint header in {path}") from None
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        try:
            (name_len,) = struct.unpack_from("<I", buf, offset)
            offset += 4
        except struct.error:
            raise FormatError(f"truncated tensor name in {path}") from None
        name = buf[offset:offset + name_len].decode("utf-8")
        offset += name_len
        arr, offset = tensor_from_bytes(buf, offset)
        tensors[name] = arr
    if offset != len(buf):
        raise FormatError(f"{len(buf) - offset} trailing bytes in {path}")
    return config_text, tensors
