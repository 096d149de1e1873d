"""CNNW weight container writer/reader (independent implementation).

Wire format, all little-endian: magic b"CNNW", u32 version = 1, u32 entry
count; per entry u16 name length + UTF-8 name, u8 dtype code (0 = float32),
u8 rank, rank x u32 dims, row-major float32 payload. This module speaks only
the documented format; it shares no code with the consuming toolkit.
"""
from __future__ import annotations

import struct
from typing import Mapping

import numpy as np

MAGIC = b"CNNW"
VERSION = 1
DTYPE_FLOAT32 = 0


class ContainerError(ValueError):
    pass


def write_container(entries: Mapping[str, np.ndarray], path) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(entries)))
        for name, arr in entries.items():
            arr = np.ascontiguousarray(arr, dtype="<f4")
            raw_name = name.encode("utf-8")
            f.write(struct.pack("<H", len(raw_name)))
            f.write(raw_name)
            f.write(struct.pack("<BB", DTYPE_FLOAT32, arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())


def read_container(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        data = f.read()
    pos = 0

    def take(n, what):
        nonlocal pos
        if pos + n > len(data):
            raise ContainerError(f"{path}: truncated while reading {what}")
        out = data[pos : pos + n]
        pos += n
        return out

    if take(4, "magic") != MAGIC:
        raise ContainerError(f"{path}: bad magic")
    version, count = struct.unpack("<II", take(8, "header"))
    if version != VERSION:
        raise ContainerError(f"{path}: unsupported version {version}")
    entries = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2, "name length"))
        name = take(nlen, "name").decode("utf-8")
        dtype_code, rank = struct.unpack("<BB", take(2, "dtype/rank"))
        if dtype_code != DTYPE_FLOAT32:
            raise ContainerError(f"{path}: entry '{name}' has dtype code {dtype_code}")
        dims = struct.unpack(f"<{rank}I", take(4 * rank, "dims"))
        n_values = 1
        for d in dims:
            n_values *= d
        arr = np.frombuffer(take(4 * n_values, "payload"), dtype="<f4").reshape(dims)
        entries[name] = arr.copy()
    if pos != len(data):
        raise ContainerError(f"{path}: trailing bytes")
    return entries
