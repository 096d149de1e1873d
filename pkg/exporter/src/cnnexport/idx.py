"""Minimal IDX (MNIST) reading/writing used for training and fixture slices."""
from __future__ import annotations

import struct

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


class IdxError(ValueError):
    pass


def read_images(path) -> np.ndarray:
    with open(path, "rb") as f:
        header = f.read(16)
        if len(header) != 16:
            raise IdxError(f"{path}: truncated header")
        magic, count, rows, cols = struct.unpack(">IIII", header)
        if magic != IMAGE_MAGIC:
            raise IdxError(f"{path}: bad image magic 0x{magic:08x}")
        payload = f.read(count * rows * cols)
    if len(payload) != count * rows * cols:
        raise IdxError(f"{path}: truncated image payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(count, rows, cols)


def read_labels(path) -> np.ndarray:
    with open(path, "rb") as f:
        header = f.read(8)
        if len(header) != 8:
            raise IdxError(f"{path}: truncated header")
        magic, count = struct.unpack(">II", header)
        if magic != LABEL_MAGIC:
            raise IdxError(f"{path}: bad label magic 0x{magic:08x}")
        payload = f.read(count)
    if len(payload) != count:
        raise IdxError(f"{path}: truncated label payload")
    return np.frombuffer(payload, dtype=np.uint8)


def write_images(images: np.ndarray, path) -> None:
    images = np.asarray(images, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IMAGE_MAGIC, *images.shape))
        f.write(images.tobytes())


def write_labels(labels: np.ndarray, path) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">II", LABEL_MAGIC, labels.shape[0]))
        f.write(labels.tobytes())
