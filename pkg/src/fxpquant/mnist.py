"""MNIST IDX loading: big-endian headers, pixels scaled to [0, 1].

Image files carry magic 0x00000803 and (count, rows, cols); label files
carry magic 0x00000801 and (count). Byte 255 maps to exactly 1.0; no mean
subtraction is applied (recorded in run metadata by the CLI).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    """Bad magic, truncated payload, or image/label count mismatch."""


@dataclass
class LabeledDataset:
    """Array-backed dataset: images (N, C, H, W) float64 in [0,1], labels (N,)."""

    images: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return self.images.shape[0]

    def __getitem__(self, i: int):
        return self.images[i], int(self.labels[i])

    def subset(self, indices) -> "LabeledDataset":
        indices = np.asarray(indices)
        return LabeledDataset(self.images[indices], self.labels[indices])

    def take(self, n: int) -> "LabeledDataset":
        return LabeledDataset(self.images[:n], self.labels[:n])


def _read_exact(f, n: int, path, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise IdxFormatError(f"{path}: truncated file while reading {what}")
    return data


def load_idx_images(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic, count, rows, cols = struct.unpack(">IIII", _read_exact(f, 16, path, "header"))
        if magic != IMAGE_MAGIC:
            raise IdxFormatError(
                f"{path}: bad magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}"
            )
        payload = _read_exact(f, count * rows * cols, path, f"{count} images")
        if f.read(1):
            raise IdxFormatError(f"{path}: trailing bytes after {count} images")
    return np.frombuffer(payload, dtype=np.uint8).reshape(count, rows, cols)


def load_idx_labels(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic, count = struct.unpack(">II", _read_exact(f, 8, path, "header"))
        if magic != LABEL_MAGIC:
            raise IdxFormatError(
                f"{path}: bad magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}"
            )
        payload = _read_exact(f, count, path, f"{count} labels")
        if f.read(1):
            raise IdxFormatError(f"{path}: trailing bytes after {count} labels")
    return np.frombuffer(payload, dtype=np.uint8)


def load_mnist(images_path, labels_path) -> LabeledDataset:
    """Load an IDX image/label pair as 1xHxW tensors scaled to [0, 1]."""
    raw = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    if raw.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"image count {raw.shape[0]} != label count {labels.shape[0]}"
        )
    images = raw.astype(np.float64)[:, None, :, :] / 255.0
    return LabeledDataset(images, labels.astype(np.int64))


def write_idx_images(images: np.ndarray, path) -> None:
    """Inverse of load_idx_images for building fixture subsets (uint8 HxW)."""
    images = np.asarray(images, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IMAGE_MAGIC, images.shape[0],
                            images.shape[1], images.shape[2]))
        f.write(images.tobytes())


def write_idx_labels(labels: np.ndarray, path) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">II", LABEL_MAGIC, labels.shape[0]))
        f.write(labels.tobytes())
