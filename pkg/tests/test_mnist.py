import struct

import numpy as np
import pytest

from fxpquant import IdxFormatError, load_mnist
from fxpquant.mnist import (
    IMAGE_MAGIC,
    LABEL_MAGIC,
    load_idx_images,
    load_idx_labels,
    write_idx_images,
    write_idx_labels,
)


def write_pair(tmp_path, images, labels):
    ip, lp = tmp_path / "imgs", tmp_path / "lbls"
    write_idx_images(images, ip)
    write_idx_labels(labels, lp)
    return ip, lp


def test_load_mnist_shapes_and_normalization(tmp_path):
    rng = np.random.default_rng(60)
    images = rng.integers(0, 256, (5, 6, 6), dtype=np.uint8)
    images[0, 0, 0] = 255
    images[0, 0, 1] = 0
    labels = np.array([0, 1, 2, 3, 4], dtype=np.uint8)
    ip, lp = write_pair(tmp_path, images, labels)
    ds = load_mnist(ip, lp)
    assert len(ds) == 5
    assert ds.images.shape == (5, 1, 6, 6)
    assert ds.images[0, 0, 0, 0] == 1.0   # byte 255 -> exactly 1.0
    assert ds.images[0, 0, 0, 1] == 0.0
    assert ds.images.min() >= 0.0 and ds.images.max() <= 1.0
    img, label = ds[3]
    assert img.shape == (1, 6, 6) and label == 3


def test_idx_magic_validation(tmp_path):
    p = tmp_path / "bad"
    p.write_bytes(struct.pack(">IIII", 0xDEADBEEF, 1, 2, 2) + b"\x00" * 4)
    with pytest.raises(IdxFormatError, match="magic"):
        load_idx_images(p)
    p.write_bytes(struct.pack(">II", 0xDEADBEEF, 1) + b"\x00")
    with pytest.raises(IdxFormatError, match="magic"):
        load_idx_labels(p)
    # image magic on a label load (and vice versa) is rejected too
    p.write_bytes(struct.pack(">II", IMAGE_MAGIC, 1) + b"\x00")
    with pytest.raises(IdxFormatError, match="magic"):
        load_idx_labels(p)


def test_truncated_payload(tmp_path):
    p = tmp_path / "short"
    p.write_bytes(struct.pack(">IIII", IMAGE_MAGIC, 3, 4, 4) + b"\x00" * 10)
    with pytest.raises(IdxFormatError, match="truncated"):
        load_idx_images(p)
    p.write_bytes(struct.pack(">II", LABEL_MAGIC, 9) + b"\x00" * 4)
    with pytest.raises(IdxFormatError, match="truncated"):
        load_idx_labels(p)


def test_trailing_bytes_rejected(tmp_path):
    p = tmp_path / "long"
    p.write_bytes(struct.pack(">IIII", IMAGE_MAGIC, 1, 2, 2) + b"\x00" * 5)
    with pytest.raises(IdxFormatError, match="trailing"):
        load_idx_images(p)


def test_count_mismatch_between_files(tmp_path):
    rng = np.random.default_rng(61)
    ip, lp = write_pair(
        tmp_path,
        rng.integers(0, 256, (4, 3, 3), dtype=np.uint8),
        np.zeros(3, dtype=np.uint8),
    )
    with pytest.raises(IdxFormatError, match="count"):
        load_mnist(ip, lp)


def test_subset_and_take(tmp_path):
    rng = np.random.default_rng(62)
    ip, lp = write_pair(
        tmp_path,
        rng.integers(0, 256, (10, 3, 3), dtype=np.uint8),
        np.arange(10, dtype=np.uint8),
    )
    ds = load_mnist(ip, lp)
    sub = ds.subset([7, 2, 5])
    assert [sub[i][1] for i in range(3)] == [7, 2, 5]
    assert len(ds.take(4)) == 4


def test_committed_validation_fixture_header(fixtures_dir):
    path = fixtures_dir / "mnist" / "t10k-images-idx3-ubyte"
    if not path.exists():
        pytest.skip("MNIST fixture not present")
    images = load_idx_images(path)
    assert images.shape == (10000, 28, 28)
    labels = load_idx_labels(fixtures_dir / "mnist" / "t10k-labels-idx1-ubyte")
    assert labels.shape == (10000,)
    assert set(np.unique(labels)) <= set(range(10))
