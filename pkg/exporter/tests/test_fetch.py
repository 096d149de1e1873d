import gzip
import hashlib

import pytest

from cnnexport import mnist_fetch
from cnnexport.mnist_fetch import FetchError, fetch_mnist


@pytest.fixture
def fake_distribution(tmp_path, monkeypatch):
    """A miniature MNIST-like distribution served over file:// URLs."""
    payloads = {
        "train-images-idx3-ubyte": b"\x00\x00\x08\x03" + b"imgs" * 10,
        "train-labels-idx1-ubyte": b"\x00\x00\x08\x01" + b"lbl" * 5,
        "t10k-images-idx3-ubyte": b"\x00\x00\x08\x03" + b"IMG" * 7,
        "t10k-labels-idx1-ubyte": b"\x00\x00\x08\x01" + b"L" * 9,
    }
    mirror = tmp_path / "mirror"
    mirror.mkdir()
    table = {}
    for name, raw in payloads.items():
        blob = gzip.compress(raw)
        (mirror / f"{name}.gz").write_bytes(blob)
        table[name] = (hashlib.md5(blob).hexdigest(),
                       hashlib.md5(raw).hexdigest(), len(raw))
    monkeypatch.setattr(mnist_fetch, "FILES", table)
    return mirror, payloads


def test_download_verifies_and_writes(fake_distribution, tmp_path):
    mirror, payloads = fake_distribution
    dest = tmp_path / "data"
    results = fetch_mnist(dest, mirrors=[f"file://{mirror}/"], log=lambda *_: None)
    for name, raw in payloads.items():
        assert (dest / name).read_bytes() == raw
        assert results[name].cached is False


def test_cached_files_skip_download(fake_distribution, tmp_path):
    mirror, payloads = fake_distribution
    dest = tmp_path / "data"
    dest.mkdir()
    for name, raw in payloads.items():
        (dest / name).write_bytes(raw)
    # no mirror needed at all when the cache verifies
    results = fetch_mnist(dest, mirrors=["file:///nonexistent/"], log=lambda *_: None)
    assert all(r.cached for r in results.values())


def test_corrupted_cache_aborts(fake_distribution, tmp_path):
    mirror, payloads = fake_distribution
    dest = tmp_path / "data"
    dest.mkdir()
    name = "t10k-labels-idx1-ubyte"
    (dest / name).write_bytes(payloads[name][:-1] + b"X")
    with pytest.raises(FetchError, match="checksum"):
        fetch_mnist(dest, mirrors=[f"file://{mirror}/"], log=lambda *_: None)


def test_corrupted_download_aborts_without_writing(fake_distribution, tmp_path,
                                                   monkeypatch):
    mirror, payloads = fake_distribution
    name = "train-images-idx3-ubyte"
    (mirror / f"{name}.gz").write_bytes(gzip.compress(b"evil payload"))
    dest = tmp_path / "data"
    with pytest.raises(FetchError, match="archive checksum"):
        fetch_mnist(dest, mirrors=[f"file://{mirror}/"], log=lambda *_: None)
    assert not (dest / name).exists()


def test_unreachable_mirrors_report_all_errors(fake_distribution, tmp_path):
    with pytest.raises(FetchError, match="all mirrors failed"):
        fetch_mnist(tmp_path / "data",
                    mirrors=["file:///no/such/a/", "file:///no/such/b/"],
                    log=lambda *_: None)


def test_real_table_matches_published_checksums():
    # the embedded table carries the canonical values; spot-check invariants
    table = {
        "train-images-idx3-ubyte": 47040016,
        "train-labels-idx1-ubyte": 60008,
        "t10k-images-idx3-ubyte": 7840016,
        "t10k-labels-idx1-ubyte": 10008,
    }
    from cnnexport.mnist_fetch import FILES

    for name, size in table.items():
        gz_md5, raw_md5, raw_size = FILES[name]
        assert raw_size == size
        assert len(gz_md5) == len(raw_md5) == 32
