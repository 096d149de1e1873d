"""MNIST acquisition with mandatory checksum verification.

Files already present at the destination are accepted as a cache hit only if
their raw MD5 matches the published value; anything downloaded is verified
twice (gzip archive, then decompressed payload) and a mismatch aborts
without leaving a corrupt file behind.
"""
from __future__ import annotations

import gzip
import hashlib
import urllib.request
from dataclasses import dataclass
from pathlib import Path

DEFAULT_MIRRORS = [
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "http://yann.lecun.com/exdb/mnist/",
]

# (gzip md5, raw md5, raw size in bytes) per published distribution.
FILES = {
    "train-images-idx3-ubyte": ("f68b3c2dcbeaaa9fbdd348bbdeb94873",
                                "6bbc9ace898e44ae57da46a324031adb", 47040016),
    "train-labels-idx1-ubyte": ("d53e105ee54ea40749a09fcbcd1e9432",
                                "a25bea736e30d166cdddb491f175f624", 60008),
    "t10k-images-idx3-ubyte": ("9fb629c4189551a2d022fa330f9573f3",
                               "2646ac647ad5339dbf082846283269ea", 7840016),
    "t10k-labels-idx1-ubyte": ("ec29112dd5afa0611ce80d1b7f02629c",
                               "27ae3e4e09519cfbb04c329615203637", 10008),
}


class FetchError(RuntimeError):
    pass


@dataclass
class FetchResult:
    path: Path
    cached: bool
    md5: str


def _md5(data: bytes) -> str:
    return hashlib.md5(data).hexdigest()


def fetch_mnist(dest, mirrors=None, log=print) -> dict[str, FetchResult]:
    """Place the four verified IDX files under `dest`; returns per-file results."""
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    mirrors = mirrors or DEFAULT_MIRRORS
    results = {}
    for name, (gz_md5, raw_md5, raw_size) in FILES.items():
        target = dest / name
        if target.exists():
            data = target.read_bytes()
            got = _md5(data)
            if got != raw_md5:
                raise FetchError(
                    f"{target}: cached file fails checksum "
                    f"(md5 {got}, expected {raw_md5}); delete it and retry"
                )
            results[name] = FetchResult(target, cached=True, md5=got)
            log(f"{name}: cached, checksum ok")
            continue
        blob = None
        errors = []
        for mirror in mirrors:
            url = mirror.rstrip("/") + "/" + name + ".gz"
            try:
                with urllib.request.urlopen(url, timeout=60) as response:
                    blob = response.read()
                break
            except OSError as exc:
                errors.append(f"{url}: {exc}")
        if blob is None:
            raise FetchError("all mirrors failed:\n  " + "\n  ".join(errors))
        if _md5(blob) != gz_md5:
            raise FetchError(f"{name}.gz: archive checksum mismatch, refusing to unpack")
        raw = gzip.decompress(blob)
        got = _md5(raw)
        if got != raw_md5 or len(raw) != raw_size:
            raise FetchError(f"{name}: payload checksum/size mismatch after decompression")
        target.write_bytes(raw)
        results[name] = FetchResult(target, cached=False, md5=got)
        log(f"{name}: downloaded, checksum ok")
    return results
