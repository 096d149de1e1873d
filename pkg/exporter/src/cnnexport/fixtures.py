"""Deterministic fixture artifacts: tiny bundles and MNIST training slices.

The tiny networks exist so the consuming toolkit's oracle and IO tests can
run against committed files without any training step; generation is fully
seeded and byte-stable across runs.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import yaml

from . import idx
from .cnnw import write_container


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _tiny_conv(rng: np.random.Generator):
    descriptor = {
        "name": "tinyconv",
        "input_shape": [1, 6, 6],
        "layers": [
            {"name": "conv", "type": "conv2d", "out_channels": 2, "kernel": [3, 3],
             "stride": 1, "pad": 0, "bias": True},
            {"name": "act", "type": "relu"},
            {"name": "pool", "type": "maxpool", "window": 2, "stride": 2},
            {"name": "fc", "type": "fully_connected", "out_features": 3, "bias": True},
        ],
    }
    entries = {
        "conv.weight": rng.normal(0, 0.3, (2, 1, 3, 3)).astype("<f4"),
        "conv.bias": rng.normal(0, 0.05, (2,)).astype("<f4"),
        "fc.weight": rng.normal(0, 0.3, (3, 8)).astype("<f4"),
        "fc.bias": rng.normal(0, 0.05, (3,)).astype("<f4"),
    }
    return descriptor, entries


def _tiny_fc(rng: np.random.Generator):
    descriptor = {
        "name": "tinyfc",
        "input_shape": [1, 4, 4],
        "layers": [
            {"name": "fc1", "type": "fully_connected", "out_features": 8, "bias": True},
            {"name": "act1", "type": "relu"},
            {"name": "fc2", "type": "fully_connected", "out_features": 4, "bias": True},
        ],
    }
    entries = {
        "fc1.weight": rng.normal(0, 0.4, (8, 16)).astype("<f4"),
        "fc1.bias": rng.normal(0, 0.05, (8,)).astype("<f4"),
        "fc2.weight": rng.normal(0, 0.4, (4, 8)).astype("<f4"),
        "fc2.bias": rng.normal(0, 0.05, (4,)).astype("<f4"),
    }
    return descriptor, entries


def make_fixtures(out_dir, seed: int = 7, log=print) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"seed": seed, "bundles": []}
    for build in (_tiny_conv, _tiny_fc):
        rng = np.random.default_rng(seed)
        descriptor, entries = build(rng)
        name = descriptor["name"]
        dpath = out_dir / f"{name}.yaml"
        wpath = out_dir / f"{name}.cnnw"
        dpath.write_text(yaml.safe_dump(descriptor, sort_keys=False), encoding="utf-8")
        write_container(entries, wpath)
        manifest["bundles"].append({
            "name": name,
            "descriptor": {"file": dpath.name, "sha256": _sha256_file(dpath)},
            "weights": {"file": wpath.name, "sha256": _sha256_file(wpath)},
        })
        log(f"fixture bundle '{name}' written")
    (out_dir / "fixtures.manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
    return manifest


def slice_training_set(data_dir, out_dir, count: int = 4000, log=print) -> dict:
    """First-N deterministic slice of the training split, re-encoded as IDX.

    Used as committed calibration data; disjoint from the validation (t10k)
    split by construction.
    """
    data_dir, out_dir = Path(data_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    images = idx.read_images(data_dir / "train-images-idx3-ubyte")[:count]
    labels = idx.read_labels(data_dir / "train-labels-idx1-ubyte")[:count]
    if images.shape[0] < count:
        raise ValueError(f"training split has only {images.shape[0]} images")
    img_path = out_dir / "train-slice-images-idx3-ubyte"
    lbl_path = out_dir / "train-slice-labels-idx1-ubyte"
    idx.write_images(images, img_path)
    idx.write_labels(labels, lbl_path)
    log(f"training slice of {count} images written to {out_dir}")
    return {
        "count": count,
        "images": {"file": img_path.name, "sha256": _sha256_file(img_path)},
        "labels": {"file": lbl_path.name, "sha256": _sha256_file(lbl_path)},
    }
