"""Checkpoint -> (descriptor, CNNW container, manifest, reference logits).

The exported bundle is the consuming toolkit's input artifact; everything
here speaks only the documented file formats. Tensor payloads are hashed
(sha256 over little-endian float32 bytes) into a manifest shipped beside the
bundle, and the container is re-read after writing to prove the round trip
is bit-exact.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import yaml

from .cnnw import read_container, write_container
from .lenet import LeNet5, evaluate

SUPPORTED_LEAF_MODULES = (nn.Conv2d, nn.Linear, nn.ReLU, nn.MaxPool2d, nn.Flatten)


class ExportError(ValueError):
    pass


def _sha256(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr, dtype="<f4").tobytes()).hexdigest()


def validate_supported(model: nn.Module) -> None:
    """Reject checkpoints containing layer kinds the bundle format cannot carry."""
    bad = []
    for name, module in model.named_modules():
        if module is model or list(module.children()):
            continue
        if not isinstance(module, SUPPORTED_LEAF_MODULES):
            bad.append(f"{name} ({type(module).__name__})")
    if bad:
        raise ExportError(f"unsupported layer(s) in checkpoint: {', '.join(bad)}")


def lenet_layer_plan(model: LeNet5) -> list[dict]:
    """Descriptor layer list derived from the module shapes (framework mapping)."""
    c1, c2 = model.conv1, model.conv2
    f1, f2 = model.fc1, model.fc2
    return [
        {"name": "conv1", "type": "conv2d", "out_channels": c1.out_channels,
         "kernel": list(c1.kernel_size), "stride": c1.stride[0], "pad": c1.padding[0],
         "bias": c1.bias is not None},
        {"name": "relu1", "type": "relu"},
        {"name": "pool1", "type": "maxpool", "window": 2, "stride": 2},
        {"name": "conv2", "type": "conv2d", "out_channels": c2.out_channels,
         "kernel": list(c2.kernel_size), "stride": c2.stride[0], "pad": c2.padding[0],
         "bias": c2.bias is not None},
        {"name": "relu2", "type": "relu"},
        {"name": "pool2", "type": "maxpool", "window": 2, "stride": 2},
        {"name": "fc1", "type": "fully_connected", "out_features": f1.out_features,
         "bias": f1.bias is not None},
        {"name": "relu3", "type": "relu"},
        {"name": "fc2", "type": "fully_connected", "out_features": f2.out_features,
         "bias": f2.bias is not None},
    ]


LENET_PARAM_MAP = {
    "conv1": "conv1", "conv2": "conv2", "fc1": "fc1", "fc2": "fc2",
}


def export_model(
    model: LeNet5,
    out_dir,
    name: str = "lenet5",
    test_images: torch.Tensor | None = None,
    test_labels: torch.Tensor | None = None,
    reference_count: int = 100,
    training_info: dict | None = None,
) -> dict:
    """Write descriptor + container + manifest (+ reference logits); returns manifest."""
    validate_supported(model)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = model.eval()

    entries: dict[str, np.ndarray] = {}
    tensor_rows = []
    for torch_name, layer_name in LENET_PARAM_MAP.items():
        module = getattr(model, torch_name)
        weight = module.weight.detach().cpu().numpy().astype("<f4")
        entries[f"{layer_name}.weight"] = weight
        tensor_rows.append({"name": f"{layer_name}.weight",
                            "shape": list(weight.shape), "sha256": _sha256(weight)})
        if module.bias is not None:
            bias = module.bias.detach().cpu().numpy().astype("<f4")
            entries[f"{layer_name}.bias"] = bias
            tensor_rows.append({"name": f"{layer_name}.bias",
                                "shape": list(bias.shape), "sha256": _sha256(bias)})

    descriptor_path = out_dir / f"{name}.yaml"
    weights_path = out_dir / f"{name}.cnnw"
    descriptor = {
        "name": name,
        "input_shape": [1, 28, 28],
        "layers": lenet_layer_plan(model),
    }
    descriptor_path.write_text(yaml.safe_dump(descriptor, sort_keys=False),
                               encoding="utf-8")
    write_container(entries, weights_path)

    # Prove the container round-trips bit-exactly before shipping it.
    reread = read_container(weights_path)
    for key, arr in entries.items():
        if key not in reread or _sha256(reread[key]) != _sha256(arr):
            raise ExportError(f"container round-trip mismatch for '{key}'")

    manifest = {
        "model": name,
        "framework": f"pytorch {torch.__version__}",
        "normalization": "pixels scaled to [0,1], no mean subtraction",
        "layer_mapping": [
            {"framework": f"{tn} ({type(getattr(model, tn)).__name__})",
             "descriptor_layer": ln}
            for tn, ln in LENET_PARAM_MAP.items()
        ],
        "tensors": tensor_rows,
        "files": {"descriptor": descriptor_path.name, "weights": weights_path.name},
    }
    if training_info:
        manifest["training"] = training_info

    if test_images is not None and test_labels is not None:
        acc32 = evaluate(model, test_images, test_labels)
        model64 = model.double()
        with torch.no_grad():
            ref_logits = model64(test_images[:reference_count].double()).numpy()
        hits64 = 0
        with torch.no_grad():
            for i in range(0, test_images.shape[0], 1000):
                logits = model64(test_images[i : i + 1000].double())
                hits64 += int((logits.argmax(1) == test_labels[i : i + 1000]).sum())
        manifest["source_accuracy"] = {
            "float32_top1": acc32,
            "float64_top1": hits64 / test_images.shape[0],
            "eval_images": int(test_images.shape[0]),
        }
        reference = {
            "count": int(ref_logits.shape[0]),
            "dtype": "float64",
            "note": "logits of the first N validation images, float64 weights/inputs",
            "labels": test_labels[:reference_count].tolist(),
            "logits": ref_logits.tolist(),
        }
        ref_path = out_dir / f"{name}.reference.json"
        ref_path.write_text(json.dumps(reference), encoding="utf-8")
        manifest["files"]["reference"] = ref_path.name
        model.float()

    manifest_path = out_dir / f"{name}.manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest
