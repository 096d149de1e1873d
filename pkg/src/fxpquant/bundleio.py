"""Model bundle IO: YAML descriptor plus the CNNW binary weight container.

Container layout (everything little-endian):

    magic   4 bytes   b"CNNW"
    version u32       1
    count   u32       number of entries
    entry   u16 name length, UTF-8 name, u8 dtype (0 = float32), u8 rank,
            rank x u32 dims, row-major float32 payload

Weight entries are named "<layer>.weight" / "<layer>.bias". The descriptor
is a small YAML document (see README for the schema); both formats are
validated strictly and every error names the offending layer or tensor.
"""
from __future__ import annotations

import struct
from typing import Mapping

import numpy as np
import yaml

from .graph import (
    Conv2D,
    FullyConnected,
    GraphError,
    LayerSpec,
    LayerWeights,
    MaxPool,
    NetworkGraph,
    ReLU,
    SUPPORTED_LAYER_KINDS,
    is_weight_bearing,
)

CNNW_MAGIC = b"CNNW"
CNNW_VERSION = 1
DTYPE_FLOAT32 = 0


class BundleError(ValueError):
    """Malformed descriptor or weight container."""


# ---------------------------------------------------------------------------
# CNNW weight container
# ---------------------------------------------------------------------------

def write_weights(entries: Mapping[str, np.ndarray], path) -> None:
    """Write named tensors as float32; bit-exact for float32 inputs."""
    with open(path, "wb") as f:
        f.write(CNNW_MAGIC)
        f.write(struct.pack("<II", CNNW_VERSION, len(entries)))
        for name, arr in entries.items():
            arr = np.ascontiguousarray(arr, dtype="<f4")
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<BB", DTYPE_FLOAT32, arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())


def read_weights(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        blob = f.read()
    view = memoryview(blob)
    pos = 0

    def take(n: int, what: str) -> memoryview:
        nonlocal pos
        if pos + n > len(view):
            raise BundleError(f"{path}: truncated container while reading {what}")
        chunk = view[pos : pos + n]
        pos += n
        return chunk

    if bytes(take(4, "magic")) != CNNW_MAGIC:
        raise BundleError(f"{path}: bad magic, not a CNNW container")
    version, count = struct.unpack("<II", take(8, "header"))
    if version != CNNW_VERSION:
        raise BundleError(f"{path}: unsupported container version {version}")
    entries: dict[str, np.ndarray] = {}
    for i in range(count):
        (name_len,) = struct.unpack("<H", take(2, f"entry {i} name length"))
        name = bytes(take(name_len, f"entry {i} name")).decode("utf-8")
        dtype_code, rank = struct.unpack("<BB", take(2, f"'{name}' dtype/rank"))
        if dtype_code != DTYPE_FLOAT32:
            raise BundleError(f"{path}: '{name}' has unsupported dtype code {dtype_code}")
        dims = struct.unpack(f"<{rank}I", take(4 * rank, f"'{name}' dims"))
        n_values = int(np.prod(dims)) if rank else 1
        payload = take(4 * n_values, f"'{name}' payload")
        arr = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)
        if name in entries:
            raise BundleError(f"{path}: duplicate entry '{name}'")
        entries[name] = arr
    if pos != len(view):
        raise BundleError(f"{path}: {len(view) - pos} trailing bytes after last entry")
    return entries


# ---------------------------------------------------------------------------
# Descriptor
# ---------------------------------------------------------------------------

def _parse_layer(entry: dict) -> tuple[str, LayerSpec]:
    if not isinstance(entry, dict) or "name" not in entry or "type" not in entry:
        raise BundleError(f"layer entry {entry!r} needs 'name' and 'type'")
    name = str(entry["name"])
    kind = str(entry["type"]).lower()
    try:
        if kind == "conv2d":
            kernel = entry["kernel"]
            kh, kw = (kernel, kernel) if isinstance(kernel, int) else map(int, kernel)
            return name, Conv2D(
                out_channels=int(entry["out_channels"]),
                kernel_h=kh,
                kernel_w=kw,
                stride=int(entry.get("stride", 1)),
                pad=int(entry.get("pad", 0)),
                has_bias=bool(entry.get("bias", True)),
            )
        if kind == "fully_connected":
            return name, FullyConnected(
                out_features=int(entry["out_features"]),
                has_bias=bool(entry.get("bias", True)),
            )
        if kind == "relu":
            return name, ReLU()
        if kind == "maxpool":
            return name, MaxPool(window=int(entry["window"]), stride=int(entry["stride"]))
    except KeyError as exc:
        raise BundleError(f"layer '{name}' ({kind}): missing field {exc}") from None
    raise BundleError(
        f"layer '{name}': unsupported layer kind '{kind}' "
        f"(supported: {', '.join(SUPPORTED_LAYER_KINDS)})"
    )


def parse_descriptor(text: str) -> tuple[tuple[int, ...], list[tuple[str, LayerSpec]], str]:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise BundleError(f"descriptor is not valid YAML: {exc}") from None
    if not isinstance(doc, dict):
        raise BundleError("descriptor must be a mapping")
    for key in ("input_shape", "layers"):
        if key not in doc:
            raise BundleError(f"descriptor missing '{key}'")
    input_shape = tuple(int(d) for d in doc["input_shape"])
    layers = [_parse_layer(e) for e in doc["layers"]]
    return input_shape, layers, str(doc.get("name", "network"))


def emit_descriptor(net: NetworkGraph, name: str = "network") -> str:
    entries = []
    for lname, spec in net.layers:
        if isinstance(spec, Conv2D):
            entries.append({
                "name": lname, "type": "conv2d", "out_channels": spec.out_channels,
                "kernel": [spec.kernel_h, spec.kernel_w], "stride": spec.stride,
                "pad": spec.pad, "bias": spec.has_bias,
            })
        elif isinstance(spec, FullyConnected):
            entries.append({"name": lname, "type": "fully_connected",
                            "out_features": spec.out_features, "bias": spec.has_bias})
        elif isinstance(spec, ReLU):
            entries.append({"name": lname, "type": "relu"})
        elif isinstance(spec, MaxPool):
            entries.append({"name": lname, "type": "maxpool",
                            "window": spec.window, "stride": spec.stride})
    doc = {"name": name, "input_shape": list(net.input_shape), "layers": entries}
    return yaml.safe_dump(doc, sort_keys=False)


# ---------------------------------------------------------------------------
# Bundle = descriptor + container
# ---------------------------------------------------------------------------

def load_model(descriptor_path, weights_path) -> NetworkGraph:
    """Load and fully validate a model bundle (shape inference runs at load)."""
    with open(descriptor_path, "r", encoding="utf-8") as f:
        input_shape, layers, _ = parse_descriptor(f.read())
    entries = read_weights(weights_path)
    weights: dict[str, LayerWeights] = {}
    used = set()
    for name, spec in layers:
        if not is_weight_bearing(spec):
            continue
        wkey = f"{name}.weight"
        if wkey not in entries:
            raise BundleError(f"container has no entry '{wkey}'")
        used.add(wkey)
        bias = None
        has_bias = getattr(spec, "has_bias", False)
        bkey = f"{name}.bias"
        if has_bias:
            if bkey not in entries:
                raise BundleError(f"container has no entry '{bkey}'")
            bias = entries[bkey]
            used.add(bkey)
        weights[name] = LayerWeights(entries[wkey], bias)
    orphans = set(entries) - used
    if orphans:
        raise BundleError(f"container has orphan entries: {sorted(orphans)}")
    try:
        return NetworkGraph(input_shape, tuple(layers), weights)
    except GraphError as exc:
        raise BundleError(str(exc)) from None


def save_model(net: NetworkGraph, descriptor_path, weights_path,
               name: str = "network") -> None:
    with open(descriptor_path, "w", encoding="utf-8") as f:
        f.write(emit_descriptor(net, name))
    entries: dict[str, np.ndarray] = {}
    for lname in net.weight_bearing_names():
        lw = net.weights[lname]
        entries[f"{lname}.weight"] = lw.weight
        if lw.bias is not None:
            entries[f"{lname}.bias"] = lw.bias
    write_weights(entries, weights_path)
