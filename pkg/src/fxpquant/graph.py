"""Network graphs: layer descriptors, weight storage, shape inference, MAC counts.

Layout conventions are fixed once for the whole toolkit: activations are
channels-first (C, H, W) row-major, conv weights are (out_channels,
in_channels, kernel_h, kernel_w), fully-connected weights are
(out_features, in_features) applied to the row-major flattening of the
incoming activation. Graphs are immutable after construction and safe to
share across workers.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Union

import numpy as np

SUPPORTED_LAYER_KINDS = ("conv2d", "fully_connected", "relu", "maxpool")


class GraphError(ValueError):
    """Structural problem in a network: bad shapes, missing or orphan weights."""


@dataclass(frozen=True)
class Conv2D:
    out_channels: int
    kernel_h: int
    kernel_w: int
    stride: int = 1
    pad: int = 0
    has_bias: bool = True

    def __post_init__(self):
        if self.out_channels < 1 or self.kernel_h < 1 or self.kernel_w < 1:
            raise GraphError("conv2d needs out_channels and kernel dims >= 1")
        if self.stride < 1 or self.pad < 0:
            raise GraphError("conv2d needs stride >= 1 and pad >= 0")


@dataclass(frozen=True)
class FullyConnected:
    out_features: int
    has_bias: bool = True

    def __post_init__(self):
        if self.out_features < 1:
            raise GraphError("fully_connected needs out_features >= 1")


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class MaxPool:
    window: int
    stride: int

    def __post_init__(self):
        if self.window < 1 or self.stride < 1:
            raise GraphError("maxpool needs window and stride >= 1")


LayerSpec = Union[Conv2D, FullyConnected, ReLU, MaxPool]


def is_weight_bearing(spec: LayerSpec) -> bool:
    """Conv2D and FullyConnected are the only weight- and MAC-bearing layers."""
    return isinstance(spec, (Conv2D, FullyConnected))


@dataclass(frozen=True)
class LayerWeights:
    weight: np.ndarray
    bias: Optional[np.ndarray] = None


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise GraphError(f"{what} contains non-finite values")


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class NetworkGraph:
    """Ordered layers plus named weight tensors; validated on construction."""

    input_shape: tuple[int, ...]
    layers: tuple[tuple[str, LayerSpec], ...]
    weights: Mapping[str, LayerWeights]

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        object.__setattr__(self, "layers", tuple((str(n), s) for n, s in self.layers))
        frozen = {}
        for name, lw in dict(self.weights).items():
            _check_finite(lw.weight, f"weight tensor '{name}'")
            bias = None
            if lw.bias is not None:
                _check_finite(lw.bias, f"bias tensor '{name}'")
                bias = _freeze(lw.bias)
            frozen[name] = LayerWeights(_freeze(lw.weight), bias)
        object.__setattr__(self, "weights", frozen)
        self._validate()

    def _validate(self) -> None:
        if not self.layers:
            raise GraphError("network has no layers")
        if any(d < 1 for d in self.input_shape):
            raise GraphError("input_shape dimensions must be positive")
        names = [n for n, _ in self.layers]
        if len(set(names)) != len(names):
            raise GraphError("duplicate layer names")
        bearing = {n for n, s in self.layers if is_weight_bearing(s)}
        missing = bearing - set(self.weights)
        if missing:
            raise GraphError(f"missing weights for layer(s): {sorted(missing)}")
        orphans = set(self.weights) - bearing
        if orphans:
            raise GraphError(f"orphan weight entries: {sorted(orphans)}")
        # Shape inference doubles as the end-to-end consistency check.
        infer_shapes(self)

    def weight_bearing_names(self) -> list[str]:
        return [n for n, s in self.layers if is_weight_bearing(s)]

    def layer_spec(self, name: str) -> LayerSpec:
        for n, s in self.layers:
            if n == name:
                return s
        raise KeyError(name)


def infer_shapes(net: NetworkGraph) -> list[tuple[int, ...]]:
    """Per-layer output shapes using floor conv/pool arithmetic.

    out = floor((in + 2*pad - kernel) / stride) + 1. Raises GraphError naming
    the offending layer when a shape cannot be produced or weights disagree.
    """
    shape = tuple(net.input_shape)
    out: list[tuple[int, ...]] = []
    for name, spec in net.layers:
        if isinstance(spec, Conv2D):
            if len(shape) != 3:
                raise GraphError(f"layer '{name}': conv2d needs a (C, H, W) input, got {shape}")
            c, h, w = shape
            lw = net.weights[name]
            expect = (spec.out_channels, c, spec.kernel_h, spec.kernel_w)
            if lw.weight.shape != expect:
                raise GraphError(
                    f"layer '{name}': weight shape {lw.weight.shape} != expected {expect}"
                )
            if spec.has_bias and (lw.bias is None or lw.bias.shape != (spec.out_channels,)):
                raise GraphError(f"layer '{name}': bias missing or mis-shaped")
            oh = (h + 2 * spec.pad - spec.kernel_h) // spec.stride + 1
            ow = (w + 2 * spec.pad - spec.kernel_w) // spec.stride + 1
            if oh < 1 or ow < 1:
                raise GraphError(f"layer '{name}': kernel {spec.kernel_h}x{spec.kernel_w} "
                                 f"does not fit input {shape}")
            shape = (spec.out_channels, oh, ow)
        elif isinstance(spec, FullyConnected):
            in_features = int(np.prod(shape))
            lw = net.weights[name]
            expect = (spec.out_features, in_features)
            if lw.weight.shape != expect:
                raise GraphError(
                    f"layer '{name}': weight shape {lw.weight.shape} != expected {expect}"
                )
            if spec.has_bias and (lw.bias is None or lw.bias.shape != (spec.out_features,)):
                raise GraphError(f"layer '{name}': bias missing or mis-shaped")
            shape = (spec.out_features,)
        elif isinstance(spec, ReLU):
            pass
        elif isinstance(spec, MaxPool):
            if len(shape) != 3:
                raise GraphError(f"layer '{name}': maxpool needs a (C, H, W) input, got {shape}")
            c, h, w = shape
            oh = (h - spec.window) // spec.stride + 1
            ow = (w - spec.window) // spec.stride + 1
            if oh < 1 or ow < 1:
                raise GraphError(f"layer '{name}': window {spec.window} does not fit {shape}")
            shape = (c, oh, ow)
        else:
            raise GraphError(f"layer '{name}': unsupported layer kind {type(spec).__name__}")
        out.append(shape)
    return out


def mac_count(net: NetworkGraph) -> dict[str, int]:
    """Nominal multiply-accumulate count per layer, before any skipping.

    Invariant under quantization settings; ReLU and MaxPool count zero.
    """
    shapes = infer_shapes(net)
    shape = tuple(net.input_shape)
    counts: dict[str, int] = {}
    for (name, spec), out_shape in zip(net.layers, shapes):
        if isinstance(spec, Conv2D):
            in_c = shape[0]
            out_elems = int(np.prod(out_shape))
            counts[name] = out_elems * in_c * spec.kernel_h * spec.kernel_w
        elif isinstance(spec, FullyConnected):
            counts[name] = int(np.prod(shape)) * spec.out_features
        else:
            counts[name] = 0
        shape = out_shape
    return counts


def accumulation_depth(net: NetworkGraph) -> dict[str, int]:
    """Products summed per output element (conv: C*kh*kw, FC: in_features)."""
    shape = tuple(net.input_shape)
    depth: dict[str, int] = {}
    for (name, spec), out_shape in zip(net.layers, infer_shapes(net)):
        if isinstance(spec, Conv2D):
            depth[name] = shape[0] * spec.kernel_h * spec.kernel_w
        elif isinstance(spec, FullyConnected):
            depth[name] = int(np.prod(shape))
        shape = out_shape
    return depth
