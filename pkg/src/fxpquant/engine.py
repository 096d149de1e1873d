"""Forward-pass engine: float reference mode and fixed-point simulation mode.

In quantized mode the input of every weight-bearing layer is fake-quantized
with that layer's input spec and the weights with its weight spec; the layer
arithmetic itself runs in float64, simulating a wide accumulator, and values
are re-quantized only at the next weight-bearing layer boundary. Biases are
quantized with the layer's weight bit width on their own power-of-two scale.

Instrumentation records, per layer: nominal and skipped MACs (a MAC is
skipped iff its input code or weight code is zero), zero fractions of the
quantized operands, and max-abs activation statistics. All aggregation uses
integer counters and max-reductions, so results are identical for any
worker count or chunking.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .graph import (
    Conv2D,
    FullyConnected,
    MaxPool,
    NetworkGraph,
    ReLU,
    is_weight_bearing,
)
from .quantize import QuantSpec, QuantizedTensor, fake_quantize, next_pow2_scale, quantize

# Fixed evaluation chunk so per-chunk GEMM shapes (and hence results) do not
# depend on the worker count.
CHUNK_SIZE = 256

FLOAT = "float"
QUANTIZED = "quantized"


class EngineError(ValueError):
    """Forward-pass contract violation: bad image shape or incomplete config."""


@dataclass(frozen=True)
class LayerQuant:
    input_spec: QuantSpec
    weight_spec: QuantSpec


@dataclass(frozen=True)
class QuantConfig:
    """Per weight-bearing-layer quantization specs plus the engine mode flag."""

    mode: str
    layers: Mapping[str, LayerQuant]

    def __post_init__(self):
        if self.mode not in (FLOAT, QUANTIZED):
            raise EngineError(f"mode must be '{FLOAT}' or '{QUANTIZED}', got {self.mode!r}")
        object.__setattr__(self, "layers", dict(self.layers))

    @staticmethod
    def float_mode() -> "QuantConfig":
        return QuantConfig(FLOAT, {})

    @staticmethod
    def from_bits(
        net: NetworkGraph,
        bits: Mapping[str, tuple[int, int]],
        scales: Mapping[str, tuple[float, float]],
    ) -> "QuantConfig":
        """Build a quantized config from per-layer (input_bits, weight_bits)."""
        layers = {}
        for name in net.weight_bearing_names():
            if name not in bits or name not in scales:
                raise EngineError(f"bits/scales missing for layer '{name}'")
            b_in, b_w = bits[name]
            s_in, s_w = scales[name]
            layers[name] = LayerQuant(QuantSpec(b_in, s_in), QuantSpec(b_w, s_w))
        return QuantConfig(QUANTIZED, layers)

    @staticmethod
    def uniform(
        net: NetworkGraph, bits: int, scales: Mapping[str, tuple[float, float]]
    ) -> "QuantConfig":
        return QuantConfig.from_bits(
            net, {n: (bits, bits) for n in net.weight_bearing_names()}, scales
        )

    def with_bits(self, layer: str, knob: str, bits: int) -> "QuantConfig":
        """Copy of this config with one layer's input or weight bit width changed."""
        lq = self.layers[layer]
        if knob == "input":
            lq = LayerQuant(QuantSpec(bits, lq.input_spec.scale), lq.weight_spec)
        elif knob == "weight":
            lq = LayerQuant(lq.input_spec, QuantSpec(bits, lq.weight_spec.scale))
        else:
            raise EngineError(f"knob must be 'input' or 'weight', got {knob!r}")
        new_layers = dict(self.layers)
        new_layers[layer] = lq
        return QuantConfig(self.mode, new_layers)

    def bits_table(self) -> dict[str, tuple[int, int]]:
        return {n: (lq.input_spec.bits, lq.weight_spec.bits) for n, lq in self.layers.items()}


@dataclass
class LayerTrace:
    """Per-layer instrumentation, aggregated over `images` forward passes."""

    name: str
    images: int
    total_macs: int
    skipped_macs: int
    input_zeros: Optional[int]
    input_elems: int
    weight_zeros: Optional[int]
    weight_elems: int
    input_max_abs: float
    output_max_abs: float

    @property
    def input_zero_fraction(self) -> Optional[float]:
        if self.input_zeros is None or self.input_elems == 0:
            return None
        return self.input_zeros / self.input_elems

    @property
    def weight_zero_fraction(self) -> Optional[float]:
        if self.weight_zeros is None or self.weight_elems == 0:
            return None
        return self.weight_zeros / self.weight_elems


@dataclass
class EvalResult:
    accuracy: float
    traces: list[LayerTrace]
    images: int


def _merge_traces(into: list[LayerTrace], part: list[LayerTrace]) -> list[LayerTrace]:
    if not into:
        return part
    merged = []
    for a, b in zip(into, part):
        merged.append(
            LayerTrace(
                name=a.name,
                images=a.images + b.images,
                total_macs=a.total_macs + b.total_macs,
                skipped_macs=a.skipped_macs + b.skipped_macs,
                input_zeros=None if a.input_zeros is None else a.input_zeros + b.input_zeros,
                input_elems=a.input_elems + b.input_elems,
                weight_zeros=None if a.weight_zeros is None else a.weight_zeros + b.weight_zeros,
                weight_elems=a.weight_elems + b.weight_elems,
                input_max_abs=max(a.input_max_abs, b.input_max_abs),
                output_max_abs=max(a.output_max_abs, b.output_max_abs),
            )
        )
    return merged


# ---------------------------------------------------------------------------
# Layer arithmetic (batched, channels-first, float64 wide accumulator)
# ---------------------------------------------------------------------------

def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int):
    """(B, C, H, W) -> (C*kh*kw, B*OH*OW) patch matrix plus (OH, OW).

    The flat layout lets every conv in a chunk run as one large GEMM instead
    of a loop of small per-image multiplies.
    """
    b, c, h, w = x.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = np.empty((c, kh, kw, b, oh, ow), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            patch = x[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
            cols[:, i, j] = patch.transpose(1, 0, 2, 3)
    return cols.reshape(c * kh * kw, b * oh * ow), (oh, ow)


def _conv2d(x: np.ndarray, weight: np.ndarray, bias, stride: int, pad: int) -> np.ndarray:
    b = x.shape[0]
    oc, _, kh, kw = weight.shape
    cols, (oh, ow) = _im2col(x, kh, kw, stride, pad)
    y = weight.reshape(oc, -1) @ cols  # (OC, B*OH*OW)
    y = y.reshape(oc, b, oh, ow).transpose(1, 0, 2, 3)
    if bias is not None:
        return y + bias[None, :, None, None]
    return np.ascontiguousarray(y)


def _maxpool(x: np.ndarray, window: int, stride: int) -> np.ndarray:
    b, c, h, w = x.shape
    oh = (h - window) // stride + 1
    ow = (w - window) // stride + 1
    out = None
    for i in range(window):
        for j in range(window):
            cur = x[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
            out = cur if out is None else np.maximum(out, cur)
    return out


def _fully_connected(x: np.ndarray, weight: np.ndarray, bias) -> np.ndarray:
    y = x.reshape(x.shape[0], -1) @ weight.T
    if bias is not None:
        y = y + bias[None, :]
    return y


def _executed_macs_conv(nz_in: np.ndarray, nz_w: np.ndarray, spec: Conv2D) -> int:
    """Exact count of conv MACs whose input AND weight codes are both nonzero.

    Counting nonzero (input, weight) pairs over every tap is itself a
    convolution of 0/1 indicators; the float64 sums stay integral well below
    2**53, so the count is exact.
    """
    cols, _ = _im2col(nz_in, spec.kernel_h, spec.kernel_w, spec.stride, spec.pad)
    per = nz_w.reshape(nz_w.shape[0], -1) @ cols
    return int(round(float(per.sum())))


def _executed_macs_fc(nz_in: np.ndarray, nz_w: np.ndarray) -> int:
    per = nz_in.reshape(nz_in.shape[0], -1) @ nz_w.T
    return int(round(float(per.sum())))


def count_skips(
    input_codes: QuantizedTensor, weight_codes: QuantizedTensor, layer
) -> tuple[int, int]:
    """Exact (total, skipped) MAC counts for one layer instance.

    A MAC is skipped iff its input-activation code is 0 OR its weight code is
    0; zero-padded positions count as zero inputs. Equivalent to brute-force
    enumeration of every output position and tap.
    """
    w = weight_codes.codes
    x = input_codes.codes
    if isinstance(layer, Conv2D):
        if x.ndim != 3 or w.ndim != 4 or w.shape[1] != x.shape[0]:
            raise EngineError(f"inconsistent conv operand shapes {x.shape} / {w.shape}")
        oh = (x.shape[1] + 2 * layer.pad - layer.kernel_h) // layer.stride + 1
        ow = (x.shape[2] + 2 * layer.pad - layer.kernel_w) // layer.stride + 1
        total = w.shape[0] * oh * ow * w.shape[1] * layer.kernel_h * layer.kernel_w
        nz_in = (x != 0).astype(np.float64)[None]
        nz_w = (w != 0).astype(np.float64)
        executed = _executed_macs_conv(nz_in, nz_w, layer)
    elif isinstance(layer, FullyConnected):
        if w.ndim != 2 or x.size != w.shape[1]:
            raise EngineError(f"inconsistent FC operand shapes {x.shape} / {w.shape}")
        total = w.shape[0] * w.shape[1]
        executed = _executed_macs_fc(
            (x != 0).astype(np.float64).reshape(1, -1), (w != 0).astype(np.float64)
        )
    else:
        raise EngineError(f"layer kind {type(layer).__name__} has no MACs to skip")
    return total, total - executed


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------

@dataclass
class _PreparedLayer:
    weight: np.ndarray            # effective (possibly fake-quantized) float64 weights
    bias: Optional[np.ndarray]
    weight_nonzero: Optional[np.ndarray]  # 0/1 float64 indicators, quantized mode only
    weight_zeros: Optional[int]
    weight_elems: int


def _prepare_layers(net: NetworkGraph, config: QuantConfig) -> dict[str, _PreparedLayer]:
    prepared = {}
    for name in net.weight_bearing_names():
        lw = net.weights[name]
        w = np.asarray(lw.weight, dtype=np.float64)
        b = None if lw.bias is None else np.asarray(lw.bias, dtype=np.float64)
        if config.mode == QUANTIZED:
            lq = config.layers[name]
            codes = quantize(w, lq.weight_spec)
            w = codes.astype(np.float64) * lq.weight_spec.step
            if b is not None:
                bias_spec = QuantSpec(
                    lq.weight_spec.bits, next_pow2_scale(float(np.max(np.abs(b)))
                                                         if b.size else 0.0)
                )
                b = fake_quantize(b, bias_spec)
            nz = (codes != 0).astype(np.float64)
            prepared[name] = _PreparedLayer(
                w, b, nz, int(codes.size - np.count_nonzero(codes)), int(codes.size)
            )
        else:
            prepared[name] = _PreparedLayer(w, b, None, None, int(w.size))
    return prepared


def _check_config(net: NetworkGraph, config: QuantConfig) -> None:
    if config.mode == FLOAT:
        return
    bearing = set(net.weight_bearing_names())
    missing = bearing - set(config.layers)
    if missing:
        raise EngineError(f"config missing layer(s): {sorted(missing)}")
    unknown = set(config.layers) - bearing
    if unknown:
        raise EngineError(f"config covers unknown layer(s): {sorted(unknown)}")


def _run_batch(
    net: NetworkGraph,
    images: np.ndarray,
    config: QuantConfig,
    prepared: dict[str, _PreparedLayer],
    collect_trace: bool,
):
    """One batched forward pass; returns (logits, per-layer trace rows)."""
    nbatch = images.shape[0]
    x = np.asarray(images, dtype=np.float64)
    traces: list[LayerTrace] = []

    def max_abs(arr: np.ndarray) -> float:
        return max(float(arr.max()), -float(arr.min())) if arr.size else 0.0

    for name, spec in net.layers:
        if is_weight_bearing(spec):
            prep = prepared[name]
            input_max = max_abs(x)
            skipped = 0
            input_zeros = None
            input_elems = 0
            if config.mode == QUANTIZED:
                lq = config.layers[name]
                codes = quantize(x, lq.input_spec)
                xq = codes.astype(np.float64) * lq.input_spec.step
                if collect_trace:
                    input_elems = int(codes.size)
                    input_zeros = int(codes.size - np.count_nonzero(codes))
                    nz_in = (codes != 0).astype(np.float64)
                    if isinstance(spec, Conv2D):
                        executed = _executed_macs_conv(nz_in, prep.weight_nonzero, spec)
                    else:
                        executed = _executed_macs_fc(nz_in, prep.weight_nonzero)
                x = xq
            elif collect_trace:
                input_elems = int(x.size)
            if isinstance(spec, Conv2D):
                macs_per_image = (
                    spec.out_channels
                    * ((x.shape[2] + 2 * spec.pad - spec.kernel_h) // spec.stride + 1)
                    * ((x.shape[3] + 2 * spec.pad - spec.kernel_w) // spec.stride + 1)
                    * x.shape[1] * spec.kernel_h * spec.kernel_w
                )
                y = _conv2d(x, prep.weight, prep.bias, spec.stride, spec.pad)
            else:
                macs_per_image = prep.weight.shape[0] * prep.weight.shape[1]
                y = _fully_connected(x, prep.weight, prep.bias)
            total = macs_per_image * nbatch
            if config.mode == QUANTIZED and collect_trace:
                skipped = total - executed
            traces.append(
                LayerTrace(
                    name=name,
                    images=nbatch,
                    total_macs=total,
                    skipped_macs=skipped,
                    input_zeros=input_zeros,
                    input_elems=input_elems,
                    weight_zeros=prep.weight_zeros,
                    weight_elems=prep.weight_elems,
                    input_max_abs=input_max,
                    output_max_abs=0.0,
                )
            )
        elif isinstance(spec, ReLU):
            y = np.maximum(x, 0.0)
            traces.append(LayerTrace(name, nbatch, 0, 0, None, 0, None, 0,
                                     max_abs(x), 0.0))
        elif isinstance(spec, MaxPool):
            y = _maxpool(x, spec.window, spec.stride)
            traces.append(LayerTrace(name, nbatch, 0, 0, None, 0, None, 0,
                                     max_abs(x), 0.0))
        else:  # pragma: no cover - NetworkGraph already rejects unknown kinds
            raise EngineError(f"unsupported layer {name}")
        traces[-1].output_max_abs = max_abs(y)
        x = y
    return x, traces


def forward(net: NetworkGraph, image: np.ndarray, config: QuantConfig):
    """Single-image forward pass; returns (logits, per-layer traces)."""
    image = np.asarray(image, dtype=np.float64)
    if tuple(image.shape) != tuple(net.input_shape):
        raise EngineError(
            f"image shape {tuple(image.shape)} != network input shape {net.input_shape}"
        )
    _check_config(net, config)
    prepared = _prepare_layers(net, config)
    logits, traces = _run_batch(net, image[None], config, prepared, collect_trace=True)
    return logits[0], traces


def _topk_hits(logits: np.ndarray, labels: np.ndarray, top_k: int) -> int:
    # Stable argsort so ties resolve to the lowest class index, deterministically.
    order = np.argsort(-logits, axis=1, kind="stable")[:, :top_k]
    return int(np.sum(np.any(order == labels[:, None], axis=1)))


def _eval_chunk(args) -> tuple[int, list[LayerTrace]]:
    net, config, images, labels, top_k, collect_trace = args
    prepared = _prepare_layers(net, config)
    logits, traces = _run_batch(net, images, config, prepared, collect_trace)
    return _topk_hits(logits, labels, top_k), traces


def evaluate_accuracy(
    net: NetworkGraph,
    dataset,
    config: QuantConfig,
    top_k: int = 1,
    sample_limit: Optional[int] = None,
    collect_trace: bool = True,
    workers: int = 1,
) -> EvalResult:
    """Top-k accuracy plus aggregated traces over the first min(limit, N) images.

    Aggregation is order-independent (integer counters, exact sums, max
    reductions), so the result does not depend on `workers`.
    """
    if len(dataset) == 0:
        raise EngineError("dataset is empty")
    if top_k < 1:
        raise EngineError("top_k must be >= 1")
    _check_config(net, config)
    n = len(dataset) if sample_limit is None else min(sample_limit, len(dataset))
    images = dataset.images[:n]
    labels = dataset.labels[:n]
    if images.shape[1:] != tuple(net.input_shape):
        raise EngineError(
            f"dataset image shape {images.shape[1:]} != network input {net.input_shape}"
        )
    tasks = [
        (net, config, images[i : i + CHUNK_SIZE], labels[i : i + CHUNK_SIZE],
         top_k, collect_trace)
        for i in range(0, n, CHUNK_SIZE)
    ]
    hits = 0
    traces: list[LayerTrace] = []
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_eval_chunk, tasks))
    else:
        results = [_eval_chunk(t) for t in tasks]
    for chunk_hits, chunk_traces in results:
        hits += chunk_hits
        traces = _merge_traces(traces, chunk_traces)
    return EvalResult(accuracy=hits / n, traces=traces, images=n)
