"""Scale calibration: per-layer max-abs statistics -> power-of-two scales.

Calibration runs the float-mode network (scales must exist before anything
can be quantized) and records the max |value| seen at each weight-bearing
layer's input; weight maxima come straight from the stored tensors. Scales
derived with next_pow2_scale never clip a value observed during
calibration; values outside the calibrated range at evaluation time are
handled by the quantizer's saturation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .engine import QuantConfig, evaluate_accuracy
from .graph import NetworkGraph, is_weight_bearing
from .quantize import next_pow2_scale

UNIFORM = "uniform"
PER_LAYER = "per-layer"
POLICIES = (UNIFORM, PER_LAYER)


@dataclass(frozen=True)
class LayerCalibration:
    input_max_abs: float
    weight_max_abs: float


@dataclass(frozen=True)
class CalibrationProfile:
    layers: Mapping[str, LayerCalibration]
    global_max_abs: float
    sample_count: int

    def __post_init__(self):
        object.__setattr__(self, "layers", dict(self.layers))
        for name, lc in self.layers.items():
            if lc.input_max_abs < 0 or lc.weight_max_abs < 0:
                raise ValueError(f"negative max-abs for layer '{name}'")


def calibrate(
    net: NetworkGraph,
    dataset,
    sample_limit: Optional[int] = 1000,
    workers: int = 1,
) -> CalibrationProfile:
    """Observe per-layer input/weight max-abs over a float-mode run."""
    result = evaluate_accuracy(
        net,
        dataset,
        QuantConfig.float_mode(),
        sample_limit=sample_limit,
        collect_trace=True,
        workers=workers,
    )
    input_max = {t.name: t.input_max_abs for t in result.traces}
    layers = {}
    for name, spec in net.layers:
        if not is_weight_bearing(spec):
            continue
        w = net.weights[name].weight
        layers[name] = LayerCalibration(
            input_max_abs=float(input_max[name]),
            weight_max_abs=float(np.max(np.abs(w))) if w.size else 0.0,
        )
    global_max = max(
        max(lc.input_max_abs for lc in layers.values()),
        max(lc.weight_max_abs for lc in layers.values()),
    )
    return CalibrationProfile(layers=layers, global_max_abs=global_max,
                              sample_count=result.images)


def scales_from_profile(
    profile: CalibrationProfile, policy: str
) -> dict[str, tuple[float, float]]:
    """Per-layer (input_scale, weight_scale); uniform policy uses the global max."""
    if policy == UNIFORM:
        s = next_pow2_scale(profile.global_max_abs)
        return {name: (s, s) for name in profile.layers}
    if policy == PER_LAYER:
        return {
            name: (next_pow2_scale(lc.input_max_abs), next_pow2_scale(lc.weight_max_abs))
            for name, lc in profile.layers.items()
        }
    raise ValueError(f"unknown scaling policy {policy!r}; expected one of {POLICIES}")
