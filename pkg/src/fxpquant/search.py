"""Bit-width assignment: uniform sweeps and the greedy per-layer search.

The greedy search walks layers first to last; within a layer the input bit
width is lowered one step at a time until relative accuracy would fall below
the target, then frozen, then the same is done for the layer's weights.
Descent stops at the first violating bit count (no re-probing below it), so
one knob costs at most (max_bits - min_bits) accuracy runs and the whole
search at most twice that per weight-bearing layer; the mandatory all-max
feasibility pre-check is reported separately from that budget. Layers not
yet visited stay at max_bits. Every candidate evaluation is streamed as a
structured log record for offline audit.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Optional

from .energy import EnergyCoefficients, network_energy
from .engine import QuantConfig, evaluate_accuracy
from .graph import NetworkGraph
from .quantize import MAX_BITS

log = logging.getLogger("fxpquant.search")


class SearchError(ValueError):
    """Search preconditions violated (empty range, zero float accuracy, ...)."""


@dataclass(frozen=True)
class SearchSettings:
    target_relative_accuracy: float = 0.99
    min_bits: int = 1
    max_bits: int = MAX_BITS
    sample_limit: Optional[int] = 1000
    top_k: int = 1

    def __post_init__(self):
        if self.target_relative_accuracy <= 0:
            raise SearchError("target relative accuracy must be > 0")
        if not 1 <= self.min_bits <= self.max_bits <= MAX_BITS:
            raise SearchError(
                f"need 1 <= min_bits <= max_bits <= {MAX_BITS}, "
                f"got [{self.min_bits}, {self.max_bits}]"
            )
        if self.top_k < 1:
            raise SearchError("top_k must be >= 1")


@dataclass
class OperatingPoint:
    """One point on the energy-accuracy curve."""

    policy: str
    config: QuantConfig
    accuracy: float
    relative_accuracy: float
    traces: list
    target: Optional[float] = None
    relative_energy: Optional[float] = None
    relative_energy_no_skip: Optional[float] = None
    input_zero_fraction: Optional[float] = None
    weight_zero_fraction: Optional[float] = None

    def bits_table(self) -> dict[str, tuple[int, int]]:
        return self.config.bits_table()


@dataclass
class CandidateRecord:
    layer: str
    knob: str
    bits: int
    accuracy: float
    relative_accuracy: float
    accepted: bool


@dataclass
class GreedyResult:
    point: OperatingPoint
    feasible: bool
    evaluations: int            # descent evaluations; excludes the all-max pre-check
    candidates: list[CandidateRecord]
    precheck_relative_accuracy: float
    float_accuracy: float


def float_accuracy(net: NetworkGraph, dataset, settings: SearchSettings,
                   workers: int = 1) -> float:
    result = evaluate_accuracy(
        net, dataset, QuantConfig.float_mode(), top_k=settings.top_k,
        sample_limit=settings.sample_limit, collect_trace=False, workers=workers,
    )
    return result.accuracy


def _zero_fractions(traces) -> tuple[Optional[float], Optional[float]]:
    in_zeros = in_elems = w_zeros = w_elems = 0
    seen = False
    for t in traces:
        if t.input_zeros is None:
            continue
        seen = True
        in_zeros += t.input_zeros
        in_elems += t.input_elems
        w_zeros += t.weight_zeros
        w_elems += t.weight_elems
    if not seen or in_elems == 0:
        return None, None
    return in_zeros / in_elems, w_zeros / w_elems


def evaluate_point(
    net: NetworkGraph,
    dataset,
    config: QuantConfig,
    settings: SearchSettings,
    policy: str = "uniform",
    base_accuracy: Optional[float] = None,
    workers: int = 1,
) -> OperatingPoint:
    """Traced evaluation of one config, normalized by the float accuracy."""
    if base_accuracy is None:
        base_accuracy = float_accuracy(net, dataset, settings, workers)
    if base_accuracy <= 0:
        raise SearchError("float-mode accuracy is zero; relative accuracy undefined")
    result = evaluate_accuracy(
        net, dataset, config, top_k=settings.top_k,
        sample_limit=settings.sample_limit, collect_trace=True, workers=workers,
    )
    zf_in, zf_w = _zero_fractions(result.traces)
    return OperatingPoint(
        policy=policy,
        config=config,
        accuracy=result.accuracy,
        relative_accuracy=result.accuracy / base_accuracy,
        traces=result.traces,
        input_zero_fraction=zf_in,
        weight_zero_fraction=zf_w,
    )


def attach_energy(point: OperatingPoint, net: NetworkGraph,
                  coeffs: Optional[EnergyCoefficients] = None) -> OperatingPoint:
    point.relative_energy = network_energy(
        net, point.traces, point.config, coeffs, skipping=True
    ).relative_energy
    point.relative_energy_no_skip = network_energy(
        net, point.traces, point.config, coeffs, skipping=False
    ).relative_energy
    return point


def uniform_sweep(
    net: NetworkGraph,
    dataset,
    scales: Mapping[str, tuple[float, float]],
    settings: SearchSettings,
    coeffs: Optional[EnergyCoefficients] = None,
    workers: int = 1,
) -> list[OperatingPoint]:
    """One operating point per bit width, max_bits down to min_bits."""
    base = float_accuracy(net, dataset, settings, workers)
    if base <= 0:
        raise SearchError("float-mode accuracy is zero; relative accuracy undefined")
    points = []
    for bits in range(settings.max_bits, settings.min_bits - 1, -1):
        config = QuantConfig.uniform(net, bits, scales)
        point = evaluate_point(net, dataset, config, settings, "uniform", base, workers)
        attach_energy(point, net, coeffs)
        log.info("sweep bits=%d accuracy=%.6f rel_accuracy=%.6f rel_energy=%.6f",
                 bits, point.accuracy, point.relative_accuracy, point.relative_energy)
        points.append(point)
    return points


def greedy_search(
    net: NetworkGraph,
    dataset,
    scales: Mapping[str, tuple[float, float]],
    settings: SearchSettings,
    coeffs: Optional[EnergyCoefficients] = None,
    workers: int = 1,
) -> GreedyResult:
    """Forward greedy sweep under a relative-accuracy target.

    Returns an infeasible result carrying the best all-max point when even
    max_bits cannot reach the target; otherwise the returned config meets the
    target on the evaluation subset by construction.
    """
    target = settings.target_relative_accuracy
    base = float_accuracy(net, dataset, settings, workers)
    if base <= 0:
        raise SearchError("float-mode accuracy is zero; relative accuracy undefined")

    def relative(config: QuantConfig) -> float:
        result = evaluate_accuracy(
            net, dataset, config, top_k=settings.top_k,
            sample_limit=settings.sample_limit, collect_trace=False, workers=workers,
        )
        return result.accuracy / base

    config = QuantConfig.uniform(net, settings.max_bits, scales)
    precheck = relative(config)
    log.info("precheck bits=%d rel_accuracy=%.6f target=%.6f",
             settings.max_bits, precheck, target)
    if precheck < target:
        point = evaluate_point(net, dataset, config, settings, "per-layer", base, workers)
        point.target = target
        attach_energy(point, net, coeffs)
        return GreedyResult(point, False, 0, [], precheck, base)

    candidates: list[CandidateRecord] = []
    evaluations = 0
    for layer in net.weight_bearing_names():
        for knob in ("input", "weight"):
            accepted = settings.max_bits
            for bits in range(settings.max_bits - 1, settings.min_bits - 1, -1):
                rel = relative(config.with_bits(layer, knob, bits))
                evaluations += 1
                ok = rel >= target
                candidates.append(
                    CandidateRecord(layer, knob, bits, rel * base, rel, ok)
                )
                log.info("candidate layer=%s knob=%s bits=%d rel_accuracy=%.6f %s",
                         layer, knob, bits, rel, "keep" if ok else "stop")
                if not ok:
                    break
                accepted = bits
            config = config.with_bits(layer, knob, accepted)

    point = evaluate_point(net, dataset, config, settings, "per-layer", base, workers)
    point.target = target
    attach_energy(point, net, coeffs)
    return GreedyResult(point, True, evaluations, candidates, precheck, base)
