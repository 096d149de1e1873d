"""First-order relative energy model under precision scaling and skipping.

Switching activity, and with it dynamic energy, scales quadratically with
operand width in a multiplier and linearly in adders, registers and wires;
SRAM accesses cost a constant full word. Per executed MAC:

    E = c_mul * (b_in * b_w) + c_add * b_acc          (arithmetic, default)
      [+ c_reg * (b_in + b_w) + c_wire * (b_in + b_w) + 2 * c_sram * n_max]

with b_acc = b_in + b_w + ceil(log2(k_accum)) covering accumulation growth.
Skipped MACs cost exactly zero. All reported energies are relative to the
same network at 16/16 bits with no skipping, so the absolute coefficient
scale cancels; the memory terms exist behind a flag and default to off,
keeping the model arithmetic-only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .engine import LayerTrace, QuantConfig
from .graph import NetworkGraph, accumulation_depth
from .quantize import MAX_BITS

BASELINE_BITS = 16


class EnergyModelError(ValueError):
    """Invalid coefficients, bit widths, or traces that do not cover the net."""


@dataclass(frozen=True)
class EnergyCoefficients:
    c_mul: float = 1.0
    c_add: float = 1.0
    c_reg: float = 0.0
    c_wire: float = 0.0
    c_sram: float = 0.0
    include_memory: bool = False
    n_max: int = BASELINE_BITS

    def __post_init__(self):
        for name in ("c_mul", "c_add", "c_reg", "c_wire", "c_sram"):
            if getattr(self, name) < 0:
                raise EnergyModelError(f"{name} must be >= 0")
        if self.n_max < 1:
            raise EnergyModelError("n_max must be >= 1")


def mac_energy(b_in: int, b_w: int, k_accum: int, coeffs: EnergyCoefficients) -> float:
    """Relative energy of one executed multiply-accumulate."""
    if not (1 <= b_in <= MAX_BITS and 1 <= b_w <= MAX_BITS):
        raise EnergyModelError(f"bit widths must be in [1, {MAX_BITS}], got {b_in}/{b_w}")
    if k_accum < 1:
        raise EnergyModelError("k_accum must be >= 1")
    b_acc = b_in + b_w + math.ceil(math.log2(k_accum))
    e = coeffs.c_mul * (b_in * b_w) + coeffs.c_add * b_acc
    if coeffs.include_memory:
        e += (coeffs.c_reg + coeffs.c_wire) * (b_in + b_w) + 2.0 * coeffs.c_sram * coeffs.n_max
    return e


def layer_energy(
    macs: int, skipped: int, b_in: int, b_w: int, k_accum: int, coeffs: EnergyCoefficients
) -> float:
    """Energy of one layer: executed MACs only; skipped MACs cost zero."""
    if skipped > macs or skipped < 0:
        raise EnergyModelError(f"skipped ({skipped}) must be in [0, macs={macs}]")
    return (macs - skipped) * mac_energy(b_in, b_w, k_accum, coeffs)


@dataclass
class LayerEnergyRow:
    name: str
    total_macs: int
    skipped_macs: int
    executed_macs: int
    input_bits: int
    weight_bits: int
    accum_depth: int
    energy: float
    baseline_energy: float


@dataclass
class EnergyReport:
    rows: list[LayerEnergyRow]
    total_energy: float
    baseline_energy: float
    relative_energy: float
    skipping: bool


def network_energy(
    net: NetworkGraph,
    traces: Sequence[LayerTrace],
    config: QuantConfig,
    coeffs: Optional[EnergyCoefficients] = None,
    skipping: bool = True,
) -> EnergyReport:
    """Sum layer energies against the 16/16-bit no-skip baseline.

    `traces` supply the exact MAC and skipped-MAC totals (aggregated over
    however many images were run); the baseline uses the same totals with
    zero skipping, so the ratio is per-image-count invariant.
    """
    coeffs = coeffs or EnergyCoefficients()
    depth = accumulation_depth(net)
    by_name = {t.name: t for t in traces}
    missing = [n for n in net.weight_bearing_names() if n not in by_name]
    if missing:
        raise EnergyModelError(f"traces missing for layer(s): {missing}")
    rows = []
    total = 0.0
    baseline = 0.0
    for name in net.weight_bearing_names():
        t = by_name[name]
        lq = config.layers.get(name) if config.mode == "quantized" else None
        b_in = lq.input_spec.bits if lq else BASELINE_BITS
        b_w = lq.weight_spec.bits if lq else BASELINE_BITS
        skipped = t.skipped_macs if skipping else 0
        e = layer_energy(t.total_macs, skipped, b_in, b_w, depth[name], coeffs)
        e_base = layer_energy(
            t.total_macs, 0, BASELINE_BITS, BASELINE_BITS, depth[name], coeffs
        )
        rows.append(
            LayerEnergyRow(
                name=name,
                total_macs=t.total_macs,
                skipped_macs=skipped,
                executed_macs=t.total_macs - skipped,
                input_bits=b_in,
                weight_bits=b_w,
                accum_depth=depth[name],
                energy=e,
                baseline_energy=e_base,
            )
        )
        total += e
        baseline += e_base
    if baseline <= 0:
        raise EnergyModelError("baseline energy is zero; no MAC-bearing layers ran")
    return EnergyReport(
        rows=rows,
        total_energy=total,
        baseline_energy=baseline,
        relative_energy=total / baseline,
        skipping=skipping,
    )


@dataclass
class CaseEntry:
    label: str
    description: str
    policy: str
    bits: dict[str, tuple[int, int]]
    relative_accuracy: float
    report: EnergyReport


@dataclass
class CaseStudy:
    cases: list[CaseEntry]

    def relative_energies(self) -> dict[str, float]:
        return {c.label: c.report.relative_energy for c in self.cases}


def case_report(
    net: NetworkGraph,
    dataset,
    scales,
    settings,
    coeffs: Optional[EnergyCoefficients] = None,
    workers: int = 1,
    greedy_result=None,
):
    """The four canonical operating points, A as the 1.0 baseline.

    A: 16-bit uniform, no skipping (the relative-energy denominator).
    B: smallest uniform bit width holding 100% relative accuracy, no skipping.
    C: same setting as B with computation skipping.
    D: greedy per-layer bit widths at the target accuracy, with skipping.

    A previously computed greedy result (same net/dataset/settings) can be
    passed to avoid re-running the search for case D.
    """
    from .search import evaluate_point, float_accuracy, greedy_search  # local to avoid cycle

    coeffs = coeffs or EnergyCoefficients()
    base_acc = float_accuracy(net, dataset, settings, workers)
    case_a = evaluate_point(net, dataset, QuantConfig.uniform(net, BASELINE_BITS, scales),
                            settings, "uniform", base_acc, workers)
    report_a = network_energy(net, case_a.traces, case_a.config, coeffs, skipping=False)
    cases = [
        CaseEntry("A", "16-bit fixed point", "uniform", case_a.config.bits_table(),
                  case_a.relative_accuracy, report_a)
    ]

    # B: walk down uniform bit widths while relative accuracy stays at 100%.
    best = case_a
    for bits in range(BASELINE_BITS - 1, settings.min_bits - 1, -1):
        point = evaluate_point(net, dataset, QuantConfig.uniform(net, bits, scales),
                               settings, "uniform", base_acc, workers)
        if point.relative_accuracy < 1.0:
            break
        best = point
    report_b = network_energy(net, best.traces, best.config, coeffs, skipping=False)
    cases.append(CaseEntry("B", "uniform quantization at 100% relative accuracy",
                           "uniform", best.config.bits_table(),
                           best.relative_accuracy, report_b))

    report_c = network_energy(net, best.traces, best.config, coeffs, skipping=True)
    cases.append(CaseEntry("C", "case B plus computation skipping", "uniform",
                           best.config.bits_table(), best.relative_accuracy, report_c))

    greedy = greedy_result or greedy_search(net, dataset, scales, settings,
                                            workers=workers)
    report_d = network_energy(net, greedy.point.traces, greedy.point.config, coeffs,
                              skipping=True)
    cases.append(CaseEntry(
        "D",
        f"greedy per-layer bits at target {settings.target_relative_accuracy:g}, "
        "with skipping",
        "per-layer", greedy.point.config.bits_table(),
        greedy.point.relative_accuracy, report_d,
    ))
    return CaseStudy(cases)
