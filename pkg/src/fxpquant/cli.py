"""Command-line pipeline: calibrate -> sweep/search -> energy -> report.

Every flag mirrors a RunConfig field; a JSON config file (--config) provides
defaults that explicit flags override. Runs are deterministic for a fixed
seed, including parallel evaluation.

Exit codes: 0 success, 2 validation/config error, 3 infeasible search
target, 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .bundleio import BundleError, load_model
from .calibrate import POLICIES, calibrate, scales_from_profile
from .energy import EnergyCoefficients, case_report, network_energy
from .engine import EngineError, QuantConfig, evaluate_accuracy
from .graph import GraphError
from .mnist import IdxFormatError, load_mnist
from .quantize import MAX_BITS
from .results import (
    ResultsDocument,
    ResultsError,
    case_study_records,
    energy_report_record,
    operating_point_record,
    read_profile,
    read_results,
    write_profile,
    write_results,
)
from .search import SearchError, SearchSettings, greedy_search, uniform_sweep

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4

log = logging.getLogger("fxpquant.cli")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    model: Optional[str] = None
    weights: Optional[str] = None
    mnist_images: Optional[str] = None
    mnist_labels: Optional[str] = None
    profile: Optional[str] = None
    policy: str = "per-layer"
    target: float = 0.99
    bits_min: int = 1
    bits_max: int = MAX_BITS
    bits: Optional[int] = None
    samples: Optional[int] = 1000
    top_k: int = 1
    skip: str = "on"
    coeff_mul: float = 1.0
    coeff_add: float = 1.0
    memory_model: str = "off"
    seed: int = 0
    workers: int = 0  # 0 = available parallelism
    out: Optional[str] = None
    format: str = "structured"
    results: Optional[str] = None  # input document for `report`

    def coefficients(self) -> EnergyCoefficients:
        return EnergyCoefficients(
            c_mul=self.coeff_mul,
            c_add=self.coeff_add,
            include_memory=self.memory_model == "on",
        )

    def settings(self) -> SearchSettings:
        return SearchSettings(
            target_relative_accuracy=self.target,
            min_bits=self.bits_min,
            max_bits=self.bits_max,
            sample_limit=self.samples,
            top_k=self.top_k,
        )

    def effective_workers(self) -> int:
        return self.workers if self.workers > 0 else (os.cpu_count() or 1)


def _merge_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, "r", encoding="utf-8") as f:
                file_values = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON: {exc}") from None
        known = {f.name for f in fields(RunConfig)}
        unknown = set(file_values) - known
        if unknown:
            raise ConfigError(f"{args.config}: unknown config keys {sorted(unknown)}")
        values.update(file_values)
    for f in fields(RunConfig):
        flag_value = getattr(args, f.name, None)
        if flag_value is not None:
            values[f.name] = flag_value
    cfg = RunConfig(**values)
    if cfg.policy not in POLICIES:
        raise ConfigError(f"--policy must be one of {POLICIES}")
    if cfg.skip not in ("on", "off") or cfg.memory_model not in ("on", "off"):
        raise ConfigError("--skip and --memory-model take 'on' or 'off'")
    if cfg.format not in ("structured", "csv"):
        raise ConfigError("--format must be 'structured' or 'csv'")
    if not 1 <= cfg.bits_min <= cfg.bits_max <= MAX_BITS:
        raise ConfigError(f"need 1 <= bits-min <= bits-max <= {MAX_BITS}")
    if cfg.samples is not None and cfg.samples < 1:
        raise ConfigError("--samples must be >= 1")
    return cfg


def _load_inputs(cfg: RunConfig, need_dataset: bool = True):
    if not cfg.model or not cfg.weights:
        raise ConfigError("--model and --weights are required")
    net = load_model(cfg.model, cfg.weights)
    dataset = None
    if need_dataset:
        if not cfg.mnist_images or not cfg.mnist_labels:
            raise ConfigError("--mnist-images and --mnist-labels are required")
        dataset = load_mnist(cfg.mnist_images, cfg.mnist_labels)
        if cfg.samples is not None and cfg.samples < len(dataset):
            rng = np.random.default_rng(cfg.seed)
            picks = rng.choice(len(dataset), size=cfg.samples, replace=False)
            picks.sort()
            dataset = dataset.subset(picks)
    return net, dataset


def _metadata(cfg: RunConfig, extra: Optional[dict] = None) -> dict:
    meta = {
        "model": cfg.model,
        "dataset": cfg.mnist_images,
        "policy": cfg.policy,
        "samples": cfg.samples,
        "top_k": cfg.top_k,
        "seed": cfg.seed,
        "coefficients": {"c_mul": cfg.coeff_mul, "c_add": cfg.coeff_add,
                         "memory_model": cfg.memory_model},
        "preprocessing": "pixels scaled to [0,1], no mean subtraction",
        "input_image_quantized": True,
    }
    if extra:
        meta.update(extra)
    return meta


def _scales(cfg: RunConfig):
    if not cfg.profile:
        raise ConfigError("--profile is required (run `fxpquant calibrate` first)")
    profile = read_profile(cfg.profile)
    return profile, scales_from_profile(profile, cfg.policy)


def _out_path(cfg: RunConfig, default: str) -> str:
    return cfg.out or default


def cmd_calibrate(cfg: RunConfig) -> int:
    net, dataset = _load_inputs(cfg)
    profile = calibrate(net, dataset, sample_limit=cfg.samples,
                        workers=cfg.effective_workers())
    scales = scales_from_profile(profile, cfg.policy)
    path = _out_path(cfg, "profile.json")
    write_profile(profile, path)
    print(f"calibrated on {profile.sample_count} samples "
          f"(global max |x| = {profile.global_max_abs:g})")
    print(f"{'layer':<12} {'in_max':>10} {'w_max':>10} {'in_scale':>10} {'w_scale':>10}")
    for name, lc in profile.layers.items():
        s_in, s_w = scales[name]
        print(f"{name:<12} {lc.input_max_abs:>10.5f} {lc.weight_max_abs:>10.5f} "
              f"{s_in:>10g} {s_w:>10g}")
    print(f"profile written to {path}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    net, dataset = _load_inputs(cfg)
    _, scales = _scales(cfg)
    points = uniform_sweep(net, dataset, scales, cfg.settings(),
                           coeffs=cfg.coefficients(), workers=cfg.effective_workers())
    records = [
        operating_point_record(p, f"uniform-{bits:02d}")
        for p, bits in zip(points, range(cfg.bits_max, cfg.bits_min - 1, -1))
    ]
    doc = ResultsDocument(metadata=_metadata(cfg, {"command": "sweep"}), points=records)
    path = _out_path(cfg, "sweep." + ("csv" if cfg.format == "csv" else "json"))
    write_results(doc, path, cfg.format)
    print(f"{'bits':>4} {'rel_acc':>9} {'rel_energy':>11} {'no_skip':>9} {'zeros_in':>9}")
    for p, bits in zip(points, range(cfg.bits_max, cfg.bits_min - 1, -1)):
        print(f"{bits:>4} {p.relative_accuracy:>9.4f} {p.relative_energy:>11.4f} "
              f"{p.relative_energy_no_skip:>9.4f} "
              f"{(p.input_zero_fraction or 0.0):>9.4f}")
    print(f"results written to {path}")
    return EXIT_OK


def cmd_search(cfg: RunConfig) -> int:
    net, dataset = _load_inputs(cfg)
    _, scales = _scales(cfg)
    workers = cfg.effective_workers()
    settings = cfg.settings()
    coeffs = cfg.coefficients()
    result = greedy_search(net, dataset, scales, settings, coeffs=coeffs, workers=workers)

    # Re-evaluate the chosen point on the full loaded set for reporting.
    full = evaluate_accuracy(net, dataset, result.point.config, top_k=cfg.top_k,
                             collect_trace=False, workers=workers)
    full_float = evaluate_accuracy(net, dataset, QuantConfig.float_mode(),
                                   top_k=cfg.top_k, collect_trace=False, workers=workers)
    record = operating_point_record(result.point, f"greedy-{cfg.target:g}")
    record["full_set_accuracy"] = full.accuracy
    record["full_set_relative_accuracy"] = full.accuracy / full_float.accuracy
    record["search_evaluations"] = result.evaluations
    record["feasible"] = result.feasible

    cases = case_study_records(
        case_report(net, dataset, scales, settings, coeffs, workers=workers,
                    greedy_result=result)
    ) if result.feasible else None
    doc = ResultsDocument(
        metadata=_metadata(cfg, {"command": "search", "target": cfg.target}),
        points=[record],
        cases=cases,
    )
    path = _out_path(cfg, "search." + ("csv" if cfg.format == "csv" else "json"))
    write_results(doc, path, cfg.format)

    print(f"greedy search: target {cfg.target:g}, feasible={result.feasible}, "
          f"{result.evaluations} candidate evaluations")
    for name, (b_in, b_w) in result.point.bits_table().items():
        print(f"  {name:<12} input {b_in:>2} bits   weight {b_w:>2} bits")
    print(f"subset relative accuracy {result.point.relative_accuracy:.4f}, "
          f"full-set {record['full_set_relative_accuracy']:.4f}")
    if result.point.relative_energy is not None:
        print(f"relative energy {result.point.relative_energy:.4f} "
              f"(no skipping: {result.point.relative_energy_no_skip:.4f})")
    if cases:
        line = "   ".join(f"{c['label']}={c['report']['relative_energy']:.4f}"
                          for c in cases)
        print(f"cases: {line}")
    print(f"results written to {path}")
    if not result.feasible:
        print(f"target {cfg.target:g} unreachable even at {cfg.bits_max} bits "
              f"(best relative accuracy {result.precheck_relative_accuracy:.4f})",
              file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_energy(cfg: RunConfig) -> int:
    if cfg.bits is None:
        raise ConfigError("--bits is required for the energy command")
    net, dataset = _load_inputs(cfg)
    _, scales = _scales(cfg)
    config = QuantConfig.uniform(net, cfg.bits, scales)
    result = evaluate_accuracy(net, dataset, config, top_k=cfg.top_k,
                               sample_limit=cfg.samples, collect_trace=True,
                               workers=cfg.effective_workers())
    report = network_energy(net, result.traces, config, cfg.coefficients(),
                            skipping=cfg.skip == "on")
    doc = ResultsDocument(
        metadata=_metadata(cfg, {"command": "energy", "bits": cfg.bits,
                                 "skip": cfg.skip}),
        points=[],
    )
    doc.metadata["report"] = energy_report_record(report)
    path = _out_path(cfg, "energy.json")
    write_results(doc, path, "structured")
    print(f"{'layer':<12} {'macs':>12} {'skipped':>12} {'energy':>14} {'share':>7}")
    for row in report.rows:
        print(f"{row.name:<12} {row.total_macs:>12} {row.skipped_macs:>12} "
              f"{row.energy:>14.1f} {row.energy / report.total_energy:>7.2%}")
    print(f"relative energy vs 16-bit no-skip baseline: {report.relative_energy:.4f} "
          f"(skipping {cfg.skip})")
    print(f"results written to {path}")
    return EXIT_OK


def cmd_report(cfg: RunConfig) -> int:
    if not cfg.results:
        raise ConfigError("--results is required for the report command")
    doc = read_results(cfg.results)
    if cfg.out:
        write_results(doc, cfg.out, cfg.format)
        print(f"rewrote {cfg.results} as {cfg.format} to {cfg.out}")
    print(f"document: schema v{doc.schema_version}, command "
          f"{doc.metadata.get('command', '?')}, {len(doc.points)} operating point(s)")
    for p in doc.points:
        rel_e = p.get("relative_energy")
        print(f"  {p['point_id']:<14} policy={p['policy']:<9} "
              f"rel_acc={p['relative_accuracy']:.4f} "
              f"rel_energy={'n/a' if rel_e is None else f'{rel_e:.4f}'}")
    if doc.cases:
        for c in doc.cases:
            print(f"  case {c['label']}: rel_energy="
                  f"{c['report']['relative_energy']:.4f}  ({c['description']})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fxpquant",
        description="Fixed-point ConvNet quantization, bit-width search, "
                    "and relative energy estimation.",
    )
    parser.add_argument("--verbose", action="store_true", help="log candidate evaluations")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file with RunConfig defaults")
        p.add_argument("--model", help="model descriptor (YAML)")
        p.add_argument("--weights", help="CNNW weight container")
        p.add_argument("--mnist-images", dest="mnist_images", help="IDX image file")
        p.add_argument("--mnist-labels", dest="mnist_labels", help="IDX label file")
        p.add_argument("--profile", help="calibration profile JSON")
        p.add_argument("--policy", choices=list(POLICIES))
        p.add_argument("--target", type=float, help="relative accuracy target")
        p.add_argument("--bits-min", dest="bits_min", type=int)
        p.add_argument("--bits-max", dest="bits_max", type=int)
        p.add_argument("--bits", type=int, help="uniform bit width (energy command)")
        p.add_argument("--samples", type=int, help="evaluation sample limit")
        p.add_argument("--top-k", dest="top_k", type=int)
        p.add_argument("--skip", choices=["on", "off"], help="computation skipping")
        p.add_argument("--coeff-mul", dest="coeff_mul", type=float)
        p.add_argument("--coeff-add", dest="coeff_add", type=float)
        p.add_argument("--memory-model", dest="memory_model", choices=["on", "off"])
        p.add_argument("--seed", type=int, help="seed for sample-subset selection")
        p.add_argument("--workers", type=int, help="worker processes (0 = all cores)")
        p.add_argument("--out", help="output path")
        p.add_argument("--format", choices=["structured", "csv"])
        p.add_argument("--results", help="input results document (report command)")
        return p

    add("calibrate", "observe per-layer maxima and derive power-of-two scales")
    add("sweep", "uniform bit-width sweep with accuracy, zeros, and energy")
    add("search", "greedy per-layer bit-width search plus case A-D block")
    add("energy", "per-layer energy report for one uniform bit width")
    add("report", "summarize or convert a structured results document")
    return parser


COMMANDS = {
    "calibrate": cmd_calibrate,
    "sweep": cmd_sweep,
    "search": cmd_search,
    "energy": cmd_energy,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
    )
    try:
        cfg = _merge_config(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, GraphError, BundleError, IdxFormatError, EngineError,
            SearchError, ResultsError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
