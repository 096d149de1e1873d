"""Results documents: a structured JSON dump plus a flat CSV curve table.

The structured format is the complete machine-readable record of a run
(metadata, operating points with per-layer detail, optional case block) and
round-trips exactly through write/read. The CSV format is the curve table
consumed by plotting tools, one row per (operating point, layer):

    point_id, policy, target, layer, input_bits, weight_bits,
    rel_accuracy, rel_energy, zero_frac_in, zero_frac_w
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

from .calibrate import CalibrationProfile, LayerCalibration
from .energy import CaseStudy, EnergyReport
from .search import OperatingPoint

SCHEMA_VERSION = 1

CSV_COLUMNS = [
    "point_id", "policy", "target", "layer", "input_bits", "weight_bits",
    "rel_accuracy", "rel_energy", "zero_frac_in", "zero_frac_w",
]


class ResultsError(ValueError):
    """Non-finite numbers or a malformed/unknown-schema document."""


@dataclass
class ResultsDocument:
    metadata: dict
    points: list[dict] = field(default_factory=list)
    cases: Optional[list[dict]] = None
    schema_version: int = SCHEMA_VERSION

    def to_json_obj(self) -> dict:
        obj = {
            "schema_version": self.schema_version,
            "metadata": self.metadata,
            "points": self.points,
        }
        if self.cases is not None:
            obj["cases"] = self.cases
        return obj


def _check_finite(obj, path="$"):
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ResultsError(f"non-finite number at {path}")
    elif isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{path}.{k}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _check_finite(v, f"{path}[{i}]")


def operating_point_record(point: OperatingPoint, point_id: str) -> dict:
    """Flatten an OperatingPoint (plus its traces) into a JSON-native record."""
    traces = {t.name: t for t in point.traces}
    layers = []
    for name, lq in point.config.layers.items():
        t = traces.get(name)
        layers.append({
            "layer": name,
            "input_bits": lq.input_spec.bits,
            "weight_bits": lq.weight_spec.bits,
            "input_scale": lq.input_spec.scale,
            "weight_scale": lq.weight_spec.scale,
            "zero_frac_in": None if t is None else t.input_zero_fraction,
            "zero_frac_w": None if t is None else t.weight_zero_fraction,
            "total_macs": None if t is None else t.total_macs,
            "skipped_macs": None if t is None else t.skipped_macs,
        })
    return {
        "point_id": point_id,
        "policy": point.policy,
        "target": point.target,
        "accuracy": point.accuracy,
        "relative_accuracy": point.relative_accuracy,
        "relative_energy": point.relative_energy,
        "relative_energy_no_skip": point.relative_energy_no_skip,
        "input_zero_fraction": point.input_zero_fraction,
        "weight_zero_fraction": point.weight_zero_fraction,
        "layers": layers,
    }


def energy_report_record(report: EnergyReport) -> dict:
    return {
        "skipping": report.skipping,
        "total_energy": report.total_energy,
        "baseline_energy": report.baseline_energy,
        "relative_energy": report.relative_energy,
        "layers": [asdict(row) for row in report.rows],
    }


def case_study_records(study: CaseStudy) -> list[dict]:
    return [
        {
            "label": c.label,
            "description": c.description,
            "policy": c.policy,
            "bits": {k: list(v) for k, v in c.bits.items()},
            "relative_accuracy": c.relative_accuracy,
            "report": energy_report_record(c.report),
        }
        for c in study.cases
    ]


def write_results(doc: ResultsDocument, path, format: str = "structured") -> None:
    obj = doc.to_json_obj()
    _check_finite(obj)
    if format == "structured":
        with open(path, "w", encoding="utf-8") as f:
            json.dump(obj, f, indent=2)
            f.write("\n")
    elif format == "csv":
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(CSV_COLUMNS)
            for point in doc.points:
                for row in point.get("layers", []):
                    writer.writerow([
                        point["point_id"], point["policy"], point.get("target"),
                        row["layer"], row["input_bits"], row["weight_bits"],
                        point["relative_accuracy"], point.get("relative_energy"),
                        row.get("zero_frac_in"), row.get("zero_frac_w"),
                    ])
    else:
        raise ResultsError(f"unknown format {format!r}; expected 'structured' or 'csv'")


def read_results(path) -> ResultsDocument:
    with open(path, "r", encoding="utf-8") as f:
        obj = json.load(f)
    if not isinstance(obj, dict) or "schema_version" not in obj:
        raise ResultsError(f"{path}: not a results document (no schema_version)")
    if obj["schema_version"] != SCHEMA_VERSION:
        raise ResultsError(f"{path}: unsupported schema version {obj['schema_version']}")
    return ResultsDocument(
        metadata=obj.get("metadata", {}),
        points=obj.get("points", []),
        cases=obj.get("cases"),
        schema_version=obj["schema_version"],
    )


# ---------------------------------------------------------------------------
# Calibration profiles reuse the same structured container.
# ---------------------------------------------------------------------------

def write_profile(profile: CalibrationProfile, path) -> None:
    obj = {
        "schema_version": SCHEMA_VERSION,
        "kind": "calibration_profile",
        "sample_count": profile.sample_count,
        "global_max_abs": profile.global_max_abs,
        "layers": {
            name: {"input_max_abs": lc.input_max_abs, "weight_max_abs": lc.weight_max_abs}
            for name, lc in profile.layers.items()
        },
    }
    _check_finite(obj)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2)
        f.write("\n")


def read_profile(path) -> CalibrationProfile:
    with open(path, "r", encoding="utf-8") as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as exc:
            raise ResultsError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(obj, dict) or obj.get("kind") != "calibration_profile":
        raise ResultsError(f"{path}: not a calibration profile")
    try:
        layers = {
            name: LayerCalibration(entry["input_max_abs"], entry["weight_max_abs"])
            for name, entry in obj["layers"].items()
        }
        return CalibrationProfile(
            layers=layers,
            global_max_abs=obj["global_max_abs"],
            sample_count=obj["sample_count"],
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise ResultsError(f"{path}: malformed calibration profile ({exc})") from None
