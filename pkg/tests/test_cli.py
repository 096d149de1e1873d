import json

import numpy as np
import pytest

from fxpquant import QuantConfig, evaluate_accuracy, load_mnist, save_model
from fxpquant.cli import main
from fxpquant.mnist import write_idx_images, write_idx_labels

from conftest import build_tiny_conv_net


@pytest.fixture
def workdir(tmp_path):
    """Tiny bundle + self-consistent IDX dataset (float accuracy = 1.0)."""
    net = build_tiny_conv_net()
    save_model(net, tmp_path / "tiny.yaml", tmp_path / "tiny.cnnw", name="tiny")
    rng = np.random.default_rng(70)
    raw = rng.integers(0, 256, (64, 6, 6), dtype=np.uint8)
    write_idx_images(raw, tmp_path / "imgs")
    write_idx_labels(np.zeros(64, dtype=np.uint8), tmp_path / "lbls")
    ds = load_mnist(tmp_path / "imgs", tmp_path / "lbls")
    result = evaluate_accuracy(net, ds, QuantConfig.float_mode(), collect_trace=False)
    # label with the float net's own predictions
    logits_labels = []
    from fxpquant import forward

    for i in range(len(ds)):
        logits, _ = forward(net, ds.images[i], QuantConfig.float_mode())
        logits_labels.append(int(np.argmax(logits)))
    write_idx_labels(np.asarray(logits_labels, dtype=np.uint8), tmp_path / "lbls")
    return tmp_path


def base_args(workdir, *extra):
    return [
        "--model", str(workdir / "tiny.yaml"),
        "--weights", str(workdir / "tiny.cnnw"),
        "--mnist-images", str(workdir / "imgs"),
        "--mnist-labels", str(workdir / "lbls"),
        *extra,
    ]


def run_calibrate(workdir):
    profile = workdir / "profile.json"
    code = main(["calibrate", *base_args(workdir), "--samples", "64",
                 "--out", str(profile)])
    assert code == 0
    return profile


def test_calibrate_writes_profile_deterministically(workdir, capsys):
    profile = run_calibrate(workdir)
    first = profile.read_bytes()
    out = capsys.readouterr().out
    assert "conv" in out and "fc" in out
    run_calibrate(workdir)
    assert profile.read_bytes() == first  # same seed -> byte-identical profile


def test_calibrate_uniform_policy_prints_identical_scales(workdir, capsys):
    profile = workdir / "p.json"
    code = main(["calibrate", *base_args(workdir), "--policy", "uniform",
                 "--samples", "64", "--out", str(profile)])
    assert code == 0
    rows = [l.split() for l in capsys.readouterr().out.splitlines()
            if l.startswith(("conv", "fc"))]
    scales = {(r[3], r[4]) for r in rows}
    assert len(scales) == 1


def test_sweep_structured_and_csv(workdir):
    profile = run_calibrate(workdir)
    out = workdir / "sweep.json"
    code = main(["sweep", *base_args(workdir), "--profile", str(profile),
                 "--bits-min", "4", "--bits-max", "8", "--samples", "64",
                 "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert len(doc["points"]) == 5
    assert doc["points"][0]["point_id"] == "uniform-08"
    assert doc["metadata"]["command"] == "sweep"

    csv_out = workdir / "sweep.csv"
    code = main(["sweep", *base_args(workdir), "--profile", str(profile),
                 "--bits-min", "4", "--bits-max", "8", "--samples", "64",
                 "--format", "csv", "--out", str(csv_out)])
    assert code == 0
    lines = csv_out.read_text().strip().splitlines()
    assert lines[0].startswith("point_id,policy,target,layer")
    assert len(lines) == 1 + 5 * 2  # 5 points x 2 weight-bearing layers


def test_search_feasible_and_case_block(workdir):
    profile = run_calibrate(workdir)
    out = workdir / "search.json"
    code = main(["search", *base_args(workdir), "--profile", str(profile),
                 "--target", "0.9", "--samples", "64", "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    point = doc["points"][0]
    assert point["feasible"] is True
    assert point["relative_accuracy"] >= 0.9
    labels = [c["label"] for c in doc["cases"]]
    assert labels == ["A", "B", "C", "D"]
    energies = [c["report"]["relative_energy"] for c in doc["cases"]]
    assert energies[0] == 1.0
    assert energies == sorted(energies, reverse=True)


def test_search_infeasible_target_exit_code(workdir):
    profile = run_calibrate(workdir)
    out = workdir / "search.json"
    code = main(["search", *base_args(workdir), "--profile", str(profile),
                 "--target", "1.5", "--samples", "64", "--out", str(out)])
    assert code == 3
    doc = json.loads(out.read_text())  # best-found point still written
    assert doc["points"][0]["feasible"] is False


def test_energy_command(workdir, capsys):
    profile = run_calibrate(workdir)
    out = workdir / "energy.json"
    code = main(["energy", *base_args(workdir), "--profile", str(profile),
                 "--bits", "8", "--samples", "64", "--skip", "on",
                 "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    report = doc["metadata"]["report"]
    assert report["relative_energy"] < 1.0
    assert {r["name"] for r in report["layers"]} == {"conv", "fc"}


def test_report_command_roundtrips(workdir, capsys):
    profile = run_calibrate(workdir)
    sweep_out = workdir / "sweep.json"
    main(["sweep", *base_args(workdir), "--profile", str(profile),
          "--bits-min", "6", "--bits-max", "8", "--samples", "64",
          "--out", str(sweep_out)])
    capsys.readouterr()
    csv_out = workdir / "converted.csv"
    code = main(["report", "--results", str(sweep_out), "--format", "csv",
                 "--out", str(csv_out)])
    assert code == 0
    assert "uniform-08" in capsys.readouterr().out
    assert csv_out.read_text().startswith("point_id,")


def test_missing_file_gives_io_exit_code(workdir):
    code = main(["calibrate", "--model", str(workdir / "nope.yaml"),
                 "--weights", str(workdir / "tiny.cnnw"),
                 "--mnist-images", str(workdir / "imgs"),
                 "--mnist-labels", str(workdir / "lbls")])
    assert code == 4


def test_corrupt_container_gives_validation_exit_code(workdir):
    bad = workdir / "bad.cnnw"
    bad.write_bytes(b"JUNKJUNKJUNK")
    code = main(["calibrate", "--model", str(workdir / "tiny.yaml"),
                 "--weights", str(bad),
                 "--mnist-images", str(workdir / "imgs"),
                 "--mnist-labels", str(workdir / "lbls")])
    assert code == 2


def test_missing_required_flags_rejected(workdir):
    assert main(["calibrate"]) == 2
    assert main(["sweep", *base_args(workdir)]) == 2  # no --profile
    assert main(["report"]) == 2  # no --results
    assert main(["energy", *base_args(workdir)]) == 2  # no --bits


def test_config_file_provides_defaults_and_flags_override(workdir):
    profile = run_calibrate(workdir)
    cfg = {
        "model": str(workdir / "tiny.yaml"),
        "weights": str(workdir / "tiny.cnnw"),
        "mnist_images": str(workdir / "imgs"),
        "mnist_labels": str(workdir / "lbls"),
        "profile": str(profile),
        "bits_min": 4,
        "bits_max": 4,
        "samples": 64,
        "out": str(workdir / "from_config.json"),
    }
    cfg_path = workdir / "run.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["sweep", "--config", str(cfg_path)]) == 0
    doc = json.loads((workdir / "from_config.json").read_text())
    assert len(doc["points"]) == 1

    # explicit flag overrides the file value
    assert main(["sweep", "--config", str(cfg_path), "--bits-max", "5",
                 "--out", str(workdir / "override.json")]) == 0
    doc = json.loads((workdir / "override.json").read_text())
    assert len(doc["points"]) == 2


def test_config_file_with_unknown_key_rejected(workdir):
    cfg_path = workdir / "run.json"
    cfg_path.write_text(json.dumps({"modle": "typo.yaml"}))
    assert main(["sweep", "--config", str(cfg_path)]) == 2


def test_seeded_subset_selection_is_deterministic(workdir):
    profile = run_calibrate(workdir)
    outs = []
    for name in ("a.json", "b.json"):
        main(["sweep", *base_args(workdir), "--profile", str(profile),
              "--bits-min", "8", "--bits-max", "8", "--samples", "32",
              "--seed", "5", "--out", str(workdir / name)])
        outs.append((workdir / name).read_text())
    assert outs[0] == outs[1]
