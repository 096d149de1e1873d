import logging

import numpy as np
import pytest

from fxpquant import (
    FullyConnected,
    LabeledDataset,
    LayerWeights,
    NetworkGraph,
    SearchError,
    SearchSettings,
    greedy_search,
    uniform_sweep,
)

from conftest import build_prototype_dataset, build_toy_fc_net

TOY_SCALES = {"fc1": (1.0, 2.0), "fc2": (4.0, 2.0)}


def test_settings_validation():
    with pytest.raises(SearchError):
        SearchSettings(target_relative_accuracy=0.0)
    with pytest.raises(SearchError):
        SearchSettings(min_bits=0)
    with pytest.raises(SearchError):
        SearchSettings(min_bits=9, max_bits=8)
    with pytest.raises(SearchError):
        SearchSettings(max_bits=17)


def test_uniform_sweep_shape_and_ordering(toy_fc_net, toy_dataset):
    settings = SearchSettings(min_bits=4, max_bits=8, sample_limit=None)
    points = uniform_sweep(toy_fc_net, toy_dataset, TOY_SCALES, settings)
    assert len(points) == 5  # one operating point per bit width, descending
    bits = [p.config.layers["fc1"].input_spec.bits for p in points]
    assert bits == [8, 7, 6, 5, 4]
    # full-width end of the sweep reproduces the float predictions exactly
    assert points[0].relative_accuracy == 1.0
    for p in points:
        assert p.relative_energy is not None
        assert p.relative_energy <= p.relative_energy_no_skip + 1e-15
        assert p.input_zero_fraction is not None


def test_sixteen_bit_point_has_unit_relative_accuracy(toy_fc_net, toy_dataset):
    settings = SearchSettings(min_bits=16, max_bits=16, sample_limit=None)
    (point,) = uniform_sweep(toy_fc_net, toy_dataset, TOY_SCALES, settings)
    assert point.relative_accuracy == 1.0


def constant_output_net():
    """Zero weights, fixed distinct biases: logits never depend on the input."""
    return NetworkGraph(
        (1, 2, 2),
        (("fc", FullyConnected(2)),),
        {"fc": LayerWeights(np.zeros((2, 4)), np.array([0.5, -0.5]))},
    )


def test_greedy_on_constant_output_layer_reaches_min_bits():
    net = constant_output_net()
    rng = np.random.default_rng(30)
    ds = LabeledDataset(rng.random((16, 1, 2, 2)), np.zeros(16, dtype=np.int64))
    settings = SearchSettings(target_relative_accuracy=1.0, min_bits=1, max_bits=8,
                              sample_limit=None)
    result = greedy_search(net, ds, {"fc": (1.0, 1.0)}, settings)
    assert result.feasible
    assert result.point.bits_table() == {"fc": (1, 1)}
    assert result.point.relative_accuracy >= 1.0


def test_greedy_meets_target_and_respects_budget(toy_fc_net, toy_dataset):
    settings = SearchSettings(target_relative_accuracy=0.95, min_bits=1, max_bits=8,
                              sample_limit=None)
    result = greedy_search(toy_fc_net, toy_dataset, TOY_SCALES, settings)
    assert result.feasible
    assert result.point.relative_accuracy >= 0.95
    layers = 2
    assert result.evaluations <= (8 - 1) * 2 * layers
    for b_in, b_w in result.point.bits_table().values():
        assert 1 <= b_in <= 8 and 1 <= b_w <= 8
    # candidate log: one record per evaluation, in visit order
    assert len(result.candidates) == result.evaluations
    assert result.candidates[0].layer == "fc1"
    assert result.candidates[0].knob == "input"
    assert result.candidates[0].bits == 7


def test_greedy_descent_is_minimal_prefix(toy_fc_net, toy_dataset):
    # Within each knob the accepted count is the smallest b whose whole
    # prefix b..max met the target (early-stop at the first violation).
    settings = SearchSettings(target_relative_accuracy=0.95, min_bits=1, max_bits=8,
                              sample_limit=None)
    result = greedy_search(toy_fc_net, toy_dataset, TOY_SCALES, settings)
    bits = result.point.bits_table()
    for (layer, knob), accepted in {
        ("fc1", "input"): bits["fc1"][0],
        ("fc1", "weight"): bits["fc1"][1],
        ("fc2", "input"): bits["fc2"][0],
        ("fc2", "weight"): bits["fc2"][1],
    }.items():
        records = [c for c in result.candidates if c.layer == layer and c.knob == knob]
        for rec in records:
            assert rec.accepted == (rec.bits >= accepted)


def test_relaxing_target_never_increases_bits(toy_fc_net, toy_dataset):
    settings_tight = SearchSettings(target_relative_accuracy=0.99, min_bits=1,
                                    max_bits=8, sample_limit=None)
    settings_loose = SearchSettings(target_relative_accuracy=0.90, min_bits=1,
                                    max_bits=8, sample_limit=None)
    tight = greedy_search(toy_fc_net, toy_dataset, TOY_SCALES, settings_tight)
    loose = greedy_search(toy_fc_net, toy_dataset, TOY_SCALES, settings_loose)
    for name in ("fc1", "fc2"):
        assert loose.point.bits_table()[name][0] <= tight.point.bits_table()[name][0]
        assert loose.point.bits_table()[name][1] <= tight.point.bits_table()[name][1]


def test_infeasible_target_returns_best_point(toy_fc_net, toy_dataset):
    settings = SearchSettings(target_relative_accuracy=1.5, min_bits=1, max_bits=8,
                              sample_limit=None)
    result = greedy_search(toy_fc_net, toy_dataset, TOY_SCALES, settings)
    assert not result.feasible
    assert result.evaluations == 0
    assert result.point.bits_table() == {"fc1": (8, 8), "fc2": (8, 8)}
    assert result.point.relative_energy is not None


def test_zero_float_accuracy_is_an_error(toy_fc_net, toy_dataset):
    # impossible labels -> float accuracy 0 -> relative accuracy undefined
    bad = LabeledDataset(toy_dataset.images,
                         np.full(len(toy_dataset), 9, dtype=np.int64))
    with pytest.raises(SearchError, match="float-mode accuracy is zero"):
        greedy_search(toy_fc_net, bad, TOY_SCALES, SearchSettings(sample_limit=None))


def test_candidates_are_streamed_as_log_records(toy_fc_net, toy_dataset, caplog):
    settings = SearchSettings(target_relative_accuracy=0.95, min_bits=4, max_bits=6,
                              sample_limit=None)
    with caplog.at_level(logging.INFO, logger="fxpquant.search"):
        result = greedy_search(toy_fc_net, toy_dataset, TOY_SCALES, settings)
    candidate_lines = [r.message for r in caplog.records if "candidate" in r.message]
    assert len(candidate_lines) == result.evaluations
    assert all("layer=" in line and "bits=" in line and "rel_accuracy=" in line
               for line in candidate_lines)
