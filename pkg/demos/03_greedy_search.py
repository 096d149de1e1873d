"""Greedy per-layer bit-width search on the LeNet-5 fixture at a 99% target.

Run from the repo root:  python demos/03_greedy_search.py
Takes a few minutes; lower SAMPLES for a quicker look.
"""
import logging

from fxpquant import (
    SearchSettings,
    calibrate,
    greedy_search,
    load_mnist,
    load_model,
    scales_from_profile,
)

SAMPLES = 500
logging.basicConfig(level=logging.INFO, format="%(message)s")

net = load_model("fixtures/lenet5/lenet5.yaml", "fixtures/lenet5/lenet5.cnnw")
validation = load_mnist("fixtures/mnist/t10k-images-idx3-ubyte",
                        "fixtures/mnist/t10k-labels-idx1-ubyte")
train_slice = load_mnist("fixtures/mnist/train-slice-images-idx3-ubyte",
                         "fixtures/mnist/train-slice-labels-idx1-ubyte")

scales = scales_from_profile(calibrate(net, train_slice, sample_limit=SAMPLES),
                             "per-layer")
settings = SearchSettings(target_relative_accuracy=0.99, sample_limit=SAMPLES)
result = greedy_search(net, validation, scales, settings)

print()
print(f"feasible: {result.feasible}   candidate evaluations: {result.evaluations}")
print(f"{'layer':<8} {'input bits':>10} {'weight bits':>11}")
for name, (b_in, b_w) in result.point.bits_table().items():
    print(f"{name:<8} {b_in:>10} {b_w:>11}")
print(f"relative accuracy {result.point.relative_accuracy:.4f} "
      f"(target {settings.target_relative_accuracy})")
print(f"relative energy {result.point.relative_energy:.4f} with skipping, "
      f"{result.point.relative_energy_no_skip:.4f} without")
print("note: early layers tolerate fewer bits than the classifier head")
