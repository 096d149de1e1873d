"""The four canonical operating points A-D on the LeNet-5 fixture:

  A  16-bit fixed point (the relative-energy baseline)
  B  per-layer scaling, uniform bits at 100% relative accuracy
  C  case B plus computation skipping
  D  per-layer bits from the greedy search at 99%, with skipping

Run from the repo root:  python demos/04_energy_cases.py
"""
from fxpquant import (
    SearchSettings,
    calibrate,
    case_report,
    load_mnist,
    load_model,
    scales_from_profile,
)

SAMPLES = 500

net = load_model("fixtures/lenet5/lenet5.yaml", "fixtures/lenet5/lenet5.cnnw")
validation = load_mnist("fixtures/mnist/t10k-images-idx3-ubyte",
                        "fixtures/mnist/t10k-labels-idx1-ubyte")
train_slice = load_mnist("fixtures/mnist/train-slice-images-idx3-ubyte",
                         "fixtures/mnist/train-slice-labels-idx1-ubyte")

scales = scales_from_profile(calibrate(net, train_slice, sample_limit=SAMPLES),
                             "per-layer")
settings = SearchSettings(target_relative_accuracy=0.99, sample_limit=SAMPLES)
study = case_report(net, validation, scales, settings)

print(f"{'case':<5} {'rel energy':>10} {'gain':>7} {'rel acc':>8}  description")
baseline = study.cases[0].report.relative_energy
for case in study.cases:
    e = case.report.relative_energy
    print(f"{case.label:<5} {e:>10.4f} {baseline / e:>6.1f}x "
          f"{case.relative_accuracy:>8.4f}  {case.description}")

d_over_c = study.cases[3].report.relative_energy / study.cases[2].report.relative_energy
print(f"\nallowing 99% instead of 100% accuracy buys another "
      f"{1 / d_over_c:.1f}x on top of case C")
print("\nper-layer detail for case D:")
for row in study.cases[3].report.rows:
    print(f"  {row.name:<8} {row.input_bits:>2}/{row.weight_bits:<2} bits  "
          f"{row.skipped_macs / row.total_macs:>6.1%} of MACs skipped")
