"""Walk through the fixed-point grid primitives on small hand-sized tensors.

Run from the repo root:  python demos/01_fixed_point_grids.py
"""
import numpy as np

from fxpquant import QuantSpec, fake_quantize, next_pow2_scale, quantize, \
    quantize_tensor, zero_fraction

print("=== scale selection: smallest power of two covering the data ===")
for max_abs in (0.43, 0.0625, 0.6, 1.0, 0.0):
    print(f"  max |x| = {max_abs:<8} -> scale {next_pow2_scale(max_abs)}")

print()
print("=== a 4-bit grid over [-0.5, 0.5): 16 codes, step 0.0625 ===")
spec = QuantSpec(bits=4, scale=0.5)
print(f"  codes {spec.code_min}..{spec.code_max}, step {spec.step}")
for x in (0.0, 0.3, 0.26, 1.0, -1.0):
    code = quantize(x, spec)
    print(f"  x = {x:+.2f} -> code {code:+d} -> value {code * spec.step:+.4f}")
print("  (1.0 and -1.0 saturate: out-of-range values clip, never fail)")

print()
print("=== coarser grids round more values to zero ===")
rng = np.random.default_rng(0)
t = rng.normal(0, 0.15, 2000)
scale = next_pow2_scale(float(np.max(np.abs(t))))
print(f"  gaussian tensor, 2000 values, calibrated scale {scale}")
for bits in (16, 10, 8, 6, 4, 2):
    zf = zero_fraction(quantize_tensor(t, QuantSpec(bits, scale)))
    err = float(np.max(np.abs(fake_quantize(t, QuantSpec(bits, scale)) - t)))
    print(f"  {bits:2d} bits: zero fraction {zf:5.1%}   max error {err:.5f}")
print("  -> this growing zero population is what computation skipping exploits")
