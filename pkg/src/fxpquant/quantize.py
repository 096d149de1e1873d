"""Power-of-two fixed-point grids: scale selection, saturating quantization.

A grid is a (bits, scale) pair with scale an exact power of two. Codes are
signed two's-complement style, range [-2^(n-1), 2^(n-1)-1], step
delta = scale / 2^(n-1), so the representable interval is [-scale,
scale - delta]. Values are rounded half away from zero and saturated, never
rejected. Because every scale is a power of two, dividing by delta is exact
in IEEE double arithmetic and all operations here are bit-reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

MAX_BITS = 16
MIN_SCALE = 2.0 ** -16  # fallback for degenerate all-zero tensors


@dataclass(frozen=True)
class QuantSpec:
    bits: int
    scale: float

    def __post_init__(self):
        if not 1 <= self.bits <= MAX_BITS:
            raise ValueError(f"bits must be in [1, {MAX_BITS}], got {self.bits}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")
        if math.frexp(self.scale)[0] != 0.5:
            raise ValueError(f"scale must be an exact power of two, got {self.scale}")

    @property
    def step(self) -> float:
        return self.scale / float(1 << (self.bits - 1))

    @property
    def code_min(self) -> int:
        return -(1 << (self.bits - 1))

    @property
    def code_max(self) -> int:
        return (1 << (self.bits - 1)) - 1


@dataclass(frozen=True)
class QuantizedTensor:
    codes: np.ndarray  # int32, already saturated to the spec's code range
    spec: QuantSpec

    def dequantize(self) -> np.ndarray:
        return self.codes.astype(np.float64) * self.spec.step


def next_pow2_scale(max_abs: float) -> float:
    """Smallest power of two >= max_abs; MIN_SCALE for a degenerate 0.0.

    Dead channels or all-zero tensors must not abort a sweep, so 0.0 maps to
    the configured minimum scale instead of failing.
    """
    if max_abs < 0 or not math.isfinite(max_abs):
        raise ValueError(f"max_abs must be finite and >= 0, got {max_abs}")
    if max_abs == 0.0:
        return MIN_SCALE
    mantissa, exponent = math.frexp(max_abs)  # max_abs = mantissa * 2**exponent
    if mantissa == 0.5:  # already an exact power of two
        return 2.0 ** (exponent - 1)
    return 2.0 ** exponent


def _round_half_away(q: np.ndarray) -> np.ndarray:
    return np.copysign(np.floor(np.abs(q) + 0.5), q)


def quantize(x: Union[float, np.ndarray], spec: QuantSpec) -> Union[int, np.ndarray]:
    """Map values to integer codes: round half away from zero, then saturate."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("cannot quantize non-finite values")
    codes = _round_half_away(arr / spec.step)
    codes = np.clip(codes, spec.code_min, spec.code_max).astype(np.int32)
    if np.isscalar(x) or arr.ndim == 0:
        return int(codes)
    return codes


def quantize_tensor(t: np.ndarray, spec: QuantSpec) -> QuantizedTensor:
    return QuantizedTensor(np.asarray(quantize(t, spec)), spec)


def fake_quantize(t: np.ndarray, spec: QuantSpec) -> np.ndarray:
    """Quantize-then-dequantize: projects values onto the grid {code * step}."""
    return quantize_tensor(np.asarray(t, dtype=np.float64), spec).dequantize()


def zero_fraction(q: QuantizedTensor) -> float:
    """Fraction of codes equal to zero (what hardware zero-flags would see)."""
    if q.codes.size == 0:
        return 0.0
    return int(np.count_nonzero(q.codes == 0)) / q.codes.size
