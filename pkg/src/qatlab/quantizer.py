"""Uniform affine fake quantization.

Levels are ``clip(round(x / s) + z, q_min, q_max)``; dequantization maps a
level back to ``s * (level - z)``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import EmptyTensorError, OutOfRangeLevelError
from .tensor import Tensor, as_tensor

HALF_TO_EVEN = "half_to_even"
HALF_AWAY_FROM_ZERO = "half_away_from_zero"
ROUNDING_MODES = (HALF_TO_EVEN, HALF_AWAY_FROM_ZERO)


@dataclass(frozen=True)
class QuantConfig:
    bits: int
    signed: bool = True
    scale: float = 1.0
    zero_point: int = 0
    rounding: str = HALF_TO_EVEN

    def __post_init__(self):
        if not 2 <= self.bits <= 8:
            raise ValueError(f"bits must be in [2, 8], got {self.bits}")
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")
        if self.rounding not in ROUNDING_MODES:
            raise ValueError(f"rounding must be one of {ROUNDING_MODES}, got {self.rounding!r}")
        if not self.q_min <= self.zero_point <= self.q_max:
            raise ValueError(
                f"zero_point {self.zero_point} outside [{self.q_min}, {self.q_max}]"
            )

    @property
    def q_min(self) -> int:
        return -(2 ** (self.bits - 1)) if self.signed else 0

    @property
    def q_max(self) -> int:
        return 2 ** (self.bits - 1) - 1 if self.signed else 2**self.bits - 1

    @property
    def normalized_range(self) -> tuple[int, int]:
        """Representable interval for x / s, i.e. [q_min - z, q_max - z]."""
        return self.q_min - self.zero_point, self.q_max - self.zero_point

    def with_scale(self, scale: float) -> "QuantConfig":
        return dataclasses.replace(self, scale=float(scale))


def round_levels(v, mode: str = HALF_TO_EVEN):
    """Round to nearest integer with the requested tie rule (array or scalar)."""
    v = np.asarray(v, dtype=np.float64)
    if mode == HALF_TO_EVEN:
        return np.rint(v)
    if mode == HALF_AWAY_FROM_ZERO:
        a = np.abs(v)
        f = np.floor(a)
        # a - f is exact, unlike floor(a + 0.5) which misrounds 0.49999999999999994
        return np.copysign(f + (a - f >= 0.5), v)
    raise ValueError(f"unknown rounding mode {mode!r}")


def compute_scale(t, template: QuantConfig) -> float:
    """Per-tensor max-abs step size; 1.0 for an all-zero tensor."""
    t = as_tensor(t) if not isinstance(t, Tensor) else t
    if t.size == 0:
        raise EmptyTensorError("cannot compute a scale for an empty tensor")
    m = float(np.max(np.abs(t.data)))
    if m == 0.0:
        return 1.0
    return m / max(abs(template.q_min), template.q_max)


def max_abs_config(t, bits: int, signed: bool = True, rounding: str = HALF_TO_EVEN) -> QuantConfig:
    template = QuantConfig(bits=bits, signed=signed, rounding=rounding)
    return template.with_scale(compute_scale(t, template))


def quantize_array(x, cfg: QuantConfig) -> np.ndarray:
    v = round_levels(np.asarray(x, dtype=np.float64) / cfg.scale, cfg.rounding) + cfg.zero_point
    return np.clip(v, cfg.q_min, cfg.q_max)


def quantize(x: float, cfg: QuantConfig) -> int:
    return int(quantize_array(x, cfg))


def dequantize(level: int, cfg: QuantConfig) -> float:
    if not cfg.q_min <= level <= cfg.q_max:
        raise OutOfRangeLevelError(f"level {level} outside [{cfg.q_min}, {cfg.q_max}]")
    return cfg.scale * (level - cfg.zero_point)


def fake_quant_array(x, cfg: QuantConfig) -> np.ndarray:
    return cfg.scale * (quantize_array(x, cfg) - cfg.zero_point)


def fake_quant(t, cfg: QuantConfig) -> Tensor:
    t = as_tensor(t)
    return Tensor._wrap(fake_quant_array(t.array, cfg))
