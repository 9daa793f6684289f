"""Backward-pass multipliers standing in for d round(x) / dx.

* STE: identity.
* RDFS: slope of the damped, truncated Fourier series of the rotated
  rounding staircase, ``(1 - S) / (1 + S)`` with
  ``S = A sqrt(2) pi sum_m (-1)^m/(2m+1) cos((2m+1) pi (x + x_q))``.
* DSQ: derivative of the tanh-based soft quantizer, kept as a baseline.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import _kernels
from .errors import ShapeMismatchError, SingularDenominatorError
from .fourier import SINGULAR_TOL, SQRT2_PI, VANILLA_AMPLITUDE, WELL_CONDITIONED_AMPLITUDE
from .quantizer import QuantConfig
from .tensor import Tensor, as_tensor

DEFAULT_AMPLITUDE = 0.21
DEFAULT_ORDER = 0


@dataclass(frozen=True)
class STE:
    label = "ste"

    @property
    def param(self) -> float | None:
        return None


@dataclass(frozen=True)
class RDFS:
    """Rotated damped Fourier surrogate.

    The well-conditioned contract is ``0 <= amplitude < 1/(sqrt(2) pi)``.
    Amplitudes up to the undamped Fourier value ``2 sqrt(2)/pi^2`` are only
    accepted with ``ill_conditioned=True`` (amplitude ablations).
    """

    amplitude: float = DEFAULT_AMPLITUDE
    order: int = DEFAULT_ORDER
    ill_conditioned: bool = False
    label = "rdfs"

    def __post_init__(self):
        A = self.amplitude
        if not (isinstance(self.order, (int, np.integer)) and self.order >= 0):
            raise ValueError(f"order must be a non-negative integer, got {self.order!r}")
        if not (A >= 0 and math.isfinite(A)):
            raise ValueError(f"amplitude must be a finite non-negative number, got {A}")
        if self.ill_conditioned:
            if A > VANILLA_AMPLITUDE:
                raise ValueError(f"amplitude {A} exceeds the Fourier amplitude {VANILLA_AMPLITUDE:.6f}")
        elif A >= WELL_CONDITIONED_AMPLITUDE:
            raise ValueError(
                f"amplitude {A} is outside the well-conditioned range "
                f"[0, {WELL_CONDITIONED_AMPLITUDE:.6f}); pass ill_conditioned=True for ablations"
            )

    @property
    def c(self) -> float:
        return self.amplitude * SQRT2_PI

    @property
    def param(self) -> float:
        return self.amplitude


@dataclass(frozen=True)
class DSQ:
    alpha: float
    label = "dsq"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")

    @property
    def beta(self) -> float:
        return dsq_beta(self.alpha)

    @property
    def param(self) -> float:
        return self.alpha


SurrogateSpec = Union[STE, RDFS, DSQ]


def _ret(out: np.ndarray):
    return out if out.ndim else float(out)


def g_ste(x):
    x = np.asarray(x, dtype=np.float64)
    return _ret(np.ones(x.shape))


def rdfs_series(x, x_q, M: int):
    """sum_{m<=M} (-1)^m/(2m+1) cos((2m+1) pi (x + x_q))."""
    if M < 0:
        raise ValueError(f"order must be >= 0, got {M}")
    phase = np.pi * (np.asarray(x, dtype=np.float64) + np.asarray(x_q, dtype=np.float64))
    acc = np.cos(phase)
    for m in range(1, M + 1):
        k = 2 * m + 1
        acc = acc + (-1.0) ** m / k * np.cos(k * phase)
    return acc


def _ratio(s):
    den = 1.0 + s
    if np.any(np.abs(den) < SINGULAR_TOL):
        raise SingularDenominatorError(f"|1 + S| < {SINGULAR_TOL}")
    return _ret((1.0 - s) / den)


def g_rdfs(x, x_q, A: float, M: int = DEFAULT_ORDER):
    if A < 0:
        raise ValueError("amplitude must be non-negative")
    return _ratio(A * SQRT2_PI * rdfs_series(x, x_q, M))


def g_rdfs_first_order(x, x_q, A: float):
    if A < 0:
        raise ValueError("amplitude must be non-negative")
    c = A * SQRT2_PI
    phase = np.pi * (np.asarray(x, dtype=np.float64) + np.asarray(x_q, dtype=np.float64))
    return _ratio(c * np.cos(phase))


@dataclass(frozen=True)
class DsqLayout:
    """Clip range [l, u] tiled into 2^bits - 1 intervals of width delta."""

    l: float
    u: float
    bits: int

    def __post_init__(self):
        if not self.l < self.u:
            raise ValueError(f"layout needs l < u, got [{self.l}, {self.u}]")
        if self.bits < 1:
            raise ValueError("bits must be >= 1")

    @property
    def n_intervals(self) -> int:
        return 2**self.bits - 1

    @property
    def delta(self) -> float:
        return (self.u - self.l) / self.n_intervals

    def interval_index(self, x):
        """Index i of the interval containing x; x = u belongs to the last one."""
        y = (np.asarray(x, dtype=np.float64) - self.l) / self.delta
        return np.clip(np.floor(y), 0, self.n_intervals - 1).astype(np.int64)

    def midpoint(self, i):
        return self.l + (np.asarray(i) + 0.5) * self.delta

    def edges(self) -> np.ndarray:
        return self.l + np.arange(self.n_intervals + 1) * self.delta


def dsq_beta(alpha: float) -> float:
    return math.log((2.0 - alpha) / alpha)


def dsq_forward(x, alpha: float, layout: DsqLayout):
    """Soft staircase: clipped outside [l, u], tanh step inside each interval."""
    x = np.asarray(x, dtype=np.float64)
    s_dsq = 1.0 / (1.0 - alpha)
    k = dsq_beta(alpha) / layout.delta
    i = layout.interval_index(x)
    phi = s_dsq * np.tanh(k * (x - layout.midpoint(i)))
    inside = layout.l + layout.delta * (i + (phi + 1.0) / 2.0)
    out = np.where(x < layout.l, layout.l, np.where(x > layout.u, layout.u, inside))
    return _ret(out)


def sech2(z):
    # exp(-2|z|) form: same exp-based path as the benchmark kernel, no overflow
    e = np.exp(-2.0 * np.abs(z))
    return 4.0 * e / (1.0 + e) ** 2


def g_dsq(x, alpha: float, layout: DsqLayout):
    """d/dx of dsq_forward inside [l, u]; zero in the clipped region."""
    x = np.asarray(x, dtype=np.float64)
    beta = dsq_beta(alpha)
    i = layout.interval_index(x)
    z = beta / layout.delta * (x - layout.midpoint(i))
    val = beta / (2.0 * (1.0 - alpha)) * sech2(z)
    return _ret(np.where((x >= layout.l) & (x <= layout.u), val, 0.0))


def default_dsq_layout(x, cfg: QuantConfig) -> DsqLayout:
    """Symmetric [-max|x|, +max|x|] at the quantizer bitwidth.

    An all-zero tensor falls back to the quantizer's own representable range.
    """
    m = float(np.max(np.abs(np.asarray(x))))
    if m > 0.0:
        return DsqLayout(-m, m, cfg.bits)
    lo, hi = cfg.normalized_range
    return DsqLayout(cfg.scale * lo, cfg.scale * hi, cfg.bits)


def surrogate_backward(
    upstream, x, cfg: QuantConfig, spec: SurrogateSpec, layout: DsqLayout | None = None
) -> Tensor:
    """Chain ``upstream`` (dL/dx_q) through the surrogate to dL/dx.

    Elements whose normalized value x/s falls outside [q_min - z, q_max - z]
    get zero gradient. RDFS is evaluated at (x/s, round(x/s)); DSQ on
    ``layout`` (default: symmetric max-abs range of ``x``).
    """
    upstream, x = as_tensor(upstream), as_tensor(x)
    if upstream.shape != x.shape:
        raise ShapeMismatchError(f"upstream {upstream.shape} vs input {x.shape}")
    if isinstance(spec, DSQ) and layout is None:
        layout = default_dsq_layout(x.data, cfg)
    out = _kernels.backward(upstream.data, x.data, cfg, spec, layout)
    return Tensor._wrap(out.reshape(x.shape))


def surrogate_multiplier(x, cfg: QuantConfig, spec: SurrogateSpec, layout: DsqLayout | None = None) -> Tensor:
    """Elementwise g values (clip mask included), i.e. backward of a ones tensor."""
    x = as_tensor(x)
    return surrogate_backward(Tensor._wrap(np.ones(x.shape)), x, cfg, spec, layout)


def parse_spec(name: str, amplitude: float = DEFAULT_AMPLITUDE, order: int = DEFAULT_ORDER,
               alpha: float = 0.2, ill_conditioned: bool = False) -> SurrogateSpec:
    name = name.lower()
    if name == "ste":
        return STE()
    if name == "rdfs":
        return RDFS(amplitude=amplitude, order=order, ill_conditioned=ill_conditioned)
    if name == "dsq":
        return DSQ(alpha=alpha)
    raise ValueError(f"unknown surrogate {name!r}; expected ste, rdfs or dsq")
