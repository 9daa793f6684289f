"""Rounding as a rotated triangle wave, and its Fourier machinery.

Rotating the (x, round(x)) staircase by 45 degrees gives a zig-zag of
period sqrt(2) and half-height 1/(2*sqrt(2)). Its sine series has only odd
harmonics with amplitude 2*sqrt(2)/pi^2; damping that amplitude and rotating
the truncated series back produces the surrogate slope used in backward.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import SingularDenominatorError

SQRT2 = math.sqrt(2.0)
PERIOD = SQRT2
SQRT2_PI = SQRT2 * math.pi
VANILLA_AMPLITUDE = 2.0 * SQRT2 / math.pi**2
WELL_CONDITIONED_AMPLITUDE = 1.0 / SQRT2_PI
ZIGZAG_HALF_HEIGHT = 1.0 / (2.0 * SQRT2)

DEFAULT_PANELS = 2**14
SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class TrigPolynomial:
    """``a0 + sum_k a_k cos(2 pi k u / T) + b_k sin(2 pi k u / T)`` for k = 1..n."""

    a0: float
    a: tuple[float, ...] = ()
    b: tuple[float, ...] = ()
    period: float = PERIOD

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        if len(self.a) != len(self.b):
            raise ValueError(f"cosine/sine coefficient counts differ: {len(self.a)} vs {len(self.b)}")
        if not self.period > 0:
            raise ValueError("period must be positive")

    @property
    def degree(self) -> int:
        return len(self.a)

    def __call__(self, u):
        u = np.asarray(u, dtype=np.float64)
        out = np.full(u.shape, self.a0)
        w = 2.0 * math.pi / self.period
        for k, (ak, bk) in enumerate(zip(self.a, self.b), start=1):
            out = out + ak * np.cos(w * k * u) + bk * np.sin(w * k * u)
        return out if out.ndim else float(out)

    def truncated(self, n: int) -> "TrigPolynomial":
        return TrigPolynomial(self.a0, self.a[:n], self.b[:n], self.period)

    def __add__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        if other.period != self.period:
            raise ValueError("cannot add trigonometric polynomials with different periods")
        n = max(self.degree, other.degree)
        pad = lambda v: np.pad(np.asarray(v, dtype=np.float64), (0, n - len(v)))
        return TrigPolynomial(
            self.a0 + other.a0,
            tuple(pad(self.a) + pad(other.a)),
            tuple(pad(self.b) + pad(other.b)),
            self.period,
        )


@dataclass(frozen=True)
class CurvePoint:
    t: float
    f: float
    x: float = field(default=0.0)
    x_q: float = field(default=0.0)


def _fractional(v):
    # Always in [0, 1), including negative arguments: {-0.25} = 0.75.
    return v - np.floor(v)


def zigzag(t):
    """The rotated rounding function: odd triangle wave with period sqrt(2)."""
    t = np.asarray(t, dtype=np.float64)
    r = _fractional((t - PERIOD / 4.0) / PERIOD)
    out = ZIGZAG_HALF_HEIGHT * (1.0 - 4.0 * np.abs(r - 0.5))
    return out if out.ndim else float(out)


def rotate_to_curve(x: float, x_q: float) -> CurvePoint:
    return CurvePoint(t=(x + x_q) / SQRT2, f=(-x + x_q) / SQRT2, x=x, x_q=x_q)


def inverse_rotate(t, f):
    """Map rotated coordinates (t, f) back to (x, x_q)."""
    return (t - f) / SQRT2, (t + f) / SQRT2


def _odd_harmonics(M: int):
    if M < 0:
        raise ValueError(f"order must be >= 0, got {M}")
    for m in range(M + 1):
        yield m, 2 * m + 1, (-1.0) ** m


def fourier_partial_sum(t, M: int, A: float):
    """Damped sine series of the zig-zag truncated after m = M."""
    t = np.asarray(t, dtype=np.float64)
    acc = np.zeros(t.shape)
    for _, k, sign in _odd_harmonics(M):
        acc = acc + sign / k**2 * np.sin(k * SQRT2_PI * t)
    out = -A * acc
    return out if out.ndim else float(out)


def fourier_partial_sum_derivative(t, M: int, A: float):
    t = np.asarray(t, dtype=np.float64)
    acc = np.zeros(t.shape)
    for _, k, sign in _odd_harmonics(M):
        acc = acc + sign / k * np.cos(k * SQRT2_PI * t)
    out = -A * SQRT2_PI * acc
    return out if out.ndim else float(out)


def parameterized_curve(t, M: int, A: float):
    """Points (x(t), x_q(t)) of the smooth surrogate curve, rotated back."""
    return inverse_rotate(t, fourier_partial_sum(t, M, A))


def curve_slope(t, M: int, A: float):
    """dx_q/dx along the rotated-back truncated series: (1 + f')/(1 - f')."""
    fp = np.asarray(fourier_partial_sum_derivative(t, M, A))
    den = 1.0 - fp
    if np.any(np.abs(den) < SINGULAR_TOL):
        raise SingularDenominatorError(
            f"|1 - f'(t)| < {SINGULAR_TOL} for order {M}, amplitude {A}"
        )
    out = (1.0 + fp) / den
    return out if out.ndim else float(out)


def simpson(values: np.ndarray, width: float) -> float:
    """Composite Simpson over samples at panels+1 equispaced nodes.

    Each pair of panels contributes (h/3)(f0 + 4 f1 + f2); pairs are summed
    in index order so the result is independent of any partitioning.
    """
    n = values.shape[-1] - 1
    if n < 2 or n % 2:
        raise ValueError("Simpson's rule needs an even number of panels")
    h = width / n
    pairs = values[..., 0:-1:2] + 4.0 * values[..., 1::2] + values[..., 2::2]
    return h / 3.0 * np.sum(pairs, axis=-1)


def _nodes(period: float, panels: int) -> np.ndarray:
    return np.linspace(0.0, period, panels + 1)


def fourier_coefficients(
    f: Callable, n: int, period: float = PERIOD, panels: int = DEFAULT_PANELS
) -> TrigPolynomial:
    """Fourier coefficients of ``f`` on [0, period] by composite Simpson."""
    if n < 0:
        raise ValueError("degree must be >= 0")
    u = _nodes(period, panels)
    fu = np.broadcast_to(np.asarray(f(u), dtype=np.float64), u.shape)
    w = 2.0 * math.pi / period
    a0 = simpson(fu, period) / period
    a = [2.0 / period * simpson(fu * np.cos(w * k * u), period) for k in range(1, n + 1)]
    b = [2.0 / period * simpson(fu * np.sin(w * k * u), period) for k in range(1, n + 1)]
    return TrigPolynomial(float(a0), tuple(a), tuple(b), period)


def l2_error(f: Callable, g: TrigPolynomial, period: float | None = None, panels: int = DEFAULT_PANELS) -> float:
    """sqrt of the integral of (f - g)^2 over one period, same Simpson rule."""
    period = g.period if period is None else period
    u = _nodes(period, panels)
    diff = np.asarray(f(u), dtype=np.float64) - np.asarray(g(u), dtype=np.float64)
    return float(math.sqrt(max(simpson(diff * diff, period), 0.0)))


def parseval_gap(reference: TrigPolynomial, g: TrigPolynomial) -> float:
    """T (a0 - c0)^2 + T/2 sum[(a_k - c_k)^2 + (b_k - d_k)^2].

    This is how much worse ``g`` is than the partial sum ``reference`` in
    squared L2 error, using coefficients only.
    """
    T = reference.period
    n = max(reference.degree, g.degree)
    pad = lambda v: np.pad(np.asarray(v, dtype=np.float64), (0, n - len(v)))
    da = pad(reference.a) - pad(g.a)
    db = pad(reference.b) - pad(g.b)
    return float(T * (reference.a0 - g.a0) ** 2 + T / 2.0 * np.sum(da * da + db * db))


def zigzag_sine_coefficient(k: int, amplitude: float | None = None) -> float:
    """Closed-form b_k of the zig-zag: zero for even k, alternating 1/k^2 for odd k."""
    if amplitude is None:
        amplitude = VANILLA_AMPLITUDE
    if k < 1:
        raise ValueError("harmonic index starts at 1")
    if k % 2 == 0:
        return 0.0
    m = (k - 1) // 2
    return -amplitude * (-1.0) ** m / k**2
