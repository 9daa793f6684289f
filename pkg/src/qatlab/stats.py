"""Mean and variance of surrogate gradients under uniform inputs.

Closed forms hold for inputs uniform over a clip range tiled by whole
quantization intervals; Monte Carlo estimates cross-check them.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError, InvalidRangeError, UnsupportedSpecError
from .surrogates import DSQ, RDFS, STE, DsqLayout, SurrogateSpec, g_dsq, g_rdfs_first_order
from .tensor import Rng

SHARD_SIZE = 2**17
MIN_SAMPLES = 1000
DEFAULT_SAMPLES = 10**6
DEFAULT_BITS = 3


class Unbounded(enum.Enum):
    """Marker for a limit that diverges; never mixed into float arithmetic."""

    POSITIVE_INFINITY = "+inf"

    def __str__(self) -> str:
        return self.value


RealOrUnbounded = Union[float, Unbounded]


def _check_kind(kind: str) -> str:
    k = kind.lower()
    if k not in ("dsq", "rdfs"):
        raise ValueError(f"kind must be 'dsq' or 'rdfs', got {kind!r}")
    return k


def _half_angle(c: float) -> float:
    """sqrt((1 - c)/(1 + c)), the tangent of half the angle whose cosine is c."""
    return math.sqrt((1.0 - c) / (1.0 + c))


def _rdfs_spec(spec: RDFS) -> float:
    if spec.order != 0:
        raise UnsupportedSpecError(f"no closed form for RDFS of order {spec.order}; only order 0")
    return spec.c


def _atan_ratio(u: float) -> float:
    # atan(u)/u, with its Taylor series near 0
    if u < 1e-4:
        return 1.0 - u * u / 3.0 + u**4 / 5.0
    return math.atan(u) / u


def _second_moment_bracket(u: float) -> float:
    """(1 - u^2) atan(u)/u - 1, without cancellation for small u.

    Series: sum_k>=1 (-1)^k u^(2k) (1/(2k+1) + 1/(2k-1)).
    """
    if u < 0.1:
        u2 = u * u
        total, p = 0.0, 1.0
        for k in range(1, 13):
            p *= -u2
            total += p * (1.0 / (2 * k + 1) + 1.0 / (2 * k - 1))
        return total
    return (1.0 - u * u) * math.atan(u) / u - 1.0


def expectation_closed(spec: SurrogateSpec) -> float:
    if isinstance(spec, STE):
        return 1.0
    if isinstance(spec, DSQ):
        return 1.0
    if isinstance(spec, RDFS):
        c = _rdfs_spec(spec)
        u = _half_angle(c)
        # 8/(pi sqrt(1-c^2)) atan(u) - 1, rewritten in u so it stays finite as c -> 1
        return 4.0 / math.pi * (1.0 + u * u) * _atan_ratio(u) - 1.0
    raise UnsupportedSpecError(f"unsupported surrogate {spec!r}")


def variance_closed(spec: SurrogateSpec) -> float:
    """Variance of the surrogate gradient; finite for every valid spec.

    RDFS is E[g^2] - E[g]^2 with E[g^2] = 1 + 16 c^2 atan(u)/(pi (1-c^2)^1.5)
    - 8c/(pi (1-c^2)). The first two terms nearly cancel as c -> 1, so the
    sum is evaluated through the substitution c = (1 - u^2)/(1 + u^2).
    """
    if isinstance(spec, STE):
        return 0.0
    if isinstance(spec, DSQ):
        a = spec.alpha
        return math.log((2.0 - a) / a) * (3.0 - (1.0 - a) ** 2) / (6.0 * (1.0 - a)) - 1.0
    if isinstance(spec, RDFS):
        c = _rdfs_spec(spec)
        if c == 0.0:
            return 0.0
        u = _half_angle(c)
        u2 = u * u
        t1 = 2.0 / math.pi * (1.0 - u2) * (1.0 + u2) / u2 * _second_moment_bracket(u)
        e = expectation_closed(spec)
        return t1 + 1.0 - e * e
    raise UnsupportedSpecError(f"unsupported surrogate {spec!r}")


def expectation_limit(kind: str) -> float:
    """Limit of the mean as DSQ sharpens (alpha -> 0) or RDFS amplitude -> 1/(sqrt(2) pi)."""
    return 1.0 if _check_kind(kind) == "dsq" else 4.0 / math.pi - 1.0


def variance_limit(kind: str) -> RealOrUnbounded:
    if _check_kind(kind) == "dsq":
        return Unbounded.POSITIVE_INFINITY
    return 16.0 / (3.0 * math.pi) - 16.0 / math.pi**2


@dataclass(frozen=True)
class StatsReport:
    spec: SurrogateSpec
    l: float
    u: float
    expectation_closed: float
    variance_closed: RealOrUnbounded
    expectation_mc: float
    variance_mc: float
    mc_samples: int
    mc_stderr_mean: float
    seed: int
    bits: int = DEFAULT_BITS

    CSV_HEADER = (
        "method,param,l,u,expectation_closed,variance_closed,"
        "expectation_mc,variance_mc,mc_samples,mc_stderr_mean,seed"
    )

    def csv_row(self) -> str:
        param = "" if self.spec.param is None else repr(float(self.spec.param))
        fields = [
            self.spec.label, param, repr(self.l), repr(self.u),
            repr(self.expectation_closed), str(self.variance_closed) if isinstance(
                self.variance_closed, Unbounded) else repr(self.variance_closed),
            repr(self.expectation_mc), repr(self.variance_mc),
            str(self.mc_samples), repr(self.mc_stderr_mean), str(self.seed),
        ]
        return ",".join(fields)


def _gradient_samples(spec: SurrogateSpec, xi: np.ndarray, layout: DsqLayout) -> np.ndarray:
    if isinstance(spec, STE):
        return np.ones_like(xi)
    if isinstance(spec, RDFS):
        if spec.order != 0:
            raise UnsupportedSpecError("Monte Carlo sampling is implemented for order 0 only")
        # periodic form on the interval grid: g(xi/delta, round(xi/delta))
        y = xi / layout.delta
        return np.asarray(g_rdfs_first_order(y, np.rint(y), spec.amplitude))
    if isinstance(spec, DSQ):
        return np.asarray(g_dsq(xi, spec.alpha, layout))
    raise UnsupportedSpecError(f"unsupported surrogate {spec!r}")


def _shard_moments(spec, layout, rng: Rng, count: int) -> tuple[int, float, float]:
    xi = rng.generator().uniform(layout.l, layout.u, size=count)
    g = _gradient_samples(spec, xi, layout)
    mean = float(np.mean(g))
    d = g - mean
    return count, mean, float(np.dot(d, d))


def _combine(a: tuple[int, float, float], b: tuple[int, float, float]) -> tuple[int, float, float]:
    # pairwise update of (count, mean, sum of squared deviations)
    na, ma, qa = a
    nb, mb, qb = b
    n = na + nb
    delta = mb - ma
    return n, ma + delta * nb / n, qa + qb + delta * delta * na * nb / n


def monte_carlo_stats(
    spec: SurrogateSpec,
    l: float,
    u: float,
    n: int = DEFAULT_SAMPLES,
    seed: int = 0,
    bits: int = DEFAULT_BITS,
    workers: int = 1,
) -> StatsReport:
    """Sample xi ~ U(l, u) and report sample moments next to the closed forms.

    Shard i of size SHARD_SIZE draws from Rng(seed).child(i); shards are
    merged in index order, so the result does not depend on ``workers``.
    """
    if not (math.isfinite(l) and math.isfinite(u) and l < u):
        raise InvalidRangeError(f"need finite l < u, got [{l}, {u}]")
    if n < MIN_SAMPLES:
        raise InvalidRangeError(f"need at least {MIN_SAMPLES} samples, got {n}")
    layout = DsqLayout(l, u, bits)
    root = Rng(seed)
    sizes = [SHARD_SIZE] * (n // SHARD_SIZE)
    if n % SHARD_SIZE:
        sizes.append(n % SHARD_SIZE)
    jobs = [(spec, layout, root.child(i), size) for i, size in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda j: _shard_moments(*j), jobs))
    else:
        parts = [_shard_moments(*j) for j in jobs]
    acc = parts[0]
    for p in parts[1:]:
        acc = _combine(acc, p)
    count, mean, m2 = acc
    var = m2 / (count - 1)
    try:
        e_closed, v_closed = expectation_closed(spec), variance_closed(spec)
    except UnsupportedSpecError:
        e_closed, v_closed = math.nan, math.nan
    return StatsReport(
        spec=spec, l=float(l), u=float(u),
        expectation_closed=e_closed, variance_closed=v_closed,
        expectation_mc=mean, variance_mc=var, mc_samples=count,
        mc_stderr_mean=math.sqrt(var / count), seed=seed, bits=bits,
    )


INTEGRAL_KINDS = ("cosine_linear", "cosine_quadratic", "sech4")


def reference_integral(kind: str, c: float) -> float:
    """Closed forms of three integrals used by the variance derivation.

    * cosine_linear: integral over [-pi/2, pi/2] of 1/(1 + c cos x)
    * cosine_quadratic: same with the denominator squared
    * sech4: integral over [-c, c] of sech(x)^4
    """
    if kind in ("cosine_linear", "cosine_quadratic"):
        if not c * c < 1.0:
            raise DomainError(f"{kind} needs c^2 < 1, got c={c}")
        u = _half_angle(c)
        root = math.sqrt(1.0 - c * c)
        if kind == "cosine_linear":
            return 4.0 / root * math.atan(u)
        return 4.0 / root**3 * math.atan(u) - 2.0 * c / (1.0 - c * c)
    if kind == "sech4":
        if not c > 0.0:
            raise DomainError(f"sech4 needs c > 0, got c={c}")
        t = math.tanh(c)
        return 2.0 * (t - t**3 / 3.0)
    raise ValueError(f"unknown integral kind {kind!r}; expected one of {INTEGRAL_KINDS}")


def integrand(kind: str, c: float):
    """The integrand of ``reference_integral`` and its interval, for quadrature."""
    if kind == "cosine_linear":
        return (lambda x: 1.0 / (1.0 + c * math.cos(x))), (-math.pi / 2, math.pi / 2)
    if kind == "cosine_quadratic":
        return (lambda x: 1.0 / (1.0 + c * math.cos(x)) ** 2), (-math.pi / 2, math.pi / 2)
    if kind == "sech4":
        return (lambda x: 1.0 / math.cosh(x) ** 4), (-c, c)
    raise ValueError(f"unknown integral kind {kind!r}")
