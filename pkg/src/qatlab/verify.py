"""Self-checks run by ``qatlab verify``.

Each check compares a measured value to an expected one under an absolute
tolerance and reports both, so a failing run shows how far off it was.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import fourier
from .fourier import (
    PERIOD,
    TrigPolynomial,
    curve_slope,
    fourier_coefficients,
    l2_error,
    parameterized_curve,
    parseval_gap,
    simpson,
    zigzag,
)
from .stats import (
    INTEGRAL_KINDS,
    expectation_closed,
    expectation_limit,
    integrand,
    monte_carlo_stats,
    reference_integral,
    variance_closed,
    variance_limit,
)
from .surrogates import DSQ, RDFS, g_rdfs
from .tensor import Rng

CSV_HEADER = "status,check,measured,expected,delta,tolerance"
ALPHA_GRID = (0.05, 0.1, 0.2, 0.5, 0.9)
AMPLITUDE_GRID = (0.05, 0.1, 0.15, 0.21, 0.224)
NEAR_BOUNDARY_AMPLITUDE = (1.0 - 1e-8) / fourier.SQRT2_PI


@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    expected: float
    tolerance: float
    passed: bool | None = None

    @property
    def delta(self) -> float:
        return abs(self.measured - self.expected)

    @property
    def ok(self) -> bool:
        if self.passed is not None:
            return self.passed
        return bool(self.delta <= self.tolerance)

    def csv_row(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return f"{status},{self.name},{self.measured!r},{self.expected!r},{self.delta:.3e},{self.tolerance:.1e}"


def _sine_coefficient_checks() -> list[Check]:
    coeffs = fourier_coefficients(zigzag, 3)
    return [
        Check(f"zigzag_b{k}", coeffs.b[k - 1], fourier.zigzag_sine_coefficient(k), tol)
        for k, tol in ((1, 1e-6), (2, 1e-8), (3, 1e-6))
    ]


def random_competitors(reference: TrigPolynomial, count: int, seed: int, spread: float = 0.05):
    """Degree-n trig polynomials scattered around ``reference``'s coefficients."""
    gen = Rng(seed).generator()
    n = reference.degree
    a0 = reference.a0 + spread * gen.standard_normal(count)
    a = np.asarray(reference.a) + spread * gen.standard_normal((count, n))
    b = np.asarray(reference.b) + spread * gen.standard_normal((count, n))
    return [TrigPolynomial(a0[i], tuple(a[i]), tuple(b[i]), reference.period) for i in range(count)]


def partial_sum_optimality(n: int, count: int, seed: int, panels: int = fourier.DEFAULT_PANELS) -> tuple[int, float]:
    """(number of competitors beating the partial sum, worst Parseval mismatch)."""
    ref = fourier_coefficients(zigzag, n, panels=panels)
    base = l2_error(zigzag, ref, panels=panels) ** 2
    rivals = random_competitors(ref, count, seed + n)
    # evaluate all competitors at once: [count, n + 1] coefficients times a shared basis
    u = np.linspace(0.0, PERIOD, panels + 1)
    w = 2.0 * math.pi / PERIOD
    k = np.arange(1, n + 1)[:, None]
    cos_b, sin_b = np.cos(w * k * u), np.sin(w * k * u)
    a0 = np.array([g.a0 for g in rivals])[:, None]
    a = np.array([g.a for g in rivals])
    b = np.array([g.b for g in rivals])
    diff = zigzag(u) - (a0 + a @ cos_b + b @ sin_b)
    errs = simpson(diff * diff, PERIOD)
    gaps = np.array([parseval_gap(ref, g) for g in rivals])
    return int(np.sum(errs <= base)), float(np.max(np.abs((errs - base) - gaps)))


def _constant_monotonicity() -> Check:
    const = lambda u: np.full(np.shape(u), 0.3)
    e0 = l2_error(const, fourier_coefficients(const, 0))
    e1 = l2_error(const, fourier_coefficients(const, 1))
    return Check("constant_error_flat", e1, e0, 1e-10)


def _slope_checks(points: int, seed: int) -> list[Check]:
    gen = Rng(seed).generator()
    checks = []
    h = 1e-6
    for M in (0, 1, 2):
        for A in (0.1, 0.21):
            t = gen.uniform(-3.0, 3.0, size=points)
            x_p, q_p = parameterized_curve(t + h, M, A)
            x_m, q_m = parameterized_curve(t - h, M, A)
            fd = (q_p - q_m) / (x_p - x_m)
            slope = curve_slope(t, M, A)
            rel = np.max(np.abs(slope - fd) / np.maximum(np.abs(slope), 1e-12))
            checks.append(Check(f"slope_fd_M{M}_A{A}", float(rel), 0.0, 1e-4))
            x, xq = parameterized_curve(t, M, A)
            direct = g_rdfs(x, xq, A, M)
            checks.append(Check(f"slope_mapped_M{M}_A{A}", float(np.max(np.abs(direct - slope))), 0.0, 1e-12))
    return checks


def fourier_checks(competitors: int = 1000, seed: int = 0, slope_points: int = 1000) -> list[Check]:
    checks = _sine_coefficient_checks()
    for n in (1, 2, 3):
        beaten, worst = partial_sum_optimality(n, competitors, seed)
        checks.append(Check(f"partial_sum_unbeaten_n{n}", float(beaten), 0.0, 0.0))
        checks.append(Check(f"parseval_gap_n{n}", worst, 0.0, 1e-8))
    e0 = l2_error(zigzag, fourier_coefficients(zigzag, 0))
    e1 = l2_error(zigzag, fourier_coefficients(zigzag, 1))
    checks.append(Check("zigzag_error_decreases", e1, e0, 0.0, passed=e1 < e0))
    checks.append(_constant_monotonicity())
    checks.extend(_slope_checks(slope_points, seed))
    return checks


def integral_parameters(kind: str) -> np.ndarray:
    if kind == "sech4":
        return np.linspace(0.05, 10.0, 20)
    return np.linspace(-0.9, 0.95, 20)


def stats_checks(samples: int = 10**6, seed: int = 0) -> list[Check]:
    checks: list[Check] = []
    rdfs_lim = RDFS(NEAR_BOUNDARY_AMPLITUDE)
    checks.append(Check("rdfs_expectation_limit", expectation_closed(rdfs_lim), expectation_limit("rdfs"), 1e-3))
    checks.append(Check("rdfs_variance_limit", variance_closed(rdfs_lim), variance_limit("rdfs"), 1e-2))
    for alpha in ALPHA_GRID:
        spec = DSQ(alpha)
        checks.append(Check(f"dsq_expectation_a{alpha}", expectation_closed(spec), 1.0, 0.0))
    for i, spec in enumerate([DSQ(a) for a in ALPHA_GRID] + [RDFS(a) for a in AMPLITUDE_GRID]):
        r = monte_carlo_stats(spec, -1.0, 1.0, samples, seed=seed + i)
        tag = f"{spec.label}_{spec.param}"
        checks.append(Check(f"mc_mean_{tag}", r.expectation_mc, r.expectation_closed, 4.0 * r.mc_stderr_mean))
        checks.append(Check(f"mc_var_{tag}", r.variance_mc, r.variance_closed,
                            0.05 * max(r.variance_closed, 0.01)))
    dsq_vars = [variance_closed(DSQ(a)) for a in (1e-1, 1e-2, 1e-3, 1e-6)]
    checks.append(Check("dsq_variance_increasing", float(np.min(np.diff(dsq_vars))), 0.0, 0.0,
                        passed=bool(np.all(np.diff(dsq_vars) > 0))))
    for kind in INTEGRAL_KINDS:
        worst = 0.0
        for c in integral_parameters(kind):
            f, (a, b) = integrand(kind, float(c))
            quad = integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-12)[0]
            worst = max(worst, abs(reference_integral(kind, float(c)) - quad) / abs(quad))
        checks.append(Check(f"integral_{kind}", worst, 0.0, 1e-8))
    return checks


def run(theorem: str, samples: int = 10**6, seed: int = 0) -> list[Check]:
    if theorem == "fourier":
        return fourier_checks(seed=seed)
    if theorem == "stats":
        return stats_checks(samples, seed)
    raise ValueError(f"unknown theorem suite {theorem!r}; expected fourier or stats")
