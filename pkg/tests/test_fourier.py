import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qatlab import fourier
from qatlab.errors import SingularDenominatorError
from qatlab.fourier import (
    PERIOD,
    TrigPolynomial,
    curve_slope,
    fourier_coefficients,
    fourier_partial_sum,
    inverse_rotate,
    l2_error,
    parameterized_curve,
    parseval_gap,
    rotate_to_curve,
    simpson,
    zigzag,
)
from qatlab.surrogates import g_rdfs_first_order
from qatlab.tensor import Rng
from qatlab.verify import partial_sum_optimality

H = 1 / (2 * math.sqrt(2))


def test_zigzag_examples():
    assert zigzag(0.0) == 0.0
    assert zigzag(math.sqrt(2) / 4) == pytest.approx(-H, abs=1e-15)
    assert zigzag(-math.sqrt(2) / 4) == pytest.approx(H, abs=1e-15)
    t = Rng(0).generator().uniform(-10, 10, 1000)
    np.testing.assert_allclose(zigzag(t + PERIOD), zigzag(t), atol=1e-13)
    np.testing.assert_allclose(zigzag(-t), -zigzag(t), atol=1e-13)


def test_rotation_examples():
    p = rotate_to_curve(0.0, 0.0)
    assert (p.t, p.f) == (0.0, 0.0)
    p = rotate_to_curve(0.3, 0.0)
    assert p.t == pytest.approx(0.2121320343559643, abs=1e-15)
    assert p.f == pytest.approx(-0.2121320343559643, abs=1e-15)
    assert zigzag(p.t) == pytest.approx(p.f, abs=1e-15)
    p = rotate_to_curve(1.0, 1.0)
    assert p.t == pytest.approx(math.sqrt(2)) and p.f == 0.0
    x, xq = inverse_rotate(math.sqrt(2), 0.0)
    assert x == pytest.approx(1.0) and xq == pytest.approx(1.0)
    assert inverse_rotate(0.0, 0.0) == (0.0, 0.0)


@given(st.floats(-100, 100), st.floats(-100, 100))
@settings(max_examples=300, deadline=None)
def test_rotation_round_trip(x, xq):
    p = rotate_to_curve(x, xq)
    bx, bq = inverse_rotate(p.t, p.f)
    assert bx == pytest.approx(x, abs=1e-12) and bq == pytest.approx(xq, abs=1e-12)


def test_on_curve_identity():
    x = Rng(5).generator().uniform(-20, 20, 1000)
    x = x[np.abs(x - np.floor(x) - 0.5) > 1e-6]
    p = rotate_to_curve(x, np.rint(x))
    np.testing.assert_allclose(zigzag(p.t), p.f, atol=1e-12)


def test_partial_sum_examples():
    for M in range(4):
        assert fourier_partial_sum(0.0, M, 0.2) == 0.0
    A = fourier.VANILLA_AMPLITUDE
    assert A == pytest.approx(0.286581, abs=2e-6)
    assert fourier_partial_sum(math.sqrt(2) / 4, 0, A) == pytest.approx(-A, rel=1e-14)
    t = Rng(1).generator().uniform(-5, 5, 200)
    for M in range(4):
        np.testing.assert_allclose(fourier_partial_sum(-t, M, 0.21), -fourier_partial_sum(t, M, 0.21), atol=1e-15)


def test_vanilla_partial_sums_converge_to_zigzag():
    t = np.linspace(-1, 1, 401)
    err = np.abs(fourier_partial_sum(t, 200, fourier.VANILLA_AMPLITUDE) - zigzag(t)).max()
    assert err < 1e-3


def test_zigzag_coefficients():
    c = fourier_coefficients(zigzag, 3)
    assert c.b[0] == pytest.approx(-2 * math.sqrt(2) / math.pi**2, abs=1e-8)
    assert abs(c.b[1]) < 1e-8
    assert c.b[2] == pytest.approx(2 * math.sqrt(2) / (9 * math.pi**2), abs=1e-8)
    assert abs(c.a0) < 1e-8 and max(map(abs, c.a)) < 1e-8
    for k in range(1, 8):
        assert fourier.zigzag_sine_coefficient(k) == pytest.approx(
            fourier_coefficients(zigzag, k).b[k - 1], abs=1e-8)


def test_coefficients_of_simple_functions():
    c = fourier_coefficients(lambda u: np.full(np.shape(u), 5.0), 3)
    assert c.a0 == pytest.approx(5.0, abs=1e-12)
    assert max(map(abs, c.a + c.b)) < 1e-10
    s = fourier_coefficients(lambda u: np.sin(2 * math.pi * u / PERIOD), 3)
    assert s.b[0] == pytest.approx(1.0, abs=1e-10)
    assert max(abs(v) for v in (s.a0,) + s.a + s.b[1:]) < 1e-10


def test_general_period():
    T = 3.0
    c = fourier_coefficients(lambda u: 2 - np.cos(4 * math.pi * u / T), 3, period=T)
    assert c.period == T
    assert c.a0 == pytest.approx(2.0, abs=1e-12)
    assert c.a[1] == pytest.approx(-1.0, abs=1e-10)


def test_simpson_is_partition_independent():
    v = np.sin(np.linspace(0, 3, 2**10 + 1)) ** 2
    whole = simpson(v, 3.0)
    batched = simpson(np.stack([v, v]), 3.0)
    assert batched[0] == whole and batched[1] == whole
    with pytest.raises(ValueError):
        simpson(np.ones(4), 1.0)


def test_l2_error_examples():
    norm = l2_error(zigzag, TrigPolynomial(0.0))
    assert norm == pytest.approx(math.sqrt(PERIOD * H * H / 3), rel=1e-10)
    assert norm == pytest.approx(0.2427458858536617, rel=1e-12)
    e1 = l2_error(zigzag, fourier_coefficients(zigzag, 1))
    assert e1 == pytest.approx(0.0292, abs=5e-4) and e1 < norm
    p = TrigPolynomial(0.3, (0.1, -0.2), (0.05, 0.4))
    assert l2_error(p, fourier_coefficients(p, 2)) <= 1e-9


def test_l2_error_oracle_mpmath():
    # independent high-precision oracle: ||f - f1||^2 = ||f||^2 - (T/2) b1^2 with exact b1
    mpmath.mp.dps = 30
    T = mpmath.sqrt(2)
    h = 1 / (2 * mpmath.sqrt(2))
    b1 = -2 * mpmath.sqrt(2) / mpmath.pi**2
    exact = mpmath.sqrt(T * h**2 / 3 - T / 2 * b1**2)
    assert l2_error(zigzag, fourier_coefficients(zigzag, 1)) == pytest.approx(float(exact), rel=1e-10)


def test_best_approximation_and_parseval():
    for n in (1, 2, 3):
        beaten, worst = partial_sum_optimality(n, 200, seed=11)
        assert beaten == 0
        assert worst < 1e-8


def test_parseval_gap_zero_at_reference():
    ref = fourier_coefficients(zigzag, 2)
    assert parseval_gap(ref, ref) == 0.0


def test_strict_improvement_and_constant_equality():
    e0 = l2_error(zigzag, fourier_coefficients(zigzag, 0))
    e1 = l2_error(zigzag, fourier_coefficients(zigzag, 1))
    assert e1 < e0
    const = lambda u: np.full(np.shape(u), -1.7)
    c0 = l2_error(const, fourier_coefficients(const, 0))
    c1 = l2_error(const, fourier_coefficients(const, 1))
    assert abs(c1 - c0) <= 1e-10


def test_trig_polynomial_validation():
    with pytest.raises(ValueError):
        TrigPolynomial(0.0, (1.0,), ())
    with pytest.raises(ValueError):
        TrigPolynomial(0.0, period=0.0)
    p = TrigPolynomial(1.0, (1.0,), (2.0,)) + TrigPolynomial(0.5, (0.0, 3.0), (0.0, 0.0))
    assert p.degree == 2 and p.a == (1.0, 3.0) and p.a0 == 1.5
    assert p.truncated(1).degree == 1


def test_curve_slope_examples():
    t = np.linspace(-2, 2, 50)
    np.testing.assert_array_equal(curve_slope(t, 2, 0.0), np.ones_like(t))
    assert curve_slope(0.0, 0, 0.21) == pytest.approx(0.03465824896148423, rel=1e-13)
    assert curve_slope(0.0, 0, 0.21) == pytest.approx(g_rdfs_first_order(0.0, 0.0, 0.21), rel=1e-13)
    # (pi - 4)/(pi + 4); negative slope outside the well-conditioned range
    assert curve_slope(0.0, 0, fourier.VANILLA_AMPLITUDE) == pytest.approx(-0.12019830702311476, rel=1e-14)


def test_curve_slope_singular():
    # c = 1 exactly: f'(0) = -1 makes the numerator vanish and the slope 0, but at
    # the half-period f' = +1 and the denominator is zero
    A = 1 / fourier.SQRT2_PI
    t_half = 1 / math.sqrt(2)
    with pytest.raises(SingularDenominatorError):
        curve_slope(t_half, 0, A)


@pytest.mark.parametrize("M", [0, 1, 2])
@pytest.mark.parametrize("A", [0.1, 0.21])
def test_curve_slope_matches_finite_differences(M, A):
    t = Rng(100 + M).generator().uniform(-3, 3, 1000)
    h = 1e-6
    xp, qp = parameterized_curve(t + h, M, A)
    xm, qm = parameterized_curve(t - h, M, A)
    fd = (qp - qm) / (xp - xm)
    np.testing.assert_allclose(fd, curve_slope(t, M, A), rtol=1e-4)


def test_high_precision_slope_oracle():
    mpmath.mp.dps = 40
    c = mpmath.sqrt(2) * mpmath.pi * mpmath.mpf("0.21")
    assert curve_slope(0.0, 0, 0.21) == pytest.approx(float((1 - c) / (1 + c)), rel=1e-14)
    c_v = 4 / mpmath.pi
    assert curve_slope(0.0, 0, fourier.VANILLA_AMPLITUDE) == pytest.approx(float((1 - c_v) / (1 + c_v)), rel=1e-14)
