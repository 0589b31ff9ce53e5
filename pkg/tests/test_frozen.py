import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stablelike.errors import DomainError
from stablelike.frozen import (CoefficientField, FractionalOperator, a1_quotient, apply_frozen, char_exponent,
                               decompose_check, frozen_cdf, frozen_density, generator_fourier_check)
from stablelike.stable_kernel import StableSpec, levy_symbol_constant_quad, stable_density

from conftest import field_from


def test_symbol_zero_even_constant_case(constant, rng):
    assert char_exponent(constant, 0.3, np.array([0.0]))[0] == 0
    xi = rng.uniform(0.01, 20, 10)
    np.testing.assert_allclose(char_exponent(constant, 0.0, xi), char_exponent(constant, 0.0, -xi))
    # kappa = c: psi = c A(alpha) |xi|^alpha with A by brute-force quadrature
    c = float(constant.kappa(0.0, np.array([1.0]))[0])
    np.testing.assert_allclose(char_exponent(constant, 0.0, xi), c * levy_symbol_constant_quad(1.5) * xi ** 1.5,
                               rtol=1e-8)


def test_symbol_table_matches_direct_quadrature(holder):
    xi = np.array([0.1, 1.0, 7.0, 40.0])
    for y in (-1.0, 0.0, 0.4):
        np.testing.assert_allclose(char_exponent(holder, y, xi), char_exponent(holder, y, xi, method="quad"),
                                   rtol=1e-6)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(1e-3, 50))
def test_symbol_nonnegative_even(y, xi):
    f = CoefficientField.from_scenario("holder")
    a = char_exponent(f, y, np.array([xi, -xi]))
    assert a[0] >= 0 and a[0] == pytest.approx(a[1])


def test_frozen_density_reduces_to_stable(constant):
    spec = StableSpec(1.5, float(char_exponent(constant, 0.0, np.array([1.0]))[0]))
    x = np.concatenate([[0.0], np.geomspace(1e-3, 200, 50)])
    for t in (1e-2, 0.3, 1.0):
        np.testing.assert_allclose(frozen_density(constant, 0.0, t, x), stable_density(spec, t, x), rtol=1e-4)


def test_frozen_density_normalized_and_even(holder):
    for y, t in ((0.0, 0.1), (0.7, 1.0)):
        x = np.linspace(-60, 60, 48001)
        p = frozen_density(holder, y, t, x)
        tails = 2 * (1 - frozen_cdf(holder, y, t, 60.0))
        assert abs(np.trapezoid(p, x) + tails - 1) < 1e-4
        np.testing.assert_allclose(p, p[::-1], rtol=1e-9, atol=1e-15)


def test_frozen_cdf_consistent_with_density(holder):
    x = np.linspace(-3, 3, 6001)
    p = frozen_density(holder, 0.2, 0.5, x)
    F = frozen_cdf(holder, 0.2, 0.5, np.array([-3.0, 3.0]))
    assert F[1] - F[0] == pytest.approx(np.trapezoid(p, x), abs=1e-6)


def test_frozen_domain(holder):
    with pytest.raises(DomainError):
        frozen_density(holder, 0.0, 0.0, 1.0)


def test_apply_frozen_fourier_eigenfunction(constant, holder):
    pts = np.linspace(-2, 2, 7)
    got = apply_frozen(constant, 0.0, np.cos, pts)
    psi1 = char_exponent(constant, 0.0, np.array([1.0]))[0]
    np.testing.assert_allclose(got, -psi1 * np.cos(pts), rtol=1e-4, atol=1e-6)
    for xi in (0.5, 2.0, 5.0):
        assert generator_fourier_check(holder, 0.3, xi, pts) < 1e-3


def test_apply_frozen_constant_and_linear(holder):
    x = np.array([-0.5, 0.0, 0.5])
    np.testing.assert_allclose(apply_frozen(holder, 0.0, lambda s: np.full_like(s, 3.0), x), 0.0, atol=1e-9)
    grid = np.linspace(-200, 200, 4001)
    # linear phi: odd second differences vanish away from the clamp
    v = apply_frozen(holder, 0.0, (grid, grid.copy()), x)
    assert np.max(np.abs(v)) < 1e-3


def test_apply_frozen_gridded_matches_callable(holder):
    grid = np.linspace(-20, 20, 2001)
    phi = lambda s: np.exp(-s * s)
    x = np.array([-0.4, 0.0, 1.1])
    np.testing.assert_allclose(apply_frozen(holder, 0.2, (grid, phi(grid)), x), apply_frozen(holder, 0.2, phi, x),
                               rtol=1e-3)


def test_fractional_operator_domain():
    with pytest.raises(DomainError):
        FractionalOperator(2.0)


def test_generator_semigroup_consistency(holder):
    grid = np.linspace(-30, 30, 6001)
    h = 1e-3
    for y, t, x in ((0.0, 0.2, 0.0), (0.5, 0.5, 0.3), (-0.3, 1.0, 1.0)):
        dp = (frozen_density(holder, y, t + h, x) - frozen_density(holder, y, t, x)) / h
        Lp = apply_frozen(holder, y, (grid, frozen_density(holder, y, t + h / 2, grid)), x)
        assert abs(dp - Lp) / abs(Lp) < 0.02


def test_p0_constant_stability_over_freeze_points(holder):
    t = np.geomspace(1e-2, 1, 8)
    r = np.geomspace(1e-2, 20, 30)
    for y in (-1.0, -0.5, 0.0, 0.5, 1.0):
        ratios = []
        for k in (0, 1):
            tt, rr = (g.ravel() for g in np.meshgrid(t[k::2], r[k::2]))
            p = np.array([frozen_density(holder, y, ti, ri) for ti, ri in zip(tt, rr)])
            rho = tt * (rr + tt ** (1 / 1.5)) ** -2.5
            ratios.append((np.max(p / rho), np.max(rho / p)))
        assert max(ratios[0][0], ratios[1][0]) / min(ratios[0][0], ratios[1][0]) < 2
        assert max(ratios[0][1], ratios[1][1]) / min(ratios[0][1], ratios[1][1]) < 2


def test_decompose_check_constant_half_symbol():
    f = field_from("constant")
    # sigma = k0 and kappa_tilde = kappa0 up to the declared rounding of kappa0
    assert decompose_check(f, 0.0, 0.5, 0.3) < 1e-4
    a, b = decompose_check(f, 0.0, 0.5, np.array([0.7, -0.7]))
    assert a == pytest.approx(b, rel=1e-6, abs=1e-12)


def test_decompose_check_variable_sigma(holder, rng):
    for _ in range(5):
        y, t, x = rng.uniform(-1, 1), rng.uniform(0.1, 1), rng.uniform(-2, 2)
        assert decompose_check(holder, y, t, x) < 1e-3


def test_decompose_rejects_negative_hat_kappa():
    f = field_from("constant", bounds={"k0": 1.0, "k1": 1.0, "kappa0": 0.2992, "kappa1": 0.2993})
    object.__setattr__(f, "kappa0", 0.9)
    with pytest.raises(DomainError):
        decompose_check(f, 0.0, 0.5, 0.0)


def test_field_invariants_rejected():
    with pytest.raises(DomainError):
        field_from("constant", bounds={"k0": 1.2, "k1": 2.0, "kappa0": 0.2992, "kappa1": 0.2993})


def test_a1_quotient_bounded(holder, rng):
    x = rng.uniform(-2, 2, 50)
    y = x + rng.uniform(-0.5, 0.5, 50)
    q = a1_quotient(holder, x, y)
    assert np.all(np.isfinite(q)) and np.max(q) < 10
