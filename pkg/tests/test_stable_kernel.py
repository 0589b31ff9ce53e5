import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from stablelike.errors import DomainError, NumericalFailure
from stablelike.stable_kernel import (BoundReport, StableSpec, constant_stability, frac_constant,
                                      frac_laplacian_fourier, frac_laplacian_stable, kernel_bound_report,
                                      levy_symbol_constant, levy_symbol_constant_quad, rho, stable_density,
                                      stable_density_adaptive, stable_density_deriv, tail_mass, verify_3p)

SPEC = StableSpec(1.5)

# exp(-xi^1.5) cosine inversion by scipy.integrate.quad on [0, 60], frozen
P15 = {0.0: 0.2873527514521644, 0.5: 0.2622968403540905, 1.0: 0.20203815960784044,
       2.0: 0.08453962312613747, 5.0: 0.007111736047654809}


def test_spec_validation():
    with pytest.raises(DomainError):
        StableSpec(1.0)
    with pytest.raises(DomainError):
        StableSpec(2.0)
    with pytest.raises(DomainError):
        StableSpec(1.5, scale=0.0)
    assert StableSpec(1.0, oracle=True).alpha == 1.0


def test_cauchy_oracle():
    cauchy = StableSpec(1.0, oracle=True)
    assert stable_density(cauchy, 1.0, 0.0) == pytest.approx(1 / math.pi, rel=1e-8)
    assert stable_density(cauchy, 1.0, 2.0) == pytest.approx(1 / (5 * math.pi), rel=1e-7)


@pytest.mark.parametrize("x", sorted(P15))
def test_density_matches_quadrature_oracle(x):
    assert stable_density(SPEC, 1.0, x) == pytest.approx(P15[x], abs=1e-11)


def test_adaptive_engine_agrees():
    for x, v in P15.items():
        assert stable_density_adaptive(SPEC, 1.0, x) == pytest.approx(v, abs=1e-9)


def test_t_domain():
    with pytest.raises(DomainError):
        stable_density(SPEC, 0.0, 1.0)
    with pytest.raises(DomainError):
        stable_density(SPEC, -1.0, 1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(1.05, 1.95), st.floats(1e-3, 5.0), st.floats(-50, 50))
def test_density_even_and_positive(alpha, t, x):
    spec = StableSpec(alpha)
    a, b = stable_density(spec, t, x), stable_density(spec, t, -x)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-300)
    assert a > 0


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 10.0), st.floats(-20, 20))
def test_scaling(t, x):
    lhs = stable_density(SPEC, t, x)
    rhs = t ** (-1 / 1.5) * stable_density(SPEC, 1.0, t ** (-1 / 1.5) * x)
    assert lhs == pytest.approx(rhs, rel=1e-6)


def test_normalization_with_tail():
    R = 1e3
    body = 2 * integrate.quad(lambda x: stable_density(SPEC, 1.0, x), 0, R, limit=500, points=[1, 10, 100])[0]
    c1 = special.gamma(2.5) * math.sin(0.75 * math.pi) / math.pi
    tail = 2 * c1 * R ** -1.5 / 1.5
    assert abs(body + tail - 1) < 1e-6


@pytest.mark.parametrize("alpha", [1.2, 1.5, 1.8])
def test_tail_mass_normalization(alpha):
    spec = StableSpec(alpha, 0.7)
    x = np.linspace(-30, 30, 60001)
    mass = np.trapezoid(stable_density(spec, 0.5, x), x) + tail_mass(spec, 0.5, 30.0)
    assert abs(mass - 1) < 1e-5


def test_chapman_kolmogorov():
    z = np.linspace(-400, 400, 400001)
    for s, t, x in ((0.3, 0.7, 0.0), (0.5, 0.5, 1.5), (1.0, 2.0, -3.0)):
        conv = np.trapezoid(stable_density(SPEC, s, x - z) * stable_density(SPEC, t, z), z)
        assert abs(conv - stable_density(SPEC, s + t, x)) < 1e-4


def test_derivative_odd_and_zero_at_origin():
    assert abs(stable_density_deriv(SPEC, 1, 1.0, 0.0)) < 1e-14
    x = np.array([0.3, 1.0, 4.0])
    np.testing.assert_allclose(stable_density_deriv(SPEC, 1, 0.7, x), -stable_density_deriv(SPEC, 1, 0.7, -x))


def test_derivative_finite_difference():
    h = 1e-4
    fd = (stable_density(SPEC, 1.0, 1 + h) - stable_density(SPEC, 1.0, 1 - h)) / (2 * h)
    assert stable_density_deriv(SPEC, 1, 1.0, 1.0) == pytest.approx(fd, rel=1e-5)
    fd2 = (stable_density(SPEC, 1.0, 1 + h) - 2 * stable_density(SPEC, 1.0, 1.0)
           + stable_density(SPEC, 1.0, 1 - h)) / h ** 2
    assert stable_density_deriv(SPEC, 2, 1.0, 1.0) == pytest.approx(fd2, rel=1e-4)


def test_derivative_order_domain():
    with pytest.raises(DomainError):
        stable_density_deriv(SPEC, 3, 1.0, 0.0)


def test_symbol_constant_closed_form_vs_quadrature():
    for a in (1.2, 1.5, 1.8):
        assert levy_symbol_constant(a) == pytest.approx(levy_symbol_constant_quad(a), rel=1e-9)
    # c_{1,alpha} A(alpha) = 1 by construction of the fractional Laplacian normalization
    assert frac_constant(1.5) * levy_symbol_constant(1.5) == pytest.approx(1.0, rel=1e-12)


def test_frac_laplacian_small_gamma_limit():
    v = frac_laplacian_stable(SPEC, 1e-3, 1.0, 0.0)
    p = stable_density(SPEC, 1.0, 0.0)
    assert abs(v + p) / p < 0.05


def test_frac_laplacian_alpha_generates_semigroup():
    # Delta^{alpha/2} p = d/dt p for the symbol exp(-t |xi|^alpha)
    h = 1e-5
    for x in (0.0, 1.0, 3.0):
        dt = (stable_density(SPEC, 1 + h, x) - stable_density(SPEC, 1 - h, x)) / (2 * h)
        assert frac_laplacian_fourier(SPEC, 1.5, 1.0, x) == pytest.approx(dt, rel=1e-5, abs=1e-9)


def test_frac_laplacian_cross_check_and_symmetry():
    x = np.array([-2.0, -0.5, 0.5, 2.0])
    v, disc = frac_laplacian_stable(SPEC, 0.8, 0.5, x, return_discrepancy=True)
    assert disc < 1e-3
    np.testing.assert_allclose(v[:2], v[2:][::-1], rtol=1e-10)
    with pytest.raises(DomainError):
        frac_laplacian_stable(SPEC, 2.0, 1.0, 0.0)
    with pytest.raises(NumericalFailure):
        frac_laplacian_stable(SPEC, 0.8, 0.5, 0.5, rtol=1e-16)


def _log_grids():
    t = np.geomspace(1e-2, 1, 8)
    x = np.geomspace(1e-3, 30, 40)
    return [tuple(g.ravel() for g in np.meshgrid(t[k::2], x[k::2])) for k in (0, 1)]


@pytest.mark.parametrize("which", ["k0_upper", "k0_lower", "kk1", "kk2"])
def test_kernel_bound_stability(which):
    a, b = (kernel_bound_report(SPEC, which, t, x) for t, x in _log_grids())
    assert math.isfinite(a.max_ratio) and a.max_ratio > 0
    assert constant_stability(a, b) < 2


def test_frac_bound_stability():
    (t0, x0), (t1, x1) = ((t[::5], x[::5]) for t, x in _log_grids())
    a = kernel_bound_report(SPEC, "e1", t0, x0, gamma=0.6)
    b = kernel_bound_report(SPEC, "e1", t1, x1, gamma=0.6)
    assert constant_stability(a, b) < 1.2


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 2), st.floats(0, 1.5), st.floats(1e-3, 5), st.floats(1e-3, 100))
def test_rho_positive_even(gamma, beta, t, x):
    v = rho(gamma, beta, t, x, 1.5)
    assert v > 0 and math.isfinite(v)
    assert v == rho(gamma, beta, t, -x, 1.5)


def test_3p1_bounded_on_grid():
    x = np.linspace(-5, 5, 20)
    rep = verify_3p((1.5, 1.5), (0.0, 0.0), 1.0, x, kind="3p1")
    assert math.isfinite(rep.max_ratio) and rep.details["min_ratio"] > 0
    mirror = verify_3p((1.5, 1.5), (0.0, 0.0), 1.0, -x, kind="3p1")
    assert mirror.max_ratio == pytest.approx(rep.max_ratio, rel=1e-9)


def test_3p_stable_constant_across_grids():
    xs = np.geomspace(1e-2, 5, 8)
    a = verify_3p((0.5, 0.5), (0.0, 0.0), 0.5, xs[::2], kind="3p")
    b = verify_3p((0.5, 0.5), (0.0, 0.0), 0.5, xs[1::2], kind="3p")
    assert constant_stability(a, b) < 2


def test_3p_preconditions():
    with pytest.raises(DomainError):
        verify_3p((-0.5, 0.5), (0.0, 0.0), 1.0, 0.0, kind="3p")
    with pytest.raises(DomainError):
        verify_3p((1.0, 1.0), (2.0, 0.0), 1.0, 0.0, kind="3p1")


def test_bound_report_serialization_and_invariants():
    rep = BoundReport("k0_upper", 1.5, (0.1, 2.0), 10, "rho")
    d = json.loads(rep.to_json())
    assert d == {"bound_id": "k0_upper", "max_ratio": 1.5, "argmax": [0.1, 2.0], "samples": 10, "rho_form": "rho"}
    with pytest.raises(NumericalFailure):
        BoundReport("x", -1.0, (0, 0), 1)
    with pytest.raises(DomainError):
        BoundReport("x", 1.0, (0, 0), 0)
