import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stablelike import semigroup as S
from stablelike.errors import DomainError
from stablelike.frozen import char_exponent
from stablelike.suite import SHORT_GRID


@pytest.fixture(scope="module")
def short_holder(shared):
    return shared.table("holder", SHORT_GRID)


def test_constant_function_preserved(holder_table):
    one = S.GriddedFunction.sample(lambda x: np.ones_like(x), holder_table.x_grid)
    for t in holder_table.t_grid[::3]:
        np.testing.assert_allclose(S.apply_semigroup(holder_table, one, t).values, 1.0, atol=1e-2)


def test_cosine_eigenfunction_constant_coefficients(constant, constant_table):
    x = constant_table.x_grid
    f = S.GriddedFunction.sample(np.cos, x)
    psi = float(char_exponent(constant, 0.0, np.array([1.0]))[0])
    mid = np.abs(x) < 3
    # beyond the window f is clamped to its end values: error <= 2 * t * nu(|z| > 7)
    far = 2 * constant.kappa1 / (constant.alpha * 7.0 ** constant.alpha)
    for t in (constant_table.t_grid[0], constant_table.t_grid[-1]):
        got = S.apply_semigroup(constant_table, f, t).values[mid]
        assert np.max(np.abs(got - np.exp(-psi * t) * np.cos(x[mid]))) <= 2 * t * far + 1e-4


def test_odd_symmetry(holder_table):
    # holder sigma is even in x, so T_t maps odd functions to odd functions
    x = holder_table.x_grid
    f = S.GriddedFunction.sample(lambda s: np.tanh(s), x)
    g = S.apply_semigroup(holder_table, f, holder_table.t_grid[-1]).values
    np.testing.assert_allclose(g, -g[::-1], atol=1e-6)


def test_p_norm_contraction_and_positivity(holder_table, rng):
    x = holder_table.x_grid
    f = S.GriddedFunction(x, np.exp(-x ** 2) * (1 + rng.random(x.size)))
    for t in holder_table.t_grid[::4]:
        g = S.apply_semigroup(holder_table, f, t)
        assert g.sup_norm <= f.sup_norm * (1 + 1e-2)
        assert np.min(g.values) >= -1e-3 * f.sup_norm


def test_semigroup_property(short_holder):
    prop = S.Propagator(short_holder)
    x = short_holder.x_grid
    f = np.exp(-4 * x ** 2)
    inner = np.abs(x) < 1
    a = prop.matrix(2) @ (prop.matrix(3) @ f)
    b = prop.matrix(5) @ f
    assert np.max(np.abs(a - b)[inner]) < 3e-2 * np.max(np.abs(b))
    series = prop.series(f, 12)
    np.testing.assert_allclose(series[12], prop.matrix(10) @ (prop.matrix(2) @ f))


def test_propagator_needs_uniform_mesh(holder):
    from stablelike.parametrix import KernelTable

    tab = KernelTable(np.array([0.1, 0.25]), np.zeros(3), np.zeros(3), np.zeros((2, 3, 3)), "full", 1.5)
    with pytest.raises(DomainError):
        S.Propagator(tab)


def test_grid_mismatch(holder_table):
    with pytest.raises(DomainError):
        S.apply_semigroup(holder_table, S.GriddedFunction(np.linspace(0, 1, 5), np.zeros(5)), 0.1)


def test_exact_zero_for_constant_data(short_holder):
    f = S.GriddedFunction.sample(lambda x: np.full_like(x, 2.0), short_holder.x_grid)
    fit = S.smoothing_exponent(short_holder, f)
    assert fit.exact_zero and fit.passed


def test_gradient_slope_short_time(short_holder):
    f = S.GriddedFunction.sample(lambda x: np.abs(np.sin(x)) ** 0.5, short_holder.x_grid)
    fit = S.smoothing_exponent(short_holder, f, which="33", theta=0.5)
    assert fit.predicted == pytest.approx(-1 / 3)
    assert fit.passed and fit.lower <= fit.slope <= fit.upper


def test_bessel_slope_small_gamma_tends_to_zero(short_holder):
    f = S.GriddedFunction.sample(lambda x: np.abs(np.sin(x)) ** 0.5, short_holder.x_grid)
    slopes = [S.smoothing_exponent(short_holder, f, which="tt", gamma=g).slope for g in (0.4, 0.1)]
    assert abs(slopes[1]) < abs(slopes[0]) + 0.05


def test_slope_needs_four_samples(short_holder):
    f = S.GriddedFunction.sample(np.sin, short_holder.x_grid)
    with pytest.raises(DomainError):
        S.smoothing_exponent(short_holder, f, t_samples=[0.01, 0.02, 0.03])
    with pytest.raises(DomainError):
        S.smoothing_exponent(short_holder, f, which="bogus")


def test_grad_holder_endpoint_flag(short_holder):
    f = S.GriddedFunction.sample(np.sin, short_holder.x_grid)
    fit = S.smoothing_exponent(short_holder, f, which="34", theta=0.5, theta_prime=0.95)
    assert fit.details.get("endpoint")


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=40))
def test_maximal_function_dominates(vals):
    x = np.arange(len(vals), dtype=float)
    f = S.GriddedFunction(x, np.array(vals))
    M = S.maximal_function(f).values
    assert np.all(M >= np.abs(f.values) - 1e-12)
    assert np.max(M) == pytest.approx(np.max(np.abs(f.values)))


def test_maximal_function_of_constant():
    f = S.GriddedFunction(np.linspace(0, 1, 11), np.full(11, -3.0))
    np.testing.assert_allclose(S.maximal_function(f).values, 3.0)


def test_w11_constant_stable_under_refinement():
    cs = []
    for n in (401, 801):
        f = S.GriddedFunction.sample(lambda x: np.abs(np.sin(x)) ** 0.5, np.linspace(-3, 3, n))
        cs.append(S.w11_constant(f))
    assert max(cs) / min(cs) < 2 and max(cs) < 5


def test_w11_linear_function_constant_half():
    f = S.GriddedFunction.sample(lambda x: 2 * x, np.linspace(0, 1, 51))
    assert S.w11_constant(f) == pytest.approx(0.5)


def test_gridded_function_checks():
    with pytest.raises(DomainError):
        S.GriddedFunction(np.zeros(3), np.zeros(4))
    f = S.GriddedFunction(np.linspace(0, 1, 3), np.array([0.0, 1.0, 0.0]))
    assert f.holder_seminorm(1.0) == pytest.approx(2.0)
    assert f.p_norm(np.inf) == 1.0
    assert f(0.25) == pytest.approx(0.5)
