import numpy as np
import pytest

from stablelike import zvonkin as Z
from stablelike.errors import DomainError, InvariantViolation
from stablelike.frozen import char_exponent
from stablelike.semigroup import GriddedFunction, Propagator

from conftest import field_from


@pytest.fixture(scope="module")
def drift_table(shared):
    return shared.table("holder_drift")


@pytest.fixture(scope="module")
def prop(drift_table):
    return Propagator(drift_table)


@pytest.fixture(scope="module")
def transform(drift_solution, shared):
    return Z.build_transform(drift_solution, shared.field("holder_drift"))


def test_zero_data_gives_zero(holder, holder_table):
    f = GriddedFunction(holder_table.x_grid, np.zeros(holder_table.x_grid.size))
    sol = Z.solve_semilinear(holder, holder_table, 1.0, 0.0, f)
    assert sol.norms["sup_u"] == 0.0


def test_resolvent_of_eigenfunction(constant, constant_table):
    # R cos = cos / (lam + psi(1)) up to the clamp beyond the window
    x = constant_table.x_grid
    psi = float(char_exponent(constant, 0.0, np.array([1.0]))[0])
    f = GriddedFunction.sample(np.cos, x)
    lam = 4.0
    sol = Z.solve_semilinear(constant, constant_table, lam, 0.0, f)
    mid = np.abs(x) < 3
    np.testing.assert_allclose(sol.u.values[mid], np.cos(x[mid]) / (lam + psi), atol=2e-3)


def test_solution_shrinks_with_lambda(holder, holder_table):
    x = holder_table.x_grid
    f = GriddedFunction.sample(lambda s: np.exp(-s * s), x)
    sups = [Z.solve_semilinear(holder, holder_table, lam, 0.0, f).norms["sup_u"] for lam in (1.0, 4.0, 16.0)]
    assert sups[0] > sups[1] > sups[2]
    assert sups[2] <= 1 / 16 + 1e-6


def test_semilinear_domain(holder, holder_table):
    f = GriddedFunction(holder_table.x_grid, np.zeros(holder_table.x_grid.size))
    with pytest.raises(DomainError):
        Z.solve_semilinear(holder, holder_table, 0.0, 0.0, f)
    with pytest.raises(DomainError):
        Z.solve_semilinear(field_from("holder_drift"), holder_table, 1.0, 0.1, f)
    with pytest.raises(DomainError):
        Z.solve_semilinear(holder, holder_table, 1.0, 0.0, GriddedFunction(np.arange(4.0), np.zeros(4)))


def test_zero_drift_accepted_at_first_lambda(holder, holder_table):
    sol = Z.solve_resolvent(holder, holder_table, lam=1.0)
    assert sol.accepted and sol.lam == 1.0 and sol.norms["sup_u"] == 0.0


def test_gate_and_residual(drift_solution, shared, drift_table):
    f = shared.field("holder_drift")
    assert drift_solution.accepted
    assert drift_solution.norms["sup_u"] + drift_solution.norms["sup_grad_u"] <= Z.GATE
    assert Z.fixed_point_residual(drift_solution, f, drift_table) < 2 * drift_solution.tol
    assert drift_solution.history[-1]["status"] == "solved"


def test_half_drift_needs_no_larger_lambda(drift_solution, prop):
    f = field_from("holder_drift", b={"kind": "smoothed_indicator",
                                      "params": {"amp": 0.5, "left": -0.5, "right": 0.5, "width": 0.2}})
    sol = Z.solve_resolvent(f, prop)
    assert sol.lam <= drift_solution.lam


def test_lambda_cap(prop):
    from stablelike.errors import NumericalFailure

    with pytest.raises(NumericalFailure):
        Z.solve_resolvent(field_from("holder_drift"), prop, lam=1.0, cap=1.0)


def test_gate_invariant_on_construction(drift_solution):
    with pytest.raises(InvariantViolation):
        Z.ZvonkinSolution(1.0, drift_solution.u, drift_solution.grad_u, 1, 0.0,
                          {"sup_u": 0.4, "sup_grad_u": 0.3}, 1e-8, accepted=True)


def test_phi_inverse(transform, rng):
    y = rng.uniform(-5, 5, 200)
    np.testing.assert_allclose(transform.phi(transform.phi_inv(y)), y, atol=1e-11)
    lo, hi = transform.lipschitz_band
    assert 0.5 <= lo <= 1 <= hi <= 1.5


def test_transformed_jump_bounded(transform, drift_solution, rng):
    y = rng.uniform(-4, 4, 100)
    z = rng.uniform(-2, 2, 100)
    g = transform.g_tilde(y, z)
    lo, hi = transform.lipschitz_band
    assert np.all(np.abs(g) <= hi * np.abs(z) + 1e-9)
    np.testing.assert_allclose(transform.sigma_tilde(transform.phi(y), z),
                               field_from("holder_drift").sigma(y, z), rtol=1e-9)


def test_transformed_drift_finite(transform):
    bt = transform.b_tilde(np.linspace(-3, 3, 13))
    assert np.all(np.isfinite(bt))
    assert isinstance(transform.b_tilde(0.1), float)


@pytest.mark.parametrize("which", ["g", "b"])
def test_coefficient_estimates_stable(transform, drift_solution, shared, which):
    rep = Z.verify_coefficient_estimates(transform, drift_solution, shared.field("holder_drift"), which,
                                         n_samples=120)
    assert np.isfinite(rep.max_ratio) and rep.details["stability"] < 2


def test_jz_decay(drift_solution):
    rep = Z.jz_decay(drift_solution, gamma=1.3)
    assert rep.passed and np.isfinite(rep.constant)
    with pytest.raises(DomainError):
        Z.jz_decay(drift_solution, gamma=0.9)


def test_jump_difference_zero_shift(drift_solution):
    assert np.max(np.abs(Z.jump_difference(drift_solution, 0.0).values)) < 1e-14


def test_lambda_too_small_carries_ratio(prop):
    x = prop.table.y_grid
    R = Z.Resolvent(prop, 1.0)
    # an expanding map trips the growth detector
    with pytest.raises(Z.LambdaTooSmall) as exc:
        Z._picard(x, R, lambda u: 2000 * u + 1.0, 1e-12, 50)
    assert exc.value.ratio >= 1 and exc.value.lam == 1.0


def test_build_transform_requires_acceptance(drift_solution, shared):
    import dataclasses

    rejected = dataclasses.replace(drift_solution, accepted=False)
    with pytest.raises(DomainError):
        Z.build_transform(rejected, shared.field("holder_drift"))
