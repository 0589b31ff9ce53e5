import numpy as np
import pytest

from stablelike import parametrix as P
from stablelike.errors import DomainError
from stablelike.frozen import char_exponent, frozen_density
from stablelike.semigroup import Propagator
from stablelike.stable_kernel import StableSpec, constant_stability
from stablelike.suite import SHORT_GRID

from conftest import field_from


@pytest.fixture(scope="module")
def short_holder(shared):
    return shared.table("holder", SHORT_GRID)


def test_q0_vanishes_for_x_independent_sigma(constant):
    q = P.q0_table(constant, SHORT_GRID)
    assert np.max(np.abs(q.values)) == 0.0


def test_q0_diagonal_zero(holder):
    q = P.q0_table(holder, SHORT_GRID)
    d = np.einsum("mii->mi", q.values)
    assert np.max(np.abs(d)) < 1e-9 * np.max(np.abs(q.values))


def test_q_iterate_one_term_is_q0(holder):
    q0 = P.q0_table(holder, SHORT_GRID)
    q1 = P.q_iterate(q0, 1)
    np.testing.assert_array_equal(q1.values, q0.values)
    with pytest.raises(DomainError):
        P.q_iterate(q0, 0)
    with pytest.raises(DomainError):
        P.q_iterate(P.frozen_p0_table(holder, SHORT_GRID), 2)


def test_picard_contracts(holder_table):
    ratios = holder_table.meta["contraction"]
    assert ratios and max(ratios) <= 0.5
    assert holder_table.meta["residual"] < 1e-3


def test_collapse_to_frozen(constant, constant_table):
    x = constant_table.x_grid
    j = x.size // 2
    for m, t in enumerate(constant_table.t_grid):
        np.testing.assert_allclose(constant_table.values[m, :, j], frozen_density(constant, 0.0, t, x - x[j]),
                                   atol=1e-6)


def test_row_sums_and_positivity(holder_table):
    assert np.max(np.abs(holder_table.row_sums() - 1)) <= 1e-2
    assert holder_table.meta["negativity"] <= 1e-3 * np.max(holder_table.values)


def test_q1_constant_stable(holder):
    q = P.q_iterate(P.q0_table(holder, P.KernelGrid()), 6)
    a, b = (P.verify_kernel_bounds(q, "q1", k) for k in (0, 1))
    assert constant_stability(a, b) < 2


@pytest.mark.parametrize("which,kw", [("na", {}), ("es", {"gamma": 0.2}), ("ph", {"theta": 0.5}), ("p0", {})])
def test_bound_constants_stable(holder_table, which, kw):
    a, b = (P.verify_kernel_bounds(holder_table, which, k, **kw) for k in (0, 1))
    assert np.isfinite(a.max_ratio) and constant_stability(a, b) < 2


def test_na_constant_close_to_stable_reference(holder, holder_table):
    lo, hi = holder.symbol_bounds()
    ref = [P.stable_na_constant(holder_table, StableSpec(holder.alpha, s)) for s in (lo, hi)]
    got = P.verify_kernel_bounds(holder_table, "na", 0).max_ratio
    assert 0.7 * min(ref) <= got <= 1.3 * max(ref)


def test_holder_quotient_zero_on_diagonal():
    q = P.holder_quotient(np.array([1.0]), np.array([2.0]), np.array([0.3]), np.array([0.3]), 0.0, 0.5, 0.5, 1.5)
    assert q[0] == 0.0
    # ties go to the first point
    assert P.nearer_point(np.array([-1.0]), np.array([1.0]), 0.0)[0] == -1.0


def test_bound_domain_errors(holder_table, holder):
    with pytest.raises(DomainError):
        P.verify_kernel_bounds(holder_table, "es")
    with pytest.raises(DomainError):
        P.verify_kernel_bounds(holder_table, "ph", theta=0.95)
    with pytest.raises(DomainError):
        P.verify_kernel_bounds(holder_table, "zz")
    with pytest.raises(DomainError):
        P.verify_kernel_bounds(P.q0_table(holder, SHORT_GRID), "na")


def test_chapman_kolmogorov(short_holder):
    prop = Propagator(short_holder)
    x = short_holder.x_grid
    inner = np.abs(x) <= 1.0
    two = prop.matrix(2)
    for k in (2, 4):
        comp = prop.matrix(k) @ prop.matrix(k)
        tab = prop.matrix(2 * k)
        num = np.max(np.abs(comp - tab)[np.ix_(inner, inner)])
        assert num / np.max(np.abs(tab[np.ix_(inner, inner)])) < 3e-2
    assert two.shape == (x.size, x.size)


def test_generator_of_table_matches_frozen_operator(holder, short_holder):
    # (T_t f - f) / t extrapolated to t = 0 against the frozen generator at x
    from stablelike.frozen import apply_frozen

    tab = short_holder
    x = tab.x_grid
    f = np.exp(-4 * x ** 2)
    w = tab.weights()
    for i in (x.size // 2 + 20, x.size // 2 + 60):
        T = [tab.values[m, i] * w @ f + tab.tail_left[m, i] * f[0] + tab.tail_right[m, i] * f[-1] for m in (0, 1)]
        g = [(T[m] - f[i]) / tab.t_grid[m] for m in (0, 1)]
        Lf = float(apply_frozen(holder, x[i], (x, f), x[i]))
        assert abs(2 * g[0] - g[1] - Lf) <= 0.05 * abs(Lf)


def test_save_load_round_trip(tmp_path, short_holder):
    p = short_holder.save(tmp_path / "k.slkt")
    back = P.KernelTable.load(p)
    np.testing.assert_array_equal(back.values, short_holder.values)
    np.testing.assert_array_equal(back.tail_left, short_holder.tail_left)
    assert back.stage == "full" and back.alpha == short_holder.alpha
    (tmp_path / "bad.slkt").write_bytes(b"garbage")
    with pytest.raises(DomainError):
        P.KernelTable.load(tmp_path / "bad.slkt")


def test_grid_validation(holder):
    with pytest.raises(DomainError, match="too coarse"):
        P.KernelGrid(spacing=1.0).validate(1.5)
    with pytest.raises(DomainError, match="half width"):
        P.KernelGrid(half_width=2.0, spacing=0.02).validate(1.5)
    with pytest.raises(DomainError):
        P.KernelGrid(steps=2, out_every=3).validate(1.5)
    with pytest.raises(DomainError):
        P.heat_kernel(holder, P.KernelGrid(spacing=1.0))


def test_time_index(holder_table):
    assert holder_table.time_index(holder_table.t_grid[3]) == 3
    with pytest.raises(DomainError):
        holder_table.time_index(0.123456)


def test_frozen_column_matches_p0(holder):
    p0 = P.frozen_p0_table(holder, SHORT_GRID)
    x = p0.x_grid
    j = x.size // 3
    np.testing.assert_allclose(p0.values[-1, :, j], P.frozen_column(holder, x[j], p0.t_grid[-1], x),
                               atol=1e-6 * np.max(p0.values[-1, :, j]))
