"""Levi parametrix construction of the heat kernel on a uniform spatial window.

All kernels are assembled in Fourier space.  With the freeze point at the
column y_j, every building block has the form

    K[i, j] = (1/pi) Re int_0^inf m_j(xi) exp(i xi (x_i - y_j)) dxi

for a time multiplier m_j of the frozen exponent lam_j = psi_{y_j} - i b(y_j) xi,
so a whole matrix is one complex matmul.  Space convolutions use cubic
B-spline quasi-interpolation in the inner variable, which in Fourier space is
the factor h sinc(xi h / 2)^4.  The Volterra equation is discretized with
piecewise-constant cell averages in time and exactly time-integrated kernels
(product integration), so the integrable singularity of q at s = 0 and of the
kernel at t - s = 0 never has to be sampled.
"""

from dataclasses import dataclass, field as dc_field
import json
import math
import struct

import numpy as np

from ._quad import panel_rule
from .errors import DivergenceError, DomainError, NumericalFailure
from .frozen import FractionalOperator, apply_frozen, frozen_cdf, frozen_density, symbol_matrix
from .stable_kernel import BoundReport, kernel_bound_report, rho

STAGES = ("frozen_p0", "q0", "full")
_MAGIC = b"SLKT\x01\x00\x00\x00"
_HEADER = struct.Struct("<IIId32s")
_PANEL_N = 24
_PANEL_RAD = 8 * math.pi  # oscillation per panel at the largest |x - y|
_SMOOTH_CUT = 6 * math.pi  # xi h beyond which the spline factor is dropped (< 1e-3 rel.)
_DECAY = 27.6  # exp(-27.6) ~ 1e-12
_NEG_TOL = 1e-8


@dataclass(frozen=True)
class KernelGrid:
    """Uniform window [-half_width, half_width] and a uniform Volterra time mesh.

    Output times are every `out_every`-th node of the mesh k * dt, k = 1..steps.
    """

    half_width: float = 10.0
    spacing: float = 0.05
    dt: float = 0.05
    steps: int = 20
    out_every: int = 2

    @property
    def n(self):
        return int(round(2 * self.half_width / self.spacing)) + 1

    @property
    def x(self):
        return np.linspace(-self.half_width, self.half_width, self.n)

    @property
    def h(self):
        return 2 * self.half_width / (self.n - 1)

    @property
    def out_steps(self):
        return np.arange(self.out_every, self.steps + 1, self.out_every)

    @property
    def t_out(self):
        return self.dt * self.out_steps

    def validate(self, alpha):
        if self.steps < 1 or self.out_every < 1 or self.out_every > self.steps:
            raise DomainError("time mesh needs 1 <= out_every <= steps")
        t_min, t_max = float(self.t_out[0]), float(self.t_out[-1])
        need = t_min ** (1 / alpha) / 4
        if self.h > need * (1 + 1e-9):
            raise DomainError(f"grid spacing {self.h:.4g} too coarse for t_min={t_min:g}; "
                              f"required spacing <= {need:.4g}")
        if self.half_width < 10 * t_max ** (1 / alpha) * (1 - 1e-9):
            raise DomainError(f"window half width must be >= {10 * t_max ** (1 / alpha):.4g}")

    def to_dict(self):
        return {"half_width": self.half_width, "spacing": self.spacing, "dt": self.dt,
                "steps": self.steps, "out_every": self.out_every}


@dataclass(eq=False)
class KernelTable:
    """values[m, i, j] = K(t_grid[m], x_grid[i], y_grid[j]).

    tail_left/tail_right hold, per (t, x), the mass of the frozen kernel beyond
    the window ends; stage `full` row sums include them.
    """

    t_grid: np.ndarray
    x_grid: np.ndarray
    y_grid: np.ndarray
    values: np.ndarray
    stage: str
    alpha: float
    tail_exponent: float = float("nan")
    tail_left: np.ndarray | None = None
    tail_right: np.ndarray | None = None
    meta: dict = dc_field(default_factory=dict)
    _context: object = dc_field(default=None, repr=False)

    def __post_init__(self):
        base = self.stage.split("(")[0]
        if base not in STAGES + ("q_iterate",):
            raise DomainError(f"unknown stage {self.stage!r}")
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        if self.values.shape != (self.t_grid.size, self.x_grid.size, self.y_grid.size):
            raise DomainError("values shape does not match the grids")
        if np.any(np.diff(self.t_grid) <= 0) or self.t_grid[0] <= 0:
            raise DomainError("t_grid must be positive and increasing")
        self.values.setflags(write=False)

    @property
    def h(self):
        return float(self.y_grid[1] - self.y_grid[0])

    def time_index(self, t):
        k = np.flatnonzero(np.isclose(self.t_grid, t, rtol=0, atol=1e-9))
        if k.size == 0:
            raise DomainError(f"t={t} not on the table's t_grid {self.t_grid.tolist()}")
        return int(k[0])

    def weights(self):
        w = np.full(self.y_grid.size, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    def row_sums(self):
        """int p(t, x, y) dy over the window plus the tail masses, shape (nt, nx)."""
        s = self.values @ self.weights()
        if self.tail_left is not None:
            s = s + self.tail_left + self.tail_right
        return s

    def nonnegativity_violation(self):
        return float(max(0.0, -np.min(self.values)))

    # --- persistence: header + row-major float64 blocks, JSON sidecar
    def save(self, path):
        path = str(path)
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(_HEADER.pack(self.t_grid.size, self.x_grid.size, self.y_grid.size,
                                  float(self.alpha), self.stage.encode()[:32]))
            has_tails = self.tail_left is not None
            fh.write(struct.pack("<I", int(has_tails)))
            for arr in (self.t_grid, self.x_grid, self.y_grid, self.values):
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
            if has_tails:
                fh.write(np.ascontiguousarray(self.tail_left, dtype="<f8").tobytes())
                fh.write(np.ascontiguousarray(self.tail_right, dtype="<f8").tobytes())
        with open(path + ".json", "w") as fh:
            json.dump({"stage": self.stage, "alpha": self.alpha, "tail_exponent": self.tail_exponent,
                       "shape": list(self.values.shape), "meta": self.meta}, fh, indent=2, sort_keys=True)
        return path

    @classmethod
    def load(cls, path):
        path = str(path)
        with open(path, "rb") as fh:
            if fh.read(len(_MAGIC)) != _MAGIC:
                raise DomainError(f"{path}: not a kernel table")
            nt, nx, ny, alpha, stage = _HEADER.unpack(fh.read(_HEADER.size))
            (has_tails,) = struct.unpack("<I", fh.read(4))
            read = lambda n: np.frombuffer(fh.read(8 * n), dtype="<f8").astype(float)
            t, x, y = read(nt), read(nx), read(ny)
            values = read(nt * nx * ny).reshape(nt, nx, ny)
            tl = tr = None
            if has_tails:
                tl, tr = read(nt * nx).reshape(nt, nx), read(nt * nx).reshape(nt, nx)
        try:
            with open(path + ".json") as fh:
                side = json.load(fh)
        except FileNotFoundError:
            side = {}
        return cls(t, x, y, values, stage.rstrip(b"\x00").decode(), alpha,
                   side.get("tail_exponent", float("nan")), tl, tr, side.get("meta", {}))


# ----------------------------------------------------------------------------
# time multipliers of the frozen exponent


def _phi1(z):
    """(1 - exp(-z)) / z."""
    out = np.empty_like(z)
    small = np.abs(z) < 1e-6
    zs = z[~small]
    out[~small] = -np.expm1(-zs) / zs
    out[small] = 1 - 0.5 * z[small]
    return out


def _phi2(z):
    """(z - 1 + exp(-z)) / z^2."""
    out = np.empty_like(z)
    small = np.abs(z) < 1e-3
    zs = z[~small]
    out[~small] = (zs + np.expm1(-zs)) / (zs * zs)
    zz = z[small]
    out[small] = 0.5 - zz / 6 + zz * zz / 24 - zz ** 3 / 120
    return out


class _Engine:
    """Spectral assembly of p- and q-type matrices on one window."""

    def __init__(self, field, grid, drift):
        self.field, self.grid = field, grid
        self.x = grid.x
        self.h = grid.h
        self.lo = field.symbol_bounds()[0]
        self.drift = bool(drift) and not field.drift_free
        r_max = 2 * grid.half_width
        width = _PANEL_RAD / r_max
        self.xi_cap = _SMOOTH_CUT / self.h
        graded = [0.0]
        a = 1e-7
        while a < width:
            graded.append(a)
            a *= 5
        uniform = np.arange(graded[-1], self.xi_cap + width, width)
        self.edges = np.unique(np.concatenate([graded, uniform[1:]]))
        self.xi, self.w = panel_rule(self.edges, _PANEL_N)
        self.psi = symbol_matrix(field, self.x, self.xi)
        self.bx = np.asarray(field.b(self.x), dtype=float) if self.drift else np.zeros_like(self.x)
        self.lam = self.psi - 1j * self.bx[:, None] * self.xi[None, :]
        self.X = np.exp(1j * np.outer(self.x, self.xi))
        self.spline = self.h * np.sinc(self.xi * self.h / (2 * np.pi)) ** 4
        self.q_zero = field.x_constant and not self.drift

    def n_nodes(self, tau_min, smooth):
        xi_max = self.xi_cap if tau_min <= 0 else (_DECAY / (tau_min * self.lo)) ** (1 / self.field.alpha)
        if smooth:
            xi_max = min(xi_max, self.xi_cap)
        elif xi_max > self.xi_cap:
            raise NumericalFailure("pointwise kernel needs frequencies beyond the window resolution")
        panels = int(np.searchsorted(self.edges[1:], xi_max)) + 1
        return min(panels * _PANEL_N, self.xi.size)

    def multiplier(self, kind, j, K):
        d = self.grid.dt
        lam = self.lam[:, :K]
        if kind == "point":
            return np.exp(-j * lam)
        z = d * lam
        if kind == "avg":  # (1/dt) int over [j dt, (j+1) dt]
            return np.exp(-j * z) * _phi1(z)
        if kind == "cell":  # int over [(j-1) dt, j dt]
            return d * np.exp(-(j - 1) * z) * _phi1(z)
        if kind == "hat":  # int against the unit hat of mass dt centred at j dt
            if j == 0:
                return d * _phi2(z)
            return d * np.exp(-(j - 1) * z) * _phi1(z) ** 2
        raise ValueError(kind)

    def tau_min(self, kind, j):
        d = self.grid.dt
        return {"point": j, "avg": j * d, "cell": (j - 1) * d, "hat": max(j - 1, 0) * d}[kind]

    def assemble(self, kind, j, q_type, smooth):
        K = self.n_nodes(self.tau_min(kind, j), smooth)
        if q_type and self.q_zero:
            return np.zeros((self.x.size, self.x.size))
        M = self.multiplier(kind, j, K)
        wk = self.w[:K] * (self.spline[:K] if smooth else 1.0)
        X = self.X[:, :K]
        Y = (wk[None, :] * M) * np.conj(X)  # rows: freeze/column point
        if not q_type:
            return (X @ Y.T).real / np.pi
        psi = self.psi[:, :K]
        out = X @ (psi * Y).T - (X * psi) @ Y.T
        if self.drift:
            ixi = 1j * self.xi[:K]
            out += (X * self.bx[:, None]) @ (ixi * Y).T - X @ (ixi * self.bx[:, None] * Y).T
        return out.real / np.pi


def _edge_tails(field, grid, times, drift):
    """Mass of the edge-frozen kernel beyond each window end, per (t, x)."""
    x, L = grid.x, grid.half_width
    b = np.asarray(field.b(np.array([-L, L])), dtype=float) if drift else np.zeros(2)
    left = np.empty((len(times), x.size))
    right = np.empty_like(left)
    for m, t in enumerate(times):
        left[m] = 1.0 - frozen_cdf(field, -L, t, x + L + t * b[0])
        right[m] = frozen_cdf(field, L, t, x - L + t * b[1])
    return left, right


def _edge_ratio(p, p0):
    ok = p0 > 1e-300
    return np.where(ok, np.clip(p, 0, None) / np.where(ok, p0, 1.0), 1.0)


def _fit_tail_exponent(t, x, row):
    r = np.abs(x)
    sel = (r >= 3) & (r <= 8) & (row > 0)
    if np.count_nonzero(sel) < 4:
        return float("nan")
    slope = np.polyfit(np.log(r[sel]), np.log(row[sel]), 1)[0]
    return float(-slope)


def _check_field(field, grid):
    if field is None:
        raise DomainError("no coefficient field")
    grid.validate(field.alpha)


def _pointwise(engine, q_type):
    g = engine.grid
    return np.stack([engine.assemble("point", t, q_type, smooth=False) for t in g.t_out])


def frozen_p0_table(field, grid=KernelGrid(), drift=False):
    """p_0(t, x, y) = frozen kernel with freeze point y."""
    _check_field(field, grid)
    eng = _Engine(field, grid, drift)
    t = grid.t_out
    vals = _pointwise(eng, False)
    tl, tr = _edge_tails(field, grid, t, eng.drift)
    table = KernelTable(t, grid.x, grid.x, vals, "frozen_p0", field.alpha,
                        _fit_tail_exponent(t[-1], grid.x, vals[-1, grid.n // 2]), tl, tr,
                        {"grid": grid.to_dict(), "drift": eng.drift, "beta": field.beta})
    table._context = eng
    return table


def q0_table(field, grid=KernelGrid(), drift=False):
    """q_0 = (L^x - L^y) p_0 at the output times (zero for x-independent sigma, no drift)."""
    _check_field(field, grid)
    eng = _Engine(field, grid, drift)
    t = grid.t_out
    vals = _pointwise(eng, True)
    table = KernelTable(t, grid.x, grid.x, vals, "q0", field.alpha, meta={"grid": grid.to_dict(),
                        "drift": eng.drift, "beta": field.beta})
    table._context = eng
    return table


class _Volterra:
    """Cell averages Q_k ~ (1/dt) int_{I_k} q(s) ds, y-smoothed (factor h included)."""

    def __init__(self, engine):
        self.eng = engine
        n = engine.grid.steps
        self.source = [engine.assemble("avg", m, True, smooth=True) for m in range(n)]
        self._hat = {}

    def hat(self, j):
        if j not in self._hat:
            self._hat[j] = self.eng.assemble("hat", j, True, smooth=True)
        return self._hat[j]

    def iterate(self, n_terms):
        """Picard iterates Q^(1) = source, Q^(n+1) = source + G * Q^(n)."""
        n = self.eng.grid.steps
        h = self.eng.h
        cur = [s.copy() for s in self.source]
        history = [cur]
        increments = []
        for it in range(1, n_terms):
            nxt = []
            for m in range(n):
                acc = self.source[m].copy()
                for k in range(m + 1):
                    acc += self.hat(m - k) @ cur[k]
                nxt.append(acc)
            inc = max(float(np.max(np.abs(a - b))) for a, b in zip(nxt, cur)) / h
            increments.append(inc)
            if len(increments) >= 2 and increments[-1] > increments[-2]:
                raise DivergenceError(
                    f"Picard increments grow ({increments[-2]:.3g} -> {increments[-1]:.3g}); "
                    "refine the time mesh or reduce the horizon", residual=inc,
                    report={"increments": increments})
            cur = nxt
            history.append(cur)
        return history, increments


def _convolve(engine, cells, kernels, steps):
    """(1/h) sum_{k < m} kernels[m - k] @ cells[k] at each output step m."""
    out = []
    for m in steps:
        acc = np.zeros((engine.x.size, engine.x.size))
        for k in range(m):
            acc += kernels[m - k] @ cells[k]
        out.append(acc / engine.h)
    return np.stack(out)


def _ratio_list(increments):
    return [b / a for a, b in zip(increments, increments[1:]) if a > 0]


def q_iterate(q0_tab, n_terms=6):
    """n-th Picard iterate of q = q_0 + int int q_0(t-s, x, z) q(s, z, y) dz ds at the output times."""
    if n_terms < 1:
        raise DomainError("n_terms must be >= 1")
    if q0_tab.stage != "q0":
        raise DomainError("q_iterate needs a q0 table")
    eng = q0_tab._context
    if eng is None:
        raise DomainError("q0 table carries no build context; rebuild it with q0_table")
    if n_terms == 1 or eng.q_zero:
        vals = np.array(q0_tab.values)
        increments = []
    else:
        vol = _Volterra(eng)
        history, increments = vol.iterate(n_terms)
        g = eng.grid
        cellint = {j: eng.assemble("cell", j, True, smooth=True) for j in range(1, g.steps + 1)}
        vals = q0_tab.values + _convolve(eng, history[-2], cellint, g.out_steps)
    meta = dict(q0_tab.meta, n_terms=n_terms, residual=increments[-1] if increments else 0.0,
                increments=increments, contraction=_ratio_list(increments))
    return KernelTable(q0_tab.t_grid, q0_tab.x_grid, q0_tab.y_grid, vals, f"q_iterate({n_terms})",
                       q0_tab.alpha, meta=meta)


def heat_kernel(field, grid=KernelGrid(), n_terms=6, drift=False):
    """p = p_0 + int_0^t int p_0(t-s, x, z) q(s, z, y) dz ds on the grid's output times.

    meta["residual"] is the sup-norm of the last Picard increment of p;
    meta["q_increments"] the increments of q.
    """
    if n_terms < 1:
        raise DomainError("n_terms must be >= 1")
    _check_field(field, grid)
    eng = _Engine(field, grid, drift)
    t = grid.t_out
    p0 = _pointwise(eng, False)
    increments, residual = [], 0.0
    if eng.q_zero:
        vals = p0
    else:
        history, increments = _Volterra(eng).iterate(n_terms + 1)
        kern = {j: eng.assemble("cell", j, False, smooth=True) for j in range(1, grid.steps + 1)}
        # p^(n) uses q^(n): history[n-1]; the extra iterate only feeds the q residual
        corr = _convolve(eng, history[n_terms - 1], kern, grid.out_steps)
        if n_terms > 1:
            diff = [a - b for a, b in zip(history[n_terms - 1], history[n_terms - 2])]
            residual = float(np.max(np.abs(_convolve(eng, diff, kern, grid.out_steps))))
        vals = p0 + corr
    tl, tr = _edge_tails(field, grid, t, eng.drift)
    # far field: the frozen tail shape, rescaled to the computed kernel at the window end
    tl = tl * _edge_ratio(vals[:, :, 0], p0[:, :, 0])
    tr = tr * _edge_ratio(vals[:, :, -1], p0[:, :, -1])
    meta = {"grid": grid.to_dict(), "drift": eng.drift, "beta": field.beta, "n_terms": n_terms,
            "residual": residual,
            "q_increments": increments, "contraction": _ratio_list(increments),
            "terms_rule": "residual-gated Picard iteration"}
    table = KernelTable(t, grid.x, grid.x, vals, "full", field.alpha,
                        _fit_tail_exponent(t[-1], grid.x, vals[-1, grid.n // 2]), tl, tr, meta)
    viol = table.nonnegativity_violation()
    table.meta["negativity"] = viol
    table._context = eng
    return table


# ----------------------------------------------------------------------------
# bound verification on tables

_FREEZE = (-1.0, -0.5, 0.0, 0.5, 1.0)


def sample_sets(table, parity, n_offsets=24, r_max=6.0):
    """(m, i, j) index triples; parity 0/1 gives two disjoint log-spaced sample grids."""
    x = table.x_grid
    h = table.h
    offs = np.unique(np.round(np.geomspace(h, r_max, n_offsets) / h).astype(int))
    offs = offs[parity::2]
    ms = np.arange(table.t_grid.size)[parity::2] if table.t_grid.size > 1 else np.array([0])
    cols = [int(np.argmin(np.abs(table.y_grid - y))) for y in _FREEZE]
    out = []
    for m in ms:
        for j in cols:
            for s in (-1, 1):
                i = j + s * offs
                i = i[(i >= 1) & (i < x.size - 1)]
                out.extend((int(m), int(ii), j) for ii in i)
    return np.array(out, dtype=int)


def _grad(table, m, i, j):
    v = table.values
    return (v[m, i + 1, j] - v[m, i - 1, j]) / (2 * table.h)


def _frac_on_table(table, order, samples):
    op = FractionalOperator(order)
    out = np.empty(len(samples))
    key = samples[:, 0] * table.y_grid.size + samples[:, 2]
    for k in np.unique(key):
        sel = np.flatnonzero(key == k)
        m, j = samples[sel[0], 0], samples[sel[0], 2]
        xs = table.x_grid[samples[sel, 1]]
        out[sel] = apply_frozen(op, 0.0, (table.x_grid, table.values[m, :, j]), xs)
    return out


def verify_kernel_bounds(table, which, parity=0, gamma=None, theta=0.5, beta=None):
    """Max LHS/RHS ratio of a kernel bound over one of the two disjoint sample grids.

    which: "na" (gradient), "es" (fractional derivative of order alpha+gamma),
    "ph" (Hoelder quotient of the gradient, exponent theta), "q1" (q tables),
    "p0" (two-sided frozen kernel bound, frozen_p0 tables).
    """
    a = table.alpha
    S = sample_sets(table, parity)
    m, i, j = S[:, 0], S[:, 1], S[:, 2]
    t = table.t_grid[m]
    r = table.x_grid[i] - table.y_grid[j]
    base = table.stage.split("(")[0]
    if which in ("na", "es", "ph") and table.stage != "full":
        raise DomainError(f"({which}) needs a full kernel table")
    if which == "na":
        lhs, rhs, form = _grad(table, m, i, j), rho(a - 1, 0, t, r, a), "rho^0_(alpha-1)"
    elif which == "es":
        if gamma is None:
            raise DomainError("bound es needs gamma")
        lhs = _frac_on_table(table, a + gamma, S)
        rhs, form = rho(-gamma, 0, t, r, a), "rho^0_(-gamma)"
    elif which == "ph":
        return _holder_report(table, S, theta, parity)
    elif which == "q1":
        if base not in ("q0", "q_iterate"):
            raise DomainError("bound q1 needs a q table")
        bt = table.meta.get("beta", beta)
        if bt is None:
            raise DomainError("bound q1 needs beta")
        lhs = table.values[m, i, j]
        rhs, form = rho(0, bt, t, r, a) + rho(bt, 0, t, r, a), "rho^beta_0 + rho^0_beta"
    elif which == "p0":
        if base not in ("frozen_p0", "full"):
            raise DomainError("bound p0 needs a kernel table")
        lhs = table.values[m, i, j]
        rhs, form = rho(a, 0, t, r, a), "rho^0_alpha"
        ratio = lhs / rhs
        k = int(np.argmax(ratio))
        return BoundReport("p0", float(ratio[k]), (float(t[k]), float(r[k])), ratio.size, form,
                           details={"min_ratio": float(np.min(ratio)), "parity": parity})
    else:
        raise DomainError(f"unknown bound id {which!r}")
    ratio = np.abs(lhs) / rhs
    k = int(np.argmax(ratio))
    return BoundReport(which, float(ratio[k]), (float(t[k]), float(r[k])), ratio.size, form,
                       details={"parity": parity})


def nearer_point(x, x2, y):
    """The one of x, x2 nearer to y; ties go to x."""
    return np.where(np.abs(x2 - y) < np.abs(x - y), x2, x)


def holder_quotient(g1, g2, x, x2, y, t, theta, alpha):
    """|g1 - g2| / (|x - x2|^theta rho^0_{alpha-1-theta}(t, nearer - y)); 0 for x = x2."""
    x, x2 = np.asarray(x, dtype=float), np.asarray(x2, dtype=float)
    d = np.abs(x - x2)
    near = nearer_point(x, x2, y)
    den = np.where(d > 0, d, 1.0) ** theta * rho(alpha - 1 - theta, 0, t, near - y, alpha)
    return np.where(d > 0, np.abs(g1 - g2) / den, 0.0)


def _holder_report(table, S, theta, parity):
    a = table.alpha
    beta = table.meta.get("beta")
    if beta is not None and not 0 < theta < a + beta - 1:
        raise DomainError("bound ph needs theta in (0, alpha + beta - 1)")
    best = (-1.0, (0.0, 0.0))
    total = 0
    key = S[:, 0] * table.y_grid.size + S[:, 2]
    for k in np.unique(key):
        sel = S[key == k]
        m, j = sel[0, 0], sel[0, 2]
        ii = sel[:, 1]
        g = _grad(table, m, ii, j)
        I1, I2 = np.meshgrid(np.arange(ii.size), np.arange(ii.size), indexing="ij")
        up = I1 < I2
        x1, x2 = table.x_grid[ii[I1[up]]], table.x_grid[ii[I2[up]]]
        q = holder_quotient(g[I1[up]], g[I2[up]], x1, x2, table.y_grid[j], table.t_grid[m], theta, a)
        total += q.size
        qi = int(np.argmax(q))
        if q[qi] > best[0]:
            best = (float(q[qi]), (float(table.t_grid[m]), float(x1[qi] - table.y_grid[j])))
    return BoundReport("ph", best[0], best[1], total, "|x-x'|^theta rho^0_(alpha-1-theta)(t, x~-y)",
                       details={"theta": theta, "parity": parity})


def stable_na_constant(table, spec, parity=0):
    """Gradient-bound constant of the stable kernel `spec` on the table's sample grid."""
    S = sample_sets(table, parity)
    t = table.t_grid[S[:, 0]]
    r = table.x_grid[S[:, 1]] - table.y_grid[S[:, 2]]
    return kernel_bound_report(spec, "kk1", t, r).max_ratio


def frozen_column(field, y, t, x):
    """Reference frozen density column, independent of the spectral assembly."""
    return frozen_density(field, y, t, np.asarray(x) - y)
