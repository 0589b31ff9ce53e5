"""The acceptance battery: one function per criterion, sharing lazily built kernel tables."""

from dataclasses import dataclass, field as dc_field
import json
import math
import time

import numpy as np

from . import parametrix as P
from . import semigroup as S
from . import simulator as M
from . import zvonkin as Z
from .frozen import CoefficientField, char_exponent, frozen_density
from .stable_kernel import StableSpec, constant_stability, kernel_bound_report, stable_density

SHORT_GRID = P.KernelGrid(half_width=2.2, spacing=0.011, dt=0.005, steps=20, out_every=2)
CAUCHY_DT = (2e-3, 1e-3, 5e-4, 2.5e-4, 1.25e-4)  # finest spacing below the mean candidate gap at eps=1e-2


@dataclass
class Check:
    cid: int
    name: str
    passed: bool
    value: object
    threshold: str
    runtime: float
    budget: float
    details: dict = dc_field(default_factory=dict)

    @property
    def within_budget(self):
        return self.runtime < self.budget

    @property
    def ok(self):
        return bool(self.passed and self.within_budget)

    def line(self):
        flag = "PASS" if self.ok else "FAIL"
        return (f"{flag} [{self.cid:2d}] {self.name}: value={_fmt(self.value)} ({self.threshold}); "
                f"{self.runtime:.1f}s / {self.budget:.0f}s")

    def to_dict(self):
        return {"id": self.cid, "name": self.name, "passed": self.ok, "value": plain(self.value),
                "threshold": self.threshold, "runtime": self.runtime, "budget": self.budget,
                "details": plain(self.details)}


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def plain(v):
    """JSON-ready copy (numpy scalars and arrays converted)."""
    if isinstance(v, dict):
        return {str(k): plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return plain(v.tolist())
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


class Battery:
    """Caches fields and tables across criteria; each check times its own work plus any build it triggers."""

    def __init__(self, n_paths=100_000, cauchy_paths=10_000, seed=0):
        self.n_paths = n_paths
        self.cauchy_paths = cauchy_paths
        self.seed = seed
        self._cache = {}

    def field(self, name):
        return self._get(("field", name), lambda: CoefficientField.from_scenario(name))

    def table(self, name, grid=P.KernelGrid(), drift=False):
        key = ("table", name, tuple(sorted(grid.to_dict().items())), drift)
        return self._get(key, lambda: P.heat_kernel(self.field(name), grid, drift=drift))

    def solution(self):
        return self._get(("zvonkin",), lambda: Z.solve_resolvent(self.field("holder_drift"),
                                                                  self.table("holder_drift")))

    def _get(self, key, make):
        if key not in self._cache:
            self._cache[key] = make()
        return self._cache[key]

    # ------------------------------------------------------------------
    def normalization(self):
        t0 = time.perf_counter()
        tab = self.table("holder")
        err = float(np.max(np.abs(tab.row_sums() - 1)))
        return Check(1, "kernel normalization (holder)", err <= 1e-2, err, "max |int p - 1| <= 1e-2",
                     time.perf_counter() - t0, 60, {"negativity": tab.meta["negativity"],
                                                    "q_contraction": tab.meta["contraction"]})

    def collapse(self):
        t0 = time.perf_counter()
        f = self.field("constant")
        tab = self.table("constant")
        x = tab.x_grid
        sup = 0.0
        for m, t in enumerate(tab.t_grid):
            for j in (0, x.size // 4, x.size // 2):
                sup = max(sup, float(np.max(np.abs(tab.values[m, :, j] - frozen_density(f, 0.0, t, x - x[j])))))
        spec = StableSpec(f.alpha, float(char_exponent(f, 0.0, np.array([1.0]))[0]))
        r = np.concatenate([[0.0], np.geomspace(1e-3, 30, 40)])
        rel = 0.0
        for t in (1e-2, 0.1, 0.5, 1.0):
            q, p = frozen_density(f, 0.0, t, r), stable_density(spec, t, r)
            rel = max(rel, float(np.max(np.abs(q / p - 1))))
        ok = sup <= 1e-6 and rel <= 1e-4
        return Check(2, "constant-coefficient collapse", ok, [sup, rel],
                     "sup|p - p_frozen| <= 1e-6, rel|p_frozen - p_stable| <= 1e-4", time.perf_counter() - t0, 10,
                     {"stable_scale": spec.scale})

    def bound_stability(self):
        t0 = time.perf_counter()
        f = self.field("holder")
        full = self.table("holder")
        q = P.q_iterate(P.q0_table(f, P.KernelGrid()), 6)
        p0 = P.frozen_p0_table(f, P.KernelGrid())
        lo, _ = f.symbol_bounds()
        spec = StableSpec(f.alpha, lo)
        out = {}
        # both sides of the two-sided stable bound, on disjoint log grids
        grids = [[g.ravel() for g in np.meshgrid(np.geomspace(1e-2, 1, 7)[k::2], np.geomspace(1e-3, 20, 30)[k::2])]
                 for k in (0, 1)]
        for side in ("k0_upper", "k0_lower"):
            reps = [kernel_bound_report(spec, side, tt, xx) for tt, xx in grids]
            out[side] = (reps[0].max_ratio, reps[1].max_ratio, constant_stability(*reps))
        for which, tab, kw in (("na", full, {}), ("es", full, {"gamma": f.beta / 2}), ("q1", q, {}), ("p0", p0, {})):
            a = P.verify_kernel_bounds(tab, which, 0, **kw)
            b = P.verify_kernel_bounds(tab, which, 1, **kw)
            out[which] = (a.max_ratio, b.max_ratio, constant_stability(a, b))
        spread = max(v[2] for v in out.values())
        return Check(3, "bound-constant stability", spread < 2.0, spread, "max spread across grids < 2",
                     time.perf_counter() - t0, 120, {k: list(v) for k, v in out.items()})

    def smoothing(self):
        t0 = time.perf_counter()
        tab = self.table("holder", SHORT_GRID)
        g = S.GriddedFunction.sample(lambda x: np.abs(np.sin(x)) ** 0.5, tab.x_grid)
        fits = [S.smoothing_exponent(tab, g, which="grad_sup", theta=0.5),
                S.smoothing_exponent(tab, g, which="bessel", theta=0.5, gamma=0.5)]
        ok = all(r.passed for r in fits)
        return Check(4, "smoothing slopes", ok, [r.slope for r in fits],
                     f"slope >= predicted - 0.15, predicted {[round(r.predicted, 4) for r in fits]}",
                     time.perf_counter() - t0, 30, {r.which: r.to_dict() for r in fits})

    def zvonkin_gate(self):
        t0 = time.perf_counter()
        f = self.field("holder_drift")
        tab = self.table("holder_drift")
        sol = self.solution()
        res = Z.fixed_point_residual(sol, f, tab)
        tc = Z.build_transform(sol, f)
        gate = sol.norms["sup_u"] + sol.norms["sup_grad_u"]
        lo, hi = tc.lipschitz_band
        ok = sol.accepted and gate <= 0.5 and res < 2 * sol.tol and lo >= 0.45 and hi <= 1.55
        return Check(5, "Zvonkin gate", ok, [gate, res, lo, hi],
                     "gate <= 1/2, residual < 2 tol, band within [0.45, 1.55]", time.perf_counter() - t0, 60,
                     {"lambda": sol.lam, "tol": sol.tol, "history": sol.history})

    def jz(self):
        t0 = time.perf_counter()
        rep = Z.jz_decay(self.solution(), gamma=1.3)
        return Check(6, "jump-difference decay", rep.passed, rep.exponent, f">= gamma - 1 - 0.15 = {rep.predicted - 0.15:.3g}",
                     time.perf_counter() - t0, 20, rep.to_dict())

    def thinning(self):
        t0 = time.perf_counter()
        rows = M.thinning_check(self.field("holder"), 0.3, 100_000, eps=1e-3, seed=self.seed)
        worst = max(abs(r["z_score"]) for r in rows)
        return Check(7, "thinning correctness", worst <= 3.0, worst, "max |freq - mean sigma/k1| / SE <= 3",
                     time.perf_counter() - t0, 10, {"bins": rows})

    def weak_error(self):
        t0 = time.perf_counter()
        f = self.field("holder_drift")
        tab = self.table("holder_drift", drift=True)
        driver = M.DriverStream.for_field(f, self.seed, 1e-2, 1.0)
        _, X = M.simulate_paths(f, driver, 0.0, 0.01, self.n_paths)
        ks = M.ks_distance(X[:, -1], M.kernel_cdf(tab, 0.0, 1.0))
        return Check(8, "weak error vs parametrix", ks < 0.03, ks, "KS < 0.03", time.perf_counter() - t0, 180,
                     {"eps": 1e-2, "dt": 0.01, "n_paths": self.n_paths})

    def generator(self):
        t0 = time.perf_counter()
        err = M.generator_check(self.field("constant"), 0.0, np.cos, 1e-2, self.n_paths, 1e-3, self.seed)
        return Check(9, "generator check (cos, constant)", err < 0.1, err, "relative error < 0.1",
                     time.perf_counter() - t0, 60)

    def cauchy(self):
        t0 = time.perf_counter()
        f = self.field("irregular")
        driver = M.DriverStream.for_field(f, self.seed, 1e-2, 1.0)
        rows = M.strong_cauchy(f, driver, 0.0, CAUCHY_DT, self.cauchy_paths)
        ok = M.cauchy_monotone(rows)
        return Check(10, "strong Cauchy (irregular b)", ok, [r["mean"] for r in rows],
                     "monotone decreasing within 2 SE", time.perf_counter() - t0, 300, {"rows": rows})

    def determinism(self):
        t0 = time.perf_counter()
        blobs = [json.dumps(comparable(simulate_summary("holder_drift", 2000, seed=7)), sort_keys=True)
                 for _ in range(2)]
        recs = [M.simulate_path(self.field("holder_drift"), M.DriverStream.for_field(
            self.field("holder_drift"), 7, 1e-2, 1.0), 0.0, 0.01, path=3) for _ in range(2)]
        same_path = all(np.array_equal(getattr(recs[0], k), getattr(recs[1], k))
                        for k in ("times", "states", "jump_log"))
        ok = blobs[0] == blobs[1] and same_path
        return Check(11, "determinism", ok, ok, "bit-identical summaries and path records",
                     time.perf_counter() - t0, 60)

    CRITERIA = ("normalization", "collapse", "bound_stability", "smoothing", "zvonkin_gate", "jz",
                "thinning", "weak_error", "generator", "cauchy", "determinism")

    def run(self, names=None, echo=None):
        out = []
        for name in names or self.CRITERIA:
            chk = getattr(self, name)()
            if echo:
                echo(chk.line())
            out.append(chk)
        return out


def simulate_summary(source, n_paths, seed=0, eps=1e-2, dt=0.01, x0=0.0, horizon=1.0, kernel=None):
    """{mean, var, ks_vs_kernel, runtime} of X_T; ks_vs_kernel is None without a kernel table."""
    t0 = time.perf_counter()
    f = CoefficientField.from_scenario(source)
    driver = M.DriverStream.for_field(f, seed, eps, horizon)
    _, X = M.simulate_paths(f, driver, x0, dt, n_paths)
    ks = M.ks_distance(X[:, -1], M.kernel_cdf(kernel, x0, horizon)) if kernel is not None else None
    out = M.summary(X[:, -1])
    out["ks_vs_kernel"] = ks
    out["runtime"] = time.perf_counter() - t0
    return out


def comparable(summary):
    """Summary without its wall-clock field."""
    return {k: v for k, v in summary.items() if k != "runtime"}
