"""Command-line entry point: kernel builds, verification, Zvonkin solves, simulation and the acceptance suite.

Exit codes: 0 pass, 1 acceptance failure, 2 usage or schema error, 3 numerical failure.
Reports go to --report-dir, else $STABLELIKE_REPORT_DIR, else ./reports.
"""

import argparse
from dataclasses import dataclass, field as dc_field, asdict
import hashlib
import json
import logging
import os
from pathlib import Path
import sys
import time

import numpy as np

from . import parametrix as P
from . import semigroup as S
from . import simulator as M
from . import suite as SU
from . import zvonkin as Z
from .errors import DomainError, NumericalFailure
from .frozen import CoefficientField
from .scenarios import ScenarioError, load, scenario_hash

REPORT_ENV = "STABLELIKE_REPORT_DIR"
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("stablelike")


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    scenario: str
    command: str
    parameters: dict
    seed: int | None
    input_hashes: dict = dc_field(default_factory=dict)
    reports: list = dc_field(default_factory=list)

    def write(self, directory):
        path = Path(directory) / f"manifest_{self.command.replace(' ', '_')}.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path


def _file_hash(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Run:
    """One invocation: scenario, report directory and the manifest being filled."""

    def __init__(self, args, command):
        self.args = args
        self.scenario = load(args.scenario)
        self.hash = scenario_hash(self.scenario)
        self.field = CoefficientField.from_scenario(self.scenario)
        # created only once the inputs validate
        self.dir = Path(args.report_dir or os.environ.get(REPORT_ENV) or "reports")
        self.dir.mkdir(parents=True, exist_ok=True)
        params = {k: v for k, v in vars(args).items() if k not in ("func", "report_dir") and v is not None}
        inputs = {"scenario": self.hash}
        if Path(str(args.scenario)).is_file():
            inputs["scenario_file"] = _file_hash(args.scenario)
        self.manifest = RunManifest(str(args.scenario), command, params, getattr(args, "seed", None), inputs)

    def report(self, name, payload):
        body = {"scenario_hash": self.hash, "command": self.manifest.command,
                "parameters": self.manifest.parameters, **SU.plain(payload)}
        path = self.dir / name
        path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
        self.manifest.reports.append(str(path))
        return path

    def finish(self):
        return self.manifest.write(self.dir)


def _grid(args):
    if getattr(args, "grid", "default") == "short":
        return SU.SHORT_GRID
    return P.KernelGrid()


def _table(run, args, drift=None):
    if getattr(args, "table", None):
        run.manifest.input_hashes["table"] = _file_hash(args.table)
        return P.KernelTable.load(args.table)
    use_drift = args.drift if drift is None else drift
    return P.heat_kernel(run.field, _grid(args), n_terms=args.terms, drift=use_drift)


# ----------------------------------------------------------------------------
# subcommands


def cmd_kernel_build(args):
    run = Run(args, "kernel build")
    t0 = time.perf_counter()
    tab = _table(run, args)
    out = Path(args.out) if args.out else run.dir / "kernel.slkt"
    tab.save(out)
    run.manifest.reports.append(str(out))
    rs = tab.row_sums()
    run.report("kernel_build.json", {"table": str(out), "shape": list(tab.values.shape), "stage": tab.stage,
                                     "row_sum_error": float(np.max(np.abs(rs - 1))), "meta": tab.meta,
                                     "runtime": time.perf_counter() - t0})
    run.finish()
    return EXIT_OK


def cmd_kernel_verify(args):
    run = Run(args, "kernel verify")
    tab = _table(run, args)
    err = float(np.max(np.abs(tab.row_sums() - 1)))
    checks = {"normalization": {"value": err, "passed": err <= args.tol}}
    bounds = (("na", {}), ("es", {"gamma": run.field.beta / 2}), ("ph", {}), ("p0", {}))
    if args.bound:
        bounds = [b for b in bounds if b[0] == args.bound]
    for which, kw in bounds:
        a, b = (P.verify_kernel_bounds(tab, which, k, **kw) for k in (0, 1))
        spread = max(a.max_ratio, b.max_ratio) / min(a.max_ratio, b.max_ratio)
        checks[which] = {"grid_a": a.to_dict(), "grid_b": b.to_dict(), "spread": spread, "passed": spread < 2}
    ok = all(c["passed"] for c in checks.values())
    run.report("kernel_verify.json", {"checks": checks, "passed": ok})
    run.finish()
    return EXIT_OK if ok else EXIT_FAIL


_SLOPE_FN = {"abs_sin": lambda x: np.abs(np.sin(x)) ** 0.5, "cos": np.cos, "gauss": lambda x: np.exp(-x * x)}


def cmd_semigroup_slope(args):
    run = Run(args, "semigroup slope")
    tab = _table(run, args, drift=False)
    g = S.GriddedFunction.sample(_SLOPE_FN[args.function], tab.x_grid)
    fit = S.smoothing_exponent(tab, g, which=args.which, theta=args.theta, gamma=args.gamma)
    path = run.dir / "semigroup_slope.csv"
    np.savetxt(path, np.column_stack([fit.times, fit.norms]), delimiter=",", header="t,norm", comments="")
    run.manifest.reports.append(str(path))
    run.report("semigroup_slope.json", fit.to_dict())
    run.finish()
    return EXIT_OK if fit.passed else EXIT_FAIL


def _solve(run, args):
    tab = _table(run, args, drift=False)
    return tab, Z.solve_resolvent(run.field, tab, lam=args.lam, tol=args.tol)


def cmd_zvonkin_solve(args):
    run = Run(args, "zvonkin solve")
    _, sol = _solve(run, args)
    path = run.dir / "zvonkin_u.csv"
    np.savetxt(path, np.column_stack([sol.u.x_grid, sol.u.values, sol.grad_u.values]), delimiter=",",
               header="x,u,grad_u", comments="")
    table = run.dir / "zvonkin_u.npy"
    np.save(table, np.stack([sol.u.x_grid, sol.u.values, sol.grad_u.values]))
    run.manifest.reports += [str(path), str(table)]
    run.report("zvonkin_solve.json", sol.to_dict())
    run.finish()
    return EXIT_OK if sol.accepted else EXIT_FAIL


def cmd_zvonkin_verify(args):
    run = Run(args, "zvonkin verify")
    tab, sol = _solve(run, args)
    res = Z.fixed_point_residual(sol, run.field, tab)
    tc = Z.build_transform(sol, run.field)
    jz = Z.jz_decay(sol)
    lo, hi = tc.lipschitz_band
    gate = sol.norms["sup_u"] + sol.norms["sup_grad_u"]
    checks = {"gate": gate <= Z.GATE, "residual": res < 2 * sol.tol, "bi_lipschitz": lo >= 0.45 and hi <= 1.55,
              "jz": jz.passed}
    ok = all(checks.values())
    run.report("zvonkin_verify.json", {"solution": sol.to_dict(), "residual": res, "band": [lo, hi],
                                       "jz": jz.to_dict(), "checks": checks, "passed": ok})
    run.finish()
    return EXIT_OK if ok else EXIT_FAIL


def cmd_simulate(args):
    run = Run(args, "simulate")
    kernel = None
    if args.table:
        run.manifest.input_hashes["table"] = _file_hash(args.table)
        kernel = P.KernelTable.load(args.table)
    summ = SU.simulate_summary(run.scenario, args.paths, seed=args.seed, eps=args.eps, dt=args.dt, x0=args.x0,
                               horizon=args.horizon, kernel=kernel)
    driver = M.DriverStream.for_field(run.field, args.seed, args.eps, args.horizon)
    rec = M.simulate_path(run.field, driver, args.x0, args.dt, path=0)
    out = Path(args.out) if args.out else run.dir / "path.csv"
    rec.to_csv(out)
    run.manifest.reports.append(str(out))
    run.report("simulate_summary.json", summ)
    run.finish()
    return EXIT_OK


def cmd_suite(args):
    out = sys.stdout
    if args.scenario is None:
        args.scenario = "holder"  # the full battery spans the catalog; manifest records the anchor scenario
        run = Run(args, "suite")
        checks = SU.Battery(n_paths=args.paths, cauchy_paths=args.cauchy_paths, seed=args.seed).run(
            echo=lambda s: print(s, file=out, flush=True))
    else:
        run = Run(args, "suite")
        checks = scenario_suite(run, args, echo=lambda s: print(s, file=out, flush=True))
    ok = all(c.ok for c in checks)
    run.report("suite.json", {"checks": [c.to_dict() for c in checks], "passed": ok})
    run.finish()
    return EXIT_OK if ok else EXIT_FAIL


def scenario_suite(run, args, echo=None):
    """Scenario-specific battery: kernel, semigroup, Zvonkin (when b != 0), simulation."""
    f = run.field
    checks = []

    def add(chk):
        if echo:
            echo(chk.line())
        checks.append(chk)

    t0 = time.perf_counter()
    tab = P.heat_kernel(f, P.KernelGrid())
    err = float(np.max(np.abs(tab.row_sums() - 1)))
    add(SU.Check(1, "kernel normalization", err <= 1e-2, err, "<= 1e-2", time.perf_counter() - t0, 60))
    if f.x_constant:
        from .frozen import frozen_density

        t0 = time.perf_counter()
        x = tab.x_grid
        sup = max(float(np.max(np.abs(tab.values[m, :, x.size // 2] - frozen_density(f, 0.0, t, x))))
                  for m, t in enumerate(tab.t_grid))
        add(SU.Check(2, "constant-coefficient collapse", sup <= 1e-6, sup, "<= 1e-6", time.perf_counter() - t0, 10))
    t0 = time.perf_counter()
    short = P.heat_kernel(f, SU.SHORT_GRID)
    g = S.GriddedFunction.sample(lambda x: np.abs(np.sin(x)) ** 0.5, short.x_grid)
    fit = S.smoothing_exponent(short, g, which="grad_sup")
    add(SU.Check(4, "smoothing slope (grad)", fit.passed, fit.slope, f">= {fit.predicted - 0.15:.3g}",
                 time.perf_counter() - t0, 30))
    if not f.drift_free:
        t0 = time.perf_counter()
        sol = Z.solve_resolvent(f, tab)
        res = Z.fixed_point_residual(sol, f, tab)
        gate = sol.norms["sup_u"] + sol.norms["sup_grad_u"]
        add(SU.Check(5, "Zvonkin gate", gate <= 0.5 and res < 2 * sol.tol, [gate, res], "gate <= 1/2",
                     time.perf_counter() - t0, 60, {"lambda": sol.lam}))
    t0 = time.perf_counter()
    rows = M.thinning_check(f, 0.3, 100_000, seed=args.seed)
    worst = max(abs(r["z_score"]) for r in rows)
    add(SU.Check(7, "thinning", worst <= 3, worst, "<= 3 SE", time.perf_counter() - t0, 10))
    t0 = time.perf_counter()
    a, b = (json.dumps(SU.comparable(SU.simulate_summary(run.scenario, 2000, seed=args.seed)), sort_keys=True)
            for _ in range(2))
    add(SU.Check(11, "determinism", a == b, a == b, "identical", time.perf_counter() - t0, 60))
    return checks


# ----------------------------------------------------------------------------
# parser


def _common(p, seed=True):
    p.add_argument("--scenario", required=True, help="catalog name or JSON file")
    p.add_argument("--report-dir", help=f"report directory (default ${REPORT_ENV} or ./reports)")
    if seed:
        p.add_argument("--seed", type=int, default=0)


def _kernel_opts(p, grid="default"):
    p.add_argument("--grid", choices=("default", "short"), default=grid,
                   help="short: t in [0.01, 0.1] on [-2.2, 2.2], for small-time slopes")
    p.add_argument("--terms", type=int, default=6, help="Picard terms of the q series")
    p.add_argument("--table", help="load a saved kernel table instead of building")


def build_parser():
    ap = argparse.ArgumentParser(prog="stablelike", description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=int, help="cap BLAS/OpenMP workers")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="group", required=True)

    kern = sub.add_parser("kernel").add_subparsers(dest="action", required=True)
    p = kern.add_parser("build", help="build and save the full heat-kernel table")
    _common(p, seed=False)
    _kernel_opts(p)
    p.add_argument("--drift", action="store_true", help="include b in the frozen kernel")
    p.add_argument("--out")
    p.set_defaults(func=cmd_kernel_build)
    p = kern.add_parser("verify", help="normalization and bound-constant stability")
    _common(p, seed=False)
    _kernel_opts(p)
    p.add_argument("--drift", action="store_true")
    p.add_argument("--tol", type=float, default=1e-2)
    p.add_argument("--bound", choices=("na", "es", "ph", "p0"), help="check one bound only")
    p.set_defaults(func=cmd_kernel_verify)

    semi = sub.add_parser("semigroup").add_subparsers(dest="action", required=True)
    p = semi.add_parser("slope", help="log-log smoothing slope of T_t f")
    _common(p, seed=False)
    _kernel_opts(p, grid="short")
    p.add_argument("--estimate", "--which", dest="which", default="grad_sup",
                   choices=("grad_sup", "grad_holder", "bessel", "33", "34", "tt"))
    p.add_argument("--function", default="abs_sin", choices=sorted(_SLOPE_FN))
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=0.5)
    p.set_defaults(func=cmd_semigroup_slope)

    zv = sub.add_parser("zvonkin").add_subparsers(dest="action", required=True)
    for name, fn, helptext in (("solve", cmd_zvonkin_solve, "lambda-escalating resolvent solve"),
                               ("verify", cmd_zvonkin_verify, "gate, residual, bi-Lipschitz and decay checks")):
        p = zv.add_parser(name, help=helptext)
        _common(p, seed=False)
        _kernel_opts(p)
        p.add_argument("--lambda-init", "--lam", dest="lam", type=float, default=1.0, help="starting lambda")
        p.add_argument("--tol", type=float, default=1e-8)
        p.set_defaults(func=fn)

    p = sub.add_parser("simulate", help="Monte Carlo paths by thinning")
    _common(p)
    p.add_argument("--paths", type=int, default=10_000)
    p.add_argument("--eps", type=float, default=1e-2, help="small-jump cutoff")
    p.add_argument("--dt", type=float, default=0.01, help="drift step")
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--table", help="kernel table for ks_vs_kernel")
    p.add_argument("--out", help="CSV of path 0")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("suite", help="acceptance battery (all criteria without --scenario)")
    p.add_argument("--scenario")
    p.add_argument("--report-dir")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--cauchy-paths", type=int, default=10_000)
    p.set_defaults(func=cmd_suite)
    return ap


def run(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    threads = None
    if args.threads:
        from threadpoolctl import threadpool_limits

        threads = threadpool_limits(limits=args.threads)
    try:
        return args.func(args)
    except ScenarioError as exc:
        for prob in exc.problems:
            print(f"scenario error: {prob}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, UsageError, FileNotFoundError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        report = {"error": type(exc).__name__, "message": str(exc), "residual": exc.residual,
                  "report": exc.report}
        dest = Path(getattr(args, "report_dir", None) or os.environ.get(REPORT_ENV) or "reports")
        dest.mkdir(parents=True, exist_ok=True)
        (dest / "failure.json").write_text(json.dumps(SU.plain(report), indent=2, sort_keys=True, default=str))
        return EXIT_NUMERIC
    finally:
        if threads is not None:
            threads.restore_original_limits()


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
