"""Monte Carlo paths of the jump SDE by Poisson thinning, and the statistical checks built on them.

Candidates (t, z, r) come from a Poisson measure with intensity
nu(dz) dt dr restricted to |z| > eps and r in [0, k1]; a candidate is a jump
iff r <= sigma(X_{t-}, z).  Each path owns a counter-based substream keyed by
(seed, path index), so farms are reproducible and order independent.
"""

from dataclasses import dataclass, field as dc_field
import csv
import math
import time

import numpy as np
from scipy import integrate, stats

from ._quad import half_line_rule
from .errors import DomainError, NumericalFailure
from .frozen import apply_frozen, frozen_cdf
from .semigroup import GriddedFunction, maximal_function

CHUNK = 5000
CHUNK_MARKS = 4_000_000
_MASK64 = (1 << 64) - 1


class BlowUp(NumericalFailure):
    def __init__(self, t):
        super().__init__(f"non-finite state at t={t:.6g}", report={"time": t})
        self.time = t


def _tail_mass(field, eps):
    """nu(|z| > eps)."""
    vals = field.kappa_tilde(np.geomspace(eps, 1e4, 64))
    if np.ptp(vals) == 0:
        return 2 * float(vals[0]) * eps ** (-field.alpha) / field.alpha
    f = lambda z: float(field.kappa_tilde(np.array([z]))[0]) * z ** (-1 - field.alpha)
    body = integrate.quad(f, eps, 1.0, limit=200)[0] + integrate.quad(f, 1.0, 1e3, limit=2000)[0]
    # beyond 1e3 the oscillation of kappa_tilde is averaged out; error <= (kappa1 - kappa0) 1e-3^alpha / alpha
    tail = 0.5 * (field.kappa0 + field.kappa1) * 1e3 ** (-field.alpha) / field.alpha
    return 2 * (body + tail)


@dataclass(frozen=True)
class DriverStream:
    """Candidate marks on [0, horizon]; a deterministic function of (seed, eps, horizon, bounds).

    kappa_const is set when kappa_tilde is constant (exact inverse-CDF sampling
    of |z|); otherwise |z| is proposed from kappa1 |z|^{-1-alpha} and kept with
    probability kappa_tilde(z) / kappa1.
    """

    seed: int
    eps: float
    horizon: float
    k1: float
    alpha: float
    rate: float
    kappa1: float
    kappa_const: float | None = None
    kappa_tilde: object = None

    @classmethod
    def for_field(cls, field, seed, eps=1e-3, horizon=1.0):
        if not eps > 0 or not horizon > 0:
            raise DomainError("eps and horizon must be > 0")
        probe = field.kappa_tilde(np.geomspace(eps, 1e4, 64))
        const = float(probe[0]) if np.ptp(probe) == 0 else None
        rate = field.k1 * _tail_mass(field, eps)
        return cls(int(seed), float(eps), float(horizon), float(field.k1), float(field.alpha), rate,
                   float(field.kappa1), const, field.kappa_tilde)

    @property
    def proposal_rate(self):
        c = self.kappa_const if self.kappa_const is not None else self.kappa1
        return self.k1 * 2 * c * self.eps ** (-self.alpha) / self.alpha

    def generator(self, path):
        key = ((int(self.seed) & _MASK64) << 64) | (int(path) & _MASK64)
        return np.random.Generator(np.random.Philox(key=key))

    def marks(self, path=0, gen=None):
        """(t, z, r) arrays of the candidates in [0, horizon]; t strictly increasing."""
        g = self.generator(path) if gen is None else gen
        lam = self.proposal_rate
        mean = lam * self.horizon
        n = int(mean + 6 * math.sqrt(mean) + 16)
        t = np.cumsum(g.exponential(1 / lam, n))
        while t[-1] <= self.horizon:
            t = np.concatenate([t, t[-1] + np.cumsum(g.exponential(1 / lam, n))])
        t = t[t <= self.horizon]
        m = t.size
        u = 1.0 - g.random(m)  # (0, 1]
        sign = np.where(g.random(m) < 0.5, -1.0, 1.0)
        z = sign * self.eps * u ** (-1 / self.alpha)
        r = g.random(m) * self.k1
        if self.kappa_const is None:
            keep = g.random(m) * self.kappa1 <= self.kappa_tilde(z)
            t, z, r = t[keep], z[keep], r[keep]
        return t, z, r


@dataclass
class PathRecord:
    times: np.ndarray
    states: np.ndarray
    jump_log: np.ndarray  # columns t, z, r, accepted
    a1_values: np.ndarray | None = None
    a2_values: np.ndarray | None = None
    post_jump: np.ndarray | None = None  # state right after each candidate

    def summary(self):
        return {"x_T": float(self.states[-1]), "n_candidates": int(self.jump_log.shape[0]),
                "n_jumps": int(np.sum(self.jump_log[:, 3])) if self.jump_log.size else 0}

    def to_csv(self, path):
        """One row per drift step (empty jump fields) and per candidate."""
        rows = [(float(t), float(x), "", "", "") for t, x in zip(self.times, self.states)]
        rows += [(float(t), float(x), float(z), float(r), int(a)) for (t, z, r, a), x in
                 zip(self.jump_log, self.post_jump)]
        rows.sort(key=lambda row: (row[0], row[2] == ""))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "jump_z", "jump_r", "accepted"])
            w.writerows(rows)
        return path


def _small_jump_variance(field, eps):
    """v(x) = int_{|z| <= eps} z^2 sigma(x, z) nu(dz), as a callable."""
    z, w = half_line_rule(eps * 1e-6, eps, per_decade=4, n=8)
    dens = 2 * w * z * z * field.levy_density(z)
    return lambda x: field.sigma(np.asarray(x)[:, None], z[None, :]) @ dens


def _pad_marks(marks):
    P = len(marks)
    M = max(m[0].size for m in marks) + 1
    tm = np.full((P, M), np.inf)
    zm = np.zeros((P, M))
    rm = np.zeros((P, M))
    for p, (t, z, r) in enumerate(marks):
        tm[p, :t.size] = t
        zm[p, :t.size] = z
        rm[p, :t.size] = r
    return tm, zm, rm


def _grid(T, dt, obs, drift):
    obs = np.asarray(sorted(set(np.round(np.asarray(obs, dtype=float), 12)) | {round(T, 12)}))
    if drift:
        n = int(round(T / dt))
        if abs(n * dt - T) > 1e-9 * T:
            raise DomainError("dt_drift must divide the horizon")
        steps = dt * np.arange(1, n + 1)
        if not np.all(np.min(np.abs(obs[:, None] - steps[None, :]), axis=1) < 1e-9):
            raise DomainError("observation times must lie on the drift grid")
        grid = steps
        obs_index = np.full(grid.size, -1)
        for k, o in enumerate(obs):
            obs_index[int(np.argmin(np.abs(grid - o)))] = k
    else:
        grid = obs
        obs_index = np.arange(obs.size)
    return grid, obs, obs_index


def _run(field, marks, x0, dt, T, obs, gauss=None, normals=None, log=False):
    """Vectorized event loop over a chunk of paths; returns states at the observation times."""
    drift = not field.drift_free
    grid, obs, obs_index = _grid(T, dt, obs, drift or gauss is not None)
    tm, zm, rm = _pad_marks(marks)
    P = len(marks)
    X = np.full(P, float(x0))
    tcur = np.zeros(P)
    gi = np.zeros(P, dtype=int)
    ci = np.zeros(P, dtype=int)
    out = np.empty((P, obs.size))
    done = np.zeros(P, dtype=bool)
    events = [] if log else None
    b, sigma = field.b, field.sigma
    while True:
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        tc = tm[act, ci[act]]
        tg = grid[gi[act]]
        isc = tc <= tg
        tn = np.where(isc, tc, tg)
        if drift:
            X[act] += b(X[act]) * (tn - tcur[act])
        if gauss is not None:
            g_act = act[~isc]
            step = tn[~isc] - np.where(gi[g_act] > 0, grid[np.maximum(gi[g_act] - 1, 0)], 0.0)
            X[g_act] += np.sqrt(np.maximum(gauss(X[g_act]), 0) * step) * normals[g_act, gi[g_act]]
        tcur[act] = tn
        a_c = act[isc]
        if a_c.size:
            k = ci[a_c]
            z, r = zm[a_c, k], rm[a_c, k]
            acc = r <= sigma(X[a_c], z)
            X[a_c] += np.where(acc, z, 0.0)
            ci[a_c] += 1
            if log:
                events.extend(zip(tc[isc], z, r, acc.astype(float), X[a_c].copy()))
        a_g = act[~isc]
        if a_g.size:
            oi = obs_index[gi[a_g]]
            hit = oi >= 0
            out[a_g[hit], oi[hit]] = X[a_g[hit]]
            gi[a_g] += 1
            done[a_g[gi[a_g] >= grid.size]] = True
        if not np.all(np.isfinite(X[act])):
            bad = act[~np.isfinite(X[act])][0]
            raise BlowUp(float(tcur[bad]))
    return obs, out, events


def _chunk_size(driver):
    """Paths per chunk so the padded mark arrays stay near CHUNK_MARKS entries."""
    per_path = driver.proposal_rate * driver.horizon + 1
    return int(min(CHUNK, max(16, CHUNK_MARKS // per_path)))


def _chunks(n, size=CHUNK):
    for a in range(0, n, size):
        yield a, min(n, a + size)


def simulate_paths(field, driver, x0, dt_drift, n_paths, obs_times=None, gaussian_correction=False,
                   first_path=0):
    """States at obs_times (default: the horizon) of n_paths independent paths, shape (n, n_obs)."""
    if not dt_drift > 0:
        raise DomainError("dt_drift must be > 0")
    T = driver.horizon
    obs = [T] if obs_times is None else list(obs_times)
    gauss = _small_jump_variance(field, driver.eps) if gaussian_correction else None
    blocks = []
    for a, b in _chunks(n_paths, _chunk_size(driver)):
        normals = None
        gens = [driver.generator(first_path + p) for p in range(a, b)]
        marks = [driver.marks(gen=g) for g in gens]
        if gauss is not None:
            n_grid = int(round(T / dt_drift)) + 1
            normals = np.stack([g.standard_normal(n_grid) for g in gens])
        obs_t, out, _ = _run(field, marks, x0, dt_drift, T, obs, gauss, normals)
        blocks.append(out)
    return obs_t, np.concatenate(blocks)


def simulate_path(field, driver, x0, dt_drift, path=0):
    """One path with its full candidate log; states on the drift grid."""
    if not dt_drift > 0:
        raise DomainError("dt_drift must be > 0")
    T = driver.horizon
    n = max(1, int(round(T / dt_drift)))
    obs = T * np.arange(1, n + 1) / n
    obs_t, out, events = _run(field, [driver.marks(path)], x0, T / n, T, obs, log=True)
    log = np.array([e[:4] for e in events], dtype=float).reshape(-1, 4)
    post = np.array([e[4] for e in events], dtype=float)
    return PathRecord(np.concatenate([[0.0], obs_t]), np.concatenate([[float(x0)], out[0]]), log, post_jump=post)


# ----------------------------------------------------------------------------
# statistics


def fsum_mean(v):
    v = np.asarray(v, dtype=float).ravel()
    return math.fsum(v) / v.size


def mean_se(v):
    v = np.asarray(v, dtype=float).ravel()
    m = fsum_mean(v)
    var = math.fsum((v - m) ** 2) / max(v.size - 1, 1)
    return m, math.sqrt(var / v.size)


def summary(samples, ks=None, runtime=None):
    m = fsum_mean(samples)
    var = math.fsum((np.asarray(samples) - m) ** 2) / max(len(samples) - 1, 1)
    out = {"mean": m, "var": var, "n": int(len(samples))}
    if ks is not None:
        out["ks_vs_kernel"] = ks
    if runtime is not None:
        out["runtime"] = runtime
    return out


def kernel_cdf(table, x0, t):
    """CDF of p(t, x0, .) from a full kernel table (power-law extension beyond the window)."""
    m = table.time_index(t)
    i = int(np.argmin(np.abs(table.x_grid - x0)))
    if abs(table.x_grid[i] - x0) > 1e-9:
        raise DomainError("x0 must be a grid point of the table")
    y = table.y_grid
    row = table.values[m, i]
    F = np.concatenate([[0.0], np.cumsum(0.5 * (row[1:] + row[:-1]) * np.diff(y))])
    left = float(table.tail_left[m, i]) if table.tail_left is not None else 0.0
    right = float(table.tail_right[m, i]) if table.tail_right is not None else 0.0
    F = left + F
    a = table.alpha

    def cdf(s):
        s = np.asarray(s, dtype=float)
        inside = np.interp(s, y, F)
        lo = left * ((y[0] - x0) / np.minimum(s - x0, y[0] - x0 - 1e-300)) ** a
        hi = 1.0 - right * ((y[-1] - x0) / np.maximum(s - x0, y[-1] - x0)) ** a
        return np.where(s < y[0], np.abs(lo), np.where(s > y[-1], hi, inside))

    return cdf


def ks_distance(samples, cdf):
    return float(stats.kstest(np.asarray(samples, dtype=float), cdf).statistic)


def frozen_ks(field, samples, x0, t):
    """KS distance to the frozen kernel (freeze point x0, no drift) law of x0 + X_t."""
    return ks_distance(samples, lambda s: frozen_cdf(field, x0, t, np.asarray(s) - x0))


def generator_estimate(field, x, f, h, n_paths, eps=1e-3, seed=0, dt_drift=None, horizons=None):
    """(E f(X_h) - f(x)) / h for each horizon h (shared paths), plus the exact L f(x)."""
    if n_paths < 1000:
        raise DomainError("n_paths < 1e3: Monte Carlo noise dominates")
    hs = [h] if horizons is None else sorted(horizons)
    T = max(hs)
    driver = DriverStream.for_field(field, seed, eps, T)
    dt = T / 10 if dt_drift is None else dt_drift
    obs_t, X = simulate_paths(field, driver, x, dt, n_paths, obs_times=hs)
    fx = float(f(np.array([x]))[0])
    est = []
    for k, hk in enumerate(obs_t):
        est.append((math.fsum(f(X[:, k])) / n_paths - fx) / hk)
    d = 1e-5
    fprime = float((f(np.array([x + d])) - f(np.array([x - d])))[0] / (2 * d))
    Lf = float(apply_frozen(field, x, f, x)) + float(field.b(np.array([x]))[0]) * fprime
    return obs_t, np.array(est), Lf


def generator_check(field, x, f, h=1e-2, n_paths=100_000, eps=1e-3, seed=0):
    """|(E f(X_h) - f(x)) / h - L f(x)| / (|L f(x)| + 1e-9)."""
    _, est, Lf = generator_estimate(field, x, f, h, n_paths, eps, seed)
    return abs(est[0] - Lf) / (abs(Lf) + 1e-9)


def generator_bias_ratio(field, x, f, h, n_paths, eps=1e-3, seed=0):
    """Ratio of the bias increments (e(h) - e(h/2)) / (e(h/2) - e(h/4)) on shared paths (~2 for O(h) bias)."""
    hs = [h / 4, h / 2, h]
    _, est, Lf = generator_estimate(field, x, f, h, n_paths, eps, seed, dt_drift=h / 4, horizons=hs)
    e4, e2, e1 = est - Lf
    return (e1 - e2) / (e2 - e4), {"h": hs, "errors": [e4, e2, e1], "Lf": Lf}


def thinning_check(field, x, n_candidates=100_000, eps=1e-3, seed=0, n_bins=10):
    """Per-|z|-bin acceptance frequency vs the bin mean of sigma(x, z)/k1, in standard errors."""
    driver = DriverStream.for_field(field, seed, eps, 1.0)
    zs, rs = [], []
    path = 0
    while sum(z.size for z in zs) < n_candidates:
        _, z, r = driver.marks(path)
        zs.append(z)
        rs.append(r)
        path += 1
    z = np.concatenate(zs)[:n_candidates]
    r = np.concatenate(rs)[:n_candidates]
    s = field.sigma(np.full(z.shape, float(x)), z)
    acc = r <= s
    p = s / field.k1
    edges = np.quantile(np.abs(z), np.linspace(0, 1, n_bins + 1))
    bins = np.clip(np.searchsorted(edges, np.abs(z), side="right") - 1, 0, n_bins - 1)
    rows = []
    for k in range(n_bins):
        sel = bins == k
        n = int(np.count_nonzero(sel))
        freq = math.fsum(acc[sel]) / n
        expect = math.fsum(p[sel]) / n
        se = math.sqrt(max(math.fsum(p[sel] * (1 - p[sel])) / n, 1e-300) / n)
        rows.append({"bin": [float(edges[k]), float(edges[k + 1])], "n": n, "freq": freq,
                     "expected": expect, "se": se, "z_score": (freq - expect) / se})
    return rows


def truncation_coupling(field, x0, eps_list, n_paths, dt_drift=0.01, horizon=1.0, seed=0):
    """RMS of X_T^{eps} - X_T^{eps'} for consecutive cutoffs, coupled by dropping candidates with |z| <= eps.

    Under a state-dependent sigma the coupled paths can disagree on large jumps, whose
    second moment is infinite; the RMS rate is meaningful for x-independent sigma.
    """
    eps_list = sorted(eps_list, reverse=True)
    base = DriverStream.for_field(field, seed, eps_list[-1], horizon)
    finals = {e: [] for e in eps_list}
    for a, b in _chunks(n_paths, _chunk_size(base)):
        full = [base.marks(p) for p in range(a, b)]
        for e in eps_list:
            marks = [(t[np.abs(z) > e], z[np.abs(z) > e], r[np.abs(z) > e]) for t, z, r in full]
            _, out, _ = _run(field, marks, x0, dt_drift, horizon, [horizon])
            finals[e].append(out[:, -1])
    finals = {e: np.concatenate(v) for e, v in finals.items()}
    rms = [math.sqrt(fsum_mean((finals[e] - finals[e2]) ** 2)) for e, e2 in zip(eps_list, eps_list[1:])]
    slope = float(np.polyfit(np.log(eps_list[:-1]), np.log(rms), 1)[0]) if len(rms) > 1 else float("nan")
    return {"eps": eps_list[:-1], "rms": rms, "slope": slope, "predicted": (2 - field.alpha) / 2}


def krylov_check(field, x0, f_family, n_paths=20_000, eps=1e-2, dt=0.01, horizon=1.0, seed=0):
    """Mean of int_0^T f(X_s) ds for each f in f_family (callables), from one path farm."""
    driver = DriverStream.for_field(field, seed, eps, horizon)
    obs = dt * np.arange(1, int(round(horizon / dt)) + 1)
    _, X = simulate_paths(field, driver, x0, dt, n_paths, obs_times=obs)
    t = np.concatenate([[0.0], obs])
    states = np.hstack([np.full((X.shape[0], 1), float(x0)), X])
    return [occupation_functional(t, states, fn) for fn in f_family]


def strong_cauchy(field, driver, x0, dt_list, n_paths, obs_step=None):
    """E sup_k |X^{dt}(t_k) - X^{dt/2}(t_k)| over a common grid, shared drivers, for consecutive dt."""
    dt_list = list(dt_list)
    if any(b >= a for a, b in zip(dt_list, dt_list[1:])):
        raise DomainError("dt_list must be decreasing")
    T = driver.horizon
    step = dt_list[0] if obs_step is None else obs_step
    obs = step * np.arange(1, int(round(T / step)) + 1)
    sups = [[] for _ in dt_list[1:]]
    for a, b in _chunks(n_paths, _chunk_size(driver)):
        marks = [driver.marks(p) for p in range(a, b)]
        prev = None
        for k, dt in enumerate(dt_list):
            _, out, _ = _run(field, marks, x0, dt, T, obs)
            if prev is not None:
                sups[k - 1].append(np.max(np.abs(out - prev), axis=1))
            prev = out
    rows = []
    for k, s in enumerate(sups):
        m, se = mean_se(np.concatenate(s))
        rows.append({"dt": dt_list[k], "dt_half": dt_list[k + 1], "mean": m, "se": se})
    return rows


def cauchy_monotone(rows, n_se=2.0):
    """True when each difference is below its predecessor up to n_se combined standard errors."""
    return all(b["mean"] <= a["mean"] + n_se * math.hypot(a["se"], b["se"]) for a, b in zip(rows, rows[1:]))


def cauchy_rates(rows):
    return [a["mean"] / b["mean"] if b["mean"] > 0 else math.inf for a, b in zip(rows, rows[1:])]


# ----------------------------------------------------------------------------
# diagnostic functionals along paths


def _cumtrapz(t, v):
    """Cumulative trapezoid along the last axis."""
    inc = 0.5 * (v[..., 1:] + v[..., :-1]) * np.diff(t)
    return np.concatenate([np.zeros(v.shape[:-1] + (1,)), np.cumsum(inc, axis=-1)], axis=-1)


class JumpGradientTable:
    """M|grad J_z u| on the solution grid for a z-quadrature over eps < |z| <= 1."""

    def __init__(self, sol, field, eps, per_decade=4, n=4):
        from .zvonkin import jump_difference

        z, w = half_line_rule(eps, 1.0, per_decade=per_decade, n=n)
        self.z = np.concatenate([z, -z])
        self.w = np.concatenate([w, w]) * field.levy_density(self.z)
        self.x = sol.u.x_grid
        grads = [np.abs(jump_difference(sol, zk).gradient().values) for zk in self.z]
        self.M = np.stack([maximal_function(GriddedFunction(self.x, g)).values for g in grads])

    def evaluate(self, s):
        """Values at the points s, shape (n_z,) + s.shape."""
        s = np.asarray(s, dtype=float)
        return np.stack([np.interp(s, self.x, m) for m in self.M])


def a_functionals(field, times, X, Xh, u=None, eps=1e-3, table=None):
    """A_1, A_2 along paired trajectories X, Xh of shape (..., n_times); A_2 is None without u."""
    t = np.asarray(times, dtype=float)
    X, Xh = np.asarray(X, dtype=float), np.asarray(Xh, dtype=float)
    a1 = _cumtrapz(t, 1 + field.zeta(X) + field.zeta(Xh))
    if u is None:
        return a1, None
    tab = table if table is not None else JumpGradientTable(u, field, eps)
    g = tab.evaluate(X) + tab.evaluate(Xh)
    return a1, _cumtrapz(t, np.tensordot(tab.w, g * g, axes=1))


def diagnostics_A(field, path, path_hat, u=None, eps=1e-3, table=None):
    """(A_1 samples, A_2 samples or None, flags); also stored on `path`."""
    if path_hat.times.shape != path.times.shape or not np.allclose(path_hat.times, path.times):
        raise DomainError("paths must share the time grid")
    a1, a2 = a_functionals(field, path.times, path.states, path_hat.states, u, eps, table)
    path.a1_values, path.a2_values = a1, a2
    return a1, a2, {"a2_omitted": a2 is None}


def diagnostics_farm(field, sol, x0, n_paths, dt=0.01, eps=1e-2, seed=0, horizon=1.0, refine=2):
    """A_1(T), A_2(T) per path; X^ is the same driver integrated at dt / refine."""
    driver = DriverStream.for_field(field, seed, eps, horizon)
    obs = dt * np.arange(1, int(round(horizon / dt)) + 1)
    tab = JumpGradientTable(sol, field, eps)
    t = np.concatenate([[0.0], obs])
    out1, out2 = [], []
    for a, b in _chunks(n_paths, _chunk_size(driver)):
        marks = [driver.marks(p) for p in range(a, b)]
        _, X, _ = _run(field, marks, x0, dt, horizon, obs)
        _, Xh, _ = _run(field, marks, x0, dt / refine, horizon, obs)
        start = np.full((X.shape[0], 1), float(x0))
        a1, a2 = a_functionals(field, t, np.hstack([start, X]), np.hstack([start, Xh]), sol, eps, tab)
        out1.append(a1[:, -1])
        out2.append(a2[:, -1])
    return np.concatenate(out1), np.concatenate(out2)


def occupation_functional(times, states, f):
    """Monte Carlo mean of int_0^T f(X_s) ds from states (n_paths, n_times) on `times`."""
    vals = f(np.asarray(states))
    per_path = _cumtrapz_rows(np.asarray(times), vals)
    return mean_se(per_path)


def _cumtrapz_rows(t, v):
    return np.sum(0.5 * (v[:, 1:] + v[:, :-1]) * np.diff(t)[None, :], axis=1)


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0
