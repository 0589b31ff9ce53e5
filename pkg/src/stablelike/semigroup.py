"""Semigroup action of a kernel table, smoothing-rate regressions, maximal functions."""

from dataclasses import dataclass, field as dc_field
import math

import numpy as np
from scipy import stats

from .errors import DomainError
from .frozen import FractionalOperator, apply_frozen

SLOPE_SLACK = 0.15
_EDGE_MARGIN = 3.0  # norms are measured away from the window ends


@dataclass(eq=False)
class GriddedFunction:
    x_grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.x_grid = np.asarray(self.x_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.x_grid.shape != self.values.shape or self.x_grid.ndim != 1:
            raise DomainError("grid and values must be 1-d of equal length")

    @classmethod
    def sample(cls, fn, x_grid):
        x = np.asarray(x_grid, dtype=float)
        return cls(x, np.asarray(fn(x), dtype=float) * np.ones_like(x))

    @property
    def h(self):
        return float(self.x_grid[1] - self.x_grid[0])

    @property
    def sup_norm(self):
        return float(np.max(np.abs(self.values)))

    def holder_seminorm(self, theta, mask=None):
        """max over grid pairs of |f(x) - f(y)| / |x - y|^theta."""
        x, v = self.x_grid, self.values
        if mask is not None:
            x, v = x[mask], v[mask]
        best = 0.0
        for k in range(1, x.size):
            d = np.abs(v[k:] - v[:-k]) / (x[k:] - x[:-k]) ** theta
            best = max(best, float(np.max(d)))
        return best

    def p_norm(self, p, mask=None):
        w = np.full(self.x_grid.size, self.h)
        w[0] = w[-1] = 0.5 * self.h
        v = np.abs(self.values)
        if mask is not None:
            w, v = w[mask], v[mask]
        if math.isinf(p):
            return float(np.max(v))
        return float((w @ v ** p) ** (1 / p))

    def gradient(self):
        return GriddedFunction(self.x_grid, np.gradient(self.values, self.x_grid))

    def __call__(self, x):
        """Linear interpolation, constant beyond the ends."""
        return np.interp(x, self.x_grid, self.values)

    def interior(self, margin=None):
        half = float(np.max(np.abs(self.x_grid)))
        margin = min(_EDGE_MARGIN, 0.4 * half) if margin is None else margin
        return np.abs(self.x_grid) <= half - margin


def _check_grid(table, f):
    if f.x_grid.size != table.y_grid.size or not np.allclose(f.x_grid, table.y_grid, atol=1e-12):
        raise DomainError("function grid does not match the kernel table")


def semigroup_matrix(table, t):
    """A with (A f)_i = sum_j w_j p(t, x_i, y_j) f_j + tail masses times the end values."""
    m = table.time_index(t)
    A = table.values[m] * table.weights()[None, :]
    if table.tail_left is not None:
        A = A.copy()
        A[:, 0] += table.tail_left[m]
        A[:, -1] += table.tail_right[m]
    return A


def apply_semigroup(table, f, t):
    """T_t f on the table grid; f beyond the window is taken constant at its end values."""
    _check_grid(table, f)
    return GriddedFunction(f.x_grid, semigroup_matrix(table, t) @ f.values)


class Propagator:
    """T_t for t on the uniform mesh k * t_grid[0], composing beyond the table (T_{t+s} = T_t T_s)."""

    def __init__(self, table):
        step = table.t_grid[0]
        if not np.allclose(table.t_grid, step * np.arange(1, table.t_grid.size + 1), atol=1e-9):
            raise DomainError("composition needs t_grid = k * t_grid[0]")
        self.table = table
        self.step = float(step)
        self.span = table.t_grid.size
        self._mats = [np.eye(table.y_grid.size)] + [semigroup_matrix(table, t) for t in table.t_grid]

    def matrix(self, k):
        """Matrix of T_{k * step}."""
        out = None
        while k > self.span:
            out = self._mats[self.span] if out is None else self._mats[self.span] @ out
            k -= self.span
        last = self._mats[k]
        return last if out is None else last @ out

    def series(self, values, n_steps):
        """[T_{k step} v for k = 0..n_steps] for v of shape (N,) or (N, m)."""
        out = [np.asarray(values, dtype=float)]
        for k in range(1, n_steps + 1):
            if k <= self.span:
                out.append(self._mats[k] @ out[0])
            else:
                out.append(self._mats[self.span] @ out[k - self.span])
        return out


# ----------------------------------------------------------------------------
# smoothing rates


@dataclass
class SlopeFit:
    which: str
    slope: float
    lower: float
    upper: float
    predicted: float
    times: list
    norms: list
    exact_zero: bool = False
    details: dict = dc_field(default_factory=dict)

    @property
    def passed(self):
        return self.exact_zero or self.slope >= self.predicted - SLOPE_SLACK

    def to_dict(self):
        return {"which": self.which, "slope": self.slope, "band": [self.lower, self.upper],
                "predicted": self.predicted, "times": list(self.times), "norms": list(self.norms),
                "exact_zero": self.exact_zero, "passed": self.passed, **self.details}


def log_spaced_times(table, n=5):
    """n distinct t_grid points closest to a log-spaced sequence over the grid."""
    t = table.t_grid
    target = np.geomspace(t[0], t[-1], n)
    idx = sorted({int(np.argmin(np.abs(np.log(t / s)))) for s in target})
    return [float(t[k]) for k in idx]


def frac_derivative(f, order, points=None):
    """Delta^{order/2} f by the second-difference quadrature on the spline of f."""
    x = f.x_grid if points is None else points
    return apply_frozen(FractionalOperator(order), 0.0, (f.x_grid, f.values), x)


def _norm(g, which, mask, theta_prime, gamma, p):
    if which == "grad_sup":
        return float(np.max(np.abs(g.gradient().values[mask])))
    if which == "grad_holder":
        return g.gradient().holder_seminorm(theta_prime, mask)
    if which == "bessel":
        d = frac_derivative(g, gamma, g.x_grid[mask])
        part = GriddedFunction(g.x_grid[mask], d)
        return GriddedFunction(g.x_grid[mask], g.values[mask]).p_norm(p) + part.p_norm(p)
    raise DomainError(f"unknown estimate {which!r}")


_ALIASES = {"33": "grad_sup", "34": "grad_holder", "tt": "bessel"}


def smoothing_exponent(table, f, t_samples=None, which="grad_sup", theta=0.5, theta_prime=0.25,
                       gamma=0.5, p=2.0):
    """Log-log slope of the indicated derivative norm of T_t f; the bound predicts slope >= predicted."""
    which = _ALIASES.get(which, which)
    t_samples = log_spaced_times(table) if t_samples is None else list(t_samples)
    if len(t_samples) < 4:
        raise DomainError("need at least 4 time samples")
    a = table.alpha
    predicted = {"grad_sup": (theta - 1) / a, "grad_holder": (theta - theta_prime - 1) / a,
                 "bessel": -gamma / a}.get(which)
    if predicted is None:
        raise DomainError(f"unknown estimate {which!r}")
    details = {"theta": theta}
    if which == "grad_holder":
        details["theta_prime"] = theta_prime
        beta = table.meta.get("beta")
        if beta is not None and not theta_prime < a + beta - 1:
            details["endpoint"] = True
    if which == "bessel":
        details.update(gamma=gamma, p=p)
    if np.ptp(f.values) == 0:
        n0 = [0.0] * len(t_samples)
        return SlopeFit(which, 0.0, 0.0, 0.0, predicted, t_samples, n0, exact_zero=True, details=details)
    mask = f.interior()
    norms = [_norm(apply_semigroup(table, f, t), which, mask, theta_prime, gamma, p) for t in t_samples]
    fit = stats.linregress(np.log(t_samples), np.log(norms))
    band = 2 * fit.stderr
    return SlopeFit(which, float(fit.slope), float(fit.slope - band), float(fit.slope + band), predicted,
                    t_samples, norms, details=details)


# ----------------------------------------------------------------------------
# maximal function


def maximal_function(f, max_radius=None):
    """M f(x_i) = max over r of the mean of |f| on the centered window [i - r, i + r] (clipped)."""
    v = np.abs(np.asarray(f.values, dtype=float))
    n = v.size
    c = np.concatenate([[0.0], np.cumsum(v)])
    R = n if max_radius is None else int(max_radius)
    idx = np.arange(n)
    best = v.copy()
    for r in range(1, R + 1):
        lo = np.maximum(idx - r, 0)
        hi = np.minimum(idx + r, n - 1)
        best = np.maximum(best, (c[hi + 1] - c[lo]) / (hi - lo + 1))
        if r >= n:
            break
    return GriddedFunction(f.x_grid, best)


def w11_constant(f):
    """Smallest C with |f(x) - f(y)| <= C |x - y| (M|f'|(x) + M|f'|(y)) over all grid pairs."""
    g = np.abs(f.gradient().values)
    Mg = maximal_function(GriddedFunction(f.x_grid, g)).values
    x, v = f.x_grid, f.values
    best = 0.0
    for k in range(1, x.size):
        num = np.abs(v[k:] - v[:-k])
        den = (x[k:] - x[:-k]) * (Mg[k:] + Mg[:-k])
        ok = den > 0
        if np.any(ok):
            best = max(best, float(np.max(num[ok] / den[ok])))
    return best
