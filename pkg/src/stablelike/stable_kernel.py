"""Symmetric alpha-stable densities, their derivatives, and rho comparison kernels.

The symbol convention is exp(-t * scale * |xi|^alpha); the fractional Laplacian
Delta^{gamma/2} has Fourier multiplier -|xi|^gamma.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import json
import math

import numpy as np
from scipy import integrate, special

from ._quad import frequency_rule, panel_rule
from .errors import DomainError, NumericalFailure

_XI_EPS = 1e-12  # spectral truncation: exp(-Xi^alpha) < _XI_EPS
_TAIL_MATCH = 1e-5  # switch radius: Fourier vs asymptotic series
_R_SCAN_MAX = 400.0
_CHUNK = 2048


@dataclass(frozen=True)
class StableSpec:
    alpha: float
    scale: float = 1.0
    dim: int = 1
    oracle: bool = False

    def __post_init__(self):
        lo_ok = self.alpha >= 1.0 if self.oracle else self.alpha > 1.0
        if not (lo_ok and self.alpha < 2.0):
            raise DomainError(f"alpha={self.alpha} outside (1,2)")
        if not self.scale > 0:
            raise DomainError("scale must be positive")
        if int(self.dim) != self.dim or self.dim < 1 or self.dim > 3:
            raise DomainError("dim must be 1, 2 or 3")


def rho(gamma, beta, t, x, alpha, dim=1):
    """rho^beta_gamma(t,x) = t^{gamma/alpha} (|x|^beta ^ 1) (|x| + t^{1/alpha})^{-d-alpha}."""
    t = np.asarray(t, dtype=float)
    ax = np.abs(np.asarray(x, dtype=float))
    cusp = np.minimum(ax ** beta, 1.0) if beta != 0 else 1.0
    return t ** (gamma / alpha) * cusp * (ax + t ** (1.0 / alpha)) ** (-dim - alpha)


def frac_constant(gamma, dim=1):
    """c_{d,gamma} making c PV-int (f(x+z)-f(x))|z|^{-d-gamma} have symbol -|xi|^gamma."""
    return (gamma * 2.0 ** (gamma - 1.0) * special.gamma((dim + gamma) / 2.0)
            / (math.pi ** (dim / 2.0) * special.gamma(1.0 - gamma / 2.0)))


def levy_symbol_constant(alpha):
    """A(alpha) = int_R (1 - cos u) |u|^{-1-alpha} du (closed form)."""
    return math.pi / (special.gamma(1.0 + alpha) * math.sin(math.pi * alpha / 2.0))


def levy_symbol_constant_quad(alpha):
    """Brute-force quadrature of A(alpha); independent of the closed form."""
    f = lambda u: (1.0 - math.cos(u)) * u ** (-1.0 - alpha)
    small = lambda u: (0.5 - u * u / 24.0) * u ** (1.0 - alpha)
    a, _ = integrate.quad(small, 0.0, 1e-3, limit=200)
    b, _ = integrate.quad(f, 1e-3, 50.0, limit=2000)
    # beyond 50: int u^{-1-a} minus the oscillatory part
    c = 50.0 ** (-alpha) / alpha
    d, _ = integrate.quad(lambda u: u ** (-1.0 - alpha), 50.0, np.inf, weight="cos", wvar=1.0)
    return 2.0 * (a + b + c - d)


def series_coefficients(alpha, n_terms=3):
    """Coefficients c_n of p_1(u) ~ sum c_n |u|^{-n alpha - 1} (d=1, unit scale)."""
    n = np.arange(1, n_terms + 1)
    return ((-1.0) ** (n + 1) * special.gamma(n * alpha + 1.0) * np.sin(n * np.pi * alpha / 2.0)
            / (np.pi * special.factorial(n)))


# ----------------------------------------------------------------------------
# unit-scale engine


def _xi_max(alpha):
    return (-math.log(_XI_EPS)) ** (1.0 / alpha)


class _UnitProfile:
    """Fourier inversion at t*scale = 1 of one spectral multiplier, with tail switch."""

    def __init__(self, alpha, dim, kind, order):
        self.alpha, self.dim, self.kind, self.order = alpha, dim, kind, order
        self.tail_power = self._tail_power()
        self.radius = self._switch_radius()
        self.nodes, self.weights = frequency_rule(_xi_max(alpha), self.radius)
        self.spectral = self.weights * self._multiplier(self.nodes)
        edge = np.array([self.radius])
        self.match = float(self._fourier(edge)[0] / self._asymptotic(edge)[0])

    def _tail_power(self):
        if self.kind == "density":
            return self.dim + self.alpha
        if self.kind == "deriv":
            return 1 + self.alpha + self.order
        return 1 + self.order  # frac: -|xi|^gamma cusp dominates

    def _series(self, a):
        """Asymptotic expansion at |u| = a (d = 1), from the small-xi expansion of the multiplier."""
        alpha = self.alpha
        if self.kind == "density":
            m, sign, n0, trig = 0.0, 1.0, 1, "cos"
        elif self.kind == "deriv":
            m, sign, n0, trig = float(self.order), -1.0, 0, ("sin" if self.order == 1 else "cos")
        else:
            m, sign, n0, trig = float(self.order), -1.0, 0, "cos"
        out = np.zeros_like(a)
        for n in range(n0, n0 + 4):
            s = m + n * alpha
            phase = math.cos(math.pi * (1 + s) / 2) if trig == "cos" else math.sin(math.pi * (1 + s) / 2)
            coef = sign * (-1.0) ** n / math.factorial(n) * special.gamma(1 + s) * phase / math.pi
            out = out + coef * a ** (-1.0 - s)
        return out

    def _asymptotic(self, a):
        if self.dim == 1:
            return self._series(a)
        return a ** (-self.tail_power)

    def _multiplier(self, xi):
        base = np.exp(-xi ** self.alpha)
        if self.kind == "density":
            if self.dim == 1:
                return base / np.pi
            if self.dim == 2:
                return base * xi / (2 * np.pi)
            return base * xi / (2 * np.pi ** 2)
        if self.kind == "deriv":
            return -(xi ** self.order) * base / np.pi
        return -(xi ** self.order) * base / np.pi

    def _kernel(self, u, xi):
        # trig factor matching the multiplier
        ux = np.abs(u)[:, None] * xi[None, :]
        if self.kind == "density" and self.dim == 2:
            return special.j0(ux)
        if self.kind == "density" and self.dim == 3:
            out = np.where(ux > 0, np.sin(ux) / np.where(ux > 0, np.abs(u)[:, None], 1.0), xi[None, :])
            return out
        if self.kind == "deriv" and self.order == 1:
            return np.sign(u)[:, None] * np.sin(ux)
        return np.cos(ux)

    def _fourier(self, u, nodes=None, spectral=None):
        nodes = self.nodes if nodes is None else nodes
        spectral = self.spectral if spectral is None else spectral
        out = np.empty(u.shape, dtype=float)
        for i in range(0, u.size, _CHUNK):
            sl = slice(i, i + _CHUNK)
            out[sl] = self._kernel(u[sl], nodes) @ spectral
        return out

    def _switch_radius(self):
        nodes, weights = frequency_rule(_xi_max(self.alpha), _R_SCAN_MAX)
        spectral = weights * self._multiplier(nodes)
        r = np.geomspace(4.0, _R_SCAN_MAX, 160)
        f = self._fourier(r, nodes, spectral)
        g = self._asymptotic(r)
        floor = 1e-11 * np.max(np.abs(self._fourier(np.linspace(0.0, 4.0, 41), nodes, spectral)))
        # continuity-matched asymptotic from each candidate radius
        for i, ri in enumerate(r[:-1]):
            tail = g[i:] * (f[i] / g[i])
            if np.all(np.abs(tail - f[i:]) <= _TAIL_MATCH * np.abs(f[i:]) + floor):
                return float(ri)
        return _R_SCAN_MAX

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        flat = u.ravel()
        out = np.empty_like(flat)
        inner = np.abs(flat) <= self.radius
        out[inner] = self._fourier(flat[inner])
        far = ~inner
        if np.any(far):
            a = np.abs(flat[far])
            val = self.match * self._asymptotic(a)
            if self.kind == "deriv" and self.order == 1:
                val = val * np.sign(flat[far])
            out[far] = val
        return out.reshape(u.shape)


@lru_cache(maxsize=64)
def _profile(alpha, dim, kind, order):
    return _UnitProfile(alpha, dim, kind, order)


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError("t must be > 0")
    return t


def stable_density(spec, t, x):
    """p_alpha(t,x) for the symbol exp(-t*scale*|xi|^alpha); |x| is used for dim > 1."""
    t = _check_t(t)
    x = np.asarray(x, dtype=float)
    s = t * spec.scale
    if spec.alpha == 1.0 and spec.dim != 1:
        raise DomainError("oracle mode is one-dimensional")
    lam = s ** (-1.0 / spec.alpha)
    val = lam ** spec.dim * _profile(spec.alpha, spec.dim, "density", 0)(lam * x)
    return _as_out(val)


def stable_density_deriv(spec, k, t, x):
    """k-th spatial derivative (k in {1,2}), d = 1."""
    if k not in (1, 2):
        raise DomainError("k must be 1 or 2")
    if spec.dim != 1:
        raise DomainError("derivatives are one-dimensional")
    t = _check_t(t)
    x = np.asarray(x, dtype=float)
    lam = (t * spec.scale) ** (-1.0 / spec.alpha)
    return _as_out(lam ** (1 + k) * _profile(spec.alpha, 1, "deriv", k)(lam * x))


def frac_laplacian_fourier(spec, gamma, t, x):
    """Delta^{gamma/2} p_alpha via the multiplier -|xi|^gamma."""
    t = _check_t(t)
    x = np.asarray(x, dtype=float)
    lam = (t * spec.scale) ** (-1.0 / spec.alpha)
    return _as_out(lam ** (1 + gamma) * _profile(spec.alpha, 1, "frac", float(gamma))(lam * x))


def frac_laplacian_quadrature(spec, gamma, t, x):
    """Delta^{gamma/2} p_alpha via c_{1,gamma}/2 int delta_p(x;z) |z|^{-1-gamma} dz."""
    t = float(t)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    w = (t * spec.scale) ** (1.0 / spec.alpha)
    c = frac_constant(gamma)
    out = np.empty_like(xs)
    z0, z_far = 1e-3 * w, 1e5 * max(w, 1.0)
    for i, xi in enumerate(xs):
        ax = abs(xi)
        edges = np.geomspace(z0, z_far, 97)
        if ax > z0:
            edges = np.concatenate([edges, np.clip(ax + w * np.linspace(-6, 6, 25), z0, z_far)])
        edges = np.unique(edges)
        z, wz = panel_rule(edges, 12)
        p_x = float(stable_density(spec, t, xi))
        delta = stable_density(spec, t, xi + z) + stable_density(spec, t, xi - z) - 2 * p_x
        body = np.dot(wz, delta * z ** (-1.0 - gamma))
        p2 = float(stable_density_deriv(spec, 2, t, xi))
        small = p2 * z0 ** (2.0 - gamma) / (2.0 - gamma)
        far = -2 * p_x * z_far ** (-gamma) / gamma
        out[i] = c * (body + small + far)
    return _as_out(out.reshape(np.shape(x)))


def frac_laplacian_stable(spec, gamma, t, x, rtol=1e-3, return_discrepancy=False):
    """Delta^{gamma/2} p_alpha(t,x), cross-checked by two independent quadratures."""
    if not 0.0 < gamma < 2.0:
        raise DomainError("gamma must lie in (0,2)")
    if spec.dim != 1:
        raise DomainError("fractional derivative engine is one-dimensional")
    a = np.atleast_1d(frac_laplacian_fourier(spec, gamma, t, x))
    b = np.atleast_1d(frac_laplacian_quadrature(spec, gamma, t, x))
    ref = (float(t) * spec.scale) ** (-(1.0 + gamma) / spec.alpha)
    disc = np.abs(a - b)
    scale = np.abs(a) + 1e-4 * ref
    worst = float(np.max(disc / scale))
    if worst > rtol:
        raise NumericalFailure(f"fractional derivative cross-check {worst:.3g} > {rtol}", residual=worst)
    val = _as_out(a.reshape(np.shape(x)))
    return (val, worst) if return_discrepancy else val


def stable_density_adaptive(spec, t, x, tol=1e-10):
    """Adaptive-quadrature evaluation (d = 1); raises NumericalFailure on poor convergence."""
    if spec.dim != 1:
        raise DomainError("adaptive engine is one-dimensional")
    _check_t(t)
    s = float(t) * spec.scale
    f = lambda xi: math.exp(-s * xi ** spec.alpha) / math.pi
    if x == 0:
        val, err = integrate.quad(f, 0, np.inf, epsabs=tol, limit=500)
    else:
        val, err = integrate.quad(f, 0, np.inf, weight="cos", wvar=abs(float(x)), epsabs=tol, limlst=100)
    if err > 100 * tol + 1e-8 * abs(val):
        raise NumericalFailure(f"adaptive quadrature residual {err:.3g}", residual=err)
    return val


def tail_mass(spec, t, radius):
    """P(|X_t| > radius) (d = 1), from the Fourier CDF."""
    lam = (float(t) * spec.scale) ** (-1.0 / spec.alpha)
    r = lam * np.asarray(radius, dtype=float)
    xi, w = frequency_rule(_xi_max(spec.alpha), float(np.max(r)) + 1.0)
    inner = (2.0 / np.pi) * (np.sin(np.outer(np.atleast_1d(r), xi)) / xi) @ (w * np.exp(-xi ** spec.alpha))
    return _as_out(np.reshape(1.0 - inner, np.shape(radius)))


def _as_out(a):
    a = np.asarray(a, dtype=float)
    return float(a) if a.ndim == 0 else a


# ----------------------------------------------------------------------------
# bound reports


@dataclass
class BoundReport:
    bound_id: str
    max_ratio: float
    argmax: tuple
    samples: int
    rho_form: str = ""
    passed: bool | None = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.max_ratio >= 0):
            raise NumericalFailure(f"{self.bound_id}: invalid ratio {self.max_ratio}")
        if self.samples < 1:
            raise DomainError("a bound report needs at least one sample")

    def to_dict(self):
        d = {"bound_id": self.bound_id, "max_ratio": float(self.max_ratio),
             "argmax": [float(v) for v in self.argmax], "samples": int(self.samples)}
        if self.rho_form:
            d["rho_form"] = self.rho_form
        if self.passed is not None:
            d["passed"] = bool(self.passed)
        if self.details:
            d["details"] = self.details
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def ratio_report(bound_id, lhs, rhs, t, x, rho_form=""):
    """Max of |lhs|/rhs over samples, with its (t,x) location."""
    lhs = np.abs(np.ravel(lhs))
    rhs = np.ravel(rhs)
    t = np.broadcast_to(t, np.shape(lhs)).ravel() if np.ndim(t) else np.full(lhs.shape, float(t))
    x = np.broadcast_to(x, np.shape(lhs)).ravel() if np.ndim(x) else np.full(lhs.shape, float(x))
    ratio = lhs / rhs
    k = int(np.argmax(ratio))
    return BoundReport(bound_id, float(ratio[k]), (float(t[k]), float(x[k])), int(ratio.size), rho_form)


def constant_stability(report_a, report_b):
    """Spread max/min of the fitted constants of two disjoint sample grids."""
    a, b = report_a.max_ratio, report_b.max_ratio
    if min(a, b) <= 0:
        return math.inf
    return max(a, b) / min(a, b)


def kernel_bound_report(spec, which, t, x, gamma=None):
    """Fitted-constant reports for the two-sided stable bound, the derivative bounds and the fractional bound."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    a = spec.alpha
    if which == "k0_upper":
        return ratio_report(which, stable_density(spec, t, x), rho(a, 0, t, x, a), t, x, "rho^0_alpha")
    if which == "k0_lower":
        return ratio_report(which, rho(a, 0, t, x, a), stable_density(spec, t, x), t, x, "1/rho^0_alpha")
    if which in ("kk1", "kk2"):
        k = int(which[-1])
        return ratio_report(which, stable_density_deriv(spec, k, t, x), rho(a - k, 0, t, x, a), t, x,
                            f"rho^0_(alpha-{k})")
    if which == "e1":
        vals = np.array([frac_laplacian_fourier(spec, gamma, ti, xi) for ti, xi in zip(t.ravel(), x.ravel())])
        return ratio_report(which, vals, rho(a - gamma, 0, t, x, a).ravel(), t, x, "rho^0_(alpha-gamma)")
    raise DomainError(f"unknown bound id {which!r}")


# ----------------------------------------------------------------------------
# 3-P inequalities


def _line_rule(centers, width):
    edges = [np.array([-1e4, 1e4])]
    off = np.geomspace(1e-7 * width, 1e4, 90)
    for c in centers:
        edges.append(c + off)
        edges.append(c - off)
    e = np.unique(np.clip(np.concatenate(edges), -1e4, 1e4))
    return panel_rule(e, 8)


def _three_terms(g1, g2, b1, b2, shift, t, r, alpha):
    return (rho(g1 + g2 + b1 + b2 - shift, 0, t, r, alpha)
            + rho(g1 + g2 + b2 - shift, b1, t, r, alpha)
            + rho(g1 + g2 + b1 - shift, b2, t, r, alpha))


def verify_3p(gammas, betas, t, x, y=0.0, alpha=1.5, kind="3p"):
    """Brute-force LHS/RHS of the space-time (3p) or space-only (3p1) convolution bound."""
    g1, g2 = gammas
    b1, b2 = betas
    if kind == "3p":
        if not (g1 + b1 > 0 and g2 + b2 > 0):
            raise DomainError("(3p) needs gamma_i + beta_i > 0")
    elif kind == "3p1":
        if not (0 <= b1 <= alpha and 0 <= b2 <= alpha):
            raise DomainError("(3p1) needs beta_i in [0, alpha]")
    else:
        raise DomainError(f"unknown inequality {kind!r}")
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    ts, xs = np.broadcast_arrays(ts, xs)
    lhs = np.empty(ts.shape)
    rhs = np.empty(ts.shape)
    for i, (ti, xi) in enumerate(zip(ts.ravel(), xs.ravel())):
        z, w = _line_rule((xi, y), ti ** (1 / alpha))
        if kind == "3p1":
            lhs.flat[i] = np.dot(w, rho(g1, b1, ti, xi - z, alpha) * rho(g2, b2, ti, z - y, alpha))
            rhs.flat[i] = _three_terms(g1, g2, b1, b2, alpha, ti, xi - y, alpha)
        else:
            def inner(s, ti=ti, xi=xi, z=z, w=w):
                return np.dot(w, rho(g1, b1, ti - s, xi - z, alpha) * rho(g2, b2, s, z - y, alpha))
            lhs.flat[i] = integrate.quad(inner, 0.0, ti, limit=200, epsrel=1e-6)[0]
            rhs.flat[i] = _three_terms(g1, g2, b1, b2, 0.0, ti, xi - y, alpha)
    rep = ratio_report(kind, lhs, rhs, ts, xs, "three-term rho form")
    rep.details = {"min_ratio": float(np.min(lhs / rhs))}
    return rep
