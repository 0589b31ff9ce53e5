"""Composite Gauss-Legendre rules used by the Fourier engines."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def _gl(n):
    return np.polynomial.legendre.leggauss(n)


def panel_rule(edges, n=16):
    """Nodes and weights of an n-point Gauss-Legendre rule on each panel."""
    edges = np.asarray(edges, dtype=float)
    u, w = _gl(n)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + half * (u[None, :] + 1.0)).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights


def frequency_rule(xi_max, r_max, n=16, grade_min=1e-7, grade_ratio=0.2):
    """Rule on [0, xi_max] for integrands of the form g(xi) cos(xi r), |r| <= r_max.

    Panels are geometrically graded towards 0, where the symbols have an
    |xi|^alpha cusp, and have width <= ~pi/r_max elsewhere so that the
    oscillation is resolved with ~5 nodes per wavelength.
    """
    width = min(1.0, 3.0 * np.pi / max(r_max, 1e-12))
    g = [0.0]
    a = grade_min
    first = min(width, xi_max)
    while a < first:
        g.append(a)
        a /= grade_ratio
    start = g[-1] if len(g) > 1 else 0.0
    m = max(1, int(np.ceil((xi_max - start) / width)))
    uniform = np.linspace(start, xi_max, m + 1)
    edges = np.concatenate([np.asarray(g), uniform[1:]])
    edges = np.unique(edges)
    return panel_rule(edges, n)


def half_line_rule(z_min, z_max, per_decade=6, n=12):
    """Rule on [z_min, z_max] with log-spaced panels (for power-law integrands)."""
    k = max(1, int(np.ceil(per_decade * np.log10(z_max / z_min))))
    return panel_rule(np.geomspace(z_min, z_max, k + 1), n)
