"""Scenario files: a closed-form catalog of coefficient families and its JSON schema."""

import copy
import hashlib
import json
from pathlib import Path

import numpy as np
from scipy import integrate

from .errors import DomainError
from .stable_kernel import frac_constant


class ScenarioError(DomainError):
    """Invalid scenario; `problems` lists field-level diagnostics."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


REQUIRED = ("alpha", "beta", "sigma", "kappa_tilde", "b", "zeta", "bounds", "sobolev", "q_zeta")

SIGMA_KINDS = {"constant": ("c",), "remark": ("K", "amp", "gamma", "center", "width")}
KAPPA_KINDS = {"constant": ("c",), "stable": (), "cosine": ("c", "amp")}
B_KINDS = {"zero": (), "constant": ("c",), "smoothed_indicator": ("amp", "left", "right", "width"),
           "sine": ("amp", "freq")}
ZETA_KINDS = {"zero": (), "constant": ("c",), "holder_cusp": ("scale", "center", "width"), "auto": ()}


# ----------------------------------------------------------------------------
# closed-form families (all vectorized, broadcasting x against z)


def _jump_weight(gamma):
    # |z|^gamma for |z| <= 1, 1 beyond
    return lambda z: np.minimum(np.abs(np.asarray(z, dtype=float)), 1.0) ** gamma


def _cusp_profile(amp, beta, center, width):
    def f(x):
        r = np.minimum(np.abs(np.asarray(x, dtype=float) - center), width) / width
        return amp * r ** beta
    return f


def _cusp_slope(scale, beta, center, width):
    def f(x):
        r = np.abs(np.asarray(x, dtype=float) - center)
        with np.errstate(divide="ignore"):
            val = scale * beta / width * (r / width) ** (beta - 1.0)
        return np.where(r < width, val, 0.0)
    return f


def sigma_family(kind, params, beta):
    """Returns (sigma(x,z), separable terms [(a_m(x), s_m(z)), ...])."""
    if kind == "constant":
        c = float(params["c"])
        one = lambda x: np.ones_like(np.asarray(x, dtype=float))
        const = lambda z: np.full_like(np.asarray(z, dtype=float), c)
        return (lambda x, z: c + 0.0 * (np.asarray(x, dtype=float) + np.asarray(z, dtype=float))), ((one, const),)
    if kind == "remark":
        K = float(params["K"])
        prof = _cusp_profile(float(params["amp"]), beta, float(params["center"]), float(params["width"]))
        m = _jump_weight(float(params["gamma"]))
        one = lambda x: np.ones_like(np.asarray(x, dtype=float))
        const = lambda z: np.full_like(np.asarray(z, dtype=float), K)
        return (lambda x, z: K + prof(x) * m(z)), ((one, const), (prof, m))
    raise ScenarioError([f"sigma.kind: unknown {kind!r}"])


def kappa_family(kind, params, alpha):
    if kind == "constant":
        c = float(params["c"])
        return lambda z: np.full_like(np.asarray(z, dtype=float), c)
    if kind == "stable":
        c = frac_constant(alpha)
        return lambda z: np.full_like(np.asarray(z, dtype=float), c)
    if kind == "cosine":
        c, a = float(params["c"]), float(params["amp"])
        return lambda z: c * (1.0 + a * np.cos(np.asarray(z, dtype=float)))
    raise ScenarioError([f"kappa_tilde.kind: unknown {kind!r}"])


def drift_family(kind, params):
    if kind == "zero":
        return lambda x: np.zeros_like(np.asarray(x, dtype=float)), 0.0
    if kind == "constant":
        c = float(params["c"])
        return lambda x: np.full_like(np.asarray(x, dtype=float), c), abs(c)
    if kind == "smoothed_indicator":
        amp, lo, hi, w = (float(params[k]) for k in ("amp", "left", "right", "width"))
        f = lambda x: 0.5 * amp * (np.tanh((np.asarray(x, dtype=float) - lo) / w)
                                   - np.tanh((np.asarray(x, dtype=float) - hi) / w))
        xs = np.linspace(lo - 5 * w, hi + 5 * w, 4001)
        return f, float(np.max(np.abs(f(xs))))
    if kind == "sine":
        amp, k = float(params["amp"]), float(params["freq"])
        return lambda x: amp * np.sin(k * np.asarray(x, dtype=float)), abs(amp)
    raise ScenarioError([f"b.kind: unknown {kind!r}"])


def zeta_family(kind, params, sc, kappa_tilde, alpha, beta):
    if kind == "zero":
        return lambda x: np.zeros_like(np.asarray(x, dtype=float))
    if kind == "constant":
        c = float(params["c"])
        return lambda x: np.full_like(np.asarray(x, dtype=float), c)
    if kind == "holder_cusp":
        return _cusp_slope(float(params["scale"]), beta, float(params["center"]), float(params["width"]))
    if kind == "auto":
        s = sc["sigma"]
        if s["kind"] == "constant":
            return lambda x: np.zeros_like(np.asarray(x, dtype=float))
        p = s["params"]
        m = _jump_weight(float(p["gamma"]))
        c_nu = weighted_levy_mass(lambda z: m(z) * np.minimum(np.abs(z), 1.0), kappa_tilde, alpha)
        return _cusp_slope(c_nu * float(p["amp"]), beta, float(p["center"]), float(p["width"]))
    raise ScenarioError([f"zeta.kind: unknown {kind!r}"])


def weighted_levy_mass(weight, kappa_tilde, alpha):
    """int weight(z) nu(dz) over R for an even weight."""
    f = lambda z: float(weight(z) * kappa_tilde(z)) * z ** (-1.0 - alpha)
    a = integrate.quad(f, 0.0, 1.0, limit=200)[0]
    b = integrate.quad(f, 1.0, np.inf, limit=200)[0]
    return 2.0 * (a + b)


# ----------------------------------------------------------------------------
# validation


def validate(sc):
    """Field-level schema and invariant checks; raises ScenarioError."""
    if not isinstance(sc, dict):
        raise ScenarioError(["scenario: expected a JSON object"])
    problems = [f"{k}: missing" for k in REQUIRED if k not in sc]
    if problems:
        raise ScenarioError(problems)
    for key in ("alpha", "beta", "q_zeta"):
        if not isinstance(sc[key], (int, float)) or isinstance(sc[key], bool):
            problems.append(f"{key}: expected a number")
    for key, kinds in (("sigma", SIGMA_KINDS), ("kappa_tilde", KAPPA_KINDS), ("b", B_KINDS), ("zeta", ZETA_KINDS)):
        block = sc[key]
        if not isinstance(block, dict) or "kind" not in block:
            problems.append(f"{key}: expected {{kind, params}}")
            continue
        if block["kind"] not in kinds:
            problems.append(f"{key}.kind: unknown {block['kind']!r} (choose from {sorted(kinds)})")
            continue
        params = block.get("params", {})
        for name in kinds[block["kind"]]:
            if name not in params:
                problems.append(f"{key}.params.{name}: missing")
            elif not isinstance(params[name], (int, float)):
                problems.append(f"{key}.params.{name}: expected a number")
    for name in ("k0", "k1", "kappa0", "kappa1"):
        if not isinstance(sc["bounds"], dict) or name not in sc["bounds"]:
            problems.append(f"bounds.{name}: missing")
    for name in ("theta", "p"):
        if not isinstance(sc["sobolev"], dict) or name not in sc["sobolev"]:
            problems.append(f"sobolev.{name}: missing")
    if problems:
        raise ScenarioError(problems)

    a, bt = float(sc["alpha"]), float(sc["beta"])
    if not 1.0 < a < 2.0:
        problems.append(f"alpha: {a} outside (1,2)")
    if not 0.0 < bt < 1.0:
        problems.append(f"beta: {bt} outside (0,1)")
    if not a + bt < 2.0:
        problems.append(f"beta: alpha+beta={a + bt} must be < 2")
    th, p = float(sc["sobolev"]["theta"]), float(sc["sobolev"]["p"])
    if not (1.0 - a / 2.0 < th < 1.0):
        problems.append(f"sobolev.theta: {th} outside (1-alpha/2, 1)")
    if not p > 2.0 / a:
        problems.append(f"sobolev.p: {p} must exceed 2/alpha")
    if not float(sc["q_zeta"]) > 1.0 / a:
        problems.append(f"q_zeta: {sc['q_zeta']} must exceed 1/alpha")
    bd = sc["bounds"]
    if not 0 < bd["k0"] <= bd["k1"]:
        problems.append("bounds: need 0 < k0 <= k1")
    if not 0 < bd["kappa0"] <= bd["kappa1"]:
        problems.append("bounds: need 0 < kappa0 <= kappa1")
    s = sc["sigma"]
    if s["kind"] == "remark" and not float(s["params"]["gamma"]) > a - 1.0:
        problems.append("sigma.params.gamma: must exceed alpha-1")
    if s["kind"] == "remark" and not float(s["params"]["width"]) > 0:
        problems.append("sigma.params.width: must be positive")
    if sc["b"]["kind"] == "smoothed_indicator" and not float(sc["b"]["params"]["width"]) > 0:
        problems.append("b.params.width: must be positive")
    if problems:
        raise ScenarioError(problems)


def scenario_hash(sc):
    blob = json.dumps(sc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


# ----------------------------------------------------------------------------
# shipped catalog


_HOLDER_SIGMA = {"kind": "remark", "params": {"K": 0.8, "amp": 0.6, "gamma": 0.75, "center": 0.0, "width": 1.0}}

_BASE = {
    "alpha": 1.5,
    "beta": 0.4,
    "sigma": {"kind": "constant", "params": {"c": 1.0}},
    "kappa_tilde": {"kind": "stable", "params": {}},
    "b": {"kind": "zero", "params": {}},
    "zeta": {"kind": "zero", "params": {}},
    "bounds": {"k0": 1.0, "k1": 1.0, "kappa0": 0.2992, "kappa1": 0.2993},
    "sobolev": {"theta": 0.5, "p": 4.0},
    "q_zeta": 1.0,
}


def _variant(**changes):
    sc = copy.deepcopy(_BASE)
    sc.update(copy.deepcopy(changes))
    return sc


_HOLDER_BOUNDS = {"k0": 0.8, "k1": 1.4, "kappa0": 0.2992, "kappa1": 0.2993}

CATALOG = {
    "constant": _variant(),
    "holder": _variant(sigma=_HOLDER_SIGMA, zeta={"kind": "auto", "params": {}}, bounds=_HOLDER_BOUNDS),
    "holder_drift": _variant(
        sigma=_HOLDER_SIGMA, zeta={"kind": "auto", "params": {}}, bounds=_HOLDER_BOUNDS,
        b={"kind": "smoothed_indicator", "params": {"amp": 1.0, "left": -0.5, "right": 0.5, "width": 0.2}}),
    "irregular": _variant(
        sigma=_HOLDER_SIGMA, zeta={"kind": "auto", "params": {}}, bounds=_HOLDER_BOUNDS,
        b={"kind": "smoothed_indicator", "params": {"amp": 1.0, "left": -0.5, "right": 0.5, "width": 0.02}}),
    "lipschitz": _variant(b={"kind": "sine", "params": {"amp": 1.0, "freq": 1.0}}),
    "constant_cosine": _variant(kappa_tilde={"kind": "cosine", "params": {"c": 0.3, "amp": 0.5}},
                                bounds={"k0": 1.0, "k1": 1.0, "kappa0": 0.15, "kappa1": 0.45}),
}


def load(source):
    """Scenario dict from a catalog name, a path, or a dict (validated, deep-copied)."""
    if isinstance(source, dict):
        sc = copy.deepcopy(source)
    elif isinstance(source, str) and source in CATALOG:
        sc = copy.deepcopy(CATALOG[source])
    else:
        path = Path(source)
        if not path.is_file():
            raise ScenarioError([f"scenario: file not found: {source}"])
        try:
            sc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ScenarioError([f"scenario: invalid JSON ({exc})"]) from exc
    validate(sc)
    return sc


def write_catalog(directory):
    """Write every catalog entry as <name>.json; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for name, sc in CATALOG.items():
        p = directory / f"{name}.json"
        p.write_text(json.dumps(sc, indent=2, sort_keys=True) + "\n")
        out.append(p)
    return out


def stable_kappa(alpha):
    return frac_constant(alpha)


def remark_zeta_constant(sc):
    """C_nu = int m(z)(|z| ^ 1) nu(dz) for the remark family (used by (a1) checks)."""
    fam = kappa_family(sc["kappa_tilde"]["kind"], sc["kappa_tilde"].get("params", {}), sc["alpha"])
    m = _jump_weight(float(sc["sigma"]["params"]["gamma"]))
    return weighted_levy_mass(lambda z: m(z) * np.minimum(np.abs(z), 1.0), fam, sc["alpha"])

