"""Causal Lorentz permittivity models and their time-domain kernels.

Units are natural (c = 1, hbar = 1). A medium is a sum of Lorentz terms

    eps(w) = 1 + sum_n f_n / (w_n**2 - (w + i g_n)**2)

whose susceptibility kernel is chi(t) = sum_n f_n exp(-g_n t) sin(w_n t) / w_n.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy import integrate

from .errors import PoleHitError, ValidationError

POLE_THRESHOLD = 1e-12


@dataclass(frozen=True)
class LorentzResonance:
    """One Lorentz oscillator.

    Parameters
    ----------
    f : float
        Oscillator strength (plasma frequency squared), > 0.
    omega : float
        Resonance frequency, > 0.
    gamma : float
        Damping rate, >= 0. Zero is only accepted with ``lossless=True``.
    lossless : bool
        Explicit opt-in for the undamped (Hopfield) limit.
    """

    f: float
    omega: float
    gamma: float
    lossless: bool = field(default=False, compare=False)

    def __post_init__(self):
        for name in ("f", "omega", "gamma"):
            v = getattr(self, name)
            if not isinstance(v, (int, float, np.floating, np.integer)) or isinstance(v, bool):
                raise ValidationError(f"{name} must be a real number", field=name)
            if not np.isfinite(v):
                raise ValidationError(f"{name} must be finite", field=name)
        if getattr(self, "_unchecked", False):
            return
        if self.f <= 0:
            raise ValidationError("oscillator strength f must be > 0", field="f")
        if self.omega <= 0:
            raise ValidationError("resonance omega must be > 0", field="omega")
        if self.gamma < 0:
            raise ValidationError("damping gamma must be >= 0", field="gamma")
        if self.gamma == 0 and not self.lossless:
            raise ValidationError(
                "gamma = 0 requires lossless=True (Hopfield limit)", field="gamma"
            )


def _gain_resonance(f, omega, gamma):
    # bypasses the passivity checks; only for negative tests
    r = object.__new__(LorentzResonance)
    object.__setattr__(r, "_unchecked", True)
    for k, v in (("f", float(f)), ("omega", float(omega)), ("gamma", float(gamma)), ("lossless", False)):
        object.__setattr__(r, k, v)
    return r


@dataclass(frozen=True)
class Medium:
    resonances: tuple = ()
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "resonances", tuple(self.resonances))
        for r in self.resonances:
            if not isinstance(r, LorentzResonance):
                raise ValidationError("resonances must be LorentzResonance", field="resonances")

    @property
    def is_vacuum(self):
        return len(self.resonances) == 0

    @property
    def is_lossy(self):
        """True when every resonance has gamma > 0 (and there is at least one)."""
        return bool(self.resonances) and all(r.gamma > 0 for r in self.resonances)

    @property
    def is_passive(self):
        return all(r.gamma >= 0 and r.f > 0 for r in self.resonances)

    def arrays(self):
        f = np.array([r.f for r in self.resonances], dtype=float)
        w = np.array([r.omega for r in self.resonances], dtype=float)
        g = np.array([r.gamma for r in self.resonances], dtype=float)
        return f, w, g

    def poles(self):
        """Distinct poles of eps (both signs of the real part).

        Resonances sharing omega and gamma merge into one simple pole.
        """
        out = []
        for r in self.resonances:
            for p in (complex(r.omega, -r.gamma), complex(-r.omega, -r.gamma)):
                if p not in out:
                    out.append(p)
        return np.array(out, dtype=complex)

    @property
    def max_omega(self):
        return max((r.omega for r in self.resonances), default=0.0)

    @property
    def max_gamma(self):
        return max((r.gamma for r in self.resonances), default=0.0)

    @property
    def min_gamma(self):
        return min((r.gamma for r in self.resonances), default=0.0)


def vacuum():
    return Medium((), "vacuum")


def lorentz(f=1.0, omega=1.0, gamma=0.1, label="lorentz"):
    """Single-resonance medium; gamma = 0 selects the lossless limit."""
    return Medium((LorentzResonance(f, omega, gamma, lossless=(gamma == 0)),), label)


def hopfield_medium(omega0, omegap, label="hopfield"):
    """Lossless single resonance with f = omegap**2."""
    return lorentz(omegap**2, omega0, 0.0, label)


def noncausal_test_medium(f=1.0, omega=1.0, gamma=-0.1, label="gain (test only)"):
    """Medium with negative damping. It violates passivity on purpose and
    exists only to exercise the upper-half-plane zero counter."""
    return Medium((_gain_resonance(f, omega, gamma),), label)


def _denominators(medium, w):
    f, wn, g = medium.arrays()
    w = np.asarray(w, dtype=complex)
    den = wn**2 - (w[..., None] + 1j * g) ** 2
    bad = np.abs(den) < POLE_THRESHOLD * wn**2
    if np.any(bad):
        raise PoleHitError(
            "frequency sits on a permittivity pole",
            {"omega": [complex(x) for x in np.atleast_1d(w[bad.any(axis=-1)])[:4]]},
        )
    return f, wn, g, w, den


def epsilon(medium: Medium, w):
    """Complex permittivity at (complex) frequency ``w``; vectorised."""
    if medium.is_vacuum:
        return np.ones_like(np.asarray(w, dtype=complex))
    f, _, _, _, den = _denominators(medium, w)
    return 1.0 + np.sum(f / den, axis=-1)


def depsilon(medium: Medium, w):
    """Derivative d eps / d w (analytic)."""
    if medium.is_vacuum:
        return np.zeros_like(np.asarray(w, dtype=complex))
    f, _, g, w, den = _denominators(medium, w)
    return np.sum(2 * f * (w[..., None] + 1j * g) / den**2, axis=-1)


def d2epsilon(medium: Medium, w):
    if medium.is_vacuum:
        return np.zeros_like(np.asarray(w, dtype=complex))
    f, _, g, w, den = _denominators(medium, w)
    u = w[..., None] + 1j * g
    return np.sum(2 * f / den**2 + 8 * f * u**2 / den**3, axis=-1)


def chi_time(medium: Medium, tau):
    """Susceptibility kernel chi(tau) for tau >= 0 (zero for tau < 0)."""
    tau = np.asarray(tau, dtype=float)
    if medium.is_vacuum:
        return np.zeros_like(tau)
    f, wn, g = medium.arrays()
    t = tau[..., None]
    val = np.sum(f * np.exp(-g * np.where(t > 0, t, 0.0)) * np.sin(wn * t) / wn, axis=-1)
    return np.where(tau >= 0, val, 0.0)


def sigma_of_omega(medium: Medium, w):
    """Conductivity-like bath density sigma(w) = w Im eps(w), real w > 0."""
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise ValidationError("sigma_of_omega needs w > 0", field="omega")
    return w * epsilon(medium, w).imag


def kramers_kronig_residual(medium: Medium, omega_max: float, n_points: int, targets=None):
    """Max deviation between Re eps - 1 and its Kramers-Kronig reconstruction.

    The principal-value integral (2/pi) P int_0^W w' eps''(w') / (w'^2 - w^2) dw'
    is evaluated with the trapezoid rule on ``n_points`` samples of [0, W]
    after subtracting the singular part analytically. The comparison runs on
    a fixed set of target frequencies in (0, W/4] so that residuals from
    different grid sizes are comparable.
    """
    if not medium.is_lossy:
        raise ValidationError(
            "Kramers-Kronig check needs every gamma > 0 (lossless eps'' is a distribution)",
            field="gamma",
        )
    if n_points < 256:
        raise ValidationError("n_points must be >= 256", field="n_points")
    if targets is None:
        targets = np.linspace(0.0, omega_max / 4, 201)[1:]
    targets = np.asarray(targets, dtype=float)
    grid = np.linspace(0.0, omega_max, n_points)
    h = grid[1] - grid[0]
    eps2 = epsilon(medium, grid).imag
    weights = np.full(n_points, h)
    weights[[0, -1]] = h / 2
    wp = grid * eps2
    out = np.empty_like(targets)
    for i, w in enumerate(targets):
        e2w = epsilon(medium, w).imag
        num = wp - w * e2w
        den = grid**2 - w**2
        close = np.abs(grid - w) < 1e-9 * max(w, 1.0)
        g = np.empty_like(grid)
        g[~close] = num[~close] / den[~close]
        if np.any(close):
            # limit of the difference quotient: d(w eps'')/dw / (2w)
            slope = e2w + w * depsilon(medium, w).imag
            g[close] = slope / (2 * w)
        regular = np.dot(weights, g)
        singular = w * e2w * np.log(abs((omega_max - w) / (omega_max + w))) / (2 * w)
        out[i] = 2 / np.pi * (regular + singular + _kk_tail(medium, w, omega_max))
    direct = epsilon(medium, targets).real - 1.0
    return float(np.max(np.abs(out - direct)))


def _kk_tail(medium, w, omega_max):
    # smooth contribution of (W, inf); keeps the grid error visible once the
    # grid is fine enough
    def integrand(x):
        return x * float(epsilon(medium, x).imag) / (x * x - w * w)

    val, _ = integrate.quad(integrand, omega_max, np.inf, epsabs=1e-15, epsrel=1e-12, limit=200)
    return val


# --- serialization ---------------------------------------------------------

def resonance_to_dict(r: LorentzResonance):
    d = {"f": r.f, "omega": r.omega, "gamma": r.gamma}
    if r.lossless:
        d["lossless"] = True
    return d


def medium_to_dict(m: Medium):
    return {"label": m.label, "resonances": [resonance_to_dict(r) for r in m.resonances]}


def medium_from_dict(d, prefix="medium"):
    if not isinstance(d, dict):
        raise ValidationError("medium must be a JSON object", field=prefix)
    extra = set(d) - {"label", "resonances"}
    if extra:
        raise ValidationError(f"unknown medium field(s) {sorted(extra)}", field=f"{prefix}.{sorted(extra)[0]}")
    label = d.get("label", "")
    if not isinstance(label, str):
        raise ValidationError("label must be a string", field=f"{prefix}.label")
    res = d.get("resonances")
    if not isinstance(res, list):
        raise ValidationError("resonances must be a list", field=f"{prefix}.resonances")
    out = []
    for i, rd in enumerate(res):
        p = f"{prefix}.resonances[{i}]"
        if not isinstance(rd, dict):
            raise ValidationError("resonance must be an object", field=p)
        extra = set(rd) - {"f", "omega", "gamma", "lossless"}
        if extra:
            raise ValidationError(f"unknown resonance field(s) {sorted(extra)}", field=f"{p}.{sorted(extra)[0]}")
        for k in ("f", "omega", "gamma"):
            if k not in rd:
                raise ValidationError(f"missing field {k}", field=f"{p}.{k}")
        lossless = rd.get("lossless", False)
        if not isinstance(lossless, bool):
            raise ValidationError("lossless must be a boolean", field=f"{p}.lossless")
        try:
            out.append(LorentzResonance(rd["f"], rd["omega"], rd["gamma"], lossless=lossless))
        except ValidationError as exc:
            raise ValidationError(str(exc), field=f"{p}.{exc.field}") from None
    return Medium(tuple(out), label)


def dumps_medium(m: Medium) -> str:
    return json.dumps(medium_to_dict(m), indent=2)


def loads_medium(text: str) -> Medium:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"not valid JSON: {exc}", field="medium") from None
    return medium_from_dict(d)


def load_medium(path) -> Medium:
    with open(path) as fh:
        return loads_medium(fh.read())


def save_medium(m: Medium, path):
    with open(path, "w") as fh:
        fh.write(dumps_medium(m))


# --- piecewise-constant spatial maps ---------------------------------------

@dataclass(frozen=True)
class SpatialMediumMap:
    """Uniform cubic lattice with spacing ``dx``. Cell (i, j, k) is centred at
    ``dx * (i, j, k)``. Cells missing from ``cells`` use ``background``."""

    dx: float
    background: Medium
    cells: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (isinstance(self.dx, (int, float)) and self.dx > 0 and np.isfinite(self.dx)):
            raise ValidationError("dx must be a positive number", field="dx")
        cells = {}
        for key, med in dict(self.cells).items():
            key = tuple(int(v) for v in key)
            if len(key) != 3:
                raise ValidationError("cell index must have three integers", field="cells")
            cells[key] = med
        object.__setattr__(self, "cells", cells)

    def medium_at(self, idx):
        return self.cells.get(tuple(idx), self.background)

    def indices(self):
        return sorted(self.cells)

    def centers(self):
        return np.array(self.indices(), dtype=float).reshape(-1, 3) * self.dx

    @property
    def cell_volume(self):
        return self.dx**3


def map_to_dict(smap: SpatialMediumMap):
    return {
        "dx": smap.dx,
        "background": medium_to_dict(smap.background),
        "cells": [
            {"i": i, "j": j, "k": k, "medium": medium_to_dict(smap.cells[(i, j, k)])}
            for (i, j, k) in smap.indices()
        ],
    }


def map_from_dict(d):
    if not isinstance(d, dict):
        raise ValidationError("grid must be a JSON object", field="grid")
    extra = set(d) - {"dx", "background", "cells"}
    if extra:
        raise ValidationError(f"unknown grid field(s) {sorted(extra)}", field=sorted(extra)[0])
    if "dx" not in d or not isinstance(d["dx"], (int, float)) or isinstance(d["dx"], bool):
        raise ValidationError("dx must be a number", field="dx")
    bg = medium_from_dict(d.get("background", {"label": "vacuum", "resonances": []}), "background")
    cells = {}
    for n, c in enumerate(d.get("cells", [])):
        p = f"cells[{n}]"
        if not isinstance(c, dict):
            raise ValidationError("cell must be an object", field=p)
        extra = set(c) - {"i", "j", "k", "medium"}
        if extra:
            raise ValidationError(f"unknown cell field(s) {sorted(extra)}", field=f"{p}.{sorted(extra)[0]}")
        for k in "ijk":
            if not isinstance(c.get(k), int) or isinstance(c.get(k), bool):
                raise ValidationError(f"cell index {k} must be an integer", field=f"{p}.{k}")
        key = (c["i"], c["j"], c["k"])
        if key in cells:
            raise ValidationError("duplicate cell index", field=p)
        cells[key] = medium_from_dict(c.get("medium"), f"{p}.medium")
    return SpatialMediumMap(float(d["dx"]), bg, cells)


def dumps_map(smap: SpatialMediumMap) -> str:
    return json.dumps(map_to_dict(smap), indent=2)


def loads_map(text: str) -> SpatialMediumMap:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"not valid JSON: {exc}", field="grid") from None
    return map_from_dict(d)


def slab_map(dx, medium, layers: Iterable[int], background=None):
    """Cells (0, 0, k) for k in ``layers``; a convenience for 1D slab setups."""
    return SpatialMediumMap(dx, background or vacuum(), {(0, 0, k): medium for k in layers})
