"""Weak-loss quasi modes: windowed commutator integrals and group-velocity factors.

In a weakly absorbing medium the spectral weight of a transverse mode,
(1/pi) w**4 eps''(w) / |w_a**2 - eps(w) w**2|**2, concentrates into narrow
peaks around the polariton frequencies. Integrating one peak over a window
gives (Omega/2) dOmega**2/dw_a**2, independent of the window. The longitudinal
analog (1/pi) eps''/|eps|**2 integrates to 1/|d eps'/dw| at a zero of eps'.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dispersion import longitudinal_roots, transverse_roots
from .errors import QuadratureError, ValidationError, WindowViolationError
from .medium import Medium, depsilon, epsilon

WINDOW_LINEWIDTHS = 1000.0
MIN_RELATIVE_WIDTH = 1e-3
EDGE_FRACTION = 0.1
EDGE_MASS_LIMIT = 0.01

# Gauss-Kronrod 7/15 rule on [-1, 1]
_XK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
_WK_FULL = np.concatenate([_WK[:-1], _WK[::-1]])
_WG_FULL = np.zeros(15)
_WG_FULL[1:14:2] = np.concatenate([_WG[:-1], _WG[::-1]])


def _gk15(f, a, b):
    """Kronrod estimate and error estimate for each interval in (a, b) arrays."""
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    x = c[:, None] + h[:, None] * _NODES[None, :]
    fx = f(x)
    k = h * (fx @ _WK_FULL)
    g = h * (fx @ _WG_FULL)
    return k, np.abs(k - g)


def adaptive_gauss_kronrod(f, breakpoints, rtol=1e-10, atol=0.0, max_intervals=20000):
    """Integrate a vectorized ``f`` over [breakpoints[0], breakpoints[-1]].

    Stops once the summed error estimate meets the tolerance; otherwise
    intervals whose error estimate exceeds their share of it are bisected.
    The initial breakpoints let the caller grade panels toward a sharp peak.

    Returns
    -------
    (value, error_estimate, n_intervals)
    """
    bp = np.unique(np.asarray(breakpoints, dtype=float))
    if bp.size < 2:
        raise ValidationError("need at least two distinct breakpoints", field="breakpoints")
    a, b = bp[:-1], bp[1:]
    done_val, done_err = 0.0, 0.0
    total_len = bp[-1] - bp[0]
    n_used = a.size
    while a.size:
        val, err = _gk15(f, a, b)
        estimate = done_val + val.sum()
        tol = max(atol, rtol * abs(estimate))
        if done_err + err.sum() <= tol:
            done_val += val.sum()
            done_err += err.sum()
            break
        ok = err <= tol * (b - a) / total_len
        done_val += val[ok].sum()
        done_err += err[ok].sum()
        a, b = a[~ok], b[~ok]
        if not a.size:
            break
        n_used += a.size
        if n_used > max_intervals:
            raise QuadratureError("adaptive quadrature did not converge",
                                  {"intervals": int(n_used), "error": float(done_err + err[~ok].sum())})
        m = 0.5 * (a + b)
        a, b = np.concatenate([a, m]), np.concatenate([m, b])
    return float(done_val), float(done_err), int(n_used)


@dataclass(frozen=True)
class FrequencyWindow:
    center: float
    half_width: float
    shape: str = "hard"
    linewidth: float = 0.0

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValidationError("window half-width must be > 0", field="half_width")
        if self.center - self.half_width <= 0:
            raise ValidationError("window must lie on the positive frequency axis", field="center")
        if self.shape not in ("hard", "tukey"):
            raise ValidationError(f"unknown window shape {self.shape!r}", field="shape")

    @property
    def lower(self):
        return self.center - self.half_width

    @property
    def upper(self):
        return self.center + self.half_width

    def weight(self, w):
        w = np.asarray(w, dtype=float)
        inside = (w >= self.lower) & (w <= self.upper)
        if self.shape == "hard":
            return inside.astype(float)
        # cos**2 taper over the outer edge bands
        u = np.abs(w - self.center) / self.half_width
        edge = 1 - EDGE_FRACTION
        taper = np.where(u <= edge, 1.0, np.cos(0.5 * np.pi * (u - edge) / EDGE_FRACTION) ** 2)
        return np.where(inside, taper, 0.0)

    def scaled(self, factor):
        return FrequencyWindow(self.center, self.half_width * factor, self.shape, self.linewidth)

    def breakpoints(self, n_grade=12):
        """Panel edges graded geometrically toward the center."""
        lw = self.linewidth if self.linewidth > 0 else self.half_width * 1e-3
        steps = lw * np.geomspace(1, max(self.half_width / lw, 1.0), n_grade)
        steps = steps[steps < self.half_width]
        pts = np.concatenate([[self.lower, self.upper], self.center - steps, self.center + steps,
                              [self.center]])
        if self.shape == "tukey":
            d = (1 - EDGE_FRACTION) * self.half_width
            pts = np.concatenate([pts, [self.center - d, self.center + d]])
        return np.unique(pts)


def default_window(root_omega, shape="hard"):
    """Window around a complex root: half-width 1000 full linewidths, floored at 5e-4 Re."""
    center = float(root_omega.real)
    if center <= 0:
        raise ValidationError("window center must be positive", field="center")
    linewidth = 2 * abs(root_omega.imag)
    delta = max(WINDOW_LINEWIDTHS * linewidth, MIN_RELATIVE_WIDTH * center)
    half = 0.5 * delta
    if half >= center:
        raise ValidationError("loss too large for a quasi-mode window", field="gamma")
    return FrequencyWindow(center, half, shape, linewidth)


def transverse_density(medium: Medium, omega_alpha, w):
    """(1/pi) w**4 eps''(w) / |w_a**2 - eps(w) w**2|**2 for real w."""
    w = np.asarray(w, dtype=float)
    eps = epsilon(medium, w)
    return w**4 * eps.imag / np.abs(omega_alpha**2 - eps * w * w) ** 2 / np.pi


def longitudinal_density(medium: Medium, w):
    eps = epsilon(medium, np.asarray(w, dtype=float))
    return eps.imag / np.abs(eps) ** 2 / np.pi


def _windowed_integral(density, window: FrequencyWindow, rtol, check_edges=True):
    def f(x):
        return density(x) * window.weight(x)

    total, err, _ = adaptive_gauss_kronrod(f, window.breakpoints(), rtol=rtol)
    if not check_edges:
        return total
    if not total > 0:
        raise WindowViolationError("window carries no spectral weight",
                                   {"center": window.center, "integral": total})
    band = EDGE_FRACTION * window.half_width
    edges = 0.0
    for lo, hi in ((window.lower, window.lower + band), (window.upper - band, window.upper)):
        edges += adaptive_gauss_kronrod(f, [lo, hi], rtol=1e-6, atol=1e-14 * total)[0]
    if edges > EDGE_MASS_LIMIT * total:
        raise WindowViolationError("integrand mass near the window edges exceeds 1%",
                                   {"center": window.center, "edge_fraction": edges / total})
    return total


def transverse_commutator_integral(medium: Medium, omega_alpha, window: FrequencyWindow, rtol=1e-10,
                                   check_edges=True):
    """Windowed transverse spectral weight.

    Parameters
    ----------
    medium : Medium
        A passive, weakly lossy medium.
    omega_alpha : float
    window : FrequencyWindow
        Should contain exactly one polariton peak; see ``default_window``.
    check_edges : bool
        Reject windows whose edge bands carry more than 1% of the mass.

    Returns
    -------
    float
        Approximates (Omega/2) dOmega**2/dw_a**2 at the enclosed polariton.

    Raises
    ------
    WindowViolationError
        If more than 1% of the windowed mass sits in the outer 10% bands.
    """
    if not medium.is_lossy:
        raise ValidationError("commutator integrals need a lossy medium", field="medium")
    return _windowed_integral(lambda x: transverse_density(medium, omega_alpha, x), window, rtol, check_edges)


def longitudinal_commutator_integral(medium: Medium, window: FrequencyWindow, rtol=1e-10,
                                     check_edges=True):
    if not medium.is_lossy:
        raise ValidationError("commutator integrals need a lossy medium", field="medium")
    return _windowed_integral(lambda x: longitudinal_density(medium, x), window, rtol, check_edges)


@dataclass
class GroupVelocityFactor:
    omega: float
    factor: float          # dOmega**2 / dw_a**2
    brillouin: float       # d(Omega eps')/dOmega + w_a**2/Omega**2
    index: float           # n = sqrt(eps')
    group_velocity: float

    @property
    def identity_residual(self):
        """Brillouin coefficient minus 2 n / v_g."""
        return self.brillouin - 2 * self.index / self.group_velocity


def group_velocity_factor(medium: Medium, omega) -> GroupVelocityFactor:
    """dOmega**2/dw_a**2 along the real-part dispersion w_a**2 = eps'(Omega) Omega**2.

    The group velocity is computed independently from n = sqrt(eps') as
    v_g = 1 / (n + Omega dn/dOmega), so that ``identity_residual`` is a check.
    """
    w = float(omega)
    e1 = float(epsilon(medium, w).real)
    de1 = float(depsilon(medium, w).real)
    if e1 <= 0:
        raise ValidationError("eps' <= 0: no propagating transverse mode at this frequency",
                              field="omega")
    factor = 2 * w / (de1 * w * w + 2 * w * e1)
    wa2 = e1 * w * w
    brillouin = e1 + w * de1 + wa2 / (w * w)
    n = np.sqrt(e1)
    vg = 1.0 / (n + w * de1 / (2 * n))
    return GroupVelocityFactor(w, factor, brillouin, float(n), float(vg))


def transverse_target(medium: Medium, omega):
    return 0.5 * omega * group_velocity_factor(medium, omega).factor


def longitudinal_target(medium: Medium, omega):
    return 1.0 / abs(float(depsilon(medium, float(omega)).real))


@dataclass
class QuasiModeResult:
    omega_alpha: float | None
    branch: int
    root: complex
    window: FrequencyWindow
    integral: float
    target: float

    @property
    def rel_err(self):
        return abs(self.integral - self.target) / abs(self.target)


def transverse_quasimodes(medium: Medium, omega_alpha, width_factor=1.0, shape="hard"):
    """Integral and target for every positive-frequency transverse peak, lowest first."""
    roots = sorted((r for r in transverse_roots(medium, omega_alpha) if r.omega.real > 0),
                   key=lambda r: r.omega.real)
    out = []
    for m, r in enumerate(roots):
        win = default_window(r.omega, shape).scaled(width_factor)
        val = transverse_commutator_integral(medium, omega_alpha, win)
        out.append(QuasiModeResult(omega_alpha, m, r.omega, win, val,
                                   transverse_target(medium, win.center)))
    return out


def longitudinal_quasimodes(medium: Medium, width_factor=1.0, shape="hard"):
    roots = sorted((r for r in longitudinal_roots(medium) if r.omega.real > 0),
                   key=lambda r: r.omega.real)
    out = []
    for m, r in enumerate(roots):
        win = default_window(r.omega, shape).scaled(width_factor)
        val = longitudinal_commutator_integral(medium, win)
        out.append(QuasiModeResult(None, m, r.omega, win, val, longitudinal_target(medium, win.center)))
    return out


def quasimode_energy(populations, frequencies):
    """Total energy sum Omega |f|**2 (hbar = 1) for mode populations |f|**2."""
    pop = np.asarray(populations, dtype=float)
    om = np.broadcast_to(np.asarray(frequencies, dtype=float), pop.shape)
    if np.any(pop < 0):
        raise ValidationError("populations must be non-negative", field="populations")
    return float(np.sum(om * pop))
