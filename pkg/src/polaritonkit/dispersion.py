"""Complex polariton eigenfrequencies.

Transverse roots solve w_a**2 - eps(W) W**2 = 0, longitudinal roots solve
eps(W) = 0. Only the representative with Re W > 0 is stored; its mirror
-conj(W) is implied by the Schwarz symmetry of eps.

Roots are isolated with the argument principle on a quadtree of rectangles
and polished with Newton's method. The winding number of the secular
function counts zeros minus poles, and the poles of eps are known in closed
form, so the zero count is certified without integrating f'/f.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import CountMismatchError, NumericalError, QuadratureError, ValidationError
from .medium import Medium, depsilon, epsilon

ROOT_TOL = 1e-12


@dataclass(frozen=True)
class PolaritonRoot:
    omega: complex
    D: complex
    family: str  # "transverse" | "longitudinal"
    m: int
    omega_alpha: float | None = None

    @property
    def eps(self):
        """eps at the root; exact identity (w_a / W)**2 for the transverse family."""
        if self.family == "transverse":
            return (self.omega_alpha / self.omega) ** 2
        return 0j


@dataclass(frozen=True)
class SearchRectangle:
    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def contains(self, z, pad=0.0):
        return (
            self.re_min - pad <= z.real <= self.re_max + pad
            and self.im_min - pad <= z.imag <= self.im_max + pad
        )

    @property
    def size(self):
        return max(self.re_max - self.re_min, self.im_max - self.im_min)


def default_transverse_rectangle(medium: Medium, omega_alpha: float):
    f, wn, _ = medium.arrays()
    reach = max(medium.max_omega + omega_alpha, np.sqrt(omega_alpha**2 + medium.max_omega**2 + f.sum()))
    top = 1e-2 * (medium.max_omega + omega_alpha)
    return SearchRectangle(0.0, 3 * reach, -10 * medium.max_gamma - omega_alpha, top)


def default_longitudinal_rectangle(medium: Medium):
    f, wn, _ = medium.arrays()
    reach = np.sqrt(medium.max_omega**2 + f.sum())
    top = 1e-2 * reach
    return SearchRectangle(0.0, 3 * reach, -10 * medium.max_gamma - reach, top)


# --- secular functions -----------------------------------------------------

class _Secular:
    def __init__(self, medium, omega_alpha=None):
        self.medium = medium
        self.a = None if omega_alpha is None else float(omega_alpha) ** 2
        _, self._wn, _ = medium.arrays()
        self._f = medium.arrays()[0]
        self._g = medium.arrays()[2]

    def __call__(self, z):
        e = epsilon(self.medium, z)
        if self.a is None:
            return e
        return e * z * z - self.a

    def deriv(self, z):
        de = depsilon(self.medium, z)
        if self.a is None:
            return de
        return de * z * z + 2 * epsilon(self.medium, z) * z

    def scale(self, z):
        # magnitude of the individual terms; sets the rounding floor
        z = complex(z)
        terms = 0.0
        if self._f.size:
            u = z + 1j * self._g
            den = np.abs(self._wn**2 - u**2)
            # rounding in the denominator grows like |u| (|z| + gamma + w_n) / |den| near a pole
            cond = 1.0 + 2 * np.abs(u) * (abs(z) + self._g + self._wn) / den
            terms = (np.abs(self._f) / den * cond).sum()
        if self.a is None:
            return 1.0 + terms
        return max(self.a, abs(z) ** 2 * (1.0 + terms))


# --- argument principle ----------------------------------------------------

def _edge_phase(fun, a, b, max_rounds=40):
    """Net change of arg fun along the segment a -> b, tracked adaptively."""
    t = np.linspace(0.0, 1.0, 33)
    for _ in range(max_rounds):
        vals = fun(a + (b - a) * t)
        if np.any(vals == 0) or not np.all(np.isfinite(vals)):
            raise NumericalError("secular function vanishes or blows up on the contour")
        d = np.angle(vals[1:] / vals[:-1])
        bad = np.abs(d) > np.pi / 5
        if not bad.any():
            return d.sum()
        mids = 0.5 * (t[:-1][bad] + t[1:][bad])
        if np.min(np.diff(t)[bad]) < 1e-13:
            raise NumericalError("contour passes through a zero or pole")
        t = np.sort(np.concatenate([t, mids]))
    raise NumericalError("phase tracking did not resolve the contour")


def _winding(fun, rect: SearchRectangle):
    c = [
        complex(rect.re_min, rect.im_min),
        complex(rect.re_max, rect.im_min),
        complex(rect.re_max, rect.im_max),
        complex(rect.re_min, rect.im_max),
    ]
    total = sum(_edge_phase(fun, c[i], c[(i + 1) % 4]) for i in range(4))
    w = total / (2 * np.pi)
    n = int(round(w))
    if abs(w - n) > 1e-6:
        raise NumericalError(f"non-integer winding number {w}")
    return n


def _poles_inside(medium, rect):
    return sum(1 for p in medium.poles() if rect.contains(p))


def zero_count(medium, rect: SearchRectangle, omega_alpha=None):
    """Certified number of secular zeros inside ``rect``."""
    sec = _Secular(medium, omega_alpha)
    return _winding(sec, rect) + _poles_inside(medium, rect)


def _newton(sec, z, maxit=60):
    """Polish a root; a diverged iterate comes back non-finite and the caller subdivides."""
    with np.errstate(all="ignore"):
        for _ in range(maxit):
            step = sec(z) / sec.deriv(z)
            z = z - step
            if not np.isfinite(z):
                return complex(np.nan, np.nan)
            if abs(step) <= 4e-16 * max(abs(z), 1e-300):
                break
        # a couple of extra sweeps pin the rounding floor
        for _ in range(2):
            d = sec.deriv(z)
            if d != 0:
                z = z - sec(z) / d
    return complex(z)


def _split(rect, ratio=0.5 + 0.0173):
    xm = rect.re_min + ratio * (rect.re_max - rect.re_min)
    ym = rect.im_min + (1 - ratio) * (rect.im_max - rect.im_min)
    return [
        SearchRectangle(rect.re_min, xm, rect.im_min, ym),
        SearchRectangle(xm, rect.re_max, rect.im_min, ym),
        SearchRectangle(rect.re_min, xm, ym, rect.im_max),
        SearchRectangle(xm, rect.re_max, ym, rect.im_max),
    ]


def _isolate(sec, medium, rect, count, min_size, out, depth=0):
    if count == 0:
        return
    if count == 1 and (rect.size < min_size * 64 or depth > 6):
        z0 = complex(0.5 * (rect.re_min + rect.re_max), 0.5 * (rect.im_min + rect.im_max))
        z = _newton(sec, z0)
        if not rect.contains(z, pad=1e-9 * max(1.0, abs(z))):
            # Newton left the cell; refine further before trying again
            if rect.size < min_size:
                raise CountMismatchError("Newton iteration escaped an isolating rectangle",
                                         {"rectangle": rect.__dict__, "z": str(z)})
        else:
            out.append(z)
            return
    if rect.size < min_size:
        raise CountMismatchError("could not separate roots (multiple root?)",
                                 {"rectangle": rect.__dict__, "count": count})
    children = _split(rect)
    counts = []
    for ch in children:
        try:
            counts.append(_winding(sec, ch) + _poles_inside(medium, ch))
        except NumericalError:
            # a subdivision line hit a zero or pole: shift it
            children = _split(rect, ratio=0.5 - 0.0311 * (1 + depth % 3))
            counts = [_winding(sec, c) + _poles_inside(medium, c) for c in children]
            break
    if sum(counts) != count:
        raise CountMismatchError("subdivision counts disagree with the parent count",
                                 {"parent": count, "children": counts})
    for ch, n in zip(children, counts):
        _isolate(sec, medium, ch, n, min_size, out, depth + 1)


def _find(medium, rect, omega_alpha):
    sec = _Secular(medium, omega_alpha)
    total = _winding(sec, rect) + _poles_inside(medium, rect)
    found = []
    _isolate(sec, medium, rect, total, 1e-9 * rect.size, found)
    roots = []
    for z in found:
        if any(abs(z - r) <= 1e-9 * max(1.0, abs(z)) for r in roots):
            continue
        roots.append(z)
    if len(roots) != total:
        raise CountMismatchError("polished roots do not match the argument-principle count",
                                 {"count": total, "found": [str(z) for z in roots]})
    for z in roots:
        res = abs(sec(z))
        if res > ROOT_TOL * sec.scale(z):
            raise CountMismatchError("root failed the residual check",
                                     {"root": str(z), "residual": float(res)})
    return sorted(roots, key=lambda z: (z.real, z.imag))


def transverse_roots(medium: Medium, omega_alpha: float, search: SearchRectangle | None = None):
    """All transverse polariton roots with Re W > 0 inside ``search``.

    Parameters
    ----------
    medium : Medium
    omega_alpha : float
        Photon mode frequency |k| (c = 1), must be positive.
    search : SearchRectangle, optional
        Defaults to ``default_transverse_rectangle``. Its top edge sits a
        little above the real axis so that lossless (real) roots are enclosed.

    Returns
    -------
    list of PolaritonRoot
        Sorted by Re W. ``D = d(w sqrt(eps))/dw`` at the root, with the
        branch fixed by W sqrt(eps(W)) = +omega_alpha.

    Raises
    ------
    CountMismatchError
        If polishing loses or merges roots relative to the certified count.
    """
    if not (omega_alpha > 0):
        raise ValidationError("omega_alpha must be > 0", field="omega_alpha")
    omega_alpha = float(omega_alpha)
    if medium.is_vacuum:
        return [PolaritonRoot(complex(omega_alpha, -0.0), 1 + 0j, "transverse", 0, omega_alpha)]
    rect = search or default_transverse_rectangle(medium, omega_alpha)
    out = []
    for m, z in enumerate(_find(medium, rect, omega_alpha)):
        out.append(PolaritonRoot(z, transverse_D(medium, z, omega_alpha), "transverse", m, omega_alpha))
    return out


def transverse_D(medium, z, omega_alpha):
    s = omega_alpha / z  # sqrt(eps) on the branch with z sqrt(eps) = +omega_alpha
    return complex(s + z * depsilon(medium, z) / (2 * s))


def longitudinal_roots(medium: Medium, search: SearchRectangle | None = None):
    """Zeros of eps with Re W > 0; ``D`` holds d eps / dw at each zero."""
    if medium.is_vacuum:
        return []
    rect = search or default_longitudinal_rectangle(medium)
    return [
        PolaritonRoot(z, complex(depsilon(medium, z)), "longitudinal", m, None)
        for m, z in enumerate(_find(medium, rect, None))
    ]


def root_symmetry_check(roots, medium: Medium):
    """Worst relative secular residual at the mirror points -conj(W)."""
    worst = 0.0
    for r in roots:
        z = -np.conj(r.omega)
        if r.family == "transverse":
            sec = _Secular(medium, r.omega_alpha)
        else:
            sec = _Secular(medium, None)
        worst = max(worst, abs(sec(z)) / sec.scale(z))
    return float(worst)


def upper_half_zero_count(medium: Medium, omega_alpha: float, radius: float, min_distance=1e-8):
    """Number of zeros of Z(w) - w_a**2, Z = eps w**2, in the upper half plane.

    Integrates Z'/(Z - a) along [-R, R] and the upper semicircle with adaptive
    quadrature. The winding number counts zeros minus poles; poles of eps in
    the upper half plane (only present for non-passive test media) are added
    back so that the return value is the zero count.
    """
    if not (omega_alpha > 0):
        raise ValidationError("omega_alpha must be > 0", field="omega_alpha")
    sec = _Secular(medium, omega_alpha)
    a = sec.a
    R = float(radius)

    def g(z):
        return complex(sec.deriv(z) / sec(z))

    # proximity check before integrating
    probe = np.concatenate([np.linspace(-R, R, 20001), R * np.exp(1j * np.linspace(0, np.pi, 4001))])
    if np.min(np.abs(sec(probe))) < min_distance * a:
        raise QuadratureError("contour passes too close to a zero of the secular function")

    pts = sorted({p for r in medium.resonances for p in (r.omega, -r.omega) if abs(p) < R})
    opts = dict(limit=2000, epsabs=1e-11, epsrel=1e-11)

    def real_part(x):
        return g(x).real

    def imag_part(x):
        return g(x).imag

    line = 0j
    for lo, hi in ((-R, 0.0), (0.0, R)):
        inner = [p for p in pts if lo < p < hi] or None
        re, e1 = integrate.quad(real_part, lo, hi, points=inner, **opts)
        im, e2 = integrate.quad(imag_part, lo, hi, points=inner, **opts)
        line += re + 1j * im

    def arc(theta, part):
        z = R * np.exp(1j * theta)
        v = g(z) * 1j * z
        return v.real if part == 0 else v.imag

    are, _ = integrate.quad(arc, 0, np.pi, args=(0,), **opts)
    aim, _ = integrate.quad(arc, 0, np.pi, args=(1,), **opts)
    total = (line + are + 1j * aim) / (2j * np.pi)
    n = int(round(total.real))
    if abs(total.real - n) > 1e-3 or abs(total.imag) > 1e-3:
        raise QuadratureError(f"winding integral did not converge to an integer: {total}")
    upper_poles = sum(1 for p in medium.poles() if p.imag > 0 and abs(p) < R)
    return n + upper_poles
