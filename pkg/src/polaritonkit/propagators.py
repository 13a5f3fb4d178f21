"""Modal propagators H and U.

For a transverse mode of frequency w_a the source-response propagator is

    H(t) = int dw/2pi exp(-i w t) / (w_a**2 - eps(w) w**2)

and U has an extra factor eps(w) in the numerator. Both are causal, so the
integral can be closed in the lower half plane and written as a residue sum
over the polariton roots. A damped FFT along a shifted line gives the
independent numerical route.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import AliasingError, BranchError, IncompleteRootSetError, ValidationError
from .medium import Medium, epsilon

SUM_RULE_TOL = 1e-8


@dataclass
class PropagatorCurve:
    tau: np.ndarray
    values: np.ndarray
    kind: str

    @property
    def step(self):
        return float(self.tau[1] - self.tau[0]) if self.tau.size > 1 else 0.0


def _coefficients(roots, omega_alpha, kind):
    z = np.array([r.omega for r in roots], dtype=complex)
    D = np.array([r.D for r in roots], dtype=complex)
    c = -1.0 / (2j * omega_alpha * D)
    if kind == "U":
        c = c * (omega_alpha / z) ** 2
    elif kind != "H":
        raise ValidationError(f"unknown propagator kind {kind!r}", field="kind")
    return z, c


def residue_sum(roots, omega_alpha, tau, kind="H", derivative=0):
    """Residue expansion of H or U (or a time derivative of it).

    Each root W contributes c exp(-i W t) plus its complex conjugate, the
    conjugate being the contribution of the mirror root -conj(W).
    Samples at t < 0 are zero.
    """
    tau = np.asarray(tau, dtype=float)
    z, c = _coefficients(roots, omega_alpha, kind)
    c = c * (-1j * z) ** derivative
    t = np.where(tau > 0, tau, 0.0)[..., None]
    terms = c * np.exp(-1j * z * t)
    val = 2 * terms.sum(axis=-1).real
    if derivative == 0:
        return np.where(tau >= 0, val, 0.0)
    return np.where(tau > 0, val, np.where(tau == 0, val, 0.0))


def h_residue(roots, omega_alpha, tau, check=True):
    if check:
        check_sum_rules(roots, omega_alpha)
    return residue_sum(roots, omega_alpha, tau, "H")


def u_residue(roots, omega_alpha, tau, check=True):
    if check:
        check_sum_rules(roots, omega_alpha)
    return residue_sum(roots, omega_alpha, tau, "U")


def du_residue(roots, omega_alpha, tau, check=True):
    """dU/dt; equals 1 at t = 0+ for a complete root set."""
    if check:
        check_sum_rules(roots, omega_alpha)
    return residue_sum(roots, omega_alpha, tau, "U", derivative=1)


def delta_chi_mode(roots, omega_alpha, tau):
    """Per-mode retarded kernel c**2 H(t) with c = 1."""
    return h_residue(roots, omega_alpha, tau)


def sum_rule_im(roots, omega_alpha):
    return float(sum((1 / r.D).imag for r in roots) / omega_alpha)


def sum_rule_re(roots, omega_alpha):
    return float(sum((r.eps * r.omega / r.D).real for r in roots) / omega_alpha)


def check_sum_rules(roots, omega_alpha, tol=SUM_RULE_TOL):
    im = sum_rule_im(roots, omega_alpha)
    re = sum_rule_re(roots, omega_alpha)
    if abs(im) > tol or abs(re - 1) > tol:
        raise IncompleteRootSetError(
            "root set fails the sum rules",
            {"omega_alpha": omega_alpha, "im_sum": im, "re_sum": re, "n_roots": len(roots)},
        )
    return im, re


# --- damped FFT (Bromwich) oracle -----------------------------------------

def _bromwich_grid(medium, omega_alpha, n, gamma_shift, width):
    if gamma_shift is None:
        gamma_shift = medium.min_gamma / 4 if medium.is_lossy else 0.05 * omega_alpha
    if gamma_shift <= 0:
        raise ValidationError("gamma_shift must be > 0", field="gamma_shift")
    if width is None:
        width = 4000.0 * max(1.0, omega_alpha, medium.max_omega)
        # periodic replicas are suppressed by exp(-gamma_shift * T), T = 2 pi n / width
        width = min(width, 2 * np.pi * n * gamma_shift / 40)
    dw = width / n
    if medium.is_lossy and dw > medium.min_gamma / 8:
        raise ValidationError("frequency grid too coarse for the narrowest resonance "
                              "(increase n or reduce width)", field="n")
    return gamma_shift, dw


def bromwich_samples(medium, omega_alpha, kind="H", n=2**20, gamma_shift=None, width=None,
                     anticausal=False):
    """Raw FFT samples of the propagator on its native time grid.

    Returns ``(tau, values)`` with tau spanning [-T/2, T/2), T = 2 pi / dw.
    The vacuum propagator 1/(w_a**2 - w**2) is subtracted before the
    transform and added back analytically, which removes the slowly
    decaying 1/w**2 tail; only the medium correction goes through the FFT.
    With ``anticausal=True`` the kernel is built from eps* (continued into
    the lower half plane) and the inversion line is shifted downwards.
    """
    gs, dw = _bromwich_grid(medium, omega_alpha, n, gamma_shift, width)
    k = np.fft.fftfreq(n, d=1.0 / n)
    sign = -1.0 if anticausal else 1.0
    w = k * dw + 1j * sign * gs
    if anticausal:
        eps = np.conj(epsilon(medium, np.conj(w)))
    else:
        eps = epsilon(medium, w)
    a = omega_alpha**2
    full = 1.0 / (a - eps * w * w)
    if kind == "U":
        full = eps * full
    elif kind != "H":
        raise ValidationError(f"unknown propagator kind {kind!r}", field="kind")
    diff = full - 1.0 / (a - w * w)
    vals = np.fft.fft(diff) * dw / (2 * np.pi)
    dt = 2 * np.pi / (n * dw)
    idx = np.arange(n)
    idx = np.where(idx < n // 2, idx, idx - n)
    tau = idx * dt
    vals = (vals * np.exp(sign * gs * tau)).real
    order = np.argsort(tau)
    tau, vals = tau[order], vals[order]
    free = np.sin(omega_alpha * tau) / omega_alpha
    if anticausal:
        vals = vals + np.where(tau <= 0, -free, 0.0)
    else:
        vals = vals + np.where(tau >= 0, free, 0.0)
    return tau, vals


def h_numeric(medium: Medium, omega_alpha, tau, gamma_shift=None, n=2**20, kind="H", width=None):
    """Propagator by numerical Bromwich inversion, interpolated onto ``tau``.

    Parameters
    ----------
    medium : Medium
    omega_alpha : float
    tau : array_like
        Sample times; negative times probe causality.
    gamma_shift : float, optional
        Distance of the inversion line above the real axis. Defaults to a
        quarter of the smallest damping rate.
    n : int
        FFT length.
    kind : {"H", "U"}

    Returns
    -------
    PropagatorCurve

    Raises
    ------
    AliasingError
        If |tau| reaches beyond half of the periodic inversion window.
    """
    tau = np.asarray(tau, dtype=float)
    t_all, v_all = bromwich_samples(medium, omega_alpha, kind, n, gamma_shift, width)
    half = -t_all[0]
    if tau.size and np.max(np.abs(tau)) >= 0.5 * half:
        raise AliasingError("requested times exceed the inversion window",
                            {"max_tau": float(np.max(np.abs(tau))), "window": float(2 * half)})
    values = np.zeros_like(tau)
    # splines on each side of t = 0, where dH/dt jumps
    for mask, side in ((tau >= 0, t_all >= 0), (tau < 0, t_all <= 0)):
        if np.any(mask):
            lo, hi = tau[mask].min(), tau[mask].max()
            dt = t_all[1] - t_all[0]
            sel = side & (t_all >= lo - 8 * dt) & (t_all <= hi + 8 * dt)
            values[mask] = CubicSpline(t_all[sel], v_all[sel])(tau[mask])
    return PropagatorCurve(tau, values, kind)


def anticausal_kernel(medium, omega_alpha, kind="H", n=2**18, width=None, gamma_shift=None):
    """Time-reversed kernel built from eps*, on the FFT grid."""
    return bromwich_samples(medium, omega_alpha, kind, n, gamma_shift, width, anticausal=True)


# --- scalar Green function -------------------------------------------------

def wavenumber(medium, w):
    """w sqrt(eps(w)) on the branch with Im >= 0 (outgoing for real w)."""
    w = np.asarray(w, dtype=complex)
    eps = epsilon(medium, w)
    k = w * np.sqrt(eps)
    flip = (k.imag < 0) | ((k.imag == 0) & (k.real * w.real < 0))
    k = np.where(flip, -k, k)
    if np.any(k == 0) and np.any(w != 0):
        raise BranchError("eps vanishes; the wavenumber branch is undefined")
    return k


def scalar_green(medium: Medium, R, w):
    """exp(i k R) / (4 pi R) with k = w sqrt(eps) on the decaying branch."""
    R = np.asarray(R, dtype=float)
    if np.any(R <= 0):
        raise ValidationError("R must be > 0", field="R")
    k = wavenumber(medium, w)
    return np.exp(1j * k * R) / (4 * np.pi * R)
