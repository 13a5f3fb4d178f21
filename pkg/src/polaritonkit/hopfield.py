"""Exact diagonalization of the lossless single-resonance (Hopfield) model.

Each transverse mode of frequency w_a carries four real amplitudes
(E, B, P, dP/dt) obeying

    dB/dt = -w_a E,    dD/dt = w_a B,    D = E + P,
    d2P/dt2 + w0**2 P = wp**2 E,

with energy (B**2 + E**2)/2 + ((dP/dt)**2 + w0**2 P**2)/(2 wp**2). Longitudinal
modes have E = -P, so P oscillates at w_L = sqrt(w0**2 + wp**2).
These are exactly the per-mode equations of the time-domain simulator with a
single bath line (P = wp X).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .medium import hopfield_medium


@dataclass(frozen=True)
class HopfieldMedium:
    omega0: float
    omegap: float

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValidationError("omega0 must be > 0", field="omega0")
        if not self.omegap > 0:
            raise ValidationError("omegap must be > 0", field="omegap")

    @property
    def omega_L(self):
        return float(np.hypot(self.omega0, self.omegap))

    def epsilon(self, w):
        return 1 + self.omegap**2 / (self.omega0**2 - np.asarray(w, dtype=complex) ** 2)

    def as_medium(self):
        return hopfield_medium(self.omega0, self.omegap)


def hopfield_frequencies(omega_alpha, medium: HopfieldMedium):
    """Upper and lower polariton frequencies and the longitudinal frequency.

    Returns
    -------
    (Omega_plus, Omega_minus, omega_L)
        The lower branch uses Omega_-^2 = w_a^2 w0^2 / Omega_+^2, which avoids
        cancellation when w_a is small.
    """
    wa = np.asarray(omega_alpha, dtype=float)
    if np.any(wa <= 0):
        raise ValidationError("omega_alpha must be > 0", field="omega_alpha")
    wl2 = medium.omega0**2 + medium.omegap**2
    s = wa**2 + wl2
    disc = np.sqrt(s * s - 4 * wa**2 * medium.omega0**2)
    up2 = 0.5 * (s + disc)
    lo2 = wa**2 * medium.omega0**2 / up2
    return np.sqrt(up2), np.sqrt(lo2), np.sqrt(wl2)


def secular_residual(Omega, omega_alpha, medium: HopfieldMedium):
    """Relative residual |w_a^2 - Omega^2 eps(Omega)| / w_a^2."""
    Omega = np.asarray(Omega, dtype=float)
    return np.abs(omega_alpha**2 - Omega**2 * medium.epsilon(Omega).real) / omega_alpha**2


def eigenvector(Omega, omega_alpha, medium: HopfieldMedium):
    """Complex (E, B, P, dP/dt) pattern of the mode exp(-i Omega t), E = 1."""
    Omega = np.asarray(Omega, dtype=float)
    p = medium.omegap**2 / (medium.omega0**2 - Omega**2)
    ones = np.ones_like(Omega)
    return np.stack([ones + 0j, -1j * omega_alpha / Omega * ones, p + 0j, -1j * Omega * p], -1)


def energy_weight(Omega, omega_alpha, medium: HopfieldMedium):
    """Coefficient N with H = N |phi|^2 for one normal mode."""
    r = (omega_alpha**2 / np.asarray(Omega) ** 2 - 1) ** 2
    return 2 * (1 + medium.omega0**2 / medium.omegap**2 * r)


def ladder_factor(Omega, omega_alpha, medium: HopfieldMedium):
    """Factor c with phi = c f such that the mode energy is Omega |f|^2 (hbar = 1)."""
    return np.sqrt(np.asarray(Omega) / energy_weight(Omega, omega_alpha, medium))


def longitudinal_ladder_factor(medium: HopfieldMedium):
    """Factor with beta = c f such that the longitudinal energy is w_L |f|^2."""
    return medium.omegap / np.sqrt(2 * medium.omega_L)


@dataclass
class PolaritonAmplitudes:
    phi_plus: np.ndarray
    phi_minus: np.ndarray
    beta: np.ndarray | None = None

    def evolve(self, t, omega_alpha, medium: HopfieldMedium):
        up, lo, wl = hopfield_frequencies(omega_alpha, medium)
        beta = None if self.beta is None else self.beta * np.exp(-1j * wl * t)
        return PolaritonAmplitudes(self.phi_plus * np.exp(-1j * up * t),
                                   self.phi_minus * np.exp(-1j * lo * t), beta)


def _transform_matrix(omega_alpha, medium):
    up, lo, _ = hopfield_frequencies(omega_alpha, medium)
    if np.any(np.isclose(up, lo, rtol=1e-14, atol=0)):
        raise NumericalError("degenerate polariton branches; the transform is singular")
    vp = eigenvector(up, omega_alpha, medium)
    vm = eigenvector(lo, omega_alpha, medium)
    # fields = 2 Re(phi+ v+ + phi- v-) = T @ (Re phi+, Im phi+, Re phi-, Im phi-)
    return 2 * np.stack([vp.real, -vp.imag, vm.real, -vm.imag], -1)


def hopfield_transform(fields, omega_alpha, medium: HopfieldMedium, longitudinal=None):
    """Normal-mode amplitudes from raw transverse fields.

    Parameters
    ----------
    fields : array_like, shape (..., 4)
        Real (E, B, P, dP/dt) per transverse mode.
    omega_alpha : float or array_like, shape (...)
    medium : HopfieldMedium
    longitudinal : array_like, shape (..., 2), optional
        Real (P, dP/dt) per longitudinal mode.

    Returns
    -------
    PolaritonAmplitudes
    """
    fields = np.asarray(fields, dtype=float)
    wa = np.broadcast_to(np.asarray(omega_alpha, dtype=float), fields.shape[:-1])
    T = _transform_matrix(wa, medium)
    c = np.linalg.solve(T, fields[..., None])[..., 0]
    beta = None
    if longitudinal is not None:
        lg = np.asarray(longitudinal, dtype=float)
        beta = 0.5 * (lg[..., 0] + 1j * lg[..., 1] / medium.omega_L)
    return PolaritonAmplitudes(c[..., 0] + 1j * c[..., 1], c[..., 2] + 1j * c[..., 3], beta)


def inverse_hopfield_transform(amps: PolaritonAmplitudes, omega_alpha, medium: HopfieldMedium):
    """Raw fields (and longitudinal (P, dP/dt) if present) from amplitudes."""
    pp = np.asarray(amps.phi_plus, dtype=complex)
    wa = np.broadcast_to(np.asarray(omega_alpha, dtype=float), pp.shape)
    T = _transform_matrix(wa, medium)
    c = np.stack([pp.real, pp.imag, amps.phi_minus.real, amps.phi_minus.imag], -1)
    fields = (T @ c[..., None])[..., 0]
    if amps.beta is None:
        return fields, None
    b = np.asarray(amps.beta)
    return fields, np.stack([2 * b.real, 2 * medium.omega_L * b.imag], -1)


def raw_energy(fields, medium: HopfieldMedium, longitudinal=None):
    f = np.asarray(fields, dtype=float)
    e, b, p, pd = f[..., 0], f[..., 1], f[..., 2], f[..., 3]
    wp2 = medium.omegap**2
    h = np.sum(0.5 * (b * b + e * e) + (pd * pd + medium.omega0**2 * p * p) / (2 * wp2))
    if longitudinal is not None:
        lg = np.asarray(longitudinal, dtype=float)
        P, Pd = lg[..., 0], lg[..., 1]
        h += np.sum(0.5 * P * P + (Pd * Pd + medium.omega0**2 * P * P) / (2 * wp2))
    return float(h)


def diagonal_energy(amps: PolaritonAmplitudes, omega_alpha, medium: HopfieldMedium):
    up, lo, wl = hopfield_frequencies(omega_alpha, medium)
    h = np.sum(energy_weight(up, omega_alpha, medium) * np.abs(amps.phi_plus) ** 2)
    h += np.sum(energy_weight(lo, omega_alpha, medium) * np.abs(amps.phi_minus) ** 2)
    if amps.beta is not None:
        h += 2 * wl**2 / medium.omegap**2 * np.sum(np.abs(amps.beta) ** 2)
    return float(h)


def hamiltonian_diagonal(amps: PolaritonAmplitudes, fields, omega_alpha, medium: HopfieldMedium,
                         longitudinal=None):
    """(H_raw, H_diag, relative deviation)."""
    h_raw = raw_energy(fields, medium, longitudinal)
    h_diag = diagonal_energy(amps, omega_alpha, medium)
    scale = max(abs(h_raw), abs(h_diag), np.finfo(float).tiny)
    return h_raw, h_diag, abs(h_raw - h_diag) / scale


def longitudinal_oscillation(P0, Pdot0, medium: HopfieldMedium, t, t0=0.0):
    wl = medium.omega_L
    s = np.asarray(t, dtype=float) - t0
    return np.cos(wl * s) * P0 + np.sin(wl * s) * Pdot0 / wl
