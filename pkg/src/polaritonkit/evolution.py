"""Time-domain simulator for field modes coupled to discretized oscillator baths.

Coordinates are the field mode amplitudes q (the displacement of mode a is
w_a q_a d_a(x), the magnetic amplitude is dq/dt) and bath coordinates X
attached to polarization sites. A site s carries P_s = sum_i g_si X_si. The
Hamiltonian is

    H = 1/2 |dq/dt|^2 + 1/2 |w q|^2 - (w q).C P + 1/2 |P|^2
        + 1/2 sum (dX/dt^2 + w_i^2 X^2),

which is the energy int (B^2 + E^2)/2 + material energy with E = D - P.
C holds the overlap of mode displacement profiles with the site cells; it is
the identity for a homogeneous medium described mode by mode. Every system
is H = 1/2 p.p + 1/2 x.K x with constant symmetric K.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .dispersion import PolaritonRoot, transverse_roots
from .errors import StabilityError, ValidationError
from .greens import BoxModeBasis, RealModeSet
from .medium import Medium, SpatialMediumMap, chi_time, sigma_of_omega
from .propagators import anticausal_kernel, bromwich_samples, check_sum_rules, residue_sum

DEFAULT_LINES = 400
CUTOFF_LINEWIDTHS = 40.0


class BasisTruncationWarning(UserWarning):
    pass


# --- bath -------------------------------------------------------------------

@dataclass
class BathDiscretization:
    """Gauss-Legendre lines on [0, omega_cut] with g_i**2 = w_i 2 sigma(omega_i) / pi."""

    nodes: np.ndarray
    weights: np.ndarray
    couplings: np.ndarray
    omega_cut: float

    @classmethod
    def from_medium(cls, medium: Medium, n_lines=DEFAULT_LINES, omega_cut=None):
        if n_lines < 1:
            raise ValidationError("n_lines must be >= 1", field="n_lines")
        if medium.is_vacuum:
            e = np.zeros(0)
            return cls(e, e, e, 0.0)
        if not medium.is_passive:
            raise ValidationError("bath discretization needs a passive medium", field="medium")
        if not medium.is_lossy:
            raise ValidationError("a lossless resonance has no continuous bath; use a single line",
                                  field="medium")
        if omega_cut is None:
            omega_cut = medium.max_omega + CUTOFF_LINEWIDTHS * medium.max_gamma
        x, w = np.polynomial.legendre.leggauss(n_lines)
        nodes = 0.5 * omega_cut * (x + 1)
        weights = 0.5 * omega_cut * w
        g = np.sqrt(weights * 2 * sigma_of_omega(medium, nodes) / np.pi)
        return cls(nodes, weights, g, float(omega_cut))

    @classmethod
    def single_line(cls, omega0, omegap):
        """Lossless resonance: one line carrying the full oscillator strength."""
        return cls(np.array([float(omega0)]), np.array([np.nan]), np.array([float(omegap)]), float(omega0))

    def __len__(self):
        return self.nodes.size

    def kernel(self, tau):
        """sum_i g_i**2 sin(w_i tau) / w_i, the discretized susceptibility kernel."""
        tau = np.asarray(tau, dtype=float)
        val = np.sin(tau[..., None] * self.nodes) / self.nodes @ self.couplings**2
        return np.where(tau >= 0, val, 0.0)

    def epsilon(self, w):
        w = np.asarray(w, dtype=complex)
        return 1 + np.sum(self.couplings**2 / (self.nodes**2 - w[..., None] ** 2), axis=-1)

    def depsilon(self, w):
        w = np.asarray(w, dtype=complex)
        return np.sum(2 * w[..., None] * self.couplings**2 / (self.nodes**2 - w[..., None] ** 2) ** 2, axis=-1)

    def kernel_error(self, medium: Medium, T, n=4001):
        tau = np.linspace(0, T, n)
        return float(np.max(np.abs(self.kernel(tau) - chi_time(medium, tau))))


# --- assembled linear system ----------------------------------------------

@dataclass
class SiteInfo:
    center: np.ndarray
    component: int
    volume: float
    extent: np.ndarray  # half extents of the cell box


class LinearSystem:
    """Quadratic Hamiltonian H = p.p/2 + x.K x/2 with the structure described above.

    Parameters
    ----------
    field_omega : (M,) array
    coupling : (M, S) array
        The matrix C.
    bath_omega, bath_g : (S, N) arrays
    modes : RealModeSet, optional
        Mode profiles, used for probe-point fields.
    sites : list of SiteInfo, optional
    """

    def __init__(self, field_omega, coupling, bath_omega, bath_g, modes=None, sites=None, media=None):
        self.omega = np.asarray(field_omega, dtype=float)
        coupling = np.asarray(coupling, dtype=float)
        bath_omega = np.asarray(bath_omega, dtype=float)
        # reshape(-1) is ambiguous for empty arrays
        self.C = coupling.reshape(self.omega.size, -1) if coupling.size else np.zeros((self.omega.size, 0))
        S = self.C.shape[1]
        self.bath_omega = bath_omega.reshape(S, -1) if bath_omega.size else np.zeros((S, 0))
        self.bath_g = np.asarray(bath_g, dtype=float).reshape(self.bath_omega.shape)
        self.modes = modes
        self.sites = sites
        self.media = media
        self.M = self.omega.size
        self.S, self.N = self.bath_omega.shape
        self.n = self.M + self.S * self.N
        self._exact = None
        self._omega_max = None

    # layout
    def pack(self, q=None, qdot=None, X=None, Xdot=None):
        z = np.zeros(2 * self.n)
        if q is not None:
            z[: self.M] = q
        if qdot is not None:
            z[self.n: self.n + self.M] = qdot
        if X is not None:
            z[self.M: self.n] = np.asarray(X).ravel()
        if Xdot is not None:
            z[self.n + self.M:] = np.asarray(Xdot).ravel()
        return z

    def unpack(self, z):
        z = np.asarray(z)
        x, p = z[..., : self.n], z[..., self.n:]
        sh = z.shape[:-1] + (self.S, self.N)
        return x[..., : self.M], p[..., : self.M], x[..., self.M:].reshape(sh), p[..., self.M:].reshape(sh)

    @property
    def field_slice(self):
        return np.r_[np.arange(self.M), self.n + np.arange(self.M)]

    def polarization(self, X):
        return np.einsum("sn,...sn->...s", self.bath_g, X)

    def stiffness_apply(self, x):
        """K x for x of shape (n,) or (n, k)."""
        x = np.asarray(x, dtype=float)
        flat = x.ndim == 1
        xs = x[:, None] if flat else x
        k = xs.shape[1]
        q = xs[: self.M]
        X = xs[self.M:].reshape(self.S, self.N, k)
        P = np.einsum("sn,snk->sk", self.bath_g, X)
        Dq = self.omega[:, None] * q
        Es = self.C.T @ Dq - P
        fq = self.omega[:, None] * (Dq - self.C @ P)
        fX = self.bath_omega[..., None] ** 2 * X - self.bath_g[..., None] * Es[:, None, :]
        out = np.concatenate([fq, fX.reshape(self.S * self.N, k)])
        return out[:, 0] if flat else out

    def stiffness(self):
        return self.stiffness_apply(np.eye(self.n))

    def flow_matrix(self):
        """A with dz/dt = A z, z = (x, p)."""
        n = self.n
        A = np.zeros((2 * n, 2 * n))
        A[:n, n:] = np.eye(n)
        A[n:, :n] = -self.stiffness()
        return A

    def energy(self, z):
        z = np.asarray(z)
        x, p = z[..., : self.n], z[..., self.n:]
        xs = x.reshape(-1, self.n).T
        kx = self.stiffness_apply(xs).T.reshape(x.shape)
        return 0.5 * np.sum(p * p, axis=-1) + 0.5 * np.sum(x * kx, axis=-1)

    def energy_parts(self, z):
        """(electromagnetic, material) energies of state(s) z."""
        q, qd, X, Xd = self.unpack(z)
        P = self.polarization(X)
        Dq = self.omega * q
        DP = np.einsum("...m,ms,...s->...", Dq, self.C, P)
        em = 0.5 * np.sum(qd**2, -1) + 0.5 * (np.sum(Dq**2, -1) - 2 * DP + np.sum(P**2, -1))
        mat = 0.5 * np.sum(Xd**2 + self.bath_omega**2 * X**2, axis=(-2, -1))
        return em, mat

    @property
    def omega_max(self):
        if self._omega_max is None:
            self._omega_max = float(np.sqrt(max(self.exact_flow().max_eigenvalue, 0.0)))
        return self._omega_max

    def blocks(self):
        """Index sets of mutually decoupled coordinates."""
        parent = list(range(self.M + self.S))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for m, s in zip(*np.nonzero(self.C)):
            ra, rb = find(m), find(self.M + s)
            if ra != rb:
                parent[ra] = rb
        groups = {}
        for node in range(self.M + self.S):
            groups.setdefault(find(node), []).append(node)
        out = []
        for nodes in groups.values():
            idx = []
            for node in sorted(nodes):
                if node < self.M:
                    idx.append(node)
                else:
                    s = node - self.M
                    idx.extend(self.M + s * self.N + np.arange(self.N))
            out.append(np.array(idx, dtype=int))
        return out

    def exact_flow(self):
        if self._exact is None:
            self._exact = ExactFlow(self)
        return self._exact

    def truncated(self):
        """Copy with all field sectors removed from the initial data (Langevin-only surrogate)."""
        return TruncatedFlow(self)


class ExactFlow:
    """Normal-mode propagation, block by block: x(t) = V [cos(W t) a + sin(W t)/W b]."""

    def __init__(self, system: LinearSystem):
        self.system = system
        K = system.stiffness()
        self.parts = []
        top = 0.0
        for idx in system.blocks():
            lam, V = np.linalg.eigh(K[np.ix_(idx, idx)])
            if lam.min() <= 0:
                raise StabilityError("stiffness matrix is not positive definite",
                                     {"min_eigenvalue": float(lam.min())})
            self.parts.append((idx, np.sqrt(lam), V))
            top = max(top, float(lam.max()))
        self.max_eigenvalue = top

    def frequencies(self):
        return np.sort(np.concatenate([w for _, w, _ in self.parts]))

    def propagate(self, z0, times):
        sysm = self.system
        n = sysm.n
        times = np.atleast_1d(np.asarray(times, dtype=float))
        z0 = np.asarray(z0, dtype=float)
        out = np.zeros((times.size, 2 * n))
        for idx, w, V in self.parts:
            a = V.T @ z0[idx]
            b = V.T @ z0[n + idx]
            c, s = np.cos(np.outer(times, w)), np.sin(np.outer(times, w))
            out[:, idx] = (c * a + s * (b / w)) @ V.T
            out[:, n + idx] = (-s * (a * w) + c * b) @ V.T
        return out

    def matrix(self, t):
        """Fundamental matrix M(t) with z(t) = M(t) z(0)."""
        n = self.system.n
        Mt = np.zeros((2 * n, 2 * n))
        for idx, w, V in self.parts:
            c, s = np.cos(w * t), np.sin(w * t)
            ii = np.ix_(idx, idx)
            Mt[:n, :n][ii] = (V * c) @ V.T
            Mt[:n, n:][ii] = (V * (s / w)) @ V.T
            Mt[n:, :n][ii] = -(V * (s * w)) @ V.T
            Mt[n:, n:][ii] = (V * c) @ V.T
        return Mt


class TruncatedFlow:
    def __init__(self, system):
        self.system = system

    def projector(self):
        n2 = 2 * self.system.n
        P = np.eye(n2)
        f = self.system.field_slice
        P[f, f] = 0.0
        return P


# --- assembly ---------------------------------------------------------------

def _mode_frequencies(basis):
    if isinstance(basis, BoxModeBasis):
        modes = basis.real_modes()
        return modes.omega, modes
    if isinstance(basis, RealModeSet):
        return basis.omega, basis
    return np.atleast_1d(np.asarray(basis, dtype=float)), None


def assemble_homogeneous(medium: Medium, basis, n_lines=DEFAULT_LINES, omega_cut=None,
                         n_longitudinal=0, bath: BathDiscretization | None = None):
    """Every field mode couples to its own bath (C = identity).

    ``basis`` is a BoxModeBasis, a RealModeSet or an array of mode frequencies.
    ``n_longitudinal`` extra sites carry purely longitudinal polarization
    (no field coupling, E = -P there).
    """
    omega, modes = _mode_frequencies(basis)
    if np.any(omega <= 0):
        raise ValidationError("mode frequencies must be positive", field="basis")
    if bath is None:
        bath = BathDiscretization.from_medium(medium, n_lines, omega_cut)
    M = omega.size
    if len(bath) == 0:
        sysm = LinearSystem(omega, np.zeros((M, 0)), np.zeros((0, 0)), np.zeros((0, 0)), modes, media=[])
        sysm.bath = bath
        return sysm
    S = M + int(n_longitudinal)
    C = np.zeros((M, S))
    C[np.arange(M), np.arange(M)] = 1.0
    bw = np.tile(bath.nodes, (S, 1))
    bg = np.tile(bath.couplings, (S, 1))
    sysm = LinearSystem(omega, C, bw, bg, modes, media=[medium] * S)
    sysm.bath = bath
    return sysm


def _cell_coupling(smap, modes: RealModeSet, axis):
    """C entries and site metadata for a map of cells (layers for 1D bases)."""
    centers = smap.centers()
    dx = smap.dx
    L = modes.volume ** (1 / 3)
    avg = modes.d_cell_average(centers, dx)  # (cells, M, 3), cube integral
    if axis is None:
        vol = dx**3
        ext = np.full(3, dx / 2)
        integ = avg
    else:
        # a cell index along the axis stands for a full layer of the box
        for idx in smap.indices():
            if any(idx[a] != 0 for a in range(3) if a != axis):
                raise ValidationError("1D bases need cells on the basis axis only", field="cells")
        vol = L * L * dx
        ext = np.full(3, L / 2)
        ext[axis] = dx / 2
        integ = avg * (L * L) / (dx * dx)
    cols, sites, media = [], [], []
    for c, idx in enumerate(smap.indices()):
        for comp in range(3):
            col = integ[c, :, comp] / np.sqrt(vol)
            if np.any(col != 0):
                cols.append(col)
                sites.append(SiteInfo(centers[c], comp, vol, ext))
                media.append(smap.cells[idx])
    C = np.array(cols).T if cols else np.zeros((len(modes), 0))
    return C, sites, media


def assemble_map(smap: SpatialMediumMap, basis: BoxModeBasis, n_lines=DEFAULT_LINES, omega_cut=None,
                 truncation_tol=0.01):
    """Field modes of ``basis`` coupled to the absorbing cells of ``smap``.

    The background must be vacuum. Each (cell, Cartesian component) with a
    nonzero mode overlap becomes a polarization site with its own bath.
    A BasisTruncationWarning is issued when the mode set misses more than
    ``truncation_tol`` of the couplings' Frobenius norm.
    """
    if not smap.background.is_vacuum:
        raise ValidationError("map assembly needs a vacuum background", field="background")
    modes = basis.real_modes()
    C, sites, media = _cell_coupling(smap, modes, basis.axis)
    baths = [BathDiscretization.from_medium(m, n_lines, omega_cut) for m in media]
    if baths and len({len(b) for b in baths}) != 1:
        raise ValidationError("all absorbing cells need the same number of bath lines", field="n_lines")
    S = len(sites)
    N = len(baths[0]) if baths else 0
    bw = np.array([b.nodes for b in baths]).reshape(S, N)
    bg = np.array([b.couplings for b in baths]).reshape(S, N)
    sysm = LinearSystem(modes.omega, C, bw, bg, modes, sites, media)
    if S:
        lost = coupling_truncation(sysm, basis)
        if lost > truncation_tol:
            warnings.warn(f"mode basis captures only {100 * (1 - lost):.1f}% of the cell couplings",
                          BasisTruncationWarning, stacklevel=2)
        sysm.truncation_loss = lost
    return sysm


def coupling_truncation(sysm: LinearSystem, basis: BoxModeBasis, factor=4):
    """Fraction of the coupling Frobenius norm missing from the basis.

    The reference is the same map projected onto a basis with ``factor``
    times the cutoff.
    """
    big = BoxModeBasis(basis.L, factor * basis.k_max, basis.axis, basis.polarizations)
    smap_like = _SitesAsMap(sysm.sites)
    C_big = _site_coupling(big.real_modes(), smap_like, basis.axis)
    ref = np.sum(C_big**2)
    return float(1 - np.sum(sysm.C**2) / ref) if ref > 0 else 0.0


class _SitesAsMap:
    def __init__(self, sites):
        self.sites = sites


def _site_coupling(modes, sites_map, axis):
    cols = []
    for site in sites_map.sites:
        dx = 2 * site.extent[axis if axis is not None else 0]
        avg = modes.d_cell_average(site.center[None, :], dx)[0, :, site.component]
        if axis is not None:
            L = modes.volume ** (1 / 3)
            avg = avg * (L * L) / (dx * dx)
        cols.append(avg / np.sqrt(site.volume))
    return np.array(cols).T


def assemble_system(medium_or_map, basis, n_lines=DEFAULT_LINES, omega_cut=None):
    if isinstance(medium_or_map, SpatialMediumMap):
        return assemble_map(medium_or_map, basis, n_lines, omega_cut)
    return assemble_homogeneous(medium_or_map, basis, n_lines, omega_cut)


def hamiltonian_structure_residual(sysm: LinearSystem):
    """max |JA - (JA)^T|; zero for a Hamiltonian flow matrix."""
    A = sysm.flow_matrix()
    n = sysm.n
    J = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
    JA = J @ A
    return float(np.max(np.abs(JA - JA.T)))


# --- integrators --------------------------------------------------------------

def _triple_jump(order):
    coeffs = [1.0]
    for k in range(2, order, 2):
        r = 2 ** (1 / (k + 1))
        g1 = 1 / (2 - r)
        g0 = -r * g1
        coeffs = [c * g for g in (g1, g0, g1) for c in coeffs]
    return np.array(coeffs)


# Yoshida's 15-stage eighth-order symmetric composition ("solution A")
_Y8 = np.array([
    1.04242620869991, 1.82020630970714, 0.157739928123617, 2.44002732616735,
    -0.00716989419708120, -2.44699182370524, -1.61582374150097,
])
_Y8_FULL = np.concatenate([_Y8, [1 - 2 * _Y8.sum()], _Y8[::-1]])

COMPOSITIONS = {
    "leapfrog": (np.array([1.0]), 2),
    "order4": (_triple_jump(4), 4),
    "order6": (_triple_jump(6), 6),
    "order8": (_Y8_FULL, 8),
    "tj8": (_triple_jump(8), 8),
}
METHODS = tuple(COMPOSITIONS) + ("exact", "dop853")


def _composed_step(sysm, coeffs, h):
    """One composition step acting in place on (x, p) arrays of shape (n,) or (n, k)."""
    kicks = np.zeros(coeffs.size + 1)
    kicks[:-1] += 0.5 * coeffs
    kicks[1:] += 0.5 * coeffs

    def step(x, p):
        for j, c in enumerate(coeffs):
            p -= kicks[j] * h * sysm.stiffness_apply(x)
            x += c * h * p
        p -= kicks[-1] * h * sysm.stiffness_apply(x)
        return x, p

    return step


@dataclass
class Trajectory:
    t: np.ndarray
    z: np.ndarray
    system: LinearSystem
    method: str
    dt: float | None = None

    @property
    def q(self):
        return self.z[:, : self.system.M]

    @property
    def qdot(self):
        return self.z[:, self.system.n: self.system.n + self.system.M]

    def energy(self):
        return self.system.energy(self.z)

    def energy_drift(self):
        e = self.energy()
        return float(np.max(np.abs(e - e[0])) / abs(e[0]))


def integrate(sysm: LinearSystem, z0, T, dt=None, method="order8", stride=1, energy_bound=None,
              rtol=1e-12, atol=1e-14, check_stability=True):
    """Integrate dz/dt = A z from t = 0 to T.

    Parameters
    ----------
    method : str
        ``leapfrog``, ``order4``, ``order6`` (triple-jump compositions),
        ``order8`` (15-stage symmetric composition) and ``tj8`` are
        symplectic; ``exact`` uses the normal-mode flow; ``dop853`` is the
        explicit Runge-Kutta reference.
    stride : int
        Keep every ``stride``-th step.
    energy_bound : float, optional
        Relative energy drift that aborts the run with StabilityError.
    """
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (2 * sysm.n,):
        raise ValidationError(f"state must have length {2 * sysm.n}", field="z0")
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}", field="method")
    if method == "exact":
        if dt is None:
            raise ValidationError("dt is required", field="dt")
        n_steps = int(round(T / dt))
        t = np.arange(0, n_steps + 1, stride) * dt
        return Trajectory(t, sysm.exact_flow().propagate(z0, t), sysm, method, dt)
    if dt is None or dt <= 0:
        raise ValidationError("dt must be positive", field="dt")
    if check_stability and dt * sysm.omega_max >= 0.1 * 2 * np.pi:
        raise ValidationError("time step too large for the fastest normal mode "
                              f"(dt * omega_max = {dt * sysm.omega_max:.3g})", field="dt")
    n_steps = int(round(T / dt))
    t = np.arange(0, n_steps + 1, stride) * dt
    if method == "dop853":
        n = sysm.n

        def rhs(_, z):
            return np.concatenate([z[n:], -sysm.stiffness_apply(z[:n])])

        sol = solve_ivp(rhs, (0, t[-1]), z0, method="DOP853", t_eval=t, rtol=rtol, atol=atol)
        return Trajectory(t, sol.y.T.copy(), sysm, method, dt)
    coeffs, _ = COMPOSITIONS[method]
    step = _composed_step(sysm, coeffs, dt)
    x, p = z0[: sysm.n].copy(), z0[sysm.n:].copy()
    out = np.empty((t.size, 2 * sysm.n))
    out[0] = z0
    e0 = sysm.energy(z0)
    k = 1
    for i in range(1, n_steps + 1):
        x, p = step(x, p)
        if i % stride == 0:
            out[k, : sysm.n], out[k, sysm.n:] = x, p
            if energy_bound is not None:
                e = sysm.energy(out[k])
                if abs(e - e0) > energy_bound * abs(e0):
                    raise StabilityError("energy drift exceeded the configured bound",
                                         {"t": float(t[k]), "drift": float(abs(e - e0) / abs(e0))})
            k += 1
    return Trajectory(t, out, sysm, method, dt)


def step_matrix(sysm: LinearSystem, dt, method="order8"):
    coeffs, _ = COMPOSITIONS[method]
    n = sysm.n
    x = np.hstack([np.eye(n), np.zeros((n, n))])
    p = np.hstack([np.zeros((n, n)), np.eye(n)])
    x, p = _composed_step(sysm, coeffs, dt)(x, p)
    return np.vstack([x, p])


def _canonical_scaling(sysm):
    """Diagonal symplectic rescaling x -> sqrt(nu) x, p -> p / sqrt(nu) with nu**2 = K_ii."""
    K = sysm.stiffness()
    nu = np.sqrt(np.maximum(np.diag(K), 1e-300))
    s = np.sqrt(nu)
    return np.concatenate([s, 1 / s])


def symplectic_form_check(sysm: LinearSystem, T, dt=None, method="order8", truncated=False):
    """max |M^T J M - J| for the fundamental matrix M(T).

    M is formed in the canonically rescaled coordinates (each coordinate
    scaled by its own frequency), so that round-off is not amplified by the
    spread of bath frequencies; the rescaling is itself symplectic. With
    ``truncated=True`` the field initial data are deleted, M -> M Pi, which
    is the Langevin-only surrogate.
    """
    n = sysm.n
    sc = _canonical_scaling(sysm)
    if method == "exact":
        Mt = sysm.exact_flow().matrix(T)
        Mt = sc[:, None] * Mt / sc[None, :]
    else:
        if dt is None:
            raise ValidationError("dt is required", field="dt")
        n_steps = int(round(T / dt))
        M1 = step_matrix(sysm, dt, method)
        M1 = sc[:, None] * M1 / sc[None, :]
        Mt = np.eye(2 * n)
        base = M1
        while n_steps:
            if n_steps & 1:
                Mt = base @ Mt
            n_steps >>= 1
            if n_steps:
                base = base @ base
    if truncated:
        Mt = Mt @ sysm.truncated().projector()
    J = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
    return float(np.max(np.abs(Mt.T @ J @ Mt - J)))


# --- modal fits ---------------------------------------------------------------

def fit_damped_modes(t, y, n_modes, min_amplitude=1e-2):
    """Matrix-pencil fit y(t) ~ sum 2 Re[a exp(-i W t)].

    Returns a list of (W, |a|) with Re W > 0 and relative amplitude above
    ``min_amplitude``, ordered from least to most damped.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    dt = t[1] - t[0]
    n = y.size
    L = n // 3
    Y = np.lib.stride_tricks.sliding_window_view(y, L + 1)
    _, s, Vh = np.linalg.svd(Y, full_matrices=False)
    r = 2 * n_modes
    V = Vh[:r].conj().T
    V1, V2 = V[:-1], V[1:]
    z = np.linalg.eigvals(np.linalg.pinv(V1) @ V2)
    W = 1j * np.log(z) / dt
    amps = np.linalg.lstsq(np.exp(-1j * np.outer(t - t[0], W)), y.astype(complex), rcond=None)[0]
    keep = [(w, abs(a)) for w, a in zip(W, amps) if w.real > 0]
    top = max(a for _, a in keep)
    keep = [(w, a) for w, a in keep if a >= min_amplitude * top]
    return sorted(keep, key=lambda p: abs(p[0].imag))


@dataclass
class EmergenceReport:
    fitted: complex
    predicted: complex
    re_error: float
    im_error: float
    energy_drift: float
    kernel_error: float


def emergence_check(medium: Medium, omega_alpha, n_lines=DEFAULT_LINES, T=None, dt=0.05,
                    method="order8", n_fit_modes=2):
    """Fit the least-damped oscillation of q(t) and compare with the lower polariton root."""
    sysm = assemble_homogeneous(medium, [omega_alpha], n_lines)
    roots = transverse_roots(medium, omega_alpha)
    target = min(roots, key=lambda r: abs(r.omega.imag)).omega
    if T is None:
        T = min(3 / abs(target.imag), recurrence_time(sysm.bath) / 2)
    traj = integrate(sysm, sysm.pack(q=[1.0]), T, dt, method)
    fit = fit_damped_modes(traj.t, traj.q[:, 0], n_fit_modes)
    W = fit[0][0]
    return EmergenceReport(W, target, abs(W.real - target.real) / target.real,
                           abs(W.imag - target.imag) / abs(target.imag), traj.energy_drift(),
                           sysm.bath.kernel_error(medium, T))


def recurrence_time(bath: BathDiscretization):
    """2 pi over the widest line spacing: a lower bound on the first revival."""
    if len(bath) < 2:
        return np.inf
    return float(2 * np.pi / np.max(np.diff(bath.nodes)))


# --- (0) / (s) split ------------------------------------------------------------

def discrete_roots(sysm: LinearSystem, mode=0):
    """Exact polariton roots of one mode of a homogeneous discretized system.

    These are the normal-mode frequencies of the mode's block. Matching the
    residue form of U(t) to its normal-mode expansion sum_k v_k**2 sin(W_k t)/W_k
    (v_k the field component of eigenvector k) gives D_k = w_a / (W_k v_k**2).
    This avoids differentiating the discrete permittivity, whose poles sit
    extremely close to the roots of weakly coupled lines.
    """
    wa = sysm.omega[mode]
    w = sysm.bath_omega[mode]
    g = sysm.bath_g[mode]
    N = w.size
    K = np.zeros((N + 1, N + 1))
    K[0, 0] = wa**2
    K[0, 1:] = K[1:, 0] = -wa * g
    K[1:, 1:] = np.diag(w**2) + np.outer(g, g)
    lam, V = np.linalg.eigh(K)
    W = np.sqrt(lam)
    v2 = V[0] ** 2
    roots = []
    for m, (z, a) in enumerate(zip(W, v2)):
        if a == 0:
            continue
        roots.append(PolaritonRoot(complex(z), complex(wa / (z * a)), "transverse", m, float(wa)))
    return roots


def _phase_integral(delta, t):
    """int_0^t exp(-i delta s) ds, stable for small delta t."""
    x = delta * t
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, delta)
    full = (1 - np.exp(-1j * x)) / (1j * safe)
    series = t * (1 - 1j * x / 2 - x * x / 6 + 1j * x**3 / 24)
    return np.where(small, series, full)


def scattered_response(roots, omega_alpha, g, w, X0, V0, t, chunk=64):
    """w_a int_0^t H(tau) P0(t - tau) dtau for the free bath P0 = sum g (X0 cos + V0 sin / w)."""
    z = np.array([r.omega for r in roots])
    D = np.array([r.D for r in roots])
    c = -1.0 / (2j * omega_alpha * D)
    a = g * (X0 + 1j * V0 / w)  # P0 = Re sum a exp(-i w t)
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.size)
    for i0 in range(0, t.size, chunk):
        tt = t[i0: i0 + chunk][:, None, None]
        zz = z[None, :, None]
        ww = w[None, None, :]
        # Re[a e^{-iwt}] = (a e^{-iwt} + conj(a) e^{iwt}) / 2
        plus = np.exp(-1j * ww * tt) * _phase_integral(zz - ww, tt) * a
        minus = np.exp(1j * ww * tt) * _phase_integral(zz + ww, tt) * np.conj(a)
        conv = 0.5 * (plus + minus).sum(axis=2)
        out[i0: i0 + chunk] = 2 * (c * conv).sum(axis=1).real
    return omega_alpha * out


@dataclass
class SplitResult:
    t: np.ndarray
    q: np.ndarray
    free: np.ndarray
    scattered: np.ndarray
    residual: float


def split_free_scattered(traj: Trajectory, roots="discrete", mode=0):
    """Split q(t) of one mode into the source-free part and the bath-driven part.

    The free part is U(t) qdot(0) + dU/dt(t) q(0); the scattered part is the
    propagator H convolved with the free bath polarization. ``roots`` may be
    ``"discrete"`` (exact roots of the discretized bath; recombination is
    exact), ``"continuum"`` (roots of the medium itself) or an explicit list.
    """
    sysm = traj.system
    if not np.array_equal(sysm.C[:, : sysm.M], np.eye(sysm.M)):
        raise ValidationError("the modal split needs a homogeneous system", field="system")
    wa = sysm.omega[mode]
    if isinstance(roots, str):
        if roots == "discrete":
            roots = discrete_roots(sysm, mode)
        elif roots == "continuum":
            roots = transverse_roots(sysm.media[mode], wa)
        else:
            raise ValidationError(f"unknown root source {roots!r}", field="roots")
    check_sum_rules(roots, wa, tol=1e-6)
    t = traj.t - traj.t[0]
    q, qd, X, Xd = sysm.unpack(traj.z[0])
    free = (residue_sum(roots, wa, t, "U") * qd[mode]
            + residue_sum(roots, wa, t, "U", derivative=1) * q[mode])
    scat = scattered_response(roots, wa, sysm.bath_g[mode], sysm.bath_omega[mode], X[mode], Xd[mode], t)
    qt = traj.q[:, mode]
    scale = max(np.max(np.abs(qt)), np.finfo(float).tiny)
    return SplitResult(traj.t, qt, free, scat, float(np.max(np.abs(qt - free - scat)) / scale))


# --- energy ledger ------------------------------------------------------------

@dataclass
class EnergyReport:
    t: np.ndarray
    total: np.ndarray
    electromagnetic: np.ndarray
    material: np.ndarray
    free_material: np.ndarray
    remainder: float

    @property
    def ledger_residual(self):
        return float(np.max(np.abs(self.total - self.remainder - self.free_material)) / abs(self.total[0]))

    @property
    def drift(self):
        return float(np.max(np.abs(self.total - self.total[0])) / abs(self.total[0]))

    def to_dict(self):
        return {"t": self.t.tolist(), "total": self.total.tolist(),
                "electromagnetic": self.electromagnetic.tolist(), "material": self.material.tolist(),
                "free_material": self.free_material.tolist(), "remainder": self.remainder,
                "drift": self.drift, "ledger_residual": self.ledger_residual}


def energy_report(traj: Trajectory) -> EnergyReport:
    """Energy ledger along a trajectory.

    ``free_material`` is the energy of the bath evolved freely from the first
    sample (no field coupling); ``remainder`` is the electromagnetic energy at
    the first sample. Their sum must equal the total at every sample.
    """
    sysm = traj.system
    em, mat = sysm.energy_parts(traj.z)
    _, _, X0, V0 = sysm.unpack(traj.z[0])
    t = (traj.t - traj.t[0])[:, None, None]
    w = sysm.bath_omega
    with np.errstate(invalid="ignore", divide="ignore"):
        Xf = X0 * np.cos(w * t) + V0 * np.sin(w * t) / w
        Vf = -X0 * w * np.sin(w * t) + V0 * np.cos(w * t)
    free = 0.5 * np.sum(Vf**2 + w**2 * Xf**2, axis=(-2, -1))
    return EnergyReport(traj.t, em + mat, em, mat, free, float(em[0]))


# --- time reversal --------------------------------------------------------------

def reverse_trajectory(traj: Trajectory) -> Trajectory:
    """E_T(t) = E(-t), B_T(t) = -B(-t), X_T(t) = X(-t): positions kept, velocities flipped."""
    n = traj.system.n
    z = traj.z[::-1].copy()
    z[:, n:] *= -1
    return Trajectory(-traj.t[::-1], z, traj.system, traj.method, traj.dt)


def time_reversal_check(traj: Trajectory) -> float:
    """Largest one-sample residual of the reversed trajectory under the exact flow.

    The reversed samples w_T(s_n) must satisfy w_T(s_{n+1}) = exp(A ds) w_T(s_n).
    """
    rev = reverse_trajectory(traj)
    ds = np.diff(rev.t)
    if not np.allclose(ds, ds[0], rtol=1e-9):
        raise ValidationError("time reversal check needs uniform sampling", field="t")
    flow = traj.system.exact_flow().matrix(ds[0])
    pred = rev.z[:-1] @ flow.T
    scale = np.max(np.abs(rev.z))
    return float(np.max(np.abs(pred - rev.z[1:])) / scale)


def kernel_reversal_check(medium: Medium, omega_alpha, kind="H", n=2**18):
    """Max |K_anticausal(tau) - K_causal(-tau)| over the unaliased quarter window.

    Both kernels come from the damped FFT on the same grid; outside the
    quarter window the exp(+-shift tau) undamping amplifies round-off.
    """
    t_c, v_c = bromwich_samples(medium, omega_alpha, kind, n)
    t_a, v_a = anticausal_kernel(medium, omega_alpha, kind, n)
    # t is symmetric apart from the extra sample at -T/2: t[i] = -t[n - i]
    mirrored = v_c[1:][::-1]
    tau = t_a[1:]
    keep = np.abs(tau) < 0.25 * (t_c[-1] - t_c[0])
    return float(np.max(np.abs(v_a[1:][keep] - mirrored[keep])))


# --- Langevin truncation ----------------------------------------------------------

def wave_packet_state(sysm: LinearSystem, k0, width, center, amplitude=1.0, direction=1):
    """Field data of a Gaussian packet travelling along the basis axis.

    Needs a one-dimensional basis with cos and sin profiles for each k.
    """
    modes = sysm.modes
    if modes is None:
        raise ValidationError("system has no mode profiles", field="system")
    kk = np.linalg.norm(modes.k, axis=1)
    a = amplitude * np.exp(-0.5 * ((kk - k0) * width) ** 2)
    ph = kk * center
    w = modes.omega
    cosm = modes.trig == "cos"
    # a cos(k(z - z_c) - direction w t) expanded on cos(kz), sin(kz)
    q = np.where(cosm, a * np.cos(ph), a * np.sin(ph))
    qd = np.where(cosm, -direction * a * w * np.sin(ph), direction * a * w * np.cos(ph))
    return sysm.pack(q=q, qdot=qd)


def thermal_bath_state(sysm: LinearSystem, seed=0, energy_per_line=1.0):
    """Random bath data with equal mean energy per line (deterministic for a seed)."""
    rng = np.random.default_rng(seed)
    w = sysm.bath_omega
    s = np.sqrt(energy_per_line)
    X = rng.standard_normal(w.shape) * s / np.where(w > 0, w, 1.0)
    V = rng.standard_normal(w.shape) * s
    return sysm.pack(X=X, Xdot=V)


def probe_field(sysm: LinearSystem, z, probes):
    """E = D - P at probe points: array (..., n_probes, 3)."""
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    q, _, X, _ = sysm.unpack(z)
    d = sysm.modes.d_profile(probes)  # (Pr, M, 3)
    E = np.einsum("...m,pmc->...pc", sysm.omega * q, d)
    if sysm.S:
        P = sysm.polarization(X)
        for s, site in enumerate(sysm.sites or []):
            inside = np.all(np.abs(probes - site.center) <= site.extent, axis=1)
            if np.any(inside):
                E[..., inside, site.component] -= (P[..., s] / np.sqrt(site.volume))[..., None]
    return E


@dataclass
class TruncationReport:
    t: np.ndarray
    field_error: np.ndarray
    missing_energy: np.ndarray
    free_energy_fraction: np.ndarray
    plateau: float
    omitted_norm: np.ndarray | None = None
    full_norm: np.ndarray | None = None

    def block_errors(self, n_blocks=4):
        """RMS error ratio over consecutive blocks of samples (first sample skipped)."""
        num = np.array_split(self.omitted_norm[1:] ** 2, n_blocks)
        den = np.array_split(self.full_norm[1:] ** 2, n_blocks)
        return np.array([np.sqrt(a.sum() / b.sum()) for a, b in zip(num, den)])

    def to_dict(self):
        return {"t": self.t.tolist(), "field_error": self.field_error.tolist(),
                "missing_energy": self.missing_energy.tolist(),
                "free_energy_fraction": self.free_energy_fraction.tolist(), "plateau": self.plateau}


def langevin_truncation_experiment(sysm: LinearSystem, z0, times, probes=None, tail=0.25):
    """Compare the full field with its scattered-only (Langevin) reconstruction.

    The full state evolves from ``z0``. The scattered-only reconstruction
    evolves the same bath data with the field initial data deleted, which is
    the response to D(t0) = B(t0) = 0. By linearity the difference is the
    free part evolved from the field data alone.

    Returns
    -------
    TruncationReport
        ``field_error`` is the relative L2 error over the probes (or, without
        probes, the relative error in the mode displacement amplitudes);
        ``missing_energy`` the electromagnetic energy of the omitted part;
        ``plateau`` the RMS error ratio over the last ``tail`` fraction of ``times``.
    """
    times = np.asarray(times, dtype=float)
    flow = sysm.exact_flow()
    full = flow.propagate(z0, times)
    z_free = np.zeros_like(z0)
    f = sysm.field_slice
    z_free[f] = z0[f]
    free = flow.propagate(z_free, times)
    if probes is not None and sysm.modes is not None:
        Ef = probe_field(sysm, full, probes)
        Eo = probe_field(sysm, free, probes)
        num = np.sqrt(np.sum(Eo**2, axis=(-2, -1)))
        den = np.sqrt(np.sum(Ef**2, axis=(-2, -1)))
    else:
        qf = full[:, : sysm.M] * sysm.omega
        qo = free[:, : sysm.M] * sysm.omega
        num = np.linalg.norm(qo, axis=1)
        den = np.linalg.norm(qf, axis=1)
    err = num / np.maximum(den, np.finfo(float).tiny)
    em_free, _ = sysm.energy_parts(free)
    em_full, _ = sysm.energy_parts(full)
    n_tail = max(1, int(tail * times.size))
    plateau = np.sqrt(np.sum(num[-n_tail:] ** 2) / np.sum(den[-n_tail:] ** 2))
    return TruncationReport(times, err, em_free, em_free / np.maximum(em_full, np.finfo(float).tiny),
                            float(plateau), num, den)


# --- longitudinal polarization ------------------------------------------------------

def chi_eff(roots, tau):
    """sum over longitudinal roots of 2 Re[i exp(-i W tau) / eps'(W)], zero for tau < 0."""
    tau = np.asarray(tau, dtype=float)
    if not roots:
        return np.zeros_like(tau)
    z = np.array([r.omega for r in roots])
    D = np.array([r.D for r in roots])
    t = np.where(tau > 0, tau, 0.0)[..., None]
    val = 2 * np.sum(1j * np.exp(-1j * z * t) / D, axis=-1).real
    return np.where(tau >= 0, val, 0.0)


def _volterra_trapezoid(kernel, source, h, n):
    """P_n = S_n - h [sum_{j=1}^{n-1} k_j P_{n-j} + k_n P_0 / 2] (k_0 = 0)."""
    t = np.arange(n + 1) * h
    k = kernel(t)
    s = source(t)
    P = np.empty(n + 1)
    P[0] = s[0]
    for i in range(1, n + 1):
        acc = np.dot(k[1:i], P[i - 1:0:-1]) + 0.5 * k[i] * P[0]
        P[i] = s[i] - h * acc
    return P


def _gl_convolution(kernel, source, t, panel=0.5, order=24):
    x, w = np.polynomial.legendre.leggauss(order)
    out = np.zeros_like(t)
    for i, ti in enumerate(t):
        if ti <= 0:
            continue
        m = int(np.ceil(ti / panel))
        edges = np.linspace(0, ti, m + 1)
        a, b = edges[:-1, None], edges[1:, None]
        tau = 0.5 * (b - a) * x + 0.5 * (a + b)
        out[i] = np.sum(0.5 * (b - a) * w * kernel(tau) * source(ti - tau))
    return out


@dataclass
class LongitudinalResult:
    t: np.ndarray
    volterra: np.ndarray
    residue: np.ndarray

    @property
    def deviation(self):
        return float(np.max(np.abs(self.volterra - self.residue)))


def longitudinal_evolution(medium: Medium, source, t, h_max=0.01, roots=None):
    """Longitudinal polarization from P = P0 - int chi(tau) P(t - tau) dtau.

    Parameters
    ----------
    medium : Medium
    source : callable or (P0, Pdot0)
        The free polarization P0(t). A pair selects the free oscillation of
        a single-resonance medium at its resonance frequency.
    t : array_like
        Uniform grid starting at 0.
    h_max : float
        Largest internal step of the Volterra solver.

    Returns
    -------
    LongitudinalResult
        Trapezoid time stepping with two Richardson extrapolations, and the
        effective-susceptibility residue sum P = P0 - chi_eff * P0.
    """
    from .dispersion import longitudinal_roots

    t = np.asarray(t, dtype=float)
    if t[0] != 0 or (t.size > 1 and not np.allclose(np.diff(t), t[1] - t[0])):
        raise ValidationError("t must be a uniform grid starting at 0", field="t")
    if not callable(source):
        P0, Pd0 = source
        if len(medium.resonances) != 1:
            raise ValidationError("(P0, Pdot0) data need a single-resonance medium", field="source")
        w0 = medium.resonances[0].omega

        def source(s, P0=P0, Pd0=Pd0, w0=w0):
            return P0 * np.cos(w0 * s) + Pd0 * np.sin(w0 * s) / w0

    if medium.is_vacuum:
        s = source(t)
        return LongitudinalResult(t, s, s.copy())
    h_out = t[1] - t[0] if t.size > 1 else h_max
    sub = max(1, int(np.ceil(h_out / h_max)))
    kern = lambda s: chi_time(medium, s)  # noqa: E731
    sols = []
    for level in range(3):
        f = sub * 2**level
        P = _volterra_trapezoid(kern, source, h_out / f, (t.size - 1) * f)
        sols.append(P[::f])
    r1 = (4 * sols[1] - sols[0]) / 3
    r2 = (4 * sols[2] - sols[1]) / 3
    volterra = (16 * r2 - r1) / 15
    if roots is None:
        roots = longitudinal_roots(medium)
    ceff = lambda s: chi_eff(roots, s)  # noqa: E731
    residue = source(t) - _gl_convolution(ceff, source, t)
    return LongitudinalResult(t, volterra, residue)
