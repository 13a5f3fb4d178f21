"""Dyadic Green tensors.

Conventions (c = 1): the Green tensor of a homogeneous medium solves

    curl curl G - eps w**2 G = delta I

so that G = [I + grad grad / (eps w**2)] g with g = exp(i k R) / (4 pi R) and
k = w sqrt(eps). The plane-wave representation in a periodic box splits
G into a transverse part with poles at the polariton frequencies and a
longitudinal part that is purely instantaneous.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import SingularSystemError, ValidationError
from .medium import Medium, SpatialMediumMap, epsilon
from .propagators import wavenumber

I3 = np.eye(3)


@dataclass
class DyadicSample:
    x: np.ndarray
    x_src: np.ndarray
    omega: complex
    tensor: np.ndarray
    kind: str = "G"


# --- mode basis ------------------------------------------------------------

def polarization_vectors(k):
    """Right-handed transverse unit vectors (e1, e2) for each wavevector.

    e1 = k x z / |k x z|, e2 = khat x e1. For k parallel to z the choice
    e1 = sign(k_z) x keeps e1(-k) = -e1(k) and e2(-k) = e2(k).
    """
    k = np.atleast_2d(np.asarray(k, dtype=float))
    kn = np.linalg.norm(k, axis=1, keepdims=True)
    khat = k / kn
    e1 = np.cross(k, [0.0, 0.0, 1.0])
    n1 = np.linalg.norm(e1, axis=1, keepdims=True)
    along_z = n1[:, 0] < 1e-12 * kn[:, 0]
    e1[along_z] = np.sign(k[along_z, 2])[:, None] * np.array([1.0, 0.0, 0.0])
    n1[along_z] = 1.0
    e1 = e1 / n1
    e2 = np.cross(khat, e1)
    return e1, e2


class BoxModeBasis:
    """Born-von-Karman plane waves exp(i k.x)/sqrt(V), k = 2 pi n / L, 0 < |k| <= k_max.

    ``axis`` restricts wavevectors to one Cartesian axis (0, 1 or 2), which
    gives the quasi one-dimensional setups used by the time-domain simulator.
    ``polarizations`` selects transverse polarizations (1, 2).
    """

    def __init__(self, L, k_max, axis=None, polarizations=(1, 2)):
        if L <= 0 or k_max <= 0:
            raise ValidationError("L and k_max must be positive", field="L" if L <= 0 else "k_max")
        self.L = float(L)
        self.k_max = float(k_max)
        self.axis = axis
        self.polarizations = tuple(polarizations)
        nmax = int(np.floor(k_max * L / (2 * np.pi)))
        r = np.arange(-nmax, nmax + 1)
        if axis is None:
            n = np.stack(np.meshgrid(r, r, r, indexing="ij"), -1).reshape(-1, 3)
        else:
            n = np.zeros((r.size, 3), dtype=int)
            n[:, axis] = r
        k = 2 * np.pi * n / L
        kn = np.linalg.norm(k, axis=1)
        keep = (kn > 0) & (kn <= k_max * (1 + 1e-12))
        self.n = n[keep]
        self.k = k[keep]
        self.omega = kn[keep]
        self.khat = self.k / self.omega[:, None]
        self.e1, self.e2 = polarization_vectors(self.k)

    @property
    def volume(self):
        return self.L**3

    def __len__(self):
        return self.k.shape[0]

    def phi(self, x):
        """Mode functions at point(s) x: shape (..., M)."""
        x = np.asarray(x, dtype=float)
        return np.exp(1j * x @ self.k.T) / np.sqrt(self.volume)

    def transverse_projector(self):
        return I3 - np.einsum("mi,mj->mij", self.khat, self.khat)

    def longitudinal_projector(self):
        return np.einsum("mi,mj->mij", self.khat, self.khat)

    def real_modes(self):
        """Real standing-wave basis for the time-domain simulator.

        One representative of each +-k pair, every selected polarization, and
        both cos and sin profiles. The vector potential profile is
        f = sqrt(2/V) pol trig(k.x); the matching displacement profile
        d = curl f / |k| is also orthonormal and transverse.
        """
        first = np.array([row[np.nonzero(row)[0][0]] for row in self.n])
        rep = first > 0
        k = self.k[rep]
        om = self.omega[rep]
        e1, e2 = self.e1[rep], self.e2[rep]
        modes = []
        for j in self.polarizations:
            pol = e1 if j == 1 else e2
            for trig in ("cos", "sin"):
                for i in range(k.shape[0]):
                    modes.append((k[i], om[i], pol[i], j, trig))
        return RealModeSet(modes, self.volume)


class RealModeSet:
    def __init__(self, modes, volume):
        self.volume = float(volume)
        self.k = np.array([m[0] for m in modes]).reshape(-1, 3)
        self.omega = np.array([m[1] for m in modes], dtype=float)
        self.pol = np.array([m[2] for m in modes]).reshape(-1, 3)
        self.j = np.array([m[3] for m in modes], dtype=int)
        self.trig = np.array([m[4] for m in modes])
        khat = self.k / np.where(self.omega > 0, self.omega, 1.0)[:, None]
        self.dpol = np.cross(khat, self.pol)
        self.norm = np.sqrt(2.0 / self.volume)

    def __len__(self):
        return self.omega.size

    def f_profile(self, x):
        """Vector potential profiles at points x: shape (P, M, 3)."""
        ph = np.atleast_2d(x) @ self.k.T
        s = np.where(self.trig == "cos", np.cos(ph), np.sin(ph))
        return self.norm * s[..., None] * self.pol

    def d_profile(self, x):
        """curl f / |k| at points x: shape (P, M, 3)."""
        ph = np.atleast_2d(x) @ self.k.T
        s = np.where(self.trig == "cos", -np.sin(ph), np.cos(ph))
        return self.norm * s[..., None] * self.dpol

    def d_cell_average(self, centers, dx):
        """int over cubic cells of the d profiles, shape (C, M, 3).

        Exact: a product of sinc factors along each axis.
        """
        centers = np.atleast_2d(centers)
        ph = centers @ self.k.T
        sinc = np.prod(np.sinc(self.k * dx / (2 * np.pi)), axis=1)
        s = np.where(self.trig == "cos", -np.sin(ph), np.cos(ph))
        return dx**3 * self.norm * (s * sinc)[..., None] * self.dpol


# --- homogeneous closed forms ----------------------------------------------

def _dyadic_block(k, rvec):
    rvec = np.asarray(rvec, dtype=float)
    R = np.linalg.norm(rvec, axis=-1)
    rh = rvec / R[..., None]
    kr = np.asarray(k * R)
    g = np.exp(1j * kr) / (4 * np.pi * R)
    a = np.asarray(1 + 1j / kr - 1 / kr**2)
    b = np.asarray(-1 - 3j / kr + 3 / kr**2)
    rr = rh[..., :, None] * rh[..., None, :]
    return g[..., None, None] * (a[..., None, None] * I3 + b[..., None, None] * rr)


def g_dyadic_homogeneous(medium: Medium, x, x_src, w, stencil=None):
    """Homogeneous-medium Green tensor [I + grad grad/(eps w^2)] g at x != x_src.

    Parameters
    ----------
    medium : Medium
    x, x_src : array_like, shape (3,)
    w : complex
        Frequency; complex values with Im w > 0 are allowed.
    stencil : float, optional
        Grid spacing of a caller's finite-difference stencil. A warning is
        issued when |x - x_src| is below it (regularization territory).
    """
    x = np.asarray(x, dtype=float)
    x_src = np.asarray(x_src, dtype=float)
    R = np.linalg.norm(x - x_src)
    if R == 0:
        raise ValidationError("x and x_src coincide; use the regularized self term", field="x")
    if stencil is not None and R < stencil:
        warnings.warn("field point is inside the near-field stencil region", RuntimeWarning)
    k = complex(wavenumber(medium, w))
    return DyadicSample(x, x_src, complex(w), _dyadic_block(k, x - x_src), "G")


# --- plane-wave sums -------------------------------------------------------

def mode_tensors(basis: BoxModeBasis, medium: Medium, w):
    """Per-mode Fourier weights of G_perp, G_par, S and the delta dyad.

    Each entry has shape (M, 3, 3); the real-space value is obtained by
    multiplying with Phi(x) Phi*(x') and summing over modes.
    """
    w = complex(w)
    eps = complex(epsilon(medium, w))
    kk = eps * w * w
    om2 = basis.omega**2
    tp = basis.transverse_projector()
    lp = basis.longitudinal_projector()
    g_perp = tp / (om2 - kk)[:, None, None]
    g_par = -lp / kk
    s = om2[:, None, None] * tp / (om2 - kk)[:, None, None]
    delta = np.broadcast_to(I3, tp.shape).copy()
    return {"G_perp": g_perp, "G_par": g_par, "S": s, "delta": delta, "eps": eps}


def planewave_split(basis: BoxModeBasis, medium: Medium, x, x_src, w, smoothing=None):
    """Transverse and longitudinal parts of G as plane-wave sums.

    ``smoothing`` (a length) multiplies each mode by exp(-(k s)**2 / 2),
    which turns the slowly converging sharp cutoff into a Gaussian-regularized
    sum; the regularized sum converges to the smoothed closed form.
    """
    mt = mode_tensors(basis, medium, w)
    ph = basis.phi(np.asarray(x)) * np.conj(basis.phi(np.asarray(x_src)))
    if smoothing:
        ph = ph * np.exp(-0.5 * (basis.omega * smoothing) ** 2)
    gp = np.einsum("m,mij->ij", ph, mt["G_perp"])
    gl = np.einsum("m,mij->ij", ph, mt["G_par"])
    return (
        DyadicSample(np.asarray(x), np.asarray(x_src), complex(w), gp, "G_perp"),
        DyadicSample(np.asarray(x), np.asarray(x_src), complex(w), gl, "G_par"),
    )


# --- depolarization dyad ---------------------------------------------------

@dataclass(frozen=True)
class Sphere:
    radius: float = 1.0


@dataclass(frozen=True)
class Box:
    """Rectangular box centred on the source with the given half extents."""

    half: tuple = (1.0, 1.0, 1.0)


def _sphere_dyad(order=16):
    x, wx = np.polynomial.legendre.leggauss(order)
    phi = np.arange(2 * order) * np.pi / order
    wphi = np.pi / order
    ct, ph = np.meshgrid(x, phi, indexing="ij")
    st = np.sqrt(1 - ct**2)
    n = np.stack([st * np.cos(ph), st * np.sin(ph), ct], -1)
    w = (wx[:, None] * wphi) * np.ones_like(ph)
    # on a centred sphere R-hat = n-hat and dS / R^2 = dOmega
    return np.einsum("ab,abi,abj->ij", w, n, n) / (4 * np.pi)


def _graded_nodes(a, b, focus, scale, order=20):
    """Gauss-Legendre nodes on [a, b] with panels refined geometrically
    towards ``focus`` down to ``scale``."""
    edges = {a, b}
    if a < focus < b:
        edges.add(focus)
    for side in (-1, 1):
        d = scale
        while True:
            p = focus + side * d
            if not (a < p < b):
                break
            edges.add(p)
            d *= 2
    edges = np.array(sorted(edges))
    x, wx = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * wx
    return nodes.ravel(), weights.ravel()


def _box_dyad(half, order=20):
    half = np.asarray(half, dtype=float)
    L = np.zeros((3, 3))
    for ax in range(3):
        u, v = [a for a in range(3) if a != ax]
        c = half[ax]
        nu, wu = _graded_nodes(-half[u], half[u], 0.0, c / 4, order)
        nv, wv = _graded_nodes(-half[v], half[v], 0.0, c / 4, order)
        U, V = np.meshgrid(nu, nv, indexing="ij")
        W = np.outer(wu, wv)
        for sign in (-1.0, 1.0):
            R = np.zeros(U.shape + (3,))
            R[..., u], R[..., v], R[..., ax] = U, V, sign * c
            r = np.linalg.norm(R, axis=-1)
            n = np.zeros(3)
            n[ax] = sign
            integrand = (R / r[..., None] ** 3) * W[..., None] / (4 * np.pi)
            L += np.outer(n, integrand.sum(axis=(0, 1)))
    return L


def depolarization_dyad(surface):
    """Surface integral of n (x) R-hat / (4 pi R^2) over the exclusion surface."""
    if isinstance(surface, Sphere):
        return _sphere_dyad()
    if isinstance(surface, Box):
        return _box_dyad(surface.half)
    raise ValidationError(f"unsupported exclusion surface {surface!r}", field="surface")


# --- vacuum time-domain kernels ----------------------------------------------

def vacuum_mode_kernels(basis: BoxModeBasis, tau, derivative=0):
    """Per-mode time kernels: transverse sin(w t)/w and longitudinal t.

    Returns two arrays of shape (..., M) holding the requested time
    derivative of each kernel.
    """
    if derivative < 0:
        raise ValidationError("derivative must be >= 0", field="derivative")
    tau = np.asarray(tau, dtype=float)[..., None]
    w = basis.omega
    tr = w ** (derivative - 1) * np.sin(w * tau + derivative * np.pi / 2)
    if derivative == 0:
        lo = np.broadcast_to(tau, tr.shape)
    else:
        lo = np.full(tr.shape, 1.0 if derivative == 1 else 0.0)
    return tr, lo


def vacuum_time_propagators(basis: BoxModeBasis, tau, x, x_src, derivative=0):
    """(Q_v, U_v_perp, U_v_par) dyads at a point pair for scalar tau.

    Q_v = curl curl U_v = -d^2 U_v / dt^2 per mode, so Q_v has no
    longitudinal part.
    """
    tr, lo = vacuum_mode_kernels(basis, tau, derivative)
    tr2, _ = vacuum_mode_kernels(basis, tau, derivative + 2)
    ph = basis.phi(np.asarray(x)) * np.conj(basis.phi(np.asarray(x_src)))
    tp = basis.transverse_projector()
    lp = basis.longitudinal_projector()
    u_perp = np.einsum("m,m,mij->ij", ph, tr, tp)
    u_par = np.einsum("m,m,mij->ij", ph, lo, lp)
    q = -np.einsum("m,m,mij->ij", ph, tr2, tp)
    return q, u_perp, u_par


# --- Lippmann-Schwinger (coupled dipoles) -------------------------------------

MAX_CELLS = 4000


@dataclass
class ScattererGrid:
    """Cubic cells of side ``dx`` centred at ``centers`` with contrast ``chi``.

    ``chi`` is the susceptibility contrast relative to the background at the
    solve frequency; the polarizability of a cell is chi * dx**3.
    """

    centers: np.ndarray
    dx: float
    chi: np.ndarray
    omega: complex = 0j
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=float).reshape(-1, 3)
        self.chi = np.asarray(self.chi, dtype=complex).reshape(-1)
        if self.centers.shape[0] != self.chi.size:
            raise ValidationError("one contrast value per cell is required", field="chi")

    @property
    def polarizability(self):
        return self.chi * self.dx**3

    @classmethod
    def from_map(cls, smap: SpatialMediumMap, w, reference: Medium | None = None):
        ref = smap.background if reference is None else reference
        idx = smap.indices()
        eb = complex(epsilon(ref, w))
        chi = [complex(epsilon(smap.cells[i], w)) - eb for i in idx]
        return cls(np.array(idx, dtype=float).reshape(-1, 3) * smap.dx, smap.dx, np.array(chi), complex(w), idx)


class HomogeneousHost:
    """Background Green operator of a homogeneous medium with cell-regularized
    values at coincident points."""

    def __init__(self, medium: Medium, w, dx):
        self.medium = medium
        self.omega = complex(w)
        self.dx = float(dx)
        self.eps = complex(epsilon(medium, w))
        self.k = complex(wavenumber(medium, w))
        self.self_term = cell_self_term(self.k, self.eps, self.omega, self.dx)

    def block(self, xs, ys):
        xs = np.atleast_2d(xs)
        ys = np.atleast_2d(ys)
        rv = xs[:, None, :] - ys[None, :, :]
        R = np.linalg.norm(rv, axis=-1)
        same = R < 1e-9 * self.dx
        rv = np.where(same[..., None], 1.0, rv)
        out = _dyadic_block(self.k, rv)
        out[same] = self.self_term
        return out

    def __call__(self, x, y):
        return self.block(x, y)[0, 0]


def cell_self_term(k, eps, w, dx):
    """Cell-averaged background Green tensor at its own centre.

    Principal value over a sphere of equal volume (radiative correction)
    plus the depolarization term -L/(eps w^2) with L = I/3, divided by the
    cell volume.
    """
    V = dx**3
    a = (3 * V / (4 * np.pi)) ** (1 / 3)
    ka = k * a
    pv = (2 / (3 * k * k)) * ((1 - 1j * ka) * np.exp(1j * ka) - 1)
    return (pv - 1 / (3 * eps * w * w)) * I3 / V


def _blocks_to_matrix(b):
    n, m = b.shape[:2]
    return b.transpose(0, 2, 1, 3).reshape(3 * n, 3 * m)


class GreenOperator:
    """Solved inhomogeneous Green operator.

    Calling ``op(x, y)`` returns the 3x3 tensor G(x, y). Coincident points
    (including a cell with itself) return the cell-regularized value.
    """

    def __init__(self, background, grid: ScattererGrid, w):
        self.background = background
        self.grid = grid
        self.omega = complex(w)
        self.dx = grid.dx
        n = grid.centers.shape[0]
        A = _blocks_to_matrix(background.block(grid.centers, grid.centers))
        xdiag = np.repeat(self.omega**2 * grid.polarizability, 3)
        M = np.eye(3 * n) - xdiag[:, None] * A
        anorm = np.abs(M).sum(axis=0).max()
        self._lu = linalg.lu_factor(M, check_finite=False)
        getcon = linalg.lapack.get_lapack_funcs("gecon", (M,))
        rcond, _ = getcon(self._lu[0], anorm, norm="1")
        self.rcond = float(rcond)
        if not np.isfinite(self.rcond) or self.rcond < 1e-13:
            raise SingularSystemError("Lippmann-Schwinger system is near singular",
                                      {"rcond": self.rcond, "cells": n})
        self._x = xdiag

    def scattered_block(self, xs, ys):
        xs = np.atleast_2d(xs)
        ys = np.atleast_2d(ys)
        left = _blocks_to_matrix(self.background.block(xs, self.grid.centers))
        right = _blocks_to_matrix(self.background.block(self.grid.centers, ys))
        sol = linalg.lu_solve(self._lu, self._x[:, None] * right, check_finite=False)
        out = left @ sol
        return out.reshape(xs.shape[0], 3, ys.shape[0], 3).transpose(0, 2, 1, 3)

    def block(self, xs, ys):
        return self.background.block(xs, ys) + self.scattered_block(xs, ys)

    def __call__(self, x, y):
        return self.block(x, y)[0, 0]


def lippmann_schwinger_solve(grid, background, w, max_cells=MAX_CELLS):
    """Solve G = G_b + w^2 G_b chi G on a cell grid by dense LU.

    Parameters
    ----------
    grid : ScattererGrid or SpatialMediumMap
        Scatterers. A map is converted with its own background as reference.
    background : Medium, HomogeneousHost or GreenOperator
        Background Green operator. Passing a solved ``GreenOperator`` chains
        a second scattering step on top of a first one.
    w : complex
        Frequency, off the real-axis poles of the background.

    Returns
    -------
    GreenOperator
    """
    if isinstance(grid, SpatialMediumMap):
        if isinstance(background, Medium):
            grid = ScattererGrid.from_map(grid, w, background)
        else:
            grid = ScattererGrid.from_map(grid, w)
    n = grid.centers.shape[0]
    if n > max_cells:
        raise ValidationError(f"{n} cells exceed the dense-solve cap of {max_cells}", field="cells")
    if isinstance(background, Medium):
        background = HomogeneousHost(background, w, grid.dx)
    if abs(background.dx - grid.dx) > 1e-12 * grid.dx:
        raise ValidationError("background and grid use different cell sizes", field="dx")
    return GreenOperator(background, grid, w)
