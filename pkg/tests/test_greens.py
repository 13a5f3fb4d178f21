import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import erfc

from polaritonkit import ValidationError
from polaritonkit.greens import (Box, BoxModeBasis, HomogeneousHost, ScattererGrid, Sphere, cell_self_term,
                                 depolarization_dyad, g_dyadic_homogeneous, lippmann_schwinger_solve,
                                 planewave_split, vacuum_time_propagators)
from polaritonkit.medium import lorentz, slab_map, vacuum
from polaritonkit.propagators import wavenumber

MED = lorentz(1.0, 1.0, 0.1)


def _smoothed_scalar(R, kap, s):
    """Closed form of the Gaussian-smoothed outgoing Green function."""
    u = s / np.sqrt(2)
    g = np.exp(1j * kap * R) / (4 * np.pi * R)
    e = (np.exp(1j * kap * R) * erfc(R / (2 * u) + 1j * kap * u)
         + np.exp(-1j * kap * R) * erfc(R / (2 * u) - 1j * kap * u)) / (8 * np.pi * R)
    return np.exp(-(kap * u) ** 2) * (g - e)


def _smoothed_dyad(kap, rvec, s, h=1e-3):
    # [I + grad grad / kap^2] applied with an 8th-order radial stencil
    R = np.linalg.norm(rvec)
    rh = rvec / R
    c1 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
    c2 = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])
    f = np.array([_smoothed_scalar(R + x, kap, s) for x in np.arange(-4, 5) * h])
    f1, f2 = c1 @ f / h, c2 @ f / h**2
    rr = np.outer(rh, rh)
    return f[4] * np.eye(3) + (f2 * rr + f1 / R * (np.eye(3) - rr)) / kap**2


def test_plane_wave_sum_converges_to_closed_form():
    w = 1.0 + 1.0j
    x, y = np.array([0.3, 0.5, 1.2]), np.array([-0.4, 0.1, -0.6])
    errs = []
    for L, km in ((10, 8), (16, 12)):
        b = BoxModeBasis(L, km)
        gp, gl = planewave_split(b, vacuum(), x, y, w, smoothing=0.5)
        # the k = 0 longitudinal term of the periodic box is not part of the free-space kernel
        ref = _smoothed_dyad(w, x - y, 0.5) + np.eye(3) / (w**2 * b.volume)
        errs.append(np.max(np.abs(gp.tensor + gl.tensor - ref)) / np.max(np.abs(ref)))
    assert errs[1] < errs[0]
    assert errs[1] < 1e-5


def test_closed_form_solves_vector_helmholtz():
    # curl curl G - k^2 G = 0 away from the source, by finite differences
    w = 0.8 + 0.1j
    k = complex(wavenumber(MED, w))
    x0, y = np.array([0.9, -0.3, 0.5]), np.zeros(3)
    h = 2e-3

    def G(x):
        return g_dyadic_homogeneous(MED, x, y, w).tensor

    # curl curl = grad div - laplacian, column by column
    lap = sum((G(x0 + h * e) - 2 * G(x0) + G(x0 - h * e)) / h**2 for e in np.eye(3))
    gd = np.zeros((3, 3), dtype=complex)
    for i in range(3):
        for j in range(3):
            ei, ej = np.eye(3)[i], np.eye(3)[j]
            # d_i d_j G_{j.} summed over j gives (grad div G)_{i.}
            gd[i] += (G(x0 + h * ei + h * ej)[j] - G(x0 + h * ei - h * ej)[j]
                      - G(x0 - h * ei + h * ej)[j] + G(x0 - h * ei - h * ej)[j]) / (4 * h * h)
    res = gd - lap - k**2 * G(x0)
    assert np.max(np.abs(res)) < 1e-4 * np.max(np.abs(k**2 * G(x0)))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6), st.floats(0.2, 2.0), st.floats(0.0, 0.5))
def test_reciprocity(coords, a, b):
    x, y = np.array(coords[:3]), np.array(coords[3:])
    if np.linalg.norm(x - y) < 1e-2:
        return
    w = a + 1j * b
    gxy = g_dyadic_homogeneous(MED, x, y, w).tensor
    gyx = g_dyadic_homogeneous(MED, y, x, w).tensor
    assert np.allclose(gxy, gyx.T, rtol=1e-12, atol=1e-15)
    assert np.allclose(gxy, gxy.T, rtol=1e-12, atol=1e-15)


def test_far_field_is_transverse():
    w = 1.0 + 1e-3j
    rh = np.array([1.0, 2.0, 2.0]) / 3
    th = np.array([2.0, 1.0, -2.0]) / 3
    for R in (10.0, 100.0):
        G = g_dyadic_homogeneous(vacuum(), R * rh, np.zeros(3), w).tensor
        kr = w * R
        # radial over transverse: (-2i/kR + 2/(kR)^2) / (1 + i/kR - 1/(kR)^2)
        expected = (-2j / kr + 2 / kr**2) / (1 + 1j / kr - 1 / kr**2)
        assert np.isclose((rh @ G @ rh) / (th @ G @ th), expected, rtol=1e-12)
        assert abs(th @ G @ rh) < 1e-14 * abs(th @ G @ th)


def test_coincident_points_rejected():
    with pytest.raises(ValidationError):
        g_dyadic_homogeneous(MED, [0, 0, 0], [0, 0, 0], 1.0)


def test_sphere_depolarization():
    assert np.allclose(depolarization_dyad(Sphere(2.5)), np.eye(3) / 3, atol=1e-12)


@pytest.mark.parametrize("half", [(1.0, 1.0, 1.0), (1.0, 1.0, 3.0), (0.5, 1.0, 2.0)])
def test_box_depolarization_solid_angle(half):
    # L_zz is the solid angle of the two z faces seen from the centre over 4 pi
    a = np.array(half)
    L = depolarization_dyad(Box(tuple(half)))
    r = np.linalg.norm(a)
    for i in range(3):
        j, k = [m for m in range(3) if m != i]
        expected = 2 / np.pi * np.arctan(a[j] * a[k] / (a[i] * r))
        assert abs(L[i, i] - expected) < 1e-10
    assert abs(np.trace(L) - 1) < 1e-10
    assert np.max(np.abs(L - np.diag(np.diag(L)))) < 1e-12


def test_cell_self_term_principal_value():
    # angular average of the regular part of G is (2/3) g; integrate it over the equal-volume sphere
    w = 0.9 + 0.05j
    eps = 1.0 + 0j
    k = w
    dx = 0.4
    a = (3 * dx**3 / (4 * np.pi)) ** (1 / 3)
    re = quad(lambda R: (2 / 3 * R * np.exp(1j * k * R)).real, 0, a)[0]
    im = quad(lambda R: (2 / 3 * R * np.exp(1j * k * R)).imag, 0, a)[0]
    expected = (re + 1j * im - 1 / (3 * eps * w * w)) / dx**3
    S = cell_self_term(k, eps, w, dx)
    assert np.allclose(S, expected * np.eye(3), rtol=1e-12)


def test_zero_contrast_leaves_background():
    grid = ScattererGrid([[0, 0, 0], [0, 0, 1]], 0.5, [0.0, 0.0])
    op = lippmann_schwinger_solve(grid, MED, 1.0 + 0.1j)
    x, y = [0.3, 0.2, 2.0], [-1.0, 0.0, 0.0]
    assert np.allclose(op(x, y), HomogeneousHost(MED, 1.0 + 0.1j, 0.5)(x, y), rtol=1e-14)


def test_lippmann_schwinger_reciprocity():
    smap = slab_map(0.3, lorentz(0.8, 1.2, 0.2), range(-2, 3))
    op = lippmann_schwinger_solve(smap, vacuum(), 0.9 + 0.02j)
    x, y = np.array([0.2, -0.4, 1.1]), np.array([-0.3, 0.5, -0.9])
    assert np.allclose(op(x, y), op(y, x).T, rtol=1e-10, atol=1e-14)


def test_weak_scatterer_matches_born_approximation():
    w = 1.0 + 0.05j
    x, y, c = np.array([1.0, 0.0, 0.2]), np.array([-0.8, 0.3, 0.0]), np.zeros(3)
    chi = 1e-4
    dx = 0.2
    op = lippmann_schwinger_solve(ScattererGrid([c], dx, [chi]), vacuum(), w)
    born = w**2 * chi * dx**3 * (g_dyadic_homogeneous(vacuum(), x, c, w).tensor
                                 @ g_dyadic_homogeneous(vacuum(), c, y, w).tensor)
    scat = op(x, y) - g_dyadic_homogeneous(vacuum(), x, y, w).tensor
    assert np.max(np.abs(scat - born)) < 1e-3 * np.max(np.abs(born))


def test_cell_cap():
    grid = ScattererGrid(np.zeros((5, 3)) + np.arange(5)[:, None], 1.0, np.ones(5))
    with pytest.raises(ValidationError):
        lippmann_schwinger_solve(grid, vacuum(), 1.0, max_cells=4)


def test_time_propagator_second_derivative():
    b = BoxModeBasis(8.0, 3.0)
    x, y = [0.1, 0.4, -0.3], [0.5, -0.2, 0.0]
    t, h = 1.3, 1e-3
    u = [vacuum_time_propagators(b, s, x, y)[1] for s in (t - h, t, t + h)]
    q = vacuum_time_propagators(b, t, x, y)[0]
    assert np.allclose(q, -(u[0] - 2 * u[1] + u[2]) / h**2, rtol=1e-5, atol=1e-8)
    # the longitudinal kernel grows linearly in time
    _, _, up1 = vacuum_time_propagators(b, 1.0, x, y)
    _, _, up2 = vacuum_time_propagators(b, 2.0, x, y)
    assert np.allclose(up2, 2 * up1, rtol=1e-12, atol=1e-15)
