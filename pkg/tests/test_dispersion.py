import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import Polynomial as P

from polaritonkit.dispersion import (default_transverse_rectangle, longitudinal_roots, root_symmetry_check,
                                     transverse_roots, upper_half_zero_count)
from polaritonkit import ValidationError
from polaritonkit.medium import (LorentzResonance, Medium, epsilon, hopfield_medium, lorentz,
                                 noncausal_test_medium, vacuum)

resonance = st.builds(LorentzResonance, st.floats(0.1, 3.0), st.floats(0.3, 3.0), st.floats(0.01, 1.0))
media = st.lists(resonance, min_size=1, max_size=2).map(lambda rs: Medium(tuple(rs), "h"))


def _denominator(w0, g):
    # w0^2 - (w + i gamma)^2
    return P([w0**2 + g**2, -2j * g, -1.0])


def polynomial_roots(med, omega_alpha=None):
    """Roots of the cleared secular polynomial, Re > 0 only."""
    merged = {}
    for r in med.resonances:
        # identical poles would leave a common factor in the cleared polynomial
        merged[(r.omega, r.gamma)] = merged.get((r.omega, r.gamma), 0.0) + r.f
    dens = [_denominator(w, g) for w, g in merged]
    prod = P([1.0])
    for d in dens:
        prod = prod * d
    num = prod
    for n, f in enumerate(merged.values()):
        others = P([1.0])
        for m, d in enumerate(dens):
            if m != n:
                others = others * d
        num = num + f * others
    # num / prod = eps
    if omega_alpha is not None:
        num = num * P([0, 0, 1.0]) - omega_alpha**2 * prod
    z = num.roots()
    return np.sort_complex(z[z.real > 0])


@settings(max_examples=25, deadline=None)
@given(media, st.floats(0.2, 3.0))
def test_transverse_roots_match_polynomial(med, wa):
    got = np.sort_complex(np.array([r.omega for r in transverse_roots(med, wa)]))
    want = polynomial_roots(med, wa)
    assert got.size == want.size
    assert np.allclose(got, want, rtol=1e-8, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(media)
def test_longitudinal_roots_match_polynomial(med):
    got = np.sort_complex(np.array([r.omega for r in longitudinal_roots(med)]))
    want = polynomial_roots(med)
    assert np.allclose(got, want, rtol=1e-8, atol=1e-10)


def test_roots_solve_secular_equation():
    med = lorentz(1.0, 1.0, 0.1)
    for r in transverse_roots(med, 1.3):
        assert abs(epsilon(med, r.omega) * r.omega**2 - 1.3**2) < 1e-12
        assert np.isclose(r.eps, epsilon(med, r.omega), rtol=1e-12)
        assert r.omega.imag < 0


@settings(max_examples=20, deadline=None)
@given(media, st.floats(0.2, 3.0))
def test_D_is_derivative_of_w_sqrt_eps(med, wa):
    for r in transverse_roots(med, wa):
        s = wa / r.omega  # branch with W sqrt(eps) = +w_a
        # stay well inside the disc free of poles and of zeros of eps (branch points)
        singular = np.concatenate([med.poles(), [z.omega for z in longitudinal_roots(med)]])
        h = 1e-3 * np.min(np.abs(singular - r.omega))

        def k(w):
            return w * s * np.sqrt(epsilon(med, w) / epsilon(med, r.omega))

        z = r.omega
        fd = (8 * (k(z + h) - k(z - h)) - (k(z + 2 * h) - k(z - 2 * h))) / (12 * h)
        assert np.isclose(r.D, fd, rtol=1e-7)


def test_mirror_roots():
    med = Medium((LorentzResonance(1.0, 1.0, 0.1), LorentzResonance(0.5, 2.5, 0.3)))
    assert root_symmetry_check(transverse_roots(med, 1.0), med) < 1e-12
    assert root_symmetry_check(longitudinal_roots(med), med) < 1e-12


def test_vacuum_root():
    (r,) = transverse_roots(vacuum(), 2.0)
    assert r.omega == 2.0 and r.D == 1
    assert longitudinal_roots(vacuum()) == []


def test_lossless_roots_are_real():
    roots = transverse_roots(hopfield_medium(1.0, 1.0), 1.0)
    vals = sorted(r.omega.real for r in roots)
    assert np.allclose(vals, np.sqrt([(3 - 5**0.5) / 2, (3 + 5**0.5) / 2]), atol=1e-12)
    assert all(abs(r.omega.imag) < 1e-12 for r in roots)


@settings(max_examples=8, deadline=None)
@given(media, st.floats(0.3, 3.0))
def test_no_upper_half_plane_zeros_for_passive_media(med, wa):
    R = 4 * default_transverse_rectangle(med, wa).re_max
    assert upper_half_zero_count(med, wa, R) == 0


def test_gain_medium_has_upper_half_plane_zeros():
    bad = noncausal_test_medium(1.0, 1.0, -0.1)
    R = 4 * default_transverse_rectangle(lorentz(1.0, 1.0, 0.1), 1.0).re_max
    want = int(np.sum(polynomial_roots(bad, 1.0).imag > 0)) * 2
    assert upper_half_zero_count(bad, 1.0, R) == want >= 1


def test_invalid_omega_alpha():
    with pytest.raises(ValidationError):
        transverse_roots(lorentz(), 0.0)
