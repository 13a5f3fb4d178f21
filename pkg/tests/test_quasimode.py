import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from polaritonkit import ValidationError
from polaritonkit.dispersion import transverse_roots
from polaritonkit.errors import QuadratureError, WindowViolationError
from polaritonkit.hopfield import HopfieldMedium, energy_weight, hopfield_frequencies
from polaritonkit.medium import lorentz
from polaritonkit.quasimode import (FrequencyWindow, adaptive_gauss_kronrod, default_window,
                                    group_velocity_factor, longitudinal_commutator_integral,
                                    longitudinal_quasimodes, quasimode_energy, transverse_commutator_integral,
                                    transverse_density, transverse_quasimodes, transverse_target)

WEAK = lorentz(1.0, 1.0, 1e-4)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-4, 1.0), st.floats(-1.0, 1.0))
def test_gauss_kronrod_lorentzian(width, shift):
    f = lambda x: width / np.pi / ((x - shift) ** 2 + width**2)  # noqa: E731
    pts = np.concatenate([[-2.0, 2.0], shift + width * np.geomspace(1, 1e3, 8), shift - width * np.geomspace(1, 1e3, 8)])
    pts = pts[(pts >= -2) & (pts <= 2)]
    val, err, _ = adaptive_gauss_kronrod(f, pts, rtol=1e-12)
    exact = (np.arctan((2 - shift) / width) + np.arctan((2 + shift) / width)) / np.pi
    assert abs(val - exact) < 1e-10
    assert err < 1e-9


def test_gauss_kronrod_polynomial_exact():
    # the 7-point Gauss rule is exact to degree 13, so the error estimate vanishes
    val, _, n = adaptive_gauss_kronrod(lambda x: x**13 - 3 * x**5, [0.0, 1.0])
    assert val == pytest.approx(1 / 14 - 0.5, rel=1e-14)
    assert n == 1


def test_gauss_kronrod_gives_up():
    with pytest.raises(QuadratureError):
        adaptive_gauss_kronrod(lambda x: np.sign(x - 1 / 3), [0.0, 1.0], rtol=1e-15, max_intervals=10)


def test_windowed_integral_matches_scipy_quad():
    med = lorentz(1.0, 1.0, 1e-3)
    wa = 1.0
    root = min(transverse_roots(med, wa), key=lambda r: r.omega.real).omega
    win = default_window(root)
    got = transverse_commutator_integral(med, wa, win)
    f = lambda w: float(transverse_density(med, wa, w))  # noqa: E731
    ref = quad(f, win.lower, win.upper, points=[root.real], limit=5000, epsabs=0, epsrel=1e-12)[0]
    assert got == pytest.approx(ref, rel=1e-9)


def test_group_velocity_factor_matches_lossless_dispersion():
    # finite difference of Omega^2 along the exact lossless branches
    m = HopfieldMedium(1.0, 0.8)
    med = m.as_medium()
    h = 1e-5
    for wa in (0.5, 1.0, 2.0):
        for branch in (0, 1):
            W = hopfield_frequencies(wa, m)[branch]
            wp = hopfield_frequencies(np.sqrt(wa**2 + h), m)[branch]
            wm = hopfield_frequencies(np.sqrt(wa**2 - h), m)[branch]
            fd = (wp**2 - wm**2) / (2 * h)
            gv = group_velocity_factor(med, W)
            assert gv.factor == pytest.approx(fd, rel=1e-8)
            assert abs(gv.identity_residual) < 1e-12 * abs(gv.brillouin)
            # group factor equals v_g / n
            assert gv.factor == pytest.approx(gv.group_velocity / gv.index, rel=1e-12)


def test_target_equals_hopfield_mode_weight():
    m = HopfieldMedium(1.0, 0.8)
    for wa in (0.5, 1.0, 2.0):
        for W in hopfield_frequencies(wa, m)[:2]:
            assert transverse_target(m.as_medium(), W) == pytest.approx(W / energy_weight(W, wa, m), rel=1e-12)


@pytest.mark.parametrize("wa", [0.5, 1.0, 2.0])
def test_transverse_peaks_within_one_percent(wa):
    for q in transverse_quasimodes(WEAK, wa):
        assert q.rel_err < 0.01


def test_longitudinal_peak():
    (q,) = longitudinal_quasimodes(WEAK)
    assert q.target == pytest.approx(1 / (2 * np.sqrt(2)), rel=1e-4)
    assert q.rel_err < 0.01


def test_tukey_window_agrees():
    hard = transverse_quasimodes(WEAK, 1.0)
    soft = transverse_quasimodes(WEAK, 1.0, shape="tukey")
    for a, b in zip(hard, soft):
        assert b.rel_err < 0.01
        assert abs(a.integral - b.integral) < 0.005 * a.integral


def test_off_resonance_window_is_empty():
    win = FrequencyWindow(3.0, 0.1)
    assert transverse_commutator_integral(WEAK, 1.0, win, check_edges=False) < 1e-3
    assert longitudinal_commutator_integral(WEAK, win, check_edges=False) < 1e-3
    # a flat integrand puts 20% of its mass in the edge bands
    with pytest.raises(WindowViolationError):
        transverse_commutator_integral(WEAK, 1.0, win)


def test_halving_loss_changes_little():
    a = transverse_quasimodes(lorentz(1.0, 1.0, 1e-4), 1.0)
    b = transverse_quasimodes(lorentz(1.0, 1.0, 5e-5), 1.0)
    for x, y in zip(a, b):
        assert abs(x.integral - y.integral) < 0.005 * x.integral


def test_window_validation():
    with pytest.raises(ValidationError):
        FrequencyWindow(0.1, 0.2)
    with pytest.raises(ValidationError):
        default_window(1.0 - 0.8j)
    with pytest.raises(ValidationError):
        transverse_quasimodes(lorentz(1.0, 1.0, 0.1), 1.0)


def test_quasimode_energy():
    assert quasimode_energy([1, 2], [0.5, 2.0]) == pytest.approx(0.5 * 1 + 2.0 * 2)
    with pytest.raises(ValidationError):
        quasimode_energy([-1], [1.0])
