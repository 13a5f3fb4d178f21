import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from polaritonkit import ValidationError
from polaritonkit.errors import StabilityError
from polaritonkit.evolution import (BasisTruncationWarning, BathDiscretization, LinearSystem, assemble_homogeneous,
                                    assemble_map, discrete_roots, emergence_check, energy_report,
                                    fit_damped_modes, hamiltonian_structure_residual, integrate,
                                    kernel_reversal_check, langevin_truncation_experiment, longitudinal_evolution,
                                    recurrence_time, reverse_trajectory, split_free_scattered,
                                    symplectic_form_check, thermal_bath_state, time_reversal_check,
                                    wave_packet_state)
from polaritonkit.greens import BoxModeBasis
from polaritonkit.hopfield import HopfieldMedium, hopfield_frequencies, longitudinal_oscillation
from polaritonkit.medium import hopfield_medium, lorentz, slab_map, vacuum
from polaritonkit.propagators import check_sum_rules

REF = lorentz(1.0, 1.0, 0.1)


@pytest.fixture(scope="module")
def small():
    return assemble_homogeneous(REF, [0.7, 1.3], 60)


def test_bath_kernel_converges():
    T = 60.0
    errs = [BathDiscretization.from_medium(REF, n).kernel_error(REF, T) for n in (50, 100, 200, 400)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-2


def test_bath_rejects_lossless_and_gain():
    with pytest.raises(ValidationError):
        BathDiscretization.from_medium(hopfield_medium(1.0, 1.0))
    from polaritonkit.medium import noncausal_test_medium

    with pytest.raises(ValidationError):
        BathDiscretization.from_medium(noncausal_test_medium())


def test_two_oscillator_frequencies():
    m = HopfieldMedium(1.0, 0.8)
    sysm = assemble_homogeneous(m.as_medium(), [1.3], bath=BathDiscretization.single_line(1.0, 0.8))
    up, lo, _ = hopfield_frequencies(1.3, m)
    assert np.allclose(np.sort(sysm.exact_flow().frequencies()), [lo, up], rtol=1e-13)


def test_vacuum_mode_is_a_cosine():
    sysm = assemble_homogeneous(vacuum(), [1.7])
    traj = integrate(sysm, sysm.pack(q=[1.0]), 20.0, 0.01, "order8", stride=10)
    assert np.allclose(traj.q[:, 0], np.cos(1.7 * traj.t), atol=1e-10)


def test_flow_matrix_is_hamiltonian(small):
    assert hamiltonian_structure_residual(small) < 1e-12
    K = small.stiffness()
    assert np.allclose(K, K.T, atol=1e-12)
    assert np.min(np.linalg.eigvalsh(K)) > 0


def test_exact_flow_matches_matrix_exponential(small):
    z0 = small.pack(q=[1.0, 0.5], qdot=[0.0, -0.2]) + thermal_bath_state(small, 1, 1e-2)
    t = 3.7
    ref = expm(small.flow_matrix() * t) @ z0
    assert np.allclose(small.exact_flow().propagate(z0, [t])[0], ref, atol=1e-10)


@pytest.mark.parametrize("method, order", [("leapfrog", 2), ("order4", 4), ("order6", 6), ("order8", 8)])
def test_convergence_order(small, method, order):
    z0 = small.pack(q=[1.0, -0.5])
    T = 5.0
    exact = small.exact_flow().propagate(z0, [T])[0]
    errs = []
    for dt in (0.05, 0.025):
        z = integrate(small, z0, T, dt, method).z[-1]
        errs.append(np.max(np.abs(z - exact)))
    rate = np.log2(errs[0] / errs[1])
    assert rate == pytest.approx(order, abs=0.6)


def test_dop853_reference(small):
    z0 = small.pack(q=[1.0, -0.5])
    a = integrate(small, z0, 10.0, 0.05, "dop853").z[-1]
    b = small.exact_flow().propagate(z0, [10.0])[0]
    assert np.max(np.abs(a - b)) < 1e-9


def test_energy_drift_and_ledger():
    sysm = assemble_homogeneous(REF, [1.0], 400)
    traj = integrate(sysm, sysm.pack(q=[1.0], qdot=[0.3]), 200.0, 0.025, "order8", stride=40)
    assert traj.energy_drift() < 1e-8
    rep = energy_report(traj)
    assert rep.ledger_residual < 1e-8
    # the field energy has flowed into the bath
    assert rep.electromagnetic[-1] < 1e-3 * rep.electromagnetic[0]
    assert set(rep.to_dict()) >= {"total", "electromagnetic", "material", "drift"}


def test_stability_guard(small):
    with pytest.raises(ValidationError):
        integrate(small, small.pack(q=[1.0, 0.0]), 1.0, 5.0, "order8")
    with pytest.raises(StabilityError):
        integrate(small, small.pack(q=[1.0, 0.0]), 1.0, 0.05, "order8", energy_bound=1e-30)


def test_symplectic_checks(small):
    assert symplectic_form_check(small, 30.0, method="exact") < 1e-10
    assert symplectic_form_check(small, 30.0, 0.025, "order8") < 1e-10
    assert symplectic_form_check(small, 30.0, 0.025, "leapfrog") < 1e-10
    assert symplectic_form_check(small, 30.0, method="exact", truncated=True) > 0.5


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(0.2, 3.0), min_size=1, max_size=3), st.integers(1, 8), st.floats(0.1, 20.0))
def test_random_systems_are_symplectic(freqs, n_lines, T):
    sysm = assemble_homogeneous(lorentz(0.7, 1.1, 0.3), freqs, n_lines)
    assert symplectic_form_check(sysm, T, method="exact") < 1e-9


def test_time_reversal(small):
    z0 = small.pack(q=[1.0, -0.5]) + thermal_bath_state(small, 2, 0.01)
    traj = integrate(small, z0, 40.0, 0.025, "order8", stride=8)
    assert time_reversal_check(traj) < 1e-7
    rev = reverse_trajectory(traj)
    assert np.allclose(rev.t, -traj.t[::-1])
    # integrating the reversed final state forward retraces the path
    back = integrate(small, rev.z[0], 40.0, 0.025, "order8", stride=8)
    assert np.allclose(back.z, rev.z, atol=1e-8)


def test_anticausal_kernel_mirror():
    assert kernel_reversal_check(REF, 1.0, "H", n=2**16) < 1e-9


def test_discrete_roots_satisfy_sum_rules():
    sysm = assemble_homogeneous(REF, [1.0], 200)
    roots = discrete_roots(sysm)
    check_sum_rules(roots, 1.0, tol=1e-10)
    assert len(roots) == 201


def test_split_recombines_exactly():
    sysm = assemble_homogeneous(REF, [1.0], 200)
    z0 = sysm.pack(q=[0.8], qdot=[0.2]) + thermal_bath_state(sysm, 4, 0.01)
    traj = integrate(sysm, z0, 60.0, 0.025, "exact", stride=20)
    assert split_free_scattered(traj, "discrete").residual < 1e-8
    # continuum roots describe the same motion up to bath discretization
    assert split_free_scattered(traj, "continuum").residual < 1e-2


def test_split_without_bath_is_free_motion():
    sysm = assemble_homogeneous(REF, [1.0], 200)
    traj = integrate(sysm, sysm.pack(q=[0.8], qdot=[0.2]), 30.0, 0.025, "exact", stride=20)
    res = split_free_scattered(traj, "discrete")
    assert np.max(np.abs(res.scattered)) < 1e-12
    assert res.residual < 1e-9


def test_fit_damped_modes_recovers_synthetic_signal():
    t = np.linspace(0, 60, 1201)
    W1, W2 = 0.62 - 0.03j, 1.6 - 0.2j
    y = 2 * (0.7 * np.exp(-1j * W1 * t)).real + 2 * (0.2j * np.exp(-1j * W2 * t)).real
    fit = fit_damped_modes(t, y, 2)
    assert abs(fit[0][0] - W1) < 1e-8 and fit[0][1] == pytest.approx(0.7, rel=1e-6)
    assert abs(fit[1][0] - W2) < 1e-8


def test_emergence_small_bath():
    rep = emergence_check(REF, 1.0, n_lines=200, dt=0.05)
    assert rep.re_error < 0.01 and rep.im_error < 0.05
    assert rep.energy_drift < 1e-6


def test_recurrence_time_grows_with_lines():
    a = recurrence_time(BathDiscretization.from_medium(REF, 100))
    b = recurrence_time(BathDiscretization.from_medium(REF, 400))
    assert b > 3 * a


def test_longitudinal_matches_lossless_oscillation():
    m = HopfieldMedium(1.0, 1.0)
    t = np.linspace(0, 20, 201)
    res = longitudinal_evolution(m.as_medium(), (0.6, -0.2), t, roots=[])
    assert np.max(np.abs(res.volterra - longitudinal_oscillation(0.6, -0.2, m, t))) < 1e-8


def test_longitudinal_lossy_volterra_vs_residues():
    t = np.linspace(0, 30, 301)
    res = longitudinal_evolution(REF, (1.0, 0.0), t)
    assert res.deviation < 1e-8


def test_longitudinal_grid_validation():
    with pytest.raises(ValidationError):
        longitudinal_evolution(REF, (1.0, 0.0), np.array([0.0, 0.1, 0.3]))


def _slab(n_lines=60):
    basis = BoxModeBasis(20.0, 2.5, axis=2, polarizations=(1,))
    smap = slab_map(0.4, lorentz(1.0, 1.0, 1.0), range(-2, 3))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BasisTruncationWarning)
        return assemble_map(smap, basis, n_lines)


def test_map_assembly_and_truncation_warning():
    basis = BoxModeBasis(20.0, 2.5, axis=2, polarizations=(1,))
    smap = slab_map(0.4, lorentz(1.0, 1.0, 1.0), range(-2, 3))
    with pytest.warns(BasisTruncationWarning):
        sysm = assemble_map(smap, basis, 60)
    assert sysm.S == 5
    assert 0 < sysm.truncation_loss < 1
    assert hamiltonian_structure_residual(sysm) < 1e-12


def test_localized_absorber_keeps_free_field():
    sysm = _slab()
    z0 = wave_packet_state(sysm, 1.5, 2.0, -6.0) + thermal_bath_state(sysm, 3)
    probes = [(0.0, 0.0, z) for z in np.linspace(-10, 10, 21)]
    rep = langevin_truncation_experiment(sysm, z0, np.linspace(0, 200, 101), probes)
    assert rep.plateau > 0.1
    assert np.all(rep.block_errors(4) > 0.1)
    assert rep.field_error[0] > 0.5


def test_homogeneous_absorber_forgets_free_field():
    med = lorentz(1.0, 1.0, 1.0)
    sysm = assemble_homogeneous(med, BoxModeBasis(2 * np.pi, 2.0, axis=2, polarizations=(1,)), 400)
    z0 = wave_packet_state(sysm, 1.5, 1.0, -1.0) + thermal_bath_state(sysm, 3)
    rep = langevin_truncation_experiment(sysm, z0, np.linspace(0, 60, 31))
    assert rep.field_error[-1] < 1e-3 * rep.field_error[0]


def test_state_validation(small):
    with pytest.raises(ValidationError):
        integrate(small, np.zeros(3), 1.0, 0.01)
    with pytest.raises(ValidationError):
        integrate(small, small.pack(), 1.0, 0.01, method="euler")


def test_linear_system_layout():
    sysm = LinearSystem(np.array([1.0, 2.0]), np.eye(2), np.ones((2, 3)), 0.1 * np.ones((2, 3)))
    z = sysm.pack(q=[1, 2], qdot=[3, 4], X=np.arange(6).reshape(2, 3), Xdot=-np.arange(6).reshape(2, 3))
    q, qd, X, Xd = sysm.unpack(z)
    assert np.array_equal(q, [1, 2]) and np.array_equal(qd, [3, 4])
    assert np.array_equal(X, np.arange(6).reshape(2, 3)) and np.array_equal(Xd, -X)
