"""Weakly damped medium: the spectral weight near each branch matches the lossless mode weight.

For a small loss the field commutator density is sharply peaked at the
polariton frequencies. Integrating it over a window of a few hundred widths
recovers Omega / N, the normalization of the lossless Hopfield mode.
"""
from polaritonkit.medium import lorentz
from polaritonkit.quasimode import longitudinal_quasimodes, transverse_quasimodes

for gamma in (1e-3, 1e-4):
    med = lorentz(1.0, 1.0, gamma)
    print(f"gamma = {gamma:g}")
    for wa in (0.5, 1.0, 2.0):
        for q in transverse_quasimodes(med, wa):
            print(f"  omega_alpha {wa:3.1f} branch {q.branch}: integral {q.integral:.6f} "
                  f"target {q.target:.6f} rel err {q.rel_err:.1e}")
    for q in longitudinal_quasimodes(med):
        print(f"  longitudinal: integral {q.integral:.6f} target {q.target:.6f} rel err {q.rel_err:.1e}")
