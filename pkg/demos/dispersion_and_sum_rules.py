"""Polariton branches of a lossy Lorentz medium and the two residue sum rules.

Prints the complex roots for a few photon frequencies, checks that the sum
rules close, and compares the causal field propagator from residues against a
direct Fourier inversion.
"""
import numpy as np

from polaritonkit.dispersion import longitudinal_roots, transverse_roots
from polaritonkit.medium import lorentz
from polaritonkit.propagators import h_numeric, h_residue, sum_rule_im, sum_rule_re

med = lorentz(1.0, 1.0, 0.1)

print(f"{'omega_alpha':>11} {'Re Omega':>10} {'Im Omega':>10} {'|D|':>8}")
for wa in (0.25, 0.5, 1.0, 2.0, 4.0):
    roots = transverse_roots(med, wa)
    for r in roots:
        print(f"{wa:11.2f} {r.omega.real:10.5f} {r.omega.imag:10.5f} {abs(r.D):8.4f}")
    print(f"{'':11} sum rules: im {sum_rule_im(roots, wa):+.1e}, re - 1 {sum_rule_re(roots, wa) - 1:+.1e}")

for r in longitudinal_roots(med):
    print(f"longitudinal root {r.omega:.6f}")

wa = 1.0
tau = np.linspace(0.0, 30.0, 7)
roots = transverse_roots(med, wa)
hr = h_residue(roots, wa, tau)
hn = h_numeric(med, wa, tau).values
print("\n  tau   H residue    H numeric")
for t, a, b in zip(tau, hr, hn):
    print(f"{t:5.1f} {a:+.8f} {b:+.8f}")
