"""Field propagator near a small dielectric cluster.

Solves the volume integral equation on a few cubic cells and compares the
scattered part of the dyadic Green tensor with the first Born term.
"""
import numpy as np

from polaritonkit.greens import ScattererGrid, g_dyadic_homogeneous, lippmann_schwinger_solve
from polaritonkit.medium import vacuum

w = 1.0 + 0.02j
dx = 0.25
centers = dx * np.array([[i, j, 0] for i in range(-1, 2) for j in range(-1, 2)], dtype=float)
x, y = np.array([1.5, 0.2, 0.3]), np.array([-1.2, -0.4, 0.0])
free = g_dyadic_homogeneous(vacuum(), x, y, w).tensor

print("    chi   |scattered|   |Born|   ratio")
for chi in (1e-3, 1e-2, 1e-1, 1.0, 4.0):
    op = lippmann_schwinger_solve(ScattererGrid(centers, dx, [chi] * len(centers)), vacuum(), w)
    scat = op(x, y) - free
    born = sum(w**2 * chi * dx**3 * g_dyadic_homogeneous(vacuum(), x, c, w).tensor
               @ g_dyadic_homogeneous(vacuum(), c, y, w).tensor for c in centers)
    a, b = np.abs(scat).max(), np.abs(born).max()
    print(f"{chi:7.3f} {a:12.4e} {b:10.4e} {a / b:7.4f}")
