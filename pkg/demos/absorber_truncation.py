"""Dropping the free-field term: fine in bulk, wrong next to a finite absorber.

Two systems are driven from the same kind of initial data. In the homogeneous
absorber every field mode couples to the medium, so the memory of the initial
field decays and the material noise alone carries the late-time field. A thin
absorbing slab leaves field modes that never touch it; the error of the
truncated description then settles on a plateau.

A finite set of bath lines eventually rephases and the bulk error returns,
so the run is kept short.
"""
import warnings

import numpy as np

from polaritonkit.evolution import (BasisTruncationWarning, assemble_homogeneous, assemble_map,
                                    langevin_truncation_experiment, recurrence_time, thermal_bath_state, wave_packet_state)
from polaritonkit.greens import BoxModeBasis
from polaritonkit.medium import lorentz, slab_map

absorber = lorentz(1.0, 1.0, 1.0)
times = np.linspace(0.0, 60.0, 31)

bulk = assemble_homogeneous(absorber, BoxModeBasis(2 * np.pi, 2.0, axis=2, polarizations=(1,)), 400)
z0 = wave_packet_state(bulk, 1.5, 1.0, -1.0) + thermal_bath_state(bulk, 3)
rep_bulk = langevin_truncation_experiment(bulk, z0, times)

with warnings.catch_warnings():
    # the box basis resolves only part of a thin cell's coupling; expected here
    warnings.simplefilter("ignore", BasisTruncationWarning)
    slab = assemble_map(slab_map(0.4, absorber, range(-2, 3)),
                        BoxModeBasis(20.0, 2.5, axis=2, polarizations=(1,)), 200)
z0 = wave_packet_state(slab, 1.5, 2.0, -6.0) + thermal_bath_state(slab, 3)
probes = [(0.0, 0.0, z) for z in np.linspace(-10, 10, 21)]
rep_slab = langevin_truncation_experiment(slab, z0, times, probes)

print("     t   bulk error   slab error")
for t, a, b in zip(times[::3], rep_bulk.field_error[::3], rep_slab.field_error[::3]):
    print(f"{t:6.0f} {a:12.3e} {b:12.3e}")
print(f"bulk recurrence time {recurrence_time(bulk.bath):.0f}, slab plateau {rep_slab.plateau:.3f}")
