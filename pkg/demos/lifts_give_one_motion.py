"""
The motion of an unordered configuration does not depend on its labels
=======================================================================

An unordered configuration of N particles has N! ordered lifts.  Integrating
the guidance equation from each lift and forgetting the labels afterwards
gives the same path, because the velocity field of a symmetrized state
commutes with relabelling.
"""

import numpy as np

from symbohm import GaussianPacket, antisymmetrize, lift_independence_check, project, symmetrize
from symbohm.configuration import lifts
from symbohm.wavefunction import product

packets = [GaussianPacket([-1.0, 0.0], [0.6, 0.1], 0.6), GaussianPacket([1.0, 0.2], [-0.6, 0.0], 0.6),
           GaussianPacket([0.0, 1.4], [0.0, -0.5], 0.7)]
q0 = np.array([[-0.8, 0.1], [1.1, 0.0], [0.1, 1.3]])

print("lifts of the initial configuration:", len(lifts(project(q0))))
for name, build in (("fermions", antisymmetrize), ("bosons", symmetrize)):
    dev = lift_independence_check(build(packets), q0, 1.5, tol=1e-8)
    print(f"{name:8s} largest quotient distance between lift trajectories: {dev:.2e}")

# A plain product state is not exchange symmetric, and the check refuses it.
try:
    lift_independence_check(product(packets), q0, 1.5)
except Exception as exc:
    print(f"product state: {type(exc).__name__}: {exc}")
