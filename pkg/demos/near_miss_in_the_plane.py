"""
In the plane, fermions can slip past each other
===============================================

On a line two fermions can never swap order.  In the plane the coincidence
set has codimension two, so a pair can go around each other at a positive
distance.  Two packets fly past each other with a small sideways offset;
depending on where the particles start inside the packets, the Bohmian pair
either passes (the x-order flips) or is turned back.  There is no target
number here; it is a picture of the geometry.
"""

import numpy as np

from symbohm import GaussianPacket, antisymmetrize, integrate_trajectory, min_pair_distance

offset = 1.2
psi = antisymmetrize([GaussianPacket([-2.0, offset / 2], [2.0, 0.0], 0.5),
                      GaussianPacket([2.0, -offset / 2], [-2.0, 0.0], 0.5)])

print(" start y   closest approach   x-order flipped   final direction of q1 - q2 (deg)")
for y in (1.0, 0.8, 0.7, 0.6, 0.5, 0.35, 0.2, 0.05):
    traj = integrate_trajectory(psi, [[-2.0, y], [2.0, -y]], 0.0, 2.0, n_samples=801)
    # follow the labels of the lift, not the canonical listing
    first, last = traj.lift_states[0], traj.lift_states[-1]
    flipped = np.sign(first[0, 0] - first[1, 0]) != np.sign(last[0, 0] - last[1, 0])
    rel = last[0] - last[1]
    angle = np.degrees(np.arctan2(rel[1], rel[0]))
    print(f"{y:8.2f}   {min_pair_distance(traj):16.4f}   {str(flipped):15s}   {angle:8.1f}")
