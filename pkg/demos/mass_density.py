"""
Where the mass sits
===================

The mass density m(x, t) = sum_i m_i * (marginal of particle i) is a field on
physical space built from |psi|^2.  Integrated over space it returns the
total mass at every time, whatever the statistics.
"""

import numpy as np

from symbohm import GaussianPacket, antisymmetrize, mass_density, symmetrize

packets = [GaussianPacket(-0.6, 0.4, 0.5), GaussianPacket(0.7, -0.2, 0.6)]
x, w = np.polynomial.legendre.leggauss(96)

for name, psi in (("fermions", antisymmetrize(packets)), ("bosons", symmetrize(packets))):
    for t in (0.0, 0.5, 1.0):
        lo, hi = psi.support(t, nwidths=10.0)
        pts = 0.5 * (hi - lo) * x[:, None] + 0.5 * (hi + lo)
        m = mass_density(psi, pts, t)
        total = np.sum(0.5 * (hi[0] - lo[0]) * w * m)
        print(f"{name:8s} t={t:.1f}  integral {total:.12f}  density at 0: {mass_density(psi, [0.0], t):.4f}")

# Near the diagonal the fermions repel each other, so the density between
# the packets is lower than for bosons.
print("fermion / boson density at x = 0.05:",
      mass_density(antisymmetrize(packets), [0.05]) / mass_density(symmetrize(packets), [0.05]))
