"""
Only two ways to pick up a phase under relabelling
==================================================

A topological factor assigns a unit complex number to every permutation and
must respect composition.  For the permutation group on N labels there are
exactly two such maps once N >= 2: the trivial one and the parity sign.
"""

import itertools

from symbohm import enumerate_characters, enumerate_elements, parity, verify_unitarity
from symbohm.group import compose

# Every permutation is a product of adjacent swaps, and all swaps are
# conjugate.  A multiplicative map therefore sends each swap to the same
# value c with c * c = 1, which leaves c = +1 or c = -1.
for n in range(2, 7):
    chars = enumerate_characters(n)
    names = ", ".join(c.name for c in chars)
    checked = all(verify_unitarity(c, n) for c in chars)
    print(f"N={n}: {len(enumerate_elements(n)):4d} elements, characters: {names}, unitary: {checked}")

# Parity really is a homomorphism; spot-check it on S_4 by brute force.
els = enumerate_elements(4)
bad = sum(parity(compose(a, b)) != parity(a) * parity(b) for a, b in itertools.product(els, els))
print(f"parity violations on S_4 x S_4: {bad}")

# The sign character on a few elements of S_3.
sign = enumerate_characters(3)[1]
for p in enumerate_elements(3):
    print(f"  {p.images}  cycles={p.cycles()}  sign={sign(p):+d}")
