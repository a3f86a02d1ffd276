"""Permutations of particle labels and the one-dimensional characters of S_N.

A :class:`Permutation` moves the particle in slot ``i`` to slot ``images[i]``.
Acting on an ordered configuration this means block ``images[i]`` of the
result is block ``i`` of the input, so ``apply(s1, apply(s2, q))`` equals
``apply(compose(s1, s2), q)``.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import NotAHomomorphism, PreconditionViolation

MAX_ENUMERATION = 8
MAX_CHARACTER_N = 6


@dataclass(frozen=True)
class Permutation:
    images: tuple

    def __post_init__(self):
        images = tuple(int(i) for i in self.images)
        if sorted(images) != list(range(len(images))):
            raise ValueError(f"{images} is not a bijection on 0..{len(images) - 1}")
        if not images:
            raise ValueError("a permutation needs at least one label")
        object.__setattr__(self, "images", images)

    @property
    def n(self) -> int:
        return len(self.images)

    def __call__(self, i: int) -> int:
        return self.images[i]

    def __matmul__(self, other: "Permutation") -> "Permutation":
        return compose(self, other)

    def __repr__(self):
        return f"Permutation({self.images})"

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for i, j in enumerate(self.images):
            inv[j] = i
        return Permutation(tuple(inv))

    def cycles(self) -> list:
        """Disjoint cycles, fixed points included."""
        seen = [False] * self.n
        out = []
        for start in range(self.n):
            if seen[start]:
                continue
            cycle = []
            i = start
            while not seen[i]:
                seen[i] = True
                cycle.append(i)
                i = self.images[i]
            out.append(tuple(cycle))
        return out

    def order(self) -> int:
        return math.lcm(*(len(c) for c in self.cycles()))

    def is_identity(self) -> bool:
        return self.images == tuple(range(self.n))


def identity(n: int) -> Permutation:
    return Permutation(tuple(range(n)))


def transposition(n: int, i: int, j: int) -> Permutation:
    images = list(range(n))
    images[i], images[j] = j, i
    return Permutation(tuple(images))


def compose(p1: Permutation, p2: Permutation) -> Permutation:
    """Return ``p1 o p2``, i.e. ``i -> p1(p2(i))``."""
    if p1.n != p2.n:
        raise ValueError(f"cannot compose permutations of {p1.n} and {p2.n} labels")
    return Permutation(tuple(p1.images[j] for j in p2.images))


def parity(p: Permutation) -> int:
    """+1 for even permutations, -1 for odd ones."""
    transpositions = p.n - len(p.cycles())
    return -1 if transpositions % 2 else 1


def enumerate_elements(n: int) -> list:
    """All ``n!`` permutations of ``n`` labels, identity first."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise PreconditionViolation(f"particle count must be a positive integer, got {n!r}")
    if n > MAX_ENUMERATION:
        raise PreconditionViolation(
            f"refusing to enumerate S_{n}: {math.factorial(n)} elements exceeds the "
            f"limit of {MAX_ENUMERATION}! = {math.factorial(MAX_ENUMERATION)}")
    return [Permutation(images) for images in itertools.permutations(range(n))]


def apply_to_configuration(sigma: Permutation, q) -> np.ndarray:
    """Relabel particles: block ``sigma(i)`` of the result is block ``i`` of ``q``.

    ``q`` has shape ``(..., N, d)``; leading axes are carried along.
    """
    q = np.asarray(q)
    if q.ndim < 2 or q.shape[-2] != sigma.n:
        raise ValueError(f"permutation of {sigma.n} labels applied to configuration of shape {q.shape}")
    out = np.empty_like(q)
    out[..., list(sigma.images), :] = q
    return out


@lru_cache(maxsize=None)
def _cayley_table(n: int):
    """Elements of S_n as an array and the index table of their products."""
    if n > MAX_CHARACTER_N:
        raise PreconditionViolation(f"Cayley table of S_{n} is too large to tabulate")
    elements = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    weights = n ** np.arange(n - 1, -1, -1, dtype=np.int64)
    codes = elements @ weights
    order = np.argsort(codes)
    # (a o b)(i) = a[b[i]]
    products = np.take_along_axis(elements[:, None, :].repeat(len(elements), axis=1),
                                  np.broadcast_to(elements[None, :, :], (len(elements),) * 2 + (n,)),
                                  axis=2)
    table = order[np.searchsorted(codes[order], products @ weights)]
    return elements, table


class TopologicalFactor:
    """A complex-valued map on S_N, the candidate gamma in psi(s q) = gamma_s psi(q).

    Values may be arbitrary complex numbers so that invalid candidates can be
    expressed and rejected by :func:`verify_unitarity`.  Characters returned by
    :func:`enumerate_characters` carry exact integer values.
    """

    def __init__(self, n: int, values: Mapping[Permutation, complex], name: str | None = None):
        if len(values) != math.factorial(n):
            raise ValueError(f"a topological factor on S_{n} needs {math.factorial(n)} values, got {len(values)}")
        for sigma in values:
            if sigma.n != n:
                raise ValueError(f"{sigma} does not act on {n} labels")
        self.n = n
        self._values = dict(values)
        self.name = name

    @classmethod
    def from_function(cls, n: int, f: Callable[[Permutation], complex], name: str | None = None):
        return cls(n, {s: f(s) for s in enumerate_elements(n)}, name=name)

    @classmethod
    def trivial(cls, n: int) -> "TopologicalFactor":
        return cls.from_function(n, lambda s: 1, name="trivial")

    @classmethod
    def sign(cls, n: int) -> "TopologicalFactor":
        return cls.from_function(n, parity, name="sign")

    def __call__(self, sigma: Permutation) -> complex:
        return self._values[sigma]

    def items(self):
        return self._values.items()

    def value_array(self) -> np.ndarray:
        """Values in the element order of the cached Cayley table."""
        elements, _ = _cayley_table(self.n)
        return np.array([self._values[Permutation(tuple(e))] for e in elements])

    def __eq__(self, other):
        if not isinstance(other, TopologicalFactor):
            return NotImplemented
        return self.n == other.n and self._values == other._values

    def __hash__(self):
        return hash((self.n, frozenset(self._values.items())))

    def __repr__(self):
        label = self.name or "custom"
        return f"TopologicalFactor(n={self.n}, {label})"


def _close(a, b, rtol=1e-12):
    return np.abs(a - b) <= rtol * np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))


def is_multiplicative(gamma: TopologicalFactor) -> bool:
    """Exhaustive check of gamma(a o b) == gamma(a) gamma(b) over all pairs."""
    _, table = _cayley_table(gamma.n)
    v = gamma.value_array()
    lhs = v[table]
    rhs = v[:, None] * v[None, :]
    if v.dtype.kind in "iu":
        return bool(np.array_equal(lhs, rhs))
    return bool(np.all(_close(lhs, rhs)))


def verify_unitarity(gamma: TopologicalFactor, n: int | None = None) -> bool:
    """True iff every value of the homomorphism ``gamma`` has unit modulus.

    Follows the finite-group argument: gamma(id) must be 1 and, for an element
    of order k, gamma(s)**k must be 1.  Raises :class:`PreconditionViolation`
    for the zero map and :class:`NotAHomomorphism` when multiplicativity fails.
    """
    if n is not None and n != gamma.n:
        raise ValueError(f"factor acts on S_{gamma.n}, not S_{n}")
    v = gamma.value_array()
    if np.all(v == 0):
        raise PreconditionViolation("topological factor vanishes identically")
    if not is_multiplicative(gamma):
        raise NotAHomomorphism(f"{gamma!r} is not multiplicative on S_{gamma.n}")
    exact = v.dtype.kind in "iu"
    for sigma, value in gamma.items():
        if sigma.is_identity():
            if (value != 1) if exact else not _close(value, 1):
                return False
        k = sigma.order()
        if exact:
            if value ** k != 1:
                return False
        elif not _close(complex(value) ** k, 1):
            return False
    mod = np.abs(v)
    return bool(np.all(mod == 1) if exact else np.all(_close(mod, 1.0)))


def _roots_of_unity(m: int):
    return [cmath.exp(2j * math.pi * k / m) for k in range(m)]


def _exactify(c: complex):
    for e in (1, -1):
        if abs(c - e) < 1e-12:
            return e
    return c


def enumerate_characters(n: int) -> list:
    """All multiplicative unit-modulus maps on S_n, found by search.

    Candidate values for transpositions range over the roots of unity whose
    order divides the exponent of S_n (the only values a character can take).
    All transpositions are conjugate, so they share one value ``c``, which must
    satisfy ``c**2 == 1`` because transpositions have order two.  Each
    surviving candidate extends to S_n through a minimal transposition
    decomposition and is kept only if multiplicativity holds on every pair.
    """
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_CHARACTER_N:
        raise PreconditionViolation(f"character search supports 1 <= N <= {MAX_CHARACTER_N}, got {n!r}")
    if n == 1:
        return [TopologicalFactor.trivial(1)]
    exponent = math.lcm(*range(1, n + 1))
    candidates = [_exactify(c) for c in _roots_of_unity(exponent)]
    candidates = [c for c in candidates if isinstance(c, int) or abs(c * c - 1) < 1e-12]
    found = []
    for c in candidates:
        gamma = TopologicalFactor.from_function(n, lambda s, c=c: c ** (s.n - len(s.cycles())))
        if is_multiplicative(gamma) and verify_unitarity(gamma):
            gamma.name = "trivial" if c == 1 else "sign"
            found.append(gamma)
    return found


def character_from_values(n: int, values: Iterable) -> TopologicalFactor:
    """Build a factor from values listed in :func:`enumerate_elements` order."""
    values = list(values)
    elements = enumerate_elements(n)
    if len(values) != len(elements):
        raise ValueError(f"expected {len(elements)} values, got {len(values)}")
    return TopologicalFactor(n, dict(zip(elements, values)))


def as_factor(gamma, n: int) -> TopologicalFactor:
    """Accept a factor or the names ``'trivial'`` / ``'sign'``."""
    if isinstance(gamma, TopologicalFactor):
        if gamma.n != n:
            raise ValueError(f"factor on S_{gamma.n} used with {n} particles")
        return gamma
    if gamma in ("trivial", "boson", "symmetric"):
        return TopologicalFactor.trivial(n)
    if gamma in ("sign", "fermion", "antisymmetric"):
        return TopologicalFactor.sign(n)
    raise ValueError(f"unknown topological factor {gamma!r}")


def random_permutation(n: int, rng: np.random.Generator) -> Permutation:
    return Permutation(tuple(rng.permutation(n)))


def transpositions(n: int) -> Sequence[Permutation]:
    return [transposition(n, i, j) for i in range(n) for j in range(i + 1, n)]
