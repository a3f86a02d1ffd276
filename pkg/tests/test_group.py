import cmath
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symbohm.errors import NotAHomomorphism, PreconditionViolation
from symbohm.configuration import project
from symbohm.group import (Permutation, TopologicalFactor, apply_to_configuration, as_factor, compose,
                           enumerate_characters, enumerate_elements, identity, is_multiplicative, parity,
                           transposition, verify_unitarity)


def inversions(images):
    return sum(1 for i, j in itertools.combinations(range(len(images)), 2) if images[i] > images[j])


perms = st.integers(1, 6).flatmap(lambda n: st.permutations(list(range(n)))).map(Permutation)


def pair_of_perms(n):
    return st.tuples(st.permutations(list(range(n))), st.permutations(list(range(n))))


# --- Permutation basics ---------------------------------------------------

def test_rejects_non_bijection():
    with pytest.raises(ValueError):
        Permutation((0, 0, 1))
    with pytest.raises(ValueError):
        Permutation(())


def test_compose_examples():
    p = Permutation((2, 0, 1))
    assert compose(identity(3), p) == p
    swap = transposition(3, 0, 1)
    assert compose(swap, swap) == identity(3)
    # hand table: p1(p2(i)) with p1 = (0->1, 1->2, 2->0), p2 = (0->1, 1->0)
    assert compose(Permutation((1, 2, 0)), Permutation((1, 0, 2))) == Permutation((2, 1, 0))


def test_compose_size_mismatch():
    with pytest.raises(ValueError):
        compose(identity(2), identity(3))


@given(perms)
def test_inverse_composes_to_identity(p):
    assert compose(p, p.inverse()) == identity(p.n)
    assert compose(p.inverse(), p) == identity(p.n)


@given(perms)
def test_order_and_cycles(p):
    k = p.order()
    q = identity(p.n)
    for _ in range(k):
        q = compose(p, q)
    assert q == identity(p.n)
    assert sum(len(c) for c in p.cycles()) == p.n


def test_parity_examples():
    assert parity(identity(4)) == 1
    assert parity(transposition(4, 1, 3)) == -1
    assert parity(Permutation((1, 2, 0))) == 1


@given(perms)
def test_parity_matches_inversion_count(p):
    assert parity(p) == (-1) ** inversions(p.images)


@pytest.mark.parametrize("n", range(1, 6))
def test_parity_is_homomorphism_exhaustive(n):
    els = enumerate_elements(n)
    for a in els:
        for b in els:
            assert parity(compose(a, b)) == parity(a) * parity(b)


# --- enumeration ----------------------------------------------------------

@pytest.mark.parametrize("n", range(1, 8))
def test_enumerate_elements_counts(n):
    els = enumerate_elements(n)
    assert len(els) == math.factorial(n)
    assert len(set(els)) == len(els)
    assert els[0] == identity(n)


def test_enumerate_elements_guard():
    assert enumerate_elements(1) == [identity(1)]
    with pytest.raises(PreconditionViolation, match="8"):
        enumerate_elements(9)
    with pytest.raises(PreconditionViolation):
        enumerate_elements(0)


# --- characters -----------------------------------------------------------

def test_characters_n2():
    chars = enumerate_characters(2)
    swap = transposition(2, 0, 1)
    assert sorted(c(swap) for c in chars) == [-1, 1]
    assert all(c(identity(2)) == 1 for c in chars)


def test_characters_n1():
    chars = enumerate_characters(1)
    assert len(chars) == 1 and chars[0](identity(1)) == 1


def _s4_characters_by_generator_search():
    """Independent oracle: assign roots of unity to Coxeter generators s1, s2, s3 of S_4.

    Relations: s_i^2 = 1, (s_i s_{i+1})^3 = 1, (s_1 s_3)^2 = 1.  A one-dimensional
    representation is fixed by the generator values, which must be square roots of 1.
    """
    roots = [cmath.exp(2j * math.pi * k / 12) for k in range(12)]
    found = set()
    for a, b, c in itertools.product(roots, repeat=3):
        ok = all(abs(x * x - 1) < 1e-12 for x in (a, b, c))
        ok = ok and abs((a * b) ** 3 - 1) < 1e-12 and abs((b * c) ** 3 - 1) < 1e-12
        ok = ok and abs((a * c) ** 2 - 1) < 1e-12
        if ok:
            found.add(tuple(round(v.real) for v in (a, b, c)))
    return found


def test_characters_n4_against_generator_search():
    oracle = _s4_characters_by_generator_search()
    gens = [transposition(4, i, i + 1) for i in range(3)]
    ours = {tuple(int(c(g)) for g in gens) for c in enumerate_characters(4)}
    assert ours == oracle
    assert len(ours) == 2


@pytest.mark.parametrize("n", range(2, 7))
def test_characters_are_trivial_and_sign(n):
    chars = enumerate_characters(n)
    assert [c.name for c in chars] == ["trivial", "sign"]
    for c in chars:
        assert is_multiplicative(c)
        assert verify_unitarity(c, n)
        for p in enumerate_elements(n):
            assert c(p) ** p.order() == 1   # exact integers


def test_characters_range_guard():
    with pytest.raises(PreconditionViolation):
        enumerate_characters(7)
    with pytest.raises(PreconditionViolation):
        enumerate_characters(0)


def test_verify_unitarity_examples():
    assert verify_unitarity(TopologicalFactor.sign(3))
    bad = TopologicalFactor.from_function(2, lambda p: 2 if parity(p) < 0 else 1)
    with pytest.raises(NotAHomomorphism):
        verify_unitarity(bad)
    zero = TopologicalFactor.from_function(3, lambda p: 0)
    with pytest.raises(PreconditionViolation):
        verify_unitarity(zero)


def test_verify_unitarity_on_enumerated_n5():
    rng = np.random.default_rng(5)
    chars = enumerate_characters(5)
    gamma = chars[rng.integers(len(chars))]
    assert verify_unitarity(gamma, 5)
    assert all(abs(abs(v) - 1) == 0 for _, v in gamma.items())


def test_complex_candidates():
    # a cube root of unity on transpositions is not multiplicative
    w = cmath.exp(2j * math.pi / 3)
    cand = TopologicalFactor.from_function(3, lambda p: w if parity(p) < 0 else 1)
    assert not is_multiplicative(cand)
    # a complex-typed copy of the sign character is accepted
    sign_c = TopologicalFactor.from_function(3, lambda p: complex(parity(p)))
    assert verify_unitarity(sign_c)


def test_as_factor_names():
    assert as_factor("fermion", 3) == TopologicalFactor.sign(3)
    assert as_factor("boson", 3) == TopologicalFactor.trivial(3)
    with pytest.raises(ValueError):
        as_factor("anyon", 3)


# --- action on configurations ---------------------------------------------

def test_apply_examples():
    q = np.array([[0.0, 0, 0], [1, 2, 3]])
    assert np.array_equal(apply_to_configuration(identity(2), q), q)
    assert np.array_equal(apply_to_configuration(transposition(2, 0, 1), q), q[::-1])


def test_apply_block_formula():
    rng = np.random.default_rng(0)
    q = rng.normal(size=(4, 2))
    sigma = Permutation((2, 0, 3, 1))
    out = apply_to_configuration(sigma, q)
    inv = sigma.inverse()
    for i in range(4):
        assert np.array_equal(out[i], q[inv(i)])


def test_group_action_law_exhaustive_n3():
    rng = np.random.default_rng(1)
    q = rng.normal(size=(3, 2))
    els = enumerate_elements(3)
    count = 0
    for s1 in els:
        for s2 in els:
            lhs = apply_to_configuration(s1, apply_to_configuration(s2, q))
            assert np.array_equal(lhs, apply_to_configuration(compose(s1, s2), q))
            count += 1
    assert count == 36


def test_apply_size_mismatch():
    with pytest.raises(ValueError):
        apply_to_configuration(identity(3), np.zeros((2, 1)))


@settings(max_examples=50)
@given(st.integers(2, 4).flatmap(pair_of_perms), st.integers(0, 2 ** 32 - 1))
def test_project_is_constant_on_orbits(pair, seed):
    a, _ = pair
    q = np.random.default_rng(seed).normal(size=(len(a), 2))
    assert project(apply_to_configuration(Permutation(a), q)) == project(q)
