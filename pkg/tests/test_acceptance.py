"""Acceptance suite: one test per criterion, each printing a single pass/fail line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they happen;
the terminal summary repeats them in any case.
"""

import itertools
import math
import time

import numpy as np
import pytest

from symbohm.equivariance import (ReferenceDensity, calibrate_thresholds, distribution_distance, sample_density,
                                  transport_ensemble)
from symbohm.grid import GridSpec, evolve, exchange_symmetric_double_well, init_antisymmetric, init_packet, \
    symmetry_sector_error
from symbohm.group import Permutation, enumerate_characters, enumerate_elements, parity, verify_unitarity
from symbohm.guidance import OK, Trajectory, crossing_check_1d, integrate_batch, lift_independence_check, \
    min_pair_distance
from symbohm.wavefunction import (GaussianPacket, antisymmetrize, check_periodicity, mass_density,
                                  packet_at, product, symmetrize)

BUILDERS = {"fermion": antisymmetrize, "boson": symmetrize}


def verdict(request, ok, detail):
    number, title = request.node.get_closest_marker("criterion").args
    request.node.user_properties.append(("detail", detail))
    print(f"\ncriterion {number} {title}: {'PASS' if ok else 'FAIL'}  [{detail}]")
    return ok


def spread_packets(rng, n, d, gap=1.6):
    """Packets whose centres sit at least ``gap`` apart, so lifts start away from the diagonal."""
    while True:
        centers = 1.5 * rng.normal(size=(n, d))
        if n == 1 or min(np.linalg.norm(a - b) for a, b in itertools.combinations(centers, 2)) > gap:
            break
    return [GaussianPacket(c, 0.8 * rng.normal(size=d), 0.5 + 0.3 * rng.random()) for c in centers]


def leibniz(psi, q, t, signed):
    """Extended-precision sum over S_N of prod_i phi_s(i)(q_i); also returns sum |terms| / |sum|."""
    m = np.array([[packet_at(p, t).value(np.asarray(q[i], float)[None, None, :])[0, 0] for p in psi.packets]
                  for i in range(psi.n)]).astype(np.clongdouble)
    terms = [(parity(Permutation(s)) if signed else 1) * np.prod([m[i, s[i]] for i in range(psi.n)])
             for s in itertools.permutations(range(psi.n))]
    total = sum(terms)
    return psi.norm * total, sum(abs(x) for x in terms) / abs(total)


@pytest.mark.criterion(1, "character classification")
def test_character_classification(request):
    start = time.perf_counter()
    ok = True
    for n in range(2, 7):
        chars = enumerate_characters(n)
        ok &= len(chars) == 2 and [c.name for c in chars] == ["trivial", "sign"]
        ok &= all(verify_unitarity(c, n) for c in chars)
        els = enumerate_elements(n)
        ok &= len(els) == math.factorial(n)
        ok &= all(chars[0](p) == 1 and chars[1](p) == parity(p) for p in els)
    elapsed = time.perf_counter() - start
    ok &= elapsed < 5.0
    assert verdict(request, ok, f"N=2..6 exactly trivial and sign, {elapsed:.2f} s")


@pytest.mark.criterion(2, "periodicity condition")
def test_periodicity_condition(request):
    start = time.perf_counter()
    rng = np.random.default_rng(20)
    worst, control = 0.0, np.inf
    for n, d in itertools.product((2, 3), (1, 2, 3)):
        packets = spread_packets(rng, n, d, gap=0.0)
        for stats, build in BUILDERS.items():
            worst = max(worst, check_periodicity(build(packets), stats, samples=1000, seed=n * 10 + d))
        prod = product(packets)
        control = min(control, *(check_periodicity(prod, g, samples=1000, seed=n * 10 + d)
                                 for g in ("boson", "fermion")))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-10 and control > 1e-2 and elapsed < 10.0
    assert verdict(request, ok, f"max residual {worst:.2e}, product control min {control:.2e}, {elapsed:.1f} s")


@pytest.mark.criterion(3, "preservation under evolution")
def test_preservation_under_evolution(request):
    start = time.perf_counter()
    grid = GridSpec.from_spacing(-5.0, 5.0, 0.1)
    potential = exchange_symmetric_double_well(depth=1.0, separation=1.5, coupling=0.5)
    state = init_antisymmetric([GaussianPacket(-1.5, 0.3, 0.5), GaussianPacket(1.5, 0.0, 0.5)], grid, potential)
    norm0 = state.norm()
    track = {"sector": 0.0, "drift": 0.0}

    def monitor(s):
        track["sector"] = max(track["sector"], symmetry_sector_error(s, "fermion"))
        track["drift"] = max(track["drift"], abs(s.norm() - norm0))

    final = evolve(state, 0.005, 10_000, monitor=monitor)
    elapsed = time.perf_counter() - start
    ok = track["sector"] < 1e-10 and track["drift"] < 1e-10 and final.time == pytest.approx(50.0) and elapsed < 60
    assert verdict(request, ok, f"10^4 steps, sector error {track['sector']:.2e}, norm drift {track['drift']:.2e}, "
                                f"{elapsed:.1f} s")


@pytest.mark.criterion(4, "lift independence")
def test_lift_independence(request):
    start = time.perf_counter()
    rng = np.random.default_rng(40)
    worst = 0.0
    for n, d in itertools.product((2, 3), (1, 2)):
        packets = spread_packets(rng, n, d)
        q0 = np.array([p.center for p in packets]) + 0.2 * rng.normal(size=(n, d))
        for build in BUILDERS.values():
            worst = max(worst, lift_independence_check(build(packets), q0, 1.0, tol=1e-8))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed < 30
    assert verdict(request, ok, f"max quotient deviation {worst:.2e} at tol 1e-8, {elapsed:.1f} s")


@pytest.mark.criterion(5, "equivariance")
def test_equivariance(request):
    start = time.perf_counter()
    packets = [GaussianPacket(-1.0, 0.5, 0.7), GaussianPacket(1.0, -0.5, 0.7)]
    psi = antisymmetrize(packets)
    n = 10_000
    ensemble = sample_density(psi, 0.0, n, seed=2024)
    moved = transport_ensemble(psi, ensemble, 1.0, tol=1e-7)
    reference = ReferenceDensity(psi, 1.0)
    thresholds = calibrate_thresholds(psi, 1.0, n, replicates=100, seed=2025, reference=reference)
    report = distribution_distance(moved, psi, thresholds=thresholds, reference=reference)
    shifted = antisymmetrize([GaussianPacket(p.center[0] + 1.0, p.momentum, p.width) for p in packets])
    control = distribution_distance(sample_density(shifted, 1.0, n, seed=2026), psi, thresholds=thresholds,
                                    reference=reference)
    elapsed = time.perf_counter() - start
    ok = report.passed and not control.passed and len(moved) >= n - 10 and elapsed < 300
    ks = ", ".join(f"{a:.4f}<{b:.4f}" for a, b in zip(report.ks, thresholds.ks))
    assert verdict(request, ok, f"KS {ks}; chi2 {report.chi2:.1f}<{thresholds.chi2:.1f}; "
                                f"control chi2 {control.chi2:.0f} fails; {elapsed:.0f} s")


@pytest.mark.criterion(6, "Pauli exclusion and non-crossing")
def test_pauli_exclusion_and_non_crossing(request):
    start = time.perf_counter()
    rng = np.random.default_rng(60)
    worst_ratio = 0.0
    for n, d in itertools.product((2, 3), (1, 2, 3)):
        psi = antisymmetrize(spread_packets(rng, n, d, gap=0.0))
        peak = psi.peak_estimate(0.0)
        q = 1.5 * rng.normal(size=(1000, n, d))
        t = rng.random(1000)
        for k in range(1000):
            i, j = rng.choice(n, 2, replace=False)
            q[k, j] = q[k, i]
        worst_ratio = max(worst_ratio, float(np.max(np.abs(psi.evaluate(q, t)))) / peak)

    pair = antisymmetrize([GaussianPacket(-1.0, 0.5, 0.7), GaussianPacket(1.0, -0.5, 0.7)])
    starts = sample_density(pair, 0.0, 100, seed=61).points
    times = np.linspace(0.0, 3.0, 301)
    result = integrate_batch(pair, starts, 0.0, 3.0, tol=1e-8, sample_times=times)
    trajs = [Trajectory(times, result.samples[b]) for b in range(100)]
    min_dist = min(min_pair_distance(tr) for tr in trajs)
    ordered = all(crossing_check_1d(tr) for tr in trajs)
    elapsed = time.perf_counter() - start
    ok = (worst_ratio < 1e-12 and np.all(result.status == OK) and min_dist > 0 and ordered and elapsed < 60)
    assert verdict(request, ok, f"diagonal |psi|/peak {worst_ratio:.1e}; 100 runs, min distance {min_dist:.3f}, "
                                f"ordering kept: {ordered}; {elapsed:.1f} s")


@pytest.mark.criterion(7, "numerical cross-validation")
def test_numerical_cross_validation(request):
    start = time.perf_counter()
    rng = np.random.default_rng(70)

    grad_err, h = 0.0, 1e-5
    for n, d in itertools.product((2, 3), (1, 2, 3)):
        for build in BUILDERS.values():
            psi = build(spread_packets(rng, n, d, gap=0.0))
            for _ in range(10):
                q, t = 1.2 * rng.normal(size=(n, d)), rng.random()
                val, grad = psi.value_and_gradient(q, t)
                if abs(val) < 1e-6 * psi.peak_estimate(t):
                    continue
                fd = np.empty_like(grad)
                for i, k in itertools.product(range(n), range(d)):
                    e = np.zeros((n, d))
                    e[i, k] = h
                    fd[i, k] = (psi.evaluate(q + e, t) - psi.evaluate(q - e, t)) / (2 * h)
                grad_err = max(grad_err, np.max(np.abs(grad - fd)) / np.max(np.abs(grad)))

    p = GaussianPacket(0.0, 1.0, 1.0)
    axis = GridSpec.from_spacing(-10.0, 10.0, 0.05)
    state = evolve(init_packet(p, axis), 1e-3, 200)
    grid_err = float(np.max(np.abs(state.amplitudes - packet_at(p, 0.2).value(axis.points[None, :, None])[0])))

    leib_err, checked, total = 0.0, 0, 0
    for n, d in itertools.product(range(2, 5), (1, 2, 3)):
        packets = spread_packets(rng, n, d, gap=0.0)
        for signed, build in ((True, antisymmetrize), (False, symmetrize)):
            psi = build(packets)
            for _ in range(10):
                q, t = 1.5 * rng.normal(size=(n, d)), rng.random()
                ref, cond = leibniz(psi, q, t, signed)
                total += 1
                if cond < 1e3:
                    checked += 1
                    leib_err = max(leib_err, float(abs(psi.evaluate(q, t) - ref) / abs(ref)))
    elapsed = time.perf_counter() - start
    ok = grad_err < 1e-6 and grid_err < 1e-4 and leib_err < 1e-12 and checked > total // 2 and elapsed < 30
    assert verdict(request, ok, f"gradient {grad_err:.1e}, grid {grid_err:.1e}, Leibniz {leib_err:.1e} "
                                f"({checked}/{total} well-conditioned points); {elapsed:.1f} s")


@pytest.mark.criterion(8, "mass density")
def test_mass_density(request):
    start = time.perf_counter()
    x, w = np.polynomial.legendre.leggauss(96)
    worst = 0.0
    cases = [(antisymmetrize, None, 1.0), (symmetrize, None, 2.0), (antisymmetrize, 1.5, 1.0)]
    for build, omega, mass in cases:
        psi = build([GaussianPacket(-0.6, 0.4, 0.5, omega=omega, mass=mass),
                     GaussianPacket(0.7, -0.2, 0.6, omega=omega, mass=mass)])
        params = psi.default_params()
        for t in (0.0, 0.5, 1.0):
            lo, hi = psi.support(t, nwidths=10.0)
            pts = 0.5 * (hi - lo) * x[:, None] + 0.5 * (hi + lo)
            integral = float(np.sum(0.5 * (hi[0] - lo[0]) * w * mass_density(psi, pts, t, params)))
            worst = max(worst, abs(integral - params.total_mass))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-4 and elapsed < 30
    assert verdict(request, ok, f"max |integral - total mass| {worst:.1e} at t = 0, 0.5, 1; {elapsed:.1f} s")
