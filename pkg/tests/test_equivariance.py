import io
from types import SimpleNamespace

import numpy as np
import pytest
from scipy import stats

import symbohm.equivariance as eq
from symbohm.equivariance import (Ensemble, ReferenceDensity, Thresholds, calibrate_thresholds, canonicalize,
                                  default_thresholds, distribution_distance, ks_distance, sample_density,
                                  transport_ensemble)
from symbohm.errors import TransportDegraded
from symbohm.guidance import NODE, OK
from symbohm.wavefunction import GaussianPacket, antisymmetrize, packet_at, single, symmetrize

PAIR = [GaussianPacket(-0.6, 0.5, 0.7), GaussianPacket(0.6, -0.5, 0.7)]


def near_diagonal_fraction(psi, delta, nodes=1201):
    """Quadrature oracle: probability that |x1 - x2| < delta under |psi|^2 on a fine tensor grid."""
    x = np.linspace(-6, 6, nodes)
    x1, x2 = np.meshgrid(x, x, indexing="ij")
    w = np.abs(psi.evaluate(np.stack([x1, x2], -1).reshape(-1, 2, 1))) ** 2
    near = np.abs(x1 - x2).ravel() < delta
    return w[near].sum() / w.sum()


def rejection_sample(psi, n, rng, lo=-5.0, hi=5.0):
    """Independent sampler: uniform proposals on a box, accepted with probability |psi|^2 / bound."""
    grid = np.linspace(lo, hi, 301)
    g1, g2 = np.meshgrid(grid, grid, indexing="ij")
    bound = 1.2 * np.max(np.abs(psi.evaluate(np.stack([g1, g2], -1).reshape(-1, 2, 1))) ** 2)
    out = []
    while sum(len(o) for o in out) < n:
        q = rng.uniform(lo, hi, size=(20000, 2, 1))
        keep = rng.uniform(size=len(q)) * bound < np.abs(psi.evaluate(q)) ** 2
        out.append(q[keep])
    return np.concatenate(out)[:n]


# --- ensembles ------------------------------------------------------------

def test_canonicalize_sorts_members():
    q = np.array([[[1.0, 0.0], [0.0, 2.0]], [[0.0, 1.0], [0.0, -1.0]]])
    out = canonicalize(q)
    assert np.array_equal(out[0], [[0.0, 2.0], [1.0, 0.0]])
    assert np.array_equal(out[1], [[0.0, -1.0], [0.0, 1.0]])
    assert np.array_equal(canonicalize([[[2.0], [1.0]]]), [[[1.0], [2.0]]])


def test_ensemble_validation():
    with pytest.raises(ValueError):
        Ensemble(np.zeros((0, 2, 1)), 0.0)
    with pytest.raises(ValueError):
        Ensemble(np.zeros((3, 2)), 0.0)
    with pytest.raises(ValueError):
        Ensemble(np.array([[[1.0], [1.0]]]), 0.0)


def test_ensemble_csv():
    e = Ensemble(np.array([[[0.0, 1.0], [2.0, 3.0]]]), 0.5)
    buf = io.StringIO()
    e.to_csv(buf)
    assert buf.getvalue().splitlines() == ["p0_x,p0_y,p1_x,p1_y", "0.0,1.0,2.0,3.0"]
    assert e.members[0].n == 2 and e.d == 2


# --- sampling -------------------------------------------------------------

def test_single_sample_and_determinism():
    psi = antisymmetrize(PAIR)
    one = sample_density(psi, 0.0, 1, seed=4)
    assert len(one) == 1 and one.points.shape == (1, 2, 1)
    a, b = sample_density(psi, 0.0, 500, seed=9), sample_density(psi, 0.0, 500, seed=9)
    assert np.array_equal(a.points, b.points)
    assert not np.array_equal(a.points, sample_density(psi, 0.0, 500, seed=10).points)
    assert a.provenance["kind"] == "sampled-from-density"
    assert np.all(a.points[:, 0, 0] < a.points[:, 1, 0])
    with pytest.raises(ValueError):
        sample_density(psi, 0.0, 0)


def test_single_packet_sample_mean():
    p = GaussianPacket([0.4, -1.0], [0.3, 0.0], 0.8)
    n = 4000
    e = sample_density(single(p), 0.0, n, seed=1)
    mean = e.points[:, 0, :].mean(axis=0)
    # Metropolis draws are correlated; allow 3 sigma with an effective sample size of n / 4
    assert np.all(np.abs(mean - p.center) < 3 * p.width / np.sqrt(n / 4))
    assert np.allclose(e.points[:, 0, :].std(axis=0), p.width, rtol=0.05)


def test_sampler_matches_rejection_sampling():
    psi = antisymmetrize(PAIR)
    e = sample_density(psi, 0.0, 4000, seed=5)
    ref = canonicalize(rejection_sample(psi, 4000, np.random.default_rng(6)))
    for k in range(2):
        assert stats.ks_2samp(e.points[:, k, 0], ref[:, k, 0]).pvalue > 1e-3


def test_fermions_suppress_near_diagonal_bosons_enhance():
    delta, n = 0.3, 6000
    fer, bos = antisymmetrize(PAIR), symmetrize(PAIR)
    got, want = {}, {}
    for name, psi in (("fermion", fer), ("boson", bos)):
        e = sample_density(psi, 0.0, n, seed=11)
        got[name] = np.mean(e.points[:, 1, 0] - e.points[:, 0, 0] < delta)
        want[name] = near_diagonal_fraction(psi, delta)
        sigma = np.sqrt(want[name] * (1 - want[name]) / (n / 4))
        assert abs(got[name] - want[name]) < 4 * sigma + 1e-3
    assert want["fermion"] < want["boson"] / 5
    assert got["fermion"] < got["boson"]


# --- transport ------------------------------------------------------------

def test_transport_to_same_time_is_identity():
    psi = antisymmetrize(PAIR)
    e = sample_density(psi, 0.0, 50, seed=2)
    same = transport_ensemble(psi, e, 0.0)
    assert np.array_equal(same.points, e.points)
    assert same.provenance["failures"] == 0
    with pytest.raises(ValueError):
        transport_ensemble(psi, e, -1.0)


def test_transport_of_stationary_state_keeps_members():
    # a real packet at rest: the flow only dilates about the centre, so the centre member is fixed
    psi = single(GaussianPacket(0.0, 0.0, 0.6))
    e = Ensemble(np.array([[[0.0]], [[0.5]]]), 0.0)
    out = transport_ensemble(psi, e, 1.0)
    assert out.points[0, 0, 0] == 0.0
    assert out.points[1, 0, 0] == pytest.approx(0.5 * packet_at(psi.packets[0], 1.0).width[0] / 0.6, abs=1e-7)


def test_transport_drift_of_moving_packet():
    p = GaussianPacket(-0.5, 1.3, 0.6)
    n = 2000
    e = sample_density(single(p), 0.0, n, seed=3)
    out = transport_ensemble(single(p), e, 1.0)
    width1 = packet_at(p, 1.0).width[0]
    assert abs(out.points[:, 0, 0].mean() - (-0.5 + 1.3)) < 3 * width1 / np.sqrt(n / 4)
    assert out.time == 1.0 and out.provenance["kind"] == "transported"


def test_transport_degraded_counts_failures(monkeypatch):
    psi = antisymmetrize(PAIR)
    e = Ensemble(np.linspace(-1, 1, 20)[:, None, None] + np.array([[[0.0]], [[3.0]]]).reshape(1, 2, 1), 0.0)

    def fake_batch(psi, y0, t0, t1, tol, params):
        status = np.full(len(y0), OK)
        status[:2] = NODE
        samples = np.stack([y0, y0], axis=1)
        return SimpleNamespace(status=status, samples=samples, fail_time=np.where(status == OK, np.nan, 0.5))

    monkeypatch.setattr(eq, "integrate_batch", fake_batch)
    with pytest.raises(TransportDegraded) as info:
        transport_ensemble(psi, e, 1.0)
    assert (info.value.failures, info.value.total) == (2, 20)
    kept = transport_ensemble(psi, e, 1.0, max_failure_fraction=0.2)
    assert len(kept) == 18 and kept.provenance["failures"] == 2
    assert kept.provenance["failed_times"] == [0.5, 0.5]


# --- statistics -----------------------------------------------------------

def test_ks_distance_examples():
    assert ks_distance([0.5], lambda x: x) == 0.5
    x = np.linspace(0.05, 0.95, 10)
    assert ks_distance(x, lambda v: v) == pytest.approx(0.05)
    rng = np.random.default_rng(0)
    s = rng.normal(size=500)
    assert ks_distance(s, stats.norm.cdf) == pytest.approx(stats.kstest(s, "norm").statistic, abs=1e-12)


def test_reference_density_marginals():
    p = GaussianPacket(0.3, 0.0, 0.9)
    ref = ReferenceDensity(single(p), 0.0)
    assert ref.mass == pytest.approx(1.0, abs=1e-8)
    x = np.array([-1.0, 0.3, 1.5])
    assert np.allclose(ref.cdf(0, x), stats.norm.cdf(x, 0.3, 0.9), atol=1e-4)
    with pytest.raises(ValueError):
        ReferenceDensity(antisymmetrize([GaussianPacket([0, 0], [0, 0], 1.0), GaussianPacket([1, 0], [0, 0], 1.0)]),
                         0.0)


def test_distribution_distance_pass_and_fail():
    psi = antisymmetrize(PAIR)
    e = sample_density(psi, 0.0, 3000, seed=8)
    ok = distribution_distance(e, psi)
    assert ok.passed
    shifted = antisymmetrize([GaussianPacket(c.center[0] + 0.5, 0.0, 0.7) for c in PAIR])
    bad = distribution_distance(sample_density(shifted, 0.0, 3000, seed=8), psi)
    assert not bad.passed
    assert bad.chi2 > 10 * ok.chi2
    d = ok.as_dict()
    assert d["pass"] is True and "ks_1_threshold" in d
    assert ok.to_text().endswith("pass=True\n")
    with pytest.raises(ValueError):
        distribution_distance(e, psi, t=1.0)


def test_default_thresholds_shape():
    thr = default_thresholds(10000, 2, 30)
    assert thr.ks.shape == (2,)
    assert thr.chi2 == pytest.approx(1.5 * stats.chi2.ppf(0.99, 30))


def test_calibrated_thresholds_are_quantiles():
    psi = antisymmetrize(PAIR)
    thr = calibrate_thresholds(psi, 0.0, 300, replicates=8, seed=100, burn_in=200)
    assert thr.ks.shape == (2,) and np.all(thr.ks > 0)
    assert np.isfinite(thr.chi2) and thr.source == "bootstrap:8x300@q0.99"
    again = calibrate_thresholds(psi, 0.0, 300, replicates=8, seed=100, burn_in=200)
    assert np.array_equal(thr.ks, again.ks)
    assert isinstance(thr, Thresholds)
