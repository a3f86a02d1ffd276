"""Statistical checks that the guidance flow carries |psi_t0|^2 into |psi_t|^2.

Ensembles live in the quotient: each member is stored by its canonical
(lexicographically sorted) listing of particle positions.  Goodness of fit is
judged on the one-dimensional marginals of those canonical coordinates and on
a coarse binning of the quotient, never on the full density.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .configuration import (
    COINCIDENCE_EPS, UnorderedConfiguration, canonical_order, csv_header, min_pair_distance_of,
    _write_csv,
)
from .errors import TransportDegraded
from .guidance import OK, integrate_batch
from .wavefunction import ModelParams, sample_points_near

KS_CRITICAL_99 = 1.63
CALIBRATION_FACTOR = 1.5


def canonicalize(q) -> np.ndarray:
    """Sort the particles of each configuration in ``q`` ``(B, N, d)`` lexicographically."""
    q = np.asarray(q, dtype=float)
    if q.shape[-1] == 1:
        return np.sort(q, axis=-2)
    out = np.empty_like(q)
    for k in range(q.shape[0]):
        out[k] = q[k][canonical_order(q[k])]
    return out


@dataclass
class Ensemble:
    """Configurations in canonical order, ``points`` of shape ``(n, N, d)``."""

    points: np.ndarray
    time: float
    seed: int | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 3 or len(self.points) == 0:
            raise ValueError("an ensemble needs points of shape (n, N, d) with n >= 1")
        if self.points.shape[1] > 1 and np.any(min_pair_distance_of(self.points) <= COINCIDENCE_EPS):
            raise ValueError("ensemble contains coincident configurations")

    def __len__(self):
        return len(self.points)

    @property
    def n_particles(self) -> int:
        return self.points.shape[1]

    @property
    def d(self) -> int:
        return self.points.shape[2]

    @property
    def members(self) -> list:
        return [UnorderedConfiguration(p) for p in self.points]

    def to_csv(self, path_or_file) -> None:
        header = csv_header(self.n_particles, self.d)
        rows = [[repr(float(c)) for c in p.ravel()] for p in self.points]
        _write_csv(path_or_file, header, rows)


def metropolis(psi, t: float, n_chains: int, per_chain: int, rng: np.random.Generator,
               burn_in: int = 1000, thin: int = 10, proposal_scale: float = 0.5):
    """Random-walk Metropolis on ``|psi(., t)|^2`` over ordered configurations.

    Runs ``n_chains`` chains side by side; returns samples ``(n_chains, per_chain, N, d)``
    and the overall acceptance rate.
    """
    _, widths = psi.packet_blobs(t)
    step = proposal_scale * float(np.min(widths))
    x = sample_points_near(psi, t, n_chains, rng, spread=1.0)
    logp = 2.0 * np.log(np.abs(psi.evaluate(x, t)))
    shape = x.shape
    out = np.empty((n_chains, per_chain) + shape[1:])
    accepted = 0
    total = burn_in + per_chain * thin
    for it in range(total):
        proposal = x + step * rng.standard_normal(shape)
        with np.errstate(divide="ignore"):
            logq = 2.0 * np.log(np.abs(psi.evaluate(proposal, t)))
        take = np.log(rng.uniform(size=n_chains)) < logq - logp
        x[take] = proposal[take]
        logp[take] = logq[take]
        if it >= burn_in:
            accepted += int(take.sum())
            k = it - burn_in
            if (k + 1) % thin == 0:
                out[:, k // thin] = x
    rate = accepted / (n_chains * per_chain * thin)
    return out, rate


def sample_density(psi, t: float = 0.0, n: int = 10000, seed: int = 0, burn_in: int = 1000,
                   thin: int = 10, proposal_scale: float = 0.5, n_chains: int | None = None) -> Ensemble:
    """Draw ``n`` configurations from ``|psi_t|^2`` and project them to the quotient.

    ``n_chains`` parallel Metropolis chains (default ``min(n, 100)``) each keep
    every ``thin``-th state after ``burn_in`` steps; chain ``c`` contributes
    members ``c, c + n_chains, ...``.  An acceptance rate outside [0.1, 0.9]
    adds a warning to the provenance.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    chains = n_chains or min(n, 100)
    per_chain = -(-n // chains)
    draws, rate = metropolis(psi, t, chains, per_chain, rng, burn_in, thin, proposal_scale)
    flat = np.swapaxes(draws, 0, 1).reshape((-1,) + draws.shape[2:])[:n]
    provenance = {"kind": "sampled-from-density", "acceptance_rate": rate, "burn_in": burn_in,
                  "thin": thin, "proposal_scale": proposal_scale, "chains": chains, "warnings": []}
    if not 0.1 <= rate <= 0.9:
        msg = f"Metropolis acceptance rate {rate:.3f} outside [0.1, 0.9]"
        provenance["warnings"].append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return Ensemble(canonicalize(flat), float(t), seed, provenance)


def transport_ensemble(psi, e: Ensemble, t1: float, tol: float = 1e-8, params: ModelParams | None = None,
                       max_failure_fraction: float = 1e-3) -> Ensemble:
    """Move every member along the guidance flow from ``e.time`` to ``t1``.

    Failed members (node proximity, stalled steps) are dropped and counted in
    the provenance; more than ``max_failure_fraction`` of them raises
    :class:`TransportDegraded`.
    """
    if t1 < e.time:
        raise ValueError("transport runs forward in time only")
    if t1 == e.time:
        prov = dict(e.provenance, kind="transported", failures=0, source_time=e.time)
        return Ensemble(e.points.copy(), e.time, e.seed, prov)
    result = integrate_batch(psi, e.points, e.time, t1, tol, params)
    ok = result.status == OK
    failures = int(np.sum(~ok))
    if failures > max_failure_fraction * len(e):
        raise TransportDegraded(f"{failures} of {len(e)} members failed to transport",
                                failures=failures, total=len(e))
    final = result.samples[ok, -1]
    prov = dict(e.provenance, kind="transported", failures=failures, source_time=e.time,
                tol=tol, failed_times=result.fail_time[~ok].tolist())
    return Ensemble(canonicalize(final), float(t1), e.seed, prov)


class ReferenceDensity:
    """Quotient marginals and bin probabilities of ``|psi_t|^2`` from a fine tensor grid.

    Limited to ``N * d <= 2`` ordered coordinates.
    """

    def __init__(self, psi, t: float, nodes: int = 801, nwidths: float = 8.0):
        dim = psi.n * psi.d
        if dim > 2:
            raise ValueError("reference quadrature supports N*d <= 2 configuration dimensions")
        lo, hi = psi.support(t, nwidths)
        lo, hi = np.tile(lo, psi.n), np.tile(hi, psi.n)
        # one common axis for exchangeable coordinates
        lo, hi = np.full(dim, lo.min()), np.full(dim, hi.max())
        axes = [np.linspace(a, b, nodes) for a, b in zip(lo, hi)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, psi.n, psi.d)
        cell = np.prod([ax[1] - ax[0] for ax in axes])
        weights = np.abs(psi.evaluate(mesh, t)) ** 2 * cell
        self.mass = float(weights.sum())
        self.coords = canonicalize(mesh).reshape(len(mesh), dim)
        self.weights = weights / self.mass
        self.dim = dim
        self._cdfs = [self._marginal(k) for k in range(dim)]

    def _marginal(self, k):
        values, inverse = np.unique(self.coords[:, k], return_inverse=True)
        mass = np.bincount(inverse, weights=self.weights)
        # CDF at each atom counts half of the atom: second-order between nodes
        cdf = np.cumsum(mass) - 0.5 * mass
        return values, cdf

    def cdf(self, k: int, x) -> np.ndarray:
        values, cdf = self._cdfs[k]
        return np.interp(x, values, cdf, left=0.0, right=1.0)

    def quantile(self, k: int, p) -> np.ndarray:
        values, cdf = self._cdfs[k]
        return np.interp(p, cdf, values)

    def cell_edges(self, k: int, p) -> np.ndarray:
        """Approximate quantiles snapped to midpoints between atoms, so no grid cell is split."""
        values, _ = self._cdfs[k]
        j = np.clip(np.searchsorted(values, self.quantile(k, p)), 1, len(values) - 1)
        return np.unique(0.5 * (values[j - 1] + values[j]))

    def bin_probabilities(self, edges) -> np.ndarray:
        idx = self._bin_index(self.coords, edges)
        shape = tuple(len(e) - 1 for e in edges)
        return np.bincount(idx, weights=self.weights, minlength=int(np.prod(shape)))

    @staticmethod
    def _bin_index(coords, edges):
        flat = np.zeros(len(coords), dtype=int)
        for k, e in enumerate(edges):
            j = np.clip(np.searchsorted(e, coords[:, k], side="right") - 1, 0, len(e) - 2)
            flat = flat * (len(e) - 1) + j
        return flat


def ks_distance(sample, cdf) -> float:
    """Two-sided Kolmogorov-Smirnov distance of ``sample`` from a continuous CDF."""
    x = np.sort(np.asarray(sample))
    n = len(x)
    f = cdf(x)
    upper = np.arange(1, n + 1) / n - f
    lower = f - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


@dataclass
class Thresholds:
    ks: np.ndarray   # per canonical coordinate
    chi2: float
    source: str = "default"


@dataclass
class DistributionReport:
    n: int
    time: float
    ks: np.ndarray
    chi2: float
    dof: int
    thresholds: Thresholds
    cells: int

    @property
    def ks_pass(self) -> np.ndarray:
        return self.ks < self.thresholds.ks

    @property
    def chi2_pass(self) -> bool:
        return bool(self.chi2 < self.thresholds.chi2)

    @property
    def passed(self) -> bool:
        return bool(np.all(self.ks_pass) and self.chi2_pass)

    def as_dict(self) -> dict:
        out = {"n": self.n, "time": self.time, "chi2": self.chi2, "chi2_dof": self.dof,
               "chi2_threshold": self.thresholds.chi2, "chi2_pass": self.chi2_pass,
               "threshold_source": self.thresholds.source}
        for k, (d, thr) in enumerate(zip(self.ks, self.thresholds.ks)):
            out[f"ks_{k}"] = float(d)
            out[f"ks_{k}_threshold"] = float(thr)
            out[f"ks_{k}_pass"] = bool(d < thr)
        out["pass"] = self.passed
        return out

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.as_dict().items())


def _chi2(coords, reference: ReferenceDensity, bins: int):
    n = len(coords)
    edges = []
    for k in range(reference.dim):
        inner = reference.cell_edges(k, np.linspace(0, 1, bins + 1)[1:-1])
        edges.append(np.concatenate([[-np.inf], inner, [np.inf]]))
    expected = n * reference.bin_probabilities(edges)
    observed = np.bincount(reference._bin_index(coords, edges), minlength=len(expected)).astype(float)
    big = expected >= 5.0
    e = np.append(expected[big], expected[~big].sum())
    o = np.append(observed[big], observed[~big].sum())
    if e[-1] < 5.0:
        # fold the sparse remainder into the smallest well-populated cell
        j = int(np.argmin(e[:-1]))
        e[j] += e[-1]
        o[j] += o[-1]
        e, o = e[:-1], o[:-1]
    return float(np.sum((o - e) ** 2 / e)), len(e) - 1, len(e)


def default_thresholds(n: int, dim: int, dof: int) -> Thresholds:
    ks = np.full(dim, CALIBRATION_FACTOR * KS_CRITICAL_99 / np.sqrt(n))
    return Thresholds(ks, CALIBRATION_FACTOR * float(stats.chi2.ppf(0.99, dof)), "default")


def distribution_distance(e: Ensemble, psi, t: float | None = None, thresholds: Thresholds | None = None,
                          bins: int = 6, reference: ReferenceDensity | None = None) -> DistributionReport:
    """Compare an ensemble with ``|psi_t|^2``: KS distance per canonical coordinate and a binned chi^2."""
    t = e.time if t is None else t
    if not np.isclose(t, e.time, rtol=0, atol=1e-12):
        raise ValueError(f"ensemble is stamped t={e.time}, asked to compare at t={t}")
    reference = reference or ReferenceDensity(psi, t)
    coords = e.points.reshape(len(e), -1)
    ks = np.array([ks_distance(coords[:, k], lambda x, k=k: reference.cdf(k, x)) for k in range(reference.dim)])
    chi2, dof, cells = _chi2(coords, reference, bins)
    thresholds = thresholds or default_thresholds(len(e), reference.dim, dof)
    return DistributionReport(len(e), float(t), ks, chi2, dof, thresholds, cells)


def calibrate_thresholds(psi, t: float, n: int, replicates: int = 100, seed: int = 10_000,
                         quantile: float = 0.99, bins: int = 6, reference: ReferenceDensity | None = None,
                         **sampler) -> Thresholds:
    """Empirical null quantiles of the statistics from independent sampler runs.

    Replicate ``r`` uses seed ``seed + r``; thresholds are the ``quantile``
    of each statistic over replicates.
    """
    reference = reference or ReferenceDensity(psi, t)
    ks_null, chi_null = [], []
    for r in range(replicates):
        ens = sample_density(psi, t, n, seed=seed + r, **sampler)
        rep = distribution_distance(ens, psi, t, reference=reference, bins=bins,
                                    thresholds=Thresholds(np.ones(reference.dim), np.inf))
        ks_null.append(rep.ks)
        chi_null.append(rep.chi2)
    return Thresholds(np.quantile(np.array(ks_null), quantile, axis=0), float(np.quantile(chi_null, quantile)),
                      f"bootstrap:{replicates}x{n}@q{quantile}")
