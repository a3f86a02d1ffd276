"""Ordered configurations (the covering space R^{dN}) and unordered ones (its quotient).

An ordered configuration is a plain float array of shape ``(N, d)``; row ``i``
is the position of particle ``i``.  An :class:`UnorderedConfiguration` is the
set of those rows, stored in strictly increasing lexicographic order so that
equality of quotient points is equality of arrays.
"""

from __future__ import annotations

import csv
import io
import os

import numpy as np

from .errors import CoincidenceError, PreconditionViolation
from .group import MAX_ENUMERATION, apply_to_configuration, enumerate_elements

COINCIDENCE_EPS = 1e-12
AXES = "xyz"


def ordered(points) -> np.ndarray:
    """Validate and copy an ordered configuration into a read-only ``(N, d)`` array."""
    q = np.array(points, dtype=float)
    if q.ndim == 1:
        q = q[:, None]
    if q.ndim != 2 or q.shape[0] < 1:
        raise ValueError(f"expected an (N, d) array of positions, got shape {q.shape}")
    if q.shape[1] not in (1, 2, 3):
        raise ValueError(f"spatial dimension must be 1, 2 or 3, got {q.shape[1]}")
    if not np.all(np.isfinite(q)):
        raise ValueError("configuration contains non-finite coordinates")
    q.flags.writeable = False
    return q


def pair_distances(q) -> np.ndarray:
    """Pairwise Euclidean separations ``|x_i - x_j|`` for ``i < j``, batched over leading axes."""
    q = np.asarray(q, dtype=float)
    n = q.shape[-2]
    i, j = np.triu_indices(n, k=1)
    return np.linalg.norm(q[..., i, :] - q[..., j, :], axis=-1)


def min_pair_distance_of(q) -> np.ndarray:
    """Smallest pairwise separation (``inf`` for a single particle)."""
    d = pair_distances(q)
    if d.shape[-1] == 0:
        return np.full(d.shape[:-1], np.inf)
    return d.min(axis=-1)


def canonical_order(q) -> np.ndarray:
    """Indices sorting the rows of ``q`` lexicographically (first coordinate most significant)."""
    q = np.asarray(q)
    return np.lexsort(q.T[::-1])


class UnorderedConfiguration:
    """A set of N distinct points in R^d.

    Construct from any ordered listing of the points; the canonical
    representative is the lexicographically sorted listing.
    """

    __slots__ = ("points",)

    def __init__(self, points):
        q = ordered(points)
        if q.shape[0] > 1 and min_pair_distance_of(q) <= COINCIDENCE_EPS:
            raise CoincidenceError(
                f"points closer than {COINCIDENCE_EPS} do not form a set of {q.shape[0]} elements")
        sorted_q = np.ascontiguousarray(q[canonical_order(q)])
        sorted_q.flags.writeable = False
        self.points = sorted_q

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __eq__(self, other):
        if not isinstance(other, UnorderedConfiguration):
            return NotImplemented
        return self.points.shape == other.points.shape and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash((self.points.shape, self.points.tobytes()))

    def __repr__(self):
        pts = ", ".join("(" + ", ".join(f"{c:g}" for c in p) + ")" for p in self.points)
        return f"UnorderedConfiguration({{{pts}}})"

    def canonical_lift(self) -> np.ndarray:
        return self.points


def project(q) -> UnorderedConfiguration:
    """Forget particle labels.  Raises :class:`CoincidenceError` on the diagonal."""
    return UnorderedConfiguration(q)


def lifts(q: UnorderedConfiguration) -> list:
    """All N! ordered configurations projecting to ``q``, canonical lift first."""
    return [apply_to_configuration(s, q.points) for s in enumerate_elements(q.n)]


def quotient_distance(q1: UnorderedConfiguration, q2: UnorderedConfiguration) -> float:
    """Smallest Euclidean distance between a lift of ``q1`` and any lift of ``q2``."""
    if q1.points.shape != q2.points.shape:
        raise ValueError(f"shape mismatch: {q1.points.shape} vs {q2.points.shape}")
    if q1.n > MAX_ENUMERATION:
        raise PreconditionViolation(f"brute-force matching limited to N <= {MAX_ENUMERATION}")
    best = np.inf
    for sigma in enumerate_elements(q1.n):
        diff = q1.points - apply_to_configuration(sigma, q2.points)
        best = min(best, float(np.sqrt(np.sum(diff * diff))))
    return best


def quotient_distance_batch(a, b) -> np.ndarray:
    """Vectorised :func:`quotient_distance` for arrays of ordered configurations ``(..., N, d)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    best = None
    for sigma in enumerate_elements(a.shape[-2]):
        diff = a - apply_to_configuration(sigma, b)
        dist = np.sqrt(np.sum(diff * diff, axis=(-1, -2)))
        best = dist if best is None else np.minimum(best, dist)
    return best


def csv_header(n: int, d: int) -> list:
    return [f"p{i}_{AXES[k]}" for i in range(n) for k in range(d)]


def write_configurations_csv(configs, path_or_file) -> None:
    """Write unordered configurations, one per row, in canonical coordinate order."""
    configs = list(configs)
    if not configs:
        raise ValueError("nothing to write")
    n, d = configs[0].n, configs[0].d
    rows = [[repr(float(c)) for c in cfg.points.ravel()] for cfg in configs]
    _write_csv(path_or_file, csv_header(n, d), rows)


def read_configurations_csv(path_or_file) -> list:
    with _open_text(path_or_file) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n = 1 + max(int(h.split("_")[0][1:]) for h in header)
        d = len(header) // n
        if header != csv_header(n, d):
            raise ValueError(f"unexpected configuration header {header}")
        return [UnorderedConfiguration(np.array(row, dtype=float).reshape(n, d)) for row in reader]


class _open_text:
    def __init__(self, target, mode="r"):
        self.target, self.mode, self.owned = target, mode, None

    def __enter__(self):
        if isinstance(self.target, (str, os.PathLike)):
            self.owned = open(self.target, self.mode, newline="")
            return self.owned
        return self.target

    def __exit__(self, *exc):
        if self.owned is not None:
            self.owned.close()


def _write_csv(path_or_file, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    if isinstance(path_or_file, (str, os.PathLike)):
        atomic_write_text(path_or_file, buf.getvalue())
    else:
        path_or_file.write(buf.getvalue())


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to a sibling temporary file, then rename it into place."""
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)
