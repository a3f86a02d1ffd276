"""Bohmian guidance on the covering space and its projection to the quotient.

The velocity of particle ``i`` is ``(hbar / m_i) Im(grad_i psi / psi)``.
Trajectories are integrated on a lift with an embedded Dormand-Prince 5(4)
pair; many lifts or initial conditions are advanced together, each with its
own step size, so a batch gives the same paths as separate runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .configuration import (
    UnorderedConfiguration, csv_header, lifts, min_pair_distance_of, pair_distances, project,
    quotient_distance_batch, _write_csv,
)
from .errors import IntegrationStalled, NodeProximityError, PeriodicityViolation, PreconditionViolation
from .wavefunction import ModelParams, detect_character

NODE_RELATIVE_FLOOR = 1e-12
MAX_LIFT_N = 4

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

OK, NODE, STALLED = 0, 1, 2


def _mass_array(params: ModelParams, shape_n: int) -> np.ndarray:
    if params.n != shape_n:
        raise ValueError(f"parameters describe {params.n} particles, configuration has {shape_n}")
    return np.asarray(params.masses)[:, None]


def velocity_and_amplitude(psi, q, t, params: ModelParams):
    """Velocity ``(..., N, d)`` and ``|psi|`` at ``q`` without node checks."""
    value, grad = psi.value_and_gradient(q, t)
    inv_mass = params.hbar / _mass_array(params, psi.n)
    ratio = grad / value[..., None, None]
    return inv_mass * ratio.imag, np.abs(value)


def _node_floor(psi, t) -> float:
    return NODE_RELATIVE_FLOOR * float(np.max(np.atleast_1d(psi.peak_estimate(np.max(t)))))


def velocity_field(psi, q, t=0.0, params: ModelParams | None = None, floor: float | None = None):
    """Guidance velocity ``(hbar/m_i) Im(grad_i psi / psi)`` at ``q`` (``(N, d)`` or batched).

    Raises :class:`NodeProximityError` where ``|psi| <= floor``; the default
    floor is ``NODE_RELATIVE_FLOOR`` times the wave function's peak estimate.
    """
    params = params or psi.default_params()
    q = np.asarray(q, dtype=float)
    if floor is None:
        floor = _node_floor(psi, t)
    with np.errstate(divide="ignore", invalid="ignore"):
        v, amp = velocity_and_amplitude(psi, q, t, params)
    bad = np.atleast_1d(amp <= floor)
    if np.any(bad):
        k = int(np.argmax(bad))
        where = q if q.ndim == 2 else q[k]
        raise NodeProximityError(f"|psi| = {np.atleast_1d(amp)[k]:.3e} at node floor {floor:.1e}",
                                 abs_psi=float(np.atleast_1d(amp)[k]), location=where,
                                 time=float(np.broadcast_to(t, np.atleast_1d(amp).shape)[k]))
    return v


@dataclass
class BatchResult:
    """Raw output of :func:`integrate_batch`; arrays indexed by member first."""

    times: np.ndarray          # (S,)
    samples: np.ndarray        # (B, S, N, d), NaN after a failure
    status: np.ndarray         # (B,) OK / NODE / STALLED
    fail_time: np.ndarray      # (B,)
    fail_abs_psi: np.ndarray   # (B,)
    accepted: np.ndarray       # (B,)
    rejected: np.ndarray       # (B,)
    min_abs_psi: np.ndarray    # (B,) over accepted stage points
    min_pair: np.ndarray       # (B,) over accepted step points


def integrate_batch(psi, y0, t0: float, t1: float, tol: float = 1e-8, params: ModelParams | None = None,
                    sample_times=None, node_floor: float = NODE_RELATIVE_FLOOR,
                    max_steps: int = 200000) -> BatchResult:
    """Advance ordered configurations ``y0`` ``(B, N, d)`` from ``t0`` to ``t1``.

    Each member has its own step size under the mixed criterion
    ``|err| <= tol (1 + |y|)`` (RMS over components).  A stage whose ``|psi|``
    drops below ``node_floor`` times the member's running peak rejects the step
    and halves ``h``; if ``h`` underflows there the member fails with status
    ``NODE``.  Results at ``sample_times`` come from cubic Hermite interpolation
    between accepted steps.
    """
    params = params or psi.default_params()
    y0 = np.array(y0, dtype=float)
    if y0.ndim == 2:
        y0 = y0[None]
    if not t1 > t0:
        raise PreconditionViolation(f"need t1 > t0, got {t0} -> {t1}")
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    batch = y0.shape[0]
    shape = y0.shape[1:]
    times = np.array([t0, t1] if sample_times is None else sample_times, dtype=float)
    if times[0] < t0 or times[-1] > t1 or np.any(np.diff(times) <= 0):
        raise ValueError("sample times must increase strictly within [t0, t1]")

    samples = np.full((batch, len(times)) + shape, np.nan)
    status = np.zeros(batch, dtype=int)
    fail_time = np.full(batch, np.nan)
    fail_abs = np.full(batch, np.nan)
    accepted = np.zeros(batch, dtype=int)
    rejected = np.zeros(batch, dtype=int)

    with np.errstate(divide="ignore", invalid="ignore"):
        f0, amp0 = velocity_and_amplitude(psi, y0, np.full(batch, t0), params)
    start_bad = ~(amp0 > node_floor * psi.peak_estimate(t0)) | ~np.all(np.isfinite(f0), axis=(1, 2))
    if np.any(start_bad):
        bad = int(np.argmax(start_bad))
        raise NodeProximityError("initial configuration sits on a node of psi", abs_psi=float(amp0[bad]),
                                 location=y0[bad], time=t0)
    y = y0.copy()
    f = f0
    t = np.full(batch, float(t0))
    peak = amp0.copy()
    min_abs = amp0.copy()
    min_pair = np.asarray(min_pair_distance_of(y0), dtype=float).copy()
    span = t1 - t0
    h = np.full(batch, min(span, 0.01 * span + 1e-3))
    next_sample = np.zeros(batch, dtype=int)
    at_start = times[0] == t0
    if at_start:
        samples[:, 0] = y0
        next_sample[:] = 1
    active = np.ones(batch, dtype=bool)
    node_hits = np.zeros(batch, dtype=bool)

    steps = 0
    while np.any(active):
        steps += 1
        if steps > max_steps:
            status[active] = STALLED
            fail_time[active] = t[active]
            break
        idx = np.flatnonzero(active)
        ti, yi, fi = t[idx], y[idx], f[idx]
        hi = np.minimum(h[idx], t1 - ti)
        hb = hi[:, None, None]
        k = [fi]
        amp_min = np.full(len(idx), np.inf)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            for s in range(1, 7):
                ys = yi + hb * sum(a * kk for a, kk in zip(_A[s], k) if a != 0.0)
                ks, amp = velocity_and_amplitude(psi, ys, ti + _C[s] * hi, params)
                k.append(ks)
                amp_min = np.minimum(amp_min, amp)
            y_new = yi + hb * sum(b * kk for b, kk in zip(_B5, k) if b != 0.0)
            err = hb * sum(e * kk for e, kk in zip(_E, k) if e != 0.0)
        scale = tol * (1.0 + np.maximum(np.abs(yi), np.abs(y_new))) * (hi / span)[:, None, None]
        err_norm = np.sqrt(np.mean((err / scale) ** 2, axis=(1, 2)))
        near_node = ~(amp_min > node_floor * peak[idx])
        finite = np.isfinite(err_norm) & np.all(np.isfinite(k[6]), axis=(1, 2))
        ok = (err_norm <= 1.0) & ~near_node & finite

        # step-size update
        factor = np.where(err_norm > 0, 0.9 * np.maximum(err_norm, 1e-10) ** -0.25, 5.0)
        factor = np.clip(np.nan_to_num(factor, nan=0.2, posinf=5.0), 0.2, 5.0)
        factor = np.where(ok, factor, np.minimum(factor, 0.5))
        factor = np.where(near_node | ~finite, 0.5, factor)
        new_h = hi * factor

        acc = idx[ok]
        rej = idx[~ok]
        node_hits[idx[near_node]] = True
        if len(acc):
            ya, fa = yi[ok], fi[ok]
            yn, fn = y_new[ok], k[6][ok]
            t_old, h_acc = ti[ok], hi[ok]
            t_new = np.where(t1 - (t_old + h_acc) <= 1e-14 * max(1.0, abs(t1)), t1, t_old + h_acc)
            # dense output at sample times crossed by this step
            while True:
                ns = next_sample[acc]
                has = ns < len(times)
                ts = np.where(has, times[np.minimum(ns, len(times) - 1)], np.inf)
                cross = has & (ts <= t_new)
                if not np.any(cross):
                    break
                th = ((ts[cross] - t_old[cross]) / h_acc[cross])[:, None, None]
                hh = h_acc[cross][:, None, None]
                th2, th3 = th * th, th * th * th
                yc = ((2 * th3 - 3 * th2 + 1) * ya[cross] + (th3 - 2 * th2 + th) * hh * fa[cross]
                      + (-2 * th3 + 3 * th2) * yn[cross] + (th3 - th2) * hh * fn[cross])
                exact = ts[cross] == t_new[cross]
                yc[exact] = yn[cross][exact]
                members = acc[cross]
                samples[members, ns[cross]] = yc
                next_sample[members] += 1
            y[acc] = yn
            f[acc] = fn
            t[acc] = t_new
            accepted[acc] += 1
            peak[acc] = np.maximum(peak[acc], amp_min[ok])
            min_abs[acc] = np.minimum(min_abs[acc], amp_min[ok])
            min_pair[acc] = np.minimum(min_pair[acc], min_pair_distance_of(yn))
            node_hits[acc] = False
            active[acc[t_new >= t1]] = False
        rejected[rej] += 1
        h[idx] = new_h
        tiny = (new_h < 1e-14 * max(1.0, abs(t1), abs(t0))) & active[idx]
        if np.any(tiny):
            dead = idx[tiny]
            status[dead] = np.where(node_hits[dead], NODE, STALLED)
            fail_time[dead] = t[dead]
            fail_abs[dead] = amp_min[tiny]
            active[dead] = False

    return BatchResult(times, samples, status, fail_time, fail_abs, accepted, rejected, min_abs, min_pair)


@dataclass
class Trajectory:
    """Samples of a path in the quotient together with the lift that was integrated."""

    times: np.ndarray
    lift_states: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.lift_states = np.asarray(self.lift_states, dtype=float)
        if self.lift_states.ndim != 3 or len(self.lift_states) != len(self.times):
            raise ValueError("lift_states must have shape (len(times), N, d)")
        if len(self.times) == 0:
            raise ValueError("a trajectory needs at least one sample")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must increase strictly")
        self.states = [project(q) for q in self.lift_states]

    @property
    def n(self) -> int:
        return self.lift_states.shape[1]

    @property
    def d(self) -> int:
        return self.lift_states.shape[2]

    def pair_distance_series(self) -> np.ndarray:
        """Smallest pairwise separation at each sample."""
        return np.asarray(min_pair_distance_of(self.lift_states), dtype=float)

    def to_csv(self, path_or_file, abs_psi=None) -> None:
        """One row per sample: time, canonical coordinates, min pair distance, ``|psi|``."""
        if abs_psi is None:
            abs_psi = self.diagnostics.get("abs_psi", np.full(len(self.times), np.nan))
        header = ["t"] + csv_header(self.n, self.d) + ["min_pair_dist", "abs_psi"]
        dist = self.pair_distance_series()
        rows = []
        for k, t in enumerate(self.times):
            rows.append([repr(float(t))] + [repr(float(c)) for c in self.states[k].points.ravel()]
                        + [repr(float(dist[k])), repr(float(abs_psi[k]))])
        _write_csv(path_or_file, header, rows)


def _raise_failure(result: BatchResult, member: int):
    if result.status[member] == NODE:
        raise NodeProximityError(
            f"trajectory hit a node of psi at t = {result.fail_time[member]:.6g}",
            abs_psi=float(result.fail_abs_psi[member]), time=float(result.fail_time[member]))
    raise IntegrationStalled(f"step size underflow at t = {result.fail_time[member]:.6g}")


def integrate_trajectory(psi, q0, t0: float = 0.0, t1: float = 1.0, tol: float = 1e-8,
                         params: ModelParams | None = None, n_samples: int = 101, lift=None) -> Trajectory:
    """Integrate the guidance equation from the canonical lift of ``q0``.

    ``q0`` is an :class:`UnorderedConfiguration` (or anything :func:`project`
    accepts).  ``lift`` overrides the starting ordered configuration; it must
    project to ``q0``.
    """
    params = params or psi.default_params()
    if not isinstance(q0, UnorderedConfiguration):
        q0 = project(q0)
    start = q0.points if lift is None else np.asarray(lift, dtype=float)
    if project(start) != q0:
        raise ValueError("lift does not project to the initial configuration")
    times = np.linspace(t0, t1, n_samples)
    result = integrate_batch(psi, start[None], t0, t1, tol, params, sample_times=times)
    if result.status[0] != OK:
        _raise_failure(result, 0)
    path = result.samples[0]
    abs_psi = np.abs(psi.evaluate(path, times))
    diagnostics = {
        "accepted_steps": int(result.accepted[0]),
        "rejected_steps": int(result.rejected[0]),
        "min_abs_psi": float(min(result.min_abs_psi[0], abs_psi.min())),
        "min_pair_distance": float(min(result.min_pair[0], np.min(min_pair_distance_of(path)))),
        "abs_psi": abs_psi,
    }
    return Trajectory(times, path, diagnostics)


def lift_independence_check(psi, q0, t1: float, tol: float = 1e-8, params: ModelParams | None = None,
                            t0: float = 0.0, n_samples: int = 51, periodicity_samples: int = 64) -> float:
    """Largest quotient distance between the projected paths started from every lift of ``q0``.

    ``psi`` must satisfy the periodicity condition for some character,
    otherwise :class:`PeriodicityViolation` is raised.
    """
    params = params or psi.default_params()
    if not isinstance(q0, UnorderedConfiguration):
        q0 = project(q0)
    if q0.n > MAX_LIFT_N:
        raise PreconditionViolation(f"lift enumeration limited to N <= {MAX_LIFT_N}")
    if detect_character(psi, samples=periodicity_samples) is None:
        raise PeriodicityViolation(f"{psi!r} obeys the periodicity condition for no character of S_{psi.n}")
    starts = np.array(lifts(q0))
    times = np.linspace(t0, t1, n_samples)
    result = integrate_batch(psi, starts, t0, t1, tol, params, sample_times=times)
    for member in range(len(starts)):
        if result.status[member] != OK:
            _raise_failure(result, member)
    if len(starts) == 1:
        return 0.0
    paths = result.samples
    worst = 0.0
    for a in range(len(starts)):
        for b in range(a + 1, len(starts)):
            worst = max(worst, float(np.max(quotient_distance_batch(paths[a], paths[b]))))
    return worst


def min_pair_distance(traj: Trajectory) -> float:
    """Smallest particle separation over all samples of ``traj``."""
    if traj.n < 2:
        return math.inf
    return float(np.min(pair_distances(traj.lift_states)))


def crossing_check_1d(traj: Trajectory) -> bool:
    """True iff the left-to-right order of labelled particles never changes."""
    if traj.d != 1:
        raise PreconditionViolation("crossing check is defined for one-dimensional motion only")
    orders = np.argsort(traj.lift_states[:, :, 0], axis=1, kind="stable")
    return bool(np.all(orders == orders[0]))
