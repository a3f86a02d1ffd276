"""Config-driven experiments: each one writes CSVs, a key=value summary and a JSON manifest.

Exit status: 0 all assertions pass, 2 a physics assertion failed, 3 the
configuration is invalid, 4 a numerical method failed.
"""

from __future__ import annotations

import json
import os
import platform
from dataclasses import dataclass

import numpy as np
import scipy

from . import __version__
from .config import KINDS, SCHEMA, ConfigError, ExperimentConfig, build_wavefunction, packets_from_config, \
    wavefunction_from_config
from .configuration import _write_csv, atomic_write_text
from .equivariance import (ReferenceDensity, calibrate_thresholds, distribution_distance, sample_density,
                           transport_ensemble)
from .errors import (CoincidenceError, DegenerateStateError, DomainTooSmall, PeriodicityViolation,
                     PreconditionViolation, SymbohmError)
from .grid import GridSpec, evolve, exchange_symmetric_double_well, init_antisymmetric, init_symmetric, \
    symmetry_sector_error, write_snapshot
from .group import TopologicalFactor, enumerate_characters, enumerate_elements, verify_unitarity
from .guidance import OK, Trajectory, _raise_failure, crossing_check_1d, integrate_batch, integrate_trajectory, \
    lift_independence_check, min_pair_distance
from .wavefunction import GaussianPacket, check_periodicity, mass_density

EXIT_OK, EXIT_PHYSICS, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3, 4

_CONFIG_ERRORS = (ConfigError, PreconditionViolation, DomainTooSmall, DegenerateStateError, CoincidenceError)


@dataclass(frozen=True)
class ExperimentInfo:
    kind: str
    anchor: str
    claim: str
    required_keys: tuple


_PACKET_KEYS = ("wavefunction.statistics", "packet.<i>.center", "packet.<i>.momentum", "packet.<i>.width")

_INFO = {
    "characters": ("character classification",
                   "the permutation group has only two characters, trivial and sign, both unitary",
                   ("characters.n",)),
    "periodicity": ("periodicity condition",
                    "symmetric and antisymmetric states obey psi(sigma q) = gamma_sigma psi(q)", _PACKET_KEYS),
    "trajectory": ("guidance equation on the unordered configuration space",
                   "the guidance law moves an unordered configuration along a well-defined path",
                   _PACKET_KEYS + ("integration.initial",)),
    "lift-independence": ("projectability of the velocity field",
                          "the projected motion is independent of the choice of the initial lift",
                          _PACKET_KEYS + ("integration.initial",)),
    "equivariance": ("transport equation and equivariance",
                     "an ensemble distributed as |psi_t0|^2 stays distributed as |psi_t|^2: "
                     "we have arrived at equivariance", _PACKET_KEYS),
    "grid-preservation": ("preservation of the symmetry type",
                          "the symmetry type is preserved by the Schroedinger evolution", _PACKET_KEYS),
    "non-crossing-1d": ("one-dimensional non-crossing and Pauli exclusion",
                        "fermions cannot occupy the same position; on a line their trajectories never cross",
                        _PACKET_KEYS),
    "mass-density": ("mass density of the particle configuration",
                     "m(x, t) = sum_i m_i integral delta(x - q_i) |psi|^2 dq integrates to the total mass",
                     _PACKET_KEYS),
}


def list_experiments() -> list:
    """One :class:`ExperimentInfo` per experiment kind."""
    return [ExperimentInfo(kind, *_INFO[kind]) for kind in KINDS]


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple, np.ndarray)):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def summary_text(summary: dict) -> str:
    return "".join(f"{k}={_fmt(v)}\n" for k, v in summary.items())


# --- experiments ----------------------------------------------------------

def _characters(cfg, out):
    n = cfg.get("characters", "n")
    chars = enumerate_characters(n)
    unitary = [verify_unitarity(c, n) for c in chars]
    rows = [[str(list(p.images))] + [str(c(p)) for c in chars] for p in enumerate_elements(min(n, 6))]
    _write_csv(os.path.join(out, "characters.csv"), ["permutation"] + [c.name for c in chars], rows)
    expected = 1 if n == 1 else 2
    summary = {"n": n, "count": len(chars), "characters": [c.name for c in chars], "unitary": all(unitary)}
    return summary, len(chars) == expected and all(unitary)


def _periodicity(cfg, out):
    psi = wavefunction_from_config(cfg)
    samples, t_max = cfg.get("periodicity", "samples"), cfg.get("periodicity", "t_max")
    threshold = cfg.get("periodicity", "threshold")
    stats = cfg.sections["wavefunction"]["statistics"]
    residuals = {name: check_periodicity(psi, getattr(TopologicalFactor, name)(psi.n), samples, cfg.seed, t_max)
                 for name in ("trivial", "sign")}
    _write_csv(os.path.join(out, "residuals.csv"), ["character", "max_residual"],
               [[k, repr(v)] for k, v in residuals.items()])
    summary = {"statistics": stats, "samples": samples, "threshold": threshold,
               "residual_trivial": residuals["trivial"], "residual_sign": residuals["sign"]}
    target = {"boson": "trivial", "fermion": "sign"}.get(stats)
    if target is None:
        summary["expected"] = "no character"
        return summary, min(residuals.values()) > 1e-2
    summary["expected"] = target
    return summary, residuals[target] < threshold


def _initial(cfg, psi):
    pts = cfg.get("integration", "initial")
    if not pts:
        raise ConfigError("missing required key [integration] initial")
    q0 = np.array(pts, dtype=float)
    if q0.shape != (psi.n, psi.d):
        raise ConfigError(f"[integration] initial needs {psi.n} points with {psi.d} coordinates each")
    return q0


def _trajectory(cfg, out):
    psi = wavefunction_from_config(cfg)
    q0 = _initial(cfg, psi)
    t0, t1 = cfg.get("integration", "t0"), cfg.get("integration", "t1")
    traj = integrate_trajectory(psi, q0, t0, t1, cfg.tol, n_samples=cfg.get("integration", "samples"))
    traj.to_csv(os.path.join(out, "trajectory.csv"))
    d = traj.diagnostics
    summary = {"samples": len(traj.times), "t0": t0, "t1": t1, "tol": cfg.tol,
               "accepted_steps": d["accepted_steps"], "rejected_steps": d["rejected_steps"],
               "min_abs_psi": d["min_abs_psi"], "min_pair_distance": min_pair_distance(traj),
               "final": traj.states[-1].points.ravel()}
    return summary, True


def _lift_independence(cfg, out):
    psi = wavefunction_from_config(cfg)
    q0 = _initial(cfg, psi)
    t0, t1 = cfg.get("integration", "t0"), cfg.get("integration", "t1")
    deviation = lift_independence_check(psi, q0, t1, cfg.tol, t0=t0, n_samples=cfg.get("integration", "samples"))
    limit = 100.0 * cfg.tol
    _write_csv(os.path.join(out, "deviation.csv"), ["t0", "t1", "tol", "deviation"],
               [[repr(t0), repr(t1), repr(cfg.tol), repr(deviation)]])
    summary = {"t0": t0, "t1": t1, "tol": cfg.tol, "lifts": int(np.prod(range(1, psi.n + 1))),
               "deviation": deviation, "limit": limit}
    return summary, deviation <= limit


def _sampler(cfg):
    return {k: cfg.get("sampling", k) for k in ("burn_in", "thin", "proposal_scale")}


def _equivariance(cfg, out):
    psi = wavefunction_from_config(cfg)
    t0, t1 = cfg.get("integration", "t0"), cfg.get("integration", "t1")
    n, reps, q = cfg.get("sampling", "n"), cfg.get("sampling", "replicates"), cfg.get("sampling", "quantile")
    start = sample_density(psi, t0, n, seed=cfg.seed, **_sampler(cfg))
    moved = transport_ensemble(psi, start, t1, cfg.tol)
    start.to_csv(os.path.join(out, "ensemble_t0.csv"))
    moved.to_csv(os.path.join(out, "ensemble_t1.csv"))
    ref = ReferenceDensity(psi, t1)
    thresholds = calibrate_thresholds(psi, t1, len(moved), replicates=reps, seed=cfg.seed + 1, quantile=q,
                                      reference=ref, **_sampler(cfg))
    report = distribution_distance(moved, psi, t1, thresholds, reference=ref)

    # negative control: the same ensemble judged against a rigidly shifted state
    shift = cfg.get("sampling", "shift")
    shifted = [GaussianPacket(tuple(c + shift for c in p.center), p.momentum, p.width, p.omega, p.mass, p.hbar)
               for p in packets_from_config(cfg)]
    other = build_wavefunction(cfg.sections["wavefunction"]["statistics"], shifted)
    control = distribution_distance(moved, other, t1, thresholds)

    atomic_write_text(os.path.join(out, "report.txt"),
                      summary_text({f"transported_{k}": v for k, v in report.as_dict().items()})
                      + summary_text({f"control_{k}": v for k, v in control.as_dict().items()}))
    summary = {"n": len(moved), "t0": t0, "t1": t1, "tol": cfg.tol, "failures": moved.provenance["failures"],
               "acceptance_rate": start.provenance["acceptance_rate"], "threshold_source": thresholds.source,
               "ks": report.ks, "ks_threshold": thresholds.ks, "chi2": report.chi2, "chi2_dof": report.dof,
               "chi2_threshold": thresholds.chi2, "transported_pass": report.passed,
               "control_ks": control.ks, "control_chi2": control.chi2, "control_fails": not control.passed}
    return summary, report.passed and not control.passed


def _grid_preservation(cfg, out):
    packets = packets_from_config(cfg)
    stats = cfg.sections["wavefunction"]["statistics"]
    if len(packets) != 2 or packets[0].d != 1:
        raise ConfigError("grid-preservation needs exactly two one-dimensional packets")
    if stats == "none":
        raise ConfigError("grid-preservation needs statistics boson or fermion")
    g = {k: cfg.get("grid", k) for k in SCHEMA["grid"]}
    grid = GridSpec.from_spacing(g["lo"], g["hi"], g["spacing"])
    potential = exchange_symmetric_double_well(g["depth"], g["separation"], g["coupling"])
    init = init_antisymmetric if stats == "fermion" else init_symmetric
    state = init(packets, grid, potential)
    gamma = "sign" if stats == "fermion" else "trivial"
    norm0 = state.norm()
    worst = {"sector": symmetry_sector_error(state, gamma), "drift": 0.0}
    series, count = [[0, repr(state.time), repr(worst["sector"]), repr(0.0)]], [0]

    def monitor(s):
        count[0] += 1
        err, drift = symmetry_sector_error(s, gamma), abs(s.norm() - norm0)
        worst["sector"] = max(worst["sector"], err)
        worst["drift"] = max(worst["drift"], drift)
        if count[0] % g["record_every"] == 0:
            series.append([count[0], repr(s.time), repr(err), repr(drift)])

    final = evolve(state, g["dt"], g["steps"], monitor)
    _write_csv(os.path.join(out, "preservation.csv"), ["step", "t", "sector_error", "norm_drift"], series)
    write_snapshot(final, os.path.join(out, "final_state.csv"))
    summary = {"statistics": stats, "grid_points": grid.n, "spacing": grid.spacing, "dt": g["dt"],
               "steps": g["steps"], "final_time": final.time, "max_sector_error": worst["sector"],
               "max_norm_drift": worst["drift"], "threshold": g["threshold"]}
    return summary, worst["sector"] < g["threshold"] and worst["drift"] < g["threshold"]


def _non_crossing_1d(cfg, out):
    psi = wavefunction_from_config(cfg)
    if psi.d != 1 or psi.n < 2:
        raise ConfigError("non-crossing-1d needs at least two one-dimensional packets")
    t0, t1 = cfg.get("integration", "t0"), cfg.get("integration", "t1")
    runs, samples = cfg.get("integration", "runs"), cfg.get("integration", "samples")
    rng = np.random.default_rng(cfg.seed)

    # the wave function on random coincidence points
    lo, hi = psi.support(t0)
    diag = np.repeat(rng.uniform(lo, hi, size=(1000, 1, 1)), psi.n, axis=1)
    diag_ratio = float(np.max(np.abs(psi.evaluate(diag, t0))) / psi.peak_estimate(t0))

    start = sample_density(psi, t0, runs, seed=cfg.seed, **_sampler(cfg))
    times = np.linspace(t0, t1, samples)
    result = integrate_batch(psi, start.points, t0, t1, cfg.tol, sample_times=times)
    rows, min_dist, crossed = [], np.inf, 0
    for k in range(runs):
        if result.status[k] != OK:
            _raise_failure(result, k)
        traj = Trajectory(times, result.samples[k])
        dist, ordered = min_pair_distance(traj), crossing_check_1d(traj)
        min_dist = min(min_dist, dist)
        crossed += not ordered
        rows.append([k] + [repr(float(x)) for x in start.points[k].ravel()] + [repr(dist), str(ordered).lower()])
    header = ["run"] + [f"p{i}_x0" for i in range(psi.n)] + ["min_pair_dist", "order_preserved"]
    _write_csv(os.path.join(out, "runs.csv"), header, rows)
    fermion = cfg.sections["wavefunction"]["statistics"] == "fermion"
    summary = {"statistics": cfg.sections["wavefunction"]["statistics"], "runs": runs, "t0": t0, "t1": t1,
               "tol": cfg.tol, "min_pair_distance": min_dist, "crossings": crossed,
               "diagonal_max_ratio": diag_ratio}
    ok = min_dist > 0 and crossed == 0 and (diag_ratio < 1e-12 or not fermion)
    return summary, ok


def _mass_density(cfg, out):
    psi = wavefunction_from_config(cfg)
    params = psi.default_params()
    times, nodes = cfg.get("mass-density", "times"), cfg.get("mass-density", "points")
    tolerance = cfg.get("mass-density", "tolerance")
    x, w = np.polynomial.legendre.leggauss(nodes)
    rows, summary, ok = [], {"total_mass": params.total_mass, "tolerance": tolerance}, True
    for t in times:
        lo, hi = psi.support(t, nwidths=10.0)
        axes = [0.5 * (b - a) * x + 0.5 * (b + a) for a, b in zip(lo, hi)]
        wts = [0.5 * (b - a) * w for a, b in zip(lo, hi)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, psi.d)
        weight = np.prod(np.stack(np.meshgrid(*wts, indexing="ij"), axis=-1).reshape(-1, psi.d), axis=1)
        m = mass_density(psi, pts, t, params)
        integral = float(np.sum(weight * m))
        error = abs(integral - params.total_mass)
        summary[f"integral_t{t:g}"] = integral
        summary[f"error_t{t:g}"] = error
        ok &= error < tolerance
        rows.extend([repr(float(t))] + [repr(float(c)) for c in p] + [repr(float(v))] for p, v in zip(pts, m))
    _write_csv(os.path.join(out, "mass_density.csv"), ["t"] + [f"x_{a}" for a in "xyz"[:psi.d]] + ["m"], rows)
    return summary, ok


_RUNNERS = {
    "characters": _characters, "periodicity": _periodicity, "trajectory": _trajectory,
    "lift-independence": _lift_independence, "equivariance": _equivariance,
    "grid-preservation": _grid_preservation, "non-crossing-1d": _non_crossing_1d, "mass-density": _mass_density,
}


def _exit_code(exc) -> int:
    if isinstance(exc, _CONFIG_ERRORS):
        return EXIT_CONFIG
    if isinstance(exc, PeriodicityViolation):
        return EXIT_PHYSICS
    return EXIT_NUMERICAL


def manifest(cfg: ExperimentConfig) -> dict:
    info = _INFO[cfg.kind]
    return {"kind": cfg.kind, "anchor": info[0], "claim": info[1], "seed": cfg.seed, "tol": cfg.tol,
            "config_sha256": cfg.digest, "versions": {"symbohm": __version__, "numpy": np.__version__,
                                                        "scipy": scipy.__version__,
                                                        "python": platform.python_version()}}


def run(cfg: ExperimentConfig, out: str) -> tuple:
    """Run one experiment, writing its artefacts into ``out``; returns ``(exit status, summary dict)``.

    Failures are recorded in the summary (``status=error`` with ``error_class``)
    rather than propagated.
    """
    os.makedirs(out, exist_ok=True)
    head = {"kind": cfg.kind, "seed": cfg.seed}
    try:
        body, passed = _RUNNERS[cfg.kind](cfg, out)
        code = EXIT_OK if passed else EXIT_PHYSICS
        summary = dict(head, status="pass" if passed else "fail", **body)
    except SymbohmError as exc:
        code = _exit_code(exc)
        summary = dict(head, status="error", error_class=type(exc).__name__, error=str(exc).replace("\n", " "))
    summary["exit_status"] = code
    atomic_write_text(os.path.join(out, "summary.txt"), summary_text(summary))
    atomic_write_text(os.path.join(out, "manifest.json"), json.dumps(manifest(cfg), indent=2) + "\n")
    return code, summary
