"""Crank-Nicolson propagation of small configuration-space grids.

Grids have one or two axes: a single particle on a line, or two particles on a
line (axis k holds the coordinate of particle k).  Amplitudes are stored on
every grid node, boundary included; Dirichlet conditions pin the boundary
nodes to zero.  The scheme is the Cayley transform of the finite-difference
Hamiltonian, so it is unitary in exact arithmetic.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RectBivariateSpline
from scipy.sparse.linalg import splu

from .configuration import atomic_write_text
from .errors import DomainTooSmall, GridAsymmetryError, SolverError
from .group import as_factor, transposition
from .wavefunction import GaussianPacket, ModelParams, packet_at

SUPPORT_WIDTHS = 6.0


@dataclass(frozen=True)
class GridSpec:
    """Uniform axis from ``lo`` to ``hi`` with ``n`` nodes, both ends included."""

    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("grid needs hi > lo")
        if self.n < 5:
            raise ValueError("grid needs at least 5 nodes")

    @classmethod
    def from_spacing(cls, lo: float, hi: float, spacing: float) -> "GridSpec":
        n = int(round((hi - lo) / spacing)) + 1
        return cls(lo, lo + (n - 1) * spacing, n)

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)


@dataclass(frozen=True, eq=False)
class GridState:
    amplitudes: np.ndarray
    axes: tuple          # GridSpec per axis
    time: float = 0.0
    potential: np.ndarray | None = None
    mass: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if len(self.axes) not in (1, 2):
            raise ValueError("grid dimension must be 1 or 2")
        shape = tuple(ax.n for ax in self.axes)
        if self.amplitudes.shape != shape:
            raise ValueError(f"amplitudes of shape {self.amplitudes.shape} on a {shape} grid")
        if self.potential is not None and self.potential.shape != shape:
            raise ValueError("potential must be tabulated on the grid")

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def cell(self) -> float:
        return float(np.prod([ax.spacing for ax in self.axes]))

    def mesh(self):
        return np.meshgrid(*(ax.points for ax in self.axes), indexing="ij")

    def norm(self) -> float:
        """Discrete L2 norm ``sqrt(sum |psi|^2 * cell volume)``."""
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2) * self.cell))

    def is_swap_symmetric(self) -> bool:
        return self.dim == 2 and self.axes[0] == self.axes[1]

    def mean_position(self) -> np.ndarray:
        """Expectation of each grid coordinate."""
        rho = np.abs(self.amplitudes) ** 2
        total = rho.sum()
        return np.array([np.sum(rho * x) / total for x in self.mesh()])


def tabulate(potential, axes) -> np.ndarray | None:
    """Evaluate a callable potential ``V(x1[, x2])`` on the grid, or pass an array through."""
    if potential is None:
        return None
    if callable(potential):
        mesh = np.meshgrid(*(ax.points for ax in axes), indexing="ij")
        return np.asarray(np.broadcast_to(potential(*mesh), mesh[0].shape), dtype=float)
    return np.asarray(potential, dtype=float)


def _check_support(packets, axes):
    for p in packets:
        c = p.center[0]
        for ax in axes:
            if c - SUPPORT_WIDTHS * p.width < ax.lo or c + SUPPORT_WIDTHS * p.width > ax.hi:
                raise DomainTooSmall(
                    f"packet at {c} with width {p.width} needs [{c - SUPPORT_WIDTHS * p.width}, "
                    f"{c + SUPPORT_WIDTHS * p.width}] inside the grid [{ax.lo}, {ax.hi}]")


def _packet_on_axis(p: GaussianPacket, ax: GridSpec, t: float = 0.0) -> np.ndarray:
    if p.d != 1:
        raise ValueError("grid propagation supports one-dimensional packets only")
    return packet_at(p, t).value(ax.points[None, :, None])[0]


def _finish(values, axes, potential, mass, hbar, time=0.0) -> GridState:
    values = np.array(values, dtype=complex)
    for k in range(values.ndim):
        edge = [slice(None)] * values.ndim
        for i in (0, -1):
            edge[k] = i
            values[tuple(edge)] = 0.0
    cell = float(np.prod([ax.spacing for ax in axes]))
    norm = np.sqrt(np.sum(np.abs(values) ** 2) * cell)
    if not norm > 0:
        raise ValueError("initial amplitudes vanish on the grid")
    return GridState(values / norm, tuple(axes), time, tabulate(potential, axes), mass, hbar)


def init_packet(packet: GaussianPacket, grid: GridSpec, potential=None) -> GridState:
    """One particle on a line."""
    _check_support([packet], [grid])
    return _finish(_packet_on_axis(packet, grid), (grid,), potential, packet.mass, packet.hbar)


def _pair(packets, grid, potential, sign):
    a, b = packets
    if a == b and sign < 0:
        raise ValueError("antisymmetrizing two identical packets gives zero")
    if a.dynamics_key() != b.dynamics_key():
        raise ValueError("packets must share mass and hbar")
    _check_support(packets, [grid])
    fa, fb = _packet_on_axis(a, grid), _packet_on_axis(b, grid)
    values = np.outer(fa, fb) + sign * np.outer(fb, fa)
    return _finish(values, (grid, grid), potential, a.mass, a.hbar)


def init_antisymmetric(packets, grid: GridSpec, potential=None) -> GridState:
    """Two particles on a line, ``phi_a(x1) phi_b(x2) - phi_b(x1) phi_a(x2)``, discretely normalised."""
    return _pair(packets, grid, potential, -1.0)


def init_symmetric(packets, grid: GridSpec, potential=None) -> GridState:
    return _pair(packets, grid, potential, +1.0)


def _laplacian_1d(m: int, h: float):
    return sp.diags([np.ones(m - 1), -2.0 * np.ones(m), np.ones(m - 1)], [-1, 0, 1]) / h ** 2


class Propagator:
    """Factorised Crank-Nicolson step ``(1 + i dt H / 2 hbar) psi' = (1 - i dt H / 2 hbar) psi``."""

    def __init__(self, axes, potential, dt: float, mass: float = 1.0, hbar: float = 1.0):
        if not dt > 0:
            raise ValueError("time step must be positive")
        self.axes, self.dt, self.mass, self.hbar = tuple(axes), float(dt), mass, hbar
        inner = [ax.n - 2 for ax in self.axes]
        lap = _laplacian_1d(inner[0], self.axes[0].spacing)
        if len(inner) == 2:
            lap = (sp.kron(lap, sp.identity(inner[1]))
                   + sp.kron(sp.identity(inner[0]), _laplacian_1d(inner[1], self.axes[1].spacing)))
        ham = -(hbar ** 2) / (2.0 * mass) * lap
        if potential is not None:
            interior = potential[(slice(1, -1),) * len(inner)].ravel()
            ham = ham + sp.diags(interior)
        size = int(np.prod(inner))
        eye = sp.identity(size, dtype=complex, format="csc")
        coeff = 0.5j * dt / hbar
        self._rhs = (eye - coeff * ham).tocsr()
        try:
            self._lu = splu((eye + coeff * ham).tocsc(), permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as exc:
            raise SolverError(f"Crank-Nicolson factorisation failed: {exc}") from exc
        self._inner = tuple(inner)

    def step(self, state: GridState, n_steps: int = 1, monitor=None) -> GridState:
        inner = (slice(1, -1),) * state.dim
        vec = state.amplitudes[inner].ravel()
        out = np.zeros_like(state.amplitudes)
        time = state.time
        for _ in range(n_steps):
            vec = self._lu.solve(self._rhs @ vec)
            time += self.dt
            if monitor is not None:
                out[inner] = vec.reshape(self._inner)
                monitor(replace(state, amplitudes=out.copy(), time=time))
        if not np.all(np.isfinite(vec)):
            raise SolverError("Crank-Nicolson solve produced non-finite amplitudes")
        out[inner] = vec.reshape(self._inner)
        return replace(state, amplitudes=out, time=time)


_CACHE: dict = {}


def propagator_for(state: GridState, dt: float) -> Propagator:
    pot = state.potential
    key = (state.axes, None if pot is None else pot.tobytes(), float(dt), state.mass, state.hbar)
    prop = _CACHE.get(key)
    if prop is None:
        if len(_CACHE) > 8:
            _CACHE.clear()
        prop = _CACHE[key] = Propagator(state.axes, pot, dt, state.mass, state.hbar)
    return prop


def step(state: GridState, dt: float) -> GridState:
    """One Crank-Nicolson step of length ``dt`` under the state's potential."""
    return propagator_for(state, dt).step(state)


def evolve(state: GridState, dt: float, n_steps: int, monitor=None) -> GridState:
    """``n_steps`` steps; ``monitor(state)`` is called after each one if given."""
    return propagator_for(state, dt).step(state, n_steps, monitor)


def symmetry_sector_error(state: GridState, gamma) -> float:
    """``max |psi(x2, x1) - gamma(swap) psi(x1, x2)| / max |psi|`` over the grid."""
    if not state.is_swap_symmetric():
        raise GridAsymmetryError("particle exchange is a grid symmetry only on square grids with equal axes")
    c = as_factor(gamma, 2)(transposition(2, 0, 1))
    amp = state.amplitudes
    return float(np.max(np.abs(amp.T - c * amp)) / np.max(np.abs(amp)))


def exchange_symmetric_double_well(depth: float = 1.0, separation: float = 1.5, coupling: float = 0.0):
    """``V(x1, x2) = W(x1) + W(x2) + coupling * exp(-(x1 - x2)^2)`` with ``W(x) = depth ((x/s)^2 - 1)^2``."""
    def potential(x1, x2):
        well = lambda x: depth * ((x / separation) ** 2 - 1.0) ** 2
        return well(x1) + well(x2) + coupling * np.exp(-(x1 - x2) ** 2)
    return potential


class GridWaveFunction:
    """Two particles on a line, read off a sequence of grid snapshots.

    Amplitudes are interpolated bicubically in space and linearly in time;
    the gradient differentiates the spatial interpolant.
    """

    kind = "grid"

    def __init__(self, snapshots):
        snapshots = list(snapshots)
        if not snapshots or any(s.dim != 2 for s in snapshots):
            raise ValueError("grid-backed wave functions need two-axis snapshots")
        self.snapshots = snapshots
        self.times = np.array([s.time for s in snapshots])
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("snapshot times must increase")
        self.n, self.d = 2, 1
        self._splines = []
        for s in snapshots:
            x, y = s.axes[0].points, s.axes[1].points
            self._splines.append((RectBivariateSpline(x, y, s.amplitudes.real),
                                  RectBivariateSpline(x, y, s.amplitudes.imag)))

    def default_params(self) -> ModelParams:
        s = self.snapshots[0]
        return ModelParams.identical(2, 1, mass=s.mass, hbar=s.hbar)

    def _at(self, k, x1, x2, dx=0, dy=0):
        re, im = self._splines[k]
        return re.ev(x1, x2, dx=dx, dy=dy) + 1j * im.ev(x1, x2, dx=dx, dy=dy)

    def _bracket(self, t):
        t = np.clip(t, self.times[0], self.times[-1])
        if len(self.times) == 1:
            return np.zeros(t.shape, int), np.zeros(t.shape, int), np.zeros(t.shape)
        k = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2)
        w = (t - self.times[k]) / (self.times[k + 1] - self.times[k])
        return k, k + 1, w

    def _interp(self, q, t, dx=0, dy=0):
        q = np.asarray(q, dtype=float)
        single = q.ndim == 2
        q = q[None] if single else q
        t = np.broadcast_to(np.asarray(t, dtype=float), q.shape[:1])
        k0, k1, w = self._bracket(t)
        acc = np.zeros(q.shape[0], dtype=complex)
        for k in np.unique(np.concatenate([k0, k1])):
            sel0, sel1 = k0 == k, k1 == k
            if np.any(sel0):
                acc[sel0] += (1 - w[sel0]) * self._at(k, q[sel0, 0, 0], q[sel0, 1, 0], dx, dy)
            if np.any(sel1) and len(self.times) > 1:
                acc[sel1] += w[sel1] * self._at(k, q[sel1, 0, 0], q[sel1, 1, 0], dx, dy)
        return single, acc

    def evaluate(self, q, t=0.0):
        single, v = self._interp(q, t)
        return v[0] if single else v

    __call__ = evaluate

    def value_and_gradient(self, q, t=0.0):
        single, v = self._interp(q, t)
        _, g1 = self._interp(q, t, dx=1)
        _, g2 = self._interp(q, t, dy=1)
        grad = np.stack([g1, g2], axis=-1)[..., None]
        if single:
            return v[0], grad[0]
        return v, grad

    def gradient(self, q, t=0.0):
        return self.value_and_gradient(q, t)[1]

    def _nearest(self, t):
        return self.snapshots[int(np.argmin(np.abs(self.times - t)))]

    def packet_blobs(self, t=0.0):
        s = self._nearest(t)
        rho = np.abs(s.amplitudes) ** 2
        rho = rho / rho.sum()
        x1, x2 = s.mesh()
        centers, widths = [], []
        for x in (x1, x2):
            mean = np.sum(rho * x)
            centers.append([mean])
            widths.append(np.sqrt(np.sum(rho * (x - mean) ** 2)))
        return np.array(centers), np.array(widths)

    def support(self, t=0.0, nwidths=8.0):
        ax = self.snapshots[0].axes[0]
        return np.array([ax.lo]), np.array([ax.hi])

    def peak_estimate(self, t=0.0):
        return float(np.max(np.abs(self._nearest(t).amplitudes)))


def write_snapshot(state: GridState, path_or_file) -> None:
    """CSV dump: ``#``-prefixed metadata lines, then ``x1[,x2],re,im`` per node."""
    lines = [
        "# symbohm grid snapshot v1",
        f"# dim={state.dim}",
        f"# time={state.time!r}",
        f"# mass={state.mass!r}",
        f"# hbar={state.hbar!r}",
    ]
    for k, ax in enumerate(state.axes):
        lines.append(f"# axis{k}={ax.lo!r},{ax.hi!r},{ax.n}")
    coords = [f"x{k + 1}" for k in range(state.dim)]
    has_pot = state.potential is not None
    lines.append(",".join(coords + ["re", "im"] + (["V"] if has_pot else [])))
    mesh = [m.ravel() for m in state.mesh()]
    amp = state.amplitudes.ravel()
    pot = state.potential.ravel() if has_pot else None
    for i in range(amp.size):
        row = [repr(float(m[i])) for m in mesh] + [repr(float(amp[i].real)), repr(float(amp[i].imag))]
        if has_pot:
            row.append(repr(float(pot[i])))
        lines.append(",".join(row))
    text = "\n".join(lines) + "\n"
    if isinstance(path_or_file, (str, os.PathLike)):
        atomic_write_text(path_or_file, text)
    else:
        path_or_file.write(text)


def read_snapshot(path_or_file) -> GridState:
    if isinstance(path_or_file, (str, os.PathLike)):
        with open(path_or_file) as fh:
            text = fh.read()
    else:
        text = path_or_file.read()
    meta, axes = {}, []
    body = []
    for line in io.StringIO(text):
        line = line.strip()
        if line.startswith("#"):
            if "=" in line:
                key, value = line[1:].strip().split("=", 1)
                meta[key] = value
        elif line:
            body.append(line)
    dim = int(meta["dim"])
    for k in range(dim):
        lo, hi, n = meta[f"axis{k}"].split(",")
        axes.append(GridSpec(float(lo), float(hi), int(n)))
    header = body[0].split(",")
    data = np.array([[float(v) for v in row.split(",")] for row in body[1:]])
    shape = tuple(ax.n for ax in axes)
    amp = (data[:, dim] + 1j * data[:, dim + 1]).reshape(shape)
    pot = data[:, header.index("V")].reshape(shape) if "V" in header else None
    return GridState(amp, tuple(axes), float(meta["time"]), pot, float(meta["mass"]), float(meta["hbar"]))
