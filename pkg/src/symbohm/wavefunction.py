"""Multi-particle wave functions on the covering space built from Gaussian packets.

Single-particle packets evolve in closed form, either freely or in an isotropic
harmonic trap.  Writing the packet as

    phi(x, t) = c(t) exp(i/hbar [A(t)|x - x_c(t)|^2 + p_c(t).(x - x_c(t)) + S(t)])

the centre ``x_c`` and momentum ``p_c`` follow the classical orbit, ``S`` is the
classical action and ``A = (m/2) u'/u`` with ``u(t) = cos(wt) + 2 A0 sin(wt)/(m w)``
(``u = 1 + 2 A0 t/m`` for free motion) and ``c ~ u^{-d/2}``.

Many-particle states evaluate the matrix ``M[i, j] = phi_j(x_i)`` and take its
determinant (fermions), permanent (bosons) or diagonal product (no symmetry).
Every evaluation routine is batched over a leading axis of configurations.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateStateError, QuadratureError
from .group import TopologicalFactor, apply_to_configuration, as_factor, enumerate_elements

PERIODICITY_FLOOR = 1e-300


@dataclass(frozen=True)
class ModelParams:
    """Physical constants: reduced Planck constant and one mass per particle."""

    masses: tuple
    d: int
    hbar: float = 1.0

    def __post_init__(self):
        masses = tuple(float(m) for m in self.masses)
        if not masses or any(not (m > 0 and math.isfinite(m)) for m in masses):
            raise ValueError(f"masses must be positive and finite, got {self.masses}")
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        object.__setattr__(self, "masses", masses)

    @property
    def n(self) -> int:
        return len(self.masses)

    @classmethod
    def identical(cls, n: int, d: int, mass: float = 1.0, hbar: float = 1.0) -> "ModelParams":
        return cls(masses=(mass,) * n, d=d, hbar=hbar)

    @property
    def total_mass(self) -> float:
        return float(sum(self.masses))


@dataclass(frozen=True)
class GaussianPacket:
    """Normalised isotropic Gaussian; ``|phi|^2`` has standard deviation ``width`` per axis.

    ``omega=None`` selects free evolution, otherwise the packet moves in the
    potential ``m omega^2 |x|^2 / 2``.
    """

    center: tuple
    momentum: tuple
    width: float
    omega: float | None = None
    mass: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        center = tuple(float(c) for c in np.atleast_1d(self.center))
        momentum = tuple(float(p) for p in np.atleast_1d(self.momentum))
        if len(center) != len(momentum):
            raise ValueError(f"center has {len(center)} components but momentum has {len(momentum)}")
        if len(center) not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {len(center)}")
        values = center + momentum + (self.width, self.mass, self.hbar)
        if self.omega is not None:
            values += (self.omega,)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("packet parameters must be finite")
        if not self.width > 0:
            raise ValueError(f"width must be positive, got {self.width}")
        if not (self.mass > 0 and self.hbar > 0):
            raise ValueError("mass and hbar must be positive")
        if self.omega is not None and not self.omega > 0:
            raise ValueError(f"harmonic frequency must be positive, got {self.omega}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "momentum", momentum)

    @property
    def d(self) -> int:
        return len(self.center)

    @property
    def evolution(self) -> str:
        return "free" if self.omega is None else "harmonic"

    def dynamics_key(self):
        return (self.omega, self.mass, self.hbar, self.d)


@dataclass(frozen=True)
class PacketState:
    """Closed-form parameters of a packet at one or more times (leading axis)."""

    center: np.ndarray    # (T, d)
    momentum: np.ndarray  # (T, d)
    quad: np.ndarray      # (T,) complex A(t)
    prefactor: np.ndarray  # (T,) complex, includes the action phase
    hbar: float

    @property
    def width(self) -> np.ndarray:
        return np.sqrt(self.hbar / (4.0 * self.quad.imag))

    def value(self, x) -> np.ndarray:
        """Evaluate at ``x`` of shape ``(T, ..., d)``."""
        x = np.asarray(x, dtype=float)
        extra = (None,) * (x.ndim - 2)
        dx = x - self.center[(slice(None),) + extra]
        phase = (self.quad[(slice(None),) + extra] * np.sum(dx * dx, axis=-1)
                 + np.sum(self.momentum[(slice(None),) + extra] * dx, axis=-1))
        return self.prefactor[(slice(None),) + extra] * np.exp(1j * phase / self.hbar)

    def log_gradient(self, x) -> np.ndarray:
        """``grad phi / phi`` at ``x`` of shape ``(T, ..., d)``."""
        x = np.asarray(x, dtype=float)
        extra = (None,) * (x.ndim - 2)
        dx = x - self.center[(slice(None),) + extra]
        a = self.quad[(slice(None),) + extra + (None,)]
        return 1j * (2.0 * a * dx + self.momentum[(slice(None),) + extra]) / self.hbar


def packet_at(p: GaussianPacket, t) -> PacketState:
    """Closed-form packet parameters at time(s) ``t``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    m, hbar = p.mass, p.hbar
    alpha = 1.0 / (4.0 * p.width ** 2)
    a0 = 1j * hbar * alpha
    x0 = np.asarray(p.center)
    p0 = np.asarray(p.momentum)
    if p.omega is None:
        u = 1.0 + 2.0 * a0 * t / m
        quad = a0 / u
        arg_u = np.angle(u)
        xc = x0[None, :] + np.outer(t, p0) / m
        pc = np.broadcast_to(p0, xc.shape).copy()
    else:
        w = p.omega
        theta = w * t
        c, s = np.cos(theta), np.sin(theta)
        beta = 2.0 * a0 / (m * w)
        u = c + beta * s
        quad = 0.5 * m * w * (beta * c - s) / u
        # continuous branch of arg(u): it agrees with theta at multiples of pi/2
        principal = np.angle(u)
        arg_u = principal + 2.0 * np.pi * np.round((theta - principal) / (2.0 * np.pi))
        xc = np.outer(c, x0) + np.outer(s, p0) / (m * w)
        pc = np.outer(c, p0) - m * w * np.outer(s, x0)
    action = 0.5 * (np.sum(pc * xc, axis=1) - float(p0 @ x0))
    d = p.d
    amp = (2.0 * alpha / np.pi) ** (d / 4.0) * np.abs(u) ** (-d / 2.0)
    prefactor = amp * np.exp(-0.5j * d * arg_u + 1j * action / hbar)
    return PacketState(center=xc, momentum=pc, quad=quad, prefactor=prefactor, hbar=hbar)


def packet_overlap(a: GaussianPacket, b: GaussianPacket) -> complex:
    """``<a|b>`` at t = 0 in closed form (constant under a shared Hamiltonian)."""
    if a.d != b.d:
        raise ValueError("packets live in different dimensions")
    aa, ab = 1.0 / (4 * a.width ** 2), 1.0 / (4 * b.width ** 2)
    ka = np.asarray(a.momentum) / a.hbar
    kb = np.asarray(b.momentum) / b.hbar
    xa, xb = np.asarray(a.center), np.asarray(b.center)
    big_a = aa + ab
    big_b = 2 * aa * xa + 2 * ab * xb + 1j * (kb - ka)
    big_c = -aa * xa ** 2 - ab * xb ** 2 - 1j * kb * xb + 1j * ka * xa
    per_axis = np.sqrt(np.pi / big_a) * np.exp(big_b ** 2 / (4 * big_a) + big_c)
    norm = (2 * aa / np.pi) ** 0.25 * (2 * ab / np.pi) ** 0.25
    return complex(np.prod(norm * per_axis))


# Glynn's signed row sums cancel badly when entries span many orders of
# magnitude (Gaussian tails), so small permanents use the plain expansion.
EXPANSION_MAX_N = 6


@lru_cache(maxsize=None)
def _permutation_table(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))))


def permanent(m) -> np.ndarray:
    """Permanent of square matrices ``(..., n, n)``.

    Sum over all ``n!`` permutations for ``n <= EXPANSION_MAX_N``, otherwise
    Glynn's formula.
    """
    m = np.asarray(m)
    n = m.shape[-1]
    if n == 1:
        return m[..., 0, 0]
    if n <= EXPANSION_MAX_N:
        perms = _permutation_table(n)
        terms = m[..., np.arange(n), perms]     # (..., n!, n)
        return np.sum(np.prod(terms, axis=-1), axis=-1)
    deltas = np.array([(1,) + s for s in itertools.product((1, -1), repeat=n - 1)], dtype=float)
    signs = np.prod(deltas, axis=1)
    # sums[..., k, j] = sum_i delta_k[i] m[i, j]
    sums = np.einsum("ki,...ij->...kj", deltas, m)
    return np.einsum("k,...k->...", signs, np.prod(sums, axis=-1)) / 2 ** (n - 1)


_COMBINE = {
    "antisymmetric": np.linalg.det,
    "symmetric": permanent,
}


def _product_diagonal(m):
    return np.prod(np.diagonal(m, axis1=-2, axis2=-1), axis=-1)


class WaveFunction:
    """A scalar wave function on ordered configurations ``(N, d)``.

    ``kind`` is one of ``single``, ``product``, ``symmetric`` (bosons) or
    ``antisymmetric`` (fermions).  Use :func:`single`, :func:`product`,
    :func:`symmetrize` or :func:`antisymmetrize` to build one.
    """

    def __init__(self, kind: str, packets, norm: float = 1.0):
        packets = tuple(packets)
        if kind not in ("single", "product", "symmetric", "antisymmetric"):
            raise ValueError(f"unknown wave-function kind {kind!r}")
        if not packets:
            raise ValueError("at least one packet is required")
        if len({p.d for p in packets}) != 1:
            raise ValueError("packets must share one spatial dimension")
        self.kind = kind
        self.packets = packets
        self.norm = float(norm)

    @property
    def n(self) -> int:
        return len(self.packets)

    @property
    def d(self) -> int:
        return self.packets[0].d

    @property
    def statistics(self) -> str:
        return {"symmetric": "boson", "antisymmetric": "fermion"}.get(self.kind, "none")

    def __repr__(self):
        return f"WaveFunction({self.kind}, n={self.n}, d={self.d})"

    def default_params(self) -> ModelParams:
        return ModelParams(masses=tuple(p.mass for p in self.packets), d=self.d,
                           hbar=self.packets[0].hbar)

    def _matrices(self, q, t, with_gradient):
        q = np.asarray(q, dtype=float)
        single = q.ndim == 2
        if single:
            q = q[None]
        if q.shape[-2:] != (self.n, self.d):
            raise ValueError(f"expected configurations of shape (..., {self.n}, {self.d}), got {q.shape}")
        batch = q.shape[0]
        t = np.broadcast_to(np.asarray(t, dtype=float), (batch,))
        m = np.empty((batch, self.n, self.n), dtype=complex)
        g = np.empty((batch, self.n, self.n, self.d), dtype=complex) if with_gradient else None
        # evaluate each packet once per distinct time: common case is a shared scalar time
        unique_t, inverse = np.unique(t, return_inverse=True)
        for j, p in enumerate(self.packets):
            state = packet_at(p, unique_t)
            state = PacketState(state.center[inverse], state.momentum[inverse], state.quad[inverse],
                                state.prefactor[inverse], state.hbar)
            m[:, :, j] = state.value(q)
            if with_gradient:
                g[:, :, j, :] = m[:, :, j, None] * state.log_gradient(q)
        return single, m, g

    def _combine(self, m):
        if self.kind in _COMBINE:
            return _COMBINE[self.kind](m)
        return _product_diagonal(m)

    def evaluate(self, q, t=0.0):
        """psi(q, t); ``q`` is ``(N, d)`` or a batch ``(B, N, d)``."""
        single, m, _ = self._matrices(q, t, False)
        out = self.norm * self._combine(m)
        return out[0] if single else out

    __call__ = evaluate

    def value_and_gradient(self, q, t=0.0):
        """psi and its gradient (shape ``(..., N, d)``) in one pass."""
        single, m, g = self._matrices(q, t, True)
        batch, n, d = m.shape[0], self.n, self.d
        value = self.norm * self._combine(m)
        if self.kind in ("single", "product"):
            diag = np.diagonal(m, axis1=1, axis2=2)  # (B, N)
            grad = np.empty((batch, n, d), dtype=complex)
            for i in range(n):
                others = np.prod(np.delete(diag, i, axis=1), axis=1)
                grad[:, i, :] = self.norm * others[:, None] * g[:, i, i, :]
        else:
            # the combination is linear in each row: replace row i by its derivative
            rows = np.broadcast_to(m[:, None, None], (batch, n, d, n, n)).copy()
            for i in range(n):
                rows[:, i, :, i, :] = np.moveaxis(g[:, i, :, :], -1, 1)
            grad = self.norm * _COMBINE[self.kind](rows)
        if single:
            return value[0], grad[0]
        return value, grad

    def gradient(self, q, t=0.0):
        return self.value_and_gradient(q, t)[1]

    def packet_blobs(self, t=0.0):
        """Centres ``(N, d)`` and ``|phi|^2`` widths ``(N,)`` of the constituent packets at ``t``."""
        states = [packet_at(p, t) for p in self.packets]
        return (np.array([s.center[0] for s in states]), np.array([s.width[0] for s in states]))

    def support(self, t=0.0, nwidths: float = 8.0):
        """Axis-aligned box ``(lo, hi)`` in R^d holding every packet to ``nwidths`` widths."""
        centers, widths = self.packet_blobs(t)
        return (np.min(centers - nwidths * widths[:, None], axis=0),
                np.max(centers + nwidths * widths[:, None], axis=0))

    def peak_estimate(self, t=0.0) -> float:
        """Upper bound on ``|psi|`` used to scale relative thresholds."""
        centers, widths = self.packet_blobs(t)
        per_packet = (2 * np.pi * widths ** 2) ** (-self.d / 4)
        bound = self.norm * np.prod(per_packet)
        if self.kind in _COMBINE:
            bound *= math.factorial(self.n)
        return float(bound)


class TimeReversed:
    """``phi(q, s) = conj(psi(q, t_ref - s))``, the time-reversed solution."""

    def __init__(self, psi, t_ref: float):
        self.psi = psi
        self.t_ref = float(t_ref)
        self.kind = psi.kind
        self.n, self.d = psi.n, psi.d

    def default_params(self):
        return self.psi.default_params()

    def evaluate(self, q, t=0.0):
        return np.conj(self.psi.evaluate(q, self.t_ref - np.asarray(t, dtype=float)))

    __call__ = evaluate

    def value_and_gradient(self, q, t=0.0):
        v, g = self.psi.value_and_gradient(q, self.t_ref - np.asarray(t, dtype=float))
        return np.conj(v), np.conj(g)

    def gradient(self, q, t=0.0):
        return self.value_and_gradient(q, t)[1]

    def packet_blobs(self, t=0.0):
        return self.psi.packet_blobs(self.t_ref - t)

    def support(self, t=0.0, nwidths=8.0):
        return self.psi.support(self.t_ref - t, nwidths)

    def peak_estimate(self, t=0.0):
        return self.psi.peak_estimate(self.t_ref - t)


def _check_shared_dynamics(packets):
    if len({p.dynamics_key() for p in packets}) != 1:
        raise ValueError("identical particles need packets with one shared evolution, mass and hbar")


def single(packet: GaussianPacket) -> WaveFunction:
    return WaveFunction("single", (packet,))


def product(packets) -> WaveFunction:
    """Unsymmetrised product state ``prod_i phi_i(x_i)``."""
    return WaveFunction("product", packets)


def _gram(packets):
    k = len(packets)
    s = np.empty((k, k), dtype=complex)
    for i, j in itertools.product(range(k), repeat=2):
        s[i, j] = packet_overlap(packets[i], packets[j])
    return s


def symmetrize(packets) -> WaveFunction:
    """Normalised bosonic state: permanent of ``phi_j(x_i)``."""
    packets = tuple(packets)
    if len(packets) < 2:
        raise ValueError("symmetrization needs at least two packets")
    _check_shared_dynamics(packets)
    norm2 = math.factorial(len(packets)) * permanent(_gram(packets)).real
    if not norm2 > 1e-12:
        raise DegenerateStateError(f"symmetrized state has norm^2 {norm2:.3e}")
    return WaveFunction("symmetric", packets, norm=1.0 / math.sqrt(norm2))


def antisymmetrize(packets) -> WaveFunction:
    """Normalised fermionic state: Slater determinant of ``phi_j(x_i)``."""
    packets = tuple(packets)
    if len(packets) < 2:
        raise ValueError("antisymmetrization needs at least two packets")
    _check_shared_dynamics(packets)
    norm2 = math.factorial(len(packets)) * np.linalg.det(_gram(packets)).real
    if not norm2 > 1e-12:
        raise DegenerateStateError(
            f"antisymmetrized state vanishes identically (norm^2 {norm2:.3e}); are two packets equal?")
    return WaveFunction("antisymmetric", packets, norm=1.0 / math.sqrt(norm2))


def evaluate(psi, q, t=0.0):
    return psi.evaluate(q, t)


def gradient(psi, q, t=0.0):
    return psi.gradient(q, t)


def sample_points_near(psi, t, size: int, rng: np.random.Generator, spread: float = 1.5) -> np.ndarray:
    """Random ordered configurations around the packets: each particle sits
    near a randomly chosen packet centre, Gaussian-distributed with ``spread`` widths."""
    centers, widths = psi.packet_blobs(t)
    choice = np.array([rng.permutation(psi.n) for _ in range(size)])
    return (centers[choice] + spread * widths[choice][..., None]
            * rng.standard_normal((size, psi.n, psi.d)))


@dataclass
class PeriodicityReport:
    max_residual: float
    samples: int
    worst: dict = field(default_factory=dict)


def check_periodicity(psi, gamma, samples: int = 1000, seed: int = 0, t_max: float = 1.0,
                      report: bool = False):
    """Largest relative residual ``|psi(s q) - gamma_s psi(q)| / |psi(q)|``.

    Sampled over random configurations near the packets, random permutations
    ``s`` and random times in ``[0, t_max]``; deterministic given ``seed``.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    gamma = as_factor(gamma, psi.n)
    rng = np.random.default_rng(seed)
    elements = enumerate_elements(psi.n)
    idx = rng.integers(len(elements), size=samples)
    times = rng.uniform(0.0, t_max, size=samples)
    q = np.empty((samples, psi.n, psi.d))
    # group by time is unnecessary: evaluation is batched over (q, t) pairs
    for k in range(samples):
        q[k] = sample_points_near(psi, times[k], 1, rng)[0]
    permuted = np.empty_like(q)
    factors = np.empty(samples, dtype=complex)
    for k in range(samples):
        sigma = elements[idx[k]]
        permuted[k] = apply_to_configuration(sigma, q[k])
        factors[k] = gamma(sigma)
    base = psi.evaluate(q, times)
    moved = psi.evaluate(permuted, times)
    residual = np.abs(moved - factors * base) / np.maximum(np.abs(base), PERIODICITY_FLOOR)
    worst = int(np.argmax(residual))
    value = float(residual[worst])
    if report:
        return PeriodicityReport(value, samples, {
            "q": q[worst], "t": float(times[worst]), "sigma": elements[idx[worst]]})
    return value


def detect_character(psi, samples: int = 64, seed: int = 0, tol: float = 1e-8):
    """The character (trivial or sign) whose periodicity condition ``psi`` obeys, else ``None``."""
    if psi.n == 1:
        return TopologicalFactor.trivial(1)
    for gamma in (TopologicalFactor.trivial(psi.n), TopologicalFactor.sign(psi.n)):
        if check_periodicity(psi, gamma, samples=samples, seed=seed) < tol:
            return gamma
    return None


def _gauss_legendre_box(lo, hi, nodes: int):
    """Tensor-product Gauss-Legendre nodes and weights on the box ``[lo, hi]``."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    axes, weights = [], []
    for a, b in zip(lo, hi):
        axes.append(0.5 * (b - a) * x + 0.5 * (b + a))
        weights.append(0.5 * (b - a) * w)
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))
    wts = np.prod(np.stack(np.meshgrid(*weights, indexing="ij"), axis=-1).reshape(-1, len(lo)), axis=1)
    return grid, wts


_MARGINAL_BATCH = 200_000   # configurations per evaluate call


def _marginal_density(psi, i, x, t, lo, hi, nodes):
    """Density of particle ``i`` at each row of ``x`` (shape ``(M, d)``)."""
    n, d = psi.n, psi.d
    if n == 1:
        q = x[:, None, :]
        return np.abs(psi.evaluate(q, t)) ** 2
    others = [j for j in range(n) if j != i]
    grid, wts = _gauss_legendre_box(np.tile(lo, n - 1), np.tile(hi, n - 1), nodes)
    rest = grid.reshape(len(grid), n - 1, d)
    out = np.empty(len(x))
    chunk = max(1, _MARGINAL_BATCH // len(grid))
    for start in range(0, len(x), chunk):
        xs = x[start:start + chunk]
        q = np.empty((len(xs), len(grid), n, d))
        q[:, :, i, :] = xs[:, None, :]
        q[:, :, others, :] = rest[None]
        dens = np.abs(psi.evaluate(q.reshape(-1, n, d), t)) ** 2
        out[start:start + len(xs)] = dens.reshape(len(xs), len(grid)) @ wts
    return out


def mass_density(psi, x, t=0.0, params: ModelParams | None = None, tol: float = 1e-8,
                 nodes: int = 48, max_nodes: int = 192, return_error: bool = False):
    """``m(x, t) = sum_i m_i * (marginal density of particle i at x)``.

    Marginals are integrated over the remaining ``(N-1) d`` coordinates by
    tensor Gauss-Legendre quadrature on a box covering the packets; the node
    count doubles until successive estimates agree to ``tol`` (absolute, in
    mass per volume).  ``x`` may be one point ``(d,)`` or several ``(M, d)``.
    """
    params = params or psi.default_params()
    if params.n != psi.n or params.d != psi.d:
        raise ValueError("model parameters do not match the wave function")
    if (psi.n - 1) * psi.d > 3:
        raise ValueError("marginal quadrature is limited to (N-1)*d <= 3 integration dimensions")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[-1] != psi.d:
        raise ValueError(f"points must have {psi.d} coordinates")
    lo, hi = psi.support(t, nwidths=10.0)
    estimate, err = None, np.inf
    k = nodes
    while True:
        current = sum(m * _marginal_density(psi, i, x, t, lo, hi, k) for i, m in enumerate(params.masses))
        if estimate is not None:
            err = float(np.max(np.abs(current - estimate)))
            if err <= tol:
                break
        estimate = current
        if 2 * k > max_nodes:
            raise QuadratureError(f"mass density did not converge to {tol} (last change {err:.2e})",
                                  estimate=current, error=err)
        k *= 2
    value = current[0] if scalar else current
    return (value, err) if return_error else value
