"""Driven Hamiltonians, their time discretization and Heisenberg-picture power operators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import ConfigError, DomainError, ShapeError
from .operators import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    TOL,
    HermitianOperator,
    SpectralDecomposition,
    UnitaryOperator,
    heisenberg_transform,
    max_norm,
    spectral_decompose,
    unitary_step,
)

__all__ = [
    "Schedule",
    "QubitDrive",
    "LinearRamp",
    "FixedBasis",
    "Tabulated",
    "ProtocolSpec",
    "TrajectoryAlphabet",
    "DiscretizedProtocol",
    "discretize",
    "qubit_drive_unitary",
    "qubit_drive_hamiltonian",
    "qubit_drive_power_heisenberg",
]


# --------------------------------------------------------------------------
# scalar schedules


@dataclass(frozen=True)
class Schedule:
    """Scalar function of time on [0, tau].

    ``linear`` and ``cosine`` interpolate from ``start`` to ``end``; ``sampled``
    interpolates ``samples`` (equally spaced over [0, tau]) linearly and uses
    central differences of the samples for the rate, so it is only approximate.
    """

    kind: str = "linear"
    start: float = 0.0
    end: float = 1.0
    samples: tuple = ()

    def __post_init__(self):
        if self.kind not in ("linear", "cosine", "sampled", "constant"):
            raise ConfigError(f"unknown schedule kind {self.kind!r}", key="schedule")
        if self.kind == "sampled":
            s = np.asarray(self.samples, dtype=float)
            if s.ndim != 1 or s.size < 2:
                raise ConfigError("sampled schedule needs at least two samples", key="samples")
            if not np.all(np.isfinite(s)):
                raise ConfigError("sampled schedule is not differentiable (non-finite samples)", key="samples")

    def value(self, t: float, tau: float) -> float:
        if self.kind == "constant":
            return self.start
        if self.kind == "linear":
            return self.start + (self.end - self.start) * t / tau
        if self.kind == "cosine":
            return self.start + (self.end - self.start) * (1 - math.cos(math.pi * t / tau)) / 2
        s = np.asarray(self.samples, dtype=float)
        grid = np.linspace(0.0, tau, s.size)
        return float(np.interp(t, grid, s))

    def rate(self, t: float, tau: float) -> float:
        if self.kind == "constant":
            return 0.0
        if self.kind == "linear":
            return (self.end - self.start) / tau
        if self.kind == "cosine":
            return (self.end - self.start) * math.pi / (2 * tau) * math.sin(math.pi * t / tau)
        s = np.asarray(self.samples, dtype=float)
        grid = np.linspace(0.0, tau, s.size)
        return float(np.interp(t, grid, np.gradient(s, grid)))

    def integral(self, t: float, tau: float) -> float:
        """Integral of the schedule from 0 to t."""
        if self.kind == "constant":
            return self.start * t
        if self.kind == "linear":
            return self.start * t + (self.end - self.start) * t * t / (2 * tau)
        if self.kind == "cosine":
            a, b = self.start, self.end
            return a * t + (b - a) / 2 * (t - tau / math.pi * math.sin(math.pi * t / tau))
        s = np.asarray(self.samples, dtype=float)
        grid = np.linspace(0.0, tau, s.size)
        pts = grid[(grid > 0) & (grid < t)]
        val, _ = integrate.quad(lambda u: self.value(u, tau), 0.0, t, points=pts if pts.size else None, limit=200)
        return val


# --------------------------------------------------------------------------
# protocol variants


def qubit_drive_hamiltonian(omega: float, g: float, t: float) -> np.ndarray:
    return omega / 2 * PAULI_Z + g / 2 * (math.cos(omega * t) * PAULI_X + math.sin(omega * t) * PAULI_Y)


def qubit_drive_unitary(omega: float, g: float, t: float) -> UnitaryOperator:
    """Closed-form propagator exp(-i omega t sz/2) exp(-i g t sx/2) of the oscillating-field qubit."""
    a, b = omega * t / 2, g * t / 2
    rz = np.diag([np.exp(-1j * a), np.exp(1j * a)])
    rx = np.array([[math.cos(b), -1j * math.sin(b)], [-1j * math.sin(b), math.cos(b)]])
    return UnitaryOperator(rz @ rx)


def qubit_drive_power_heisenberg(omega: float, g: float, t: float) -> np.ndarray:
    """Heisenberg-picture power operator (g omega/2)(cos(gt) sy - sin(gt) sz)."""
    return g * omega / 2 * (math.cos(g * t) * PAULI_Y - math.sin(g * t) * PAULI_Z)


@dataclass(frozen=True)
class QubitDrive:
    omega: float
    g: float
    tau: float

    def __post_init__(self):
        if not (self.omega > 0 and self.g > 0):
            raise ConfigError("QubitDrive needs omega > 0 and g > 0", key="omega" if self.omega <= 0 else "g")
        if not self.tau > 0:
            raise ConfigError("tau must be positive", key="tau")

    dim = 2

    @classmethod
    def quarter_period_grid(cls, omega: float, g: float, K: int) -> "QubitDrive":
        """Duration chosen so that the step is pi/(2g) for K steps."""
        return cls(omega=omega, g=g, tau=K * math.pi / (2 * g))

    def hamiltonian(self, t: float) -> np.ndarray:
        return qubit_drive_hamiltonian(self.omega, self.g, t)

    def power(self, t: float) -> np.ndarray:
        w, g = self.omega, self.g
        return g * w / 2 * (-math.sin(w * t) * PAULI_X + math.cos(w * t) * PAULI_Y)

    def exact_unitary(self, t: float) -> UnitaryOperator:
        return qubit_drive_unitary(self.omega, self.g, t)

    def work_quantum(self, dt: float) -> float:
        # power eigenvalues are +-g*omega/2 at every time
        return self.g * self.omega * dt / 2


@dataclass(frozen=True)
class LinearRamp:
    """H(t) = A + lambda(t) B."""

    a: HermitianOperator
    b: HermitianOperator
    schedule: Schedule
    tau: float

    def __post_init__(self):
        if self.a.dim != self.b.dim:
            raise ConfigError("A and B must have equal dimension", key="B")
        if not self.tau > 0:
            raise ConfigError("tau must be positive", key="tau")

    @property
    def dim(self) -> int:
        return self.a.dim

    def hamiltonian(self, t: float) -> np.ndarray:
        return self.a.matrix + self.schedule.value(t, self.tau) * self.b.matrix

    def power(self, t: float) -> np.ndarray:
        return self.schedule.rate(t, self.tau) * self.b.matrix

    exact_unitary = None

    def work_quantum(self, dt: float):
        return None


@dataclass(frozen=True)
class FixedBasis:
    """H(t) = sum_n E_n(t) Pi_n with time-independent projectors Pi_n."""

    projectors: tuple
    tracks: tuple
    tau: float

    def __post_init__(self):
        if len(self.projectors) != len(self.tracks) or not self.projectors:
            raise ConfigError("need one energy track per projector", key="tracks")
        ps = [np.asarray(p, dtype=complex) for p in self.projectors]
        d = ps[0].shape[0]
        if max_norm(sum(ps) - np.eye(d)) > TOL.spectral:
            raise ConfigError("projectors are not complete", key="basis")
        for n, p in enumerate(ps):
            for m, q in enumerate(ps):
                target = p if n == m else 0.0
                if max_norm(p @ q - target) > TOL.spectral:
                    raise ConfigError("projectors are not orthogonal idempotents", key="basis")
        if not self.tau > 0:
            raise ConfigError("tau must be positive", key="tau")
        object.__setattr__(self, "projectors", tuple(ps))

    @classmethod
    def from_basis(cls, basis, tracks: Sequence[Schedule], tau: float) -> "FixedBasis":
        """Rank-1 projectors onto the columns of the unitary ``basis``."""
        u = np.asarray(basis, dtype=complex)
        return cls(tuple(np.outer(u[:, k], u[:, k].conj()) for k in range(u.shape[1])), tuple(tracks), tau)

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    def energies(self, t: float) -> np.ndarray:
        return np.array([s.value(t, self.tau) for s in self.tracks])

    def hamiltonian(self, t: float) -> np.ndarray:
        return sum(e * p for e, p in zip(self.energies(t), self.projectors))

    def power(self, t: float) -> np.ndarray:
        return sum(s.rate(t, self.tau) * p for s, p in zip(self.tracks, self.projectors))

    def exact_unitary(self, t: float) -> UnitaryOperator:
        phases = [s.integral(t, self.tau) for s in self.tracks]
        return UnitaryOperator(sum(np.exp(-1j * ph) * p for ph, p in zip(phases, self.projectors)))

    def work_quantum(self, dt: float):
        return None


@dataclass(frozen=True)
class Tabulated:
    """Explicit list of K+1 Hamiltonians on the grid t_j = j tau / K."""

    hamiltonians: tuple
    tau: float

    def __post_init__(self):
        hs = tuple(h if isinstance(h, HermitianOperator) else HermitianOperator(h) for h in self.hamiltonians)
        if len(hs) < 2:
            raise ConfigError("Tabulated protocol needs at least two Hamiltonians", key="H0")
        if len({h.dim for h in hs}) != 1:
            raise ConfigError("Tabulated Hamiltonians differ in dimension", key="H")
        if not self.tau > 0:
            raise ConfigError("tau must be positive", key="tau")
        object.__setattr__(self, "hamiltonians", hs)

    @property
    def dim(self) -> int:
        return self.hamiltonians[0].dim

    exact_unitary = None

    def work_quantum(self, dt: float):
        return None


ProtocolSpec = QubitDrive | LinearRamp | FixedBasis | Tabulated


# --------------------------------------------------------------------------
# discretization


@dataclass(frozen=True, eq=False)
class TrajectoryAlphabet:
    """Projector resolutions available at each of the K+1 time slots.

    ``overlaps[j][m, n] = <j+1, m | j, n>`` is filled when every slot is rank-1.
    ``values[j]`` are the power eigenvalues; slot K carries them too but they
    never enter a work value.
    """

    values: tuple
    projectors: tuple
    vectors: tuple
    dt: float
    rank_one: bool
    overlaps: tuple = ()

    @property
    def K(self) -> int:
        return len(self.values) - 1

    @property
    def counts(self) -> tuple:
        return tuple(len(v) for v in self.values)

    @property
    def total(self) -> int:
        return math.prod(self.counts)

    @property
    def dim(self) -> int:
        return self.projectors[0][0].shape[0]

    @classmethod
    def build(cls, slots: Sequence[tuple], dt: float) -> "TrajectoryAlphabet":
        """``slots``: per time slot a (values, projectors, vectors-or-None) triple."""
        values = tuple(np.asarray(v, dtype=float) for v, _, _ in slots)
        projectors = tuple(tuple(p) for _, p, _ in slots)
        vectors = tuple(tuple(vs) if vs is not None else None for _, _, vs in slots)
        rank_one = all(vs is not None and all(v is not None for v in vs) for vs in vectors)
        overlaps = ()
        if rank_one:
            overlaps = tuple(
                np.array([[np.vdot(a, b) for b in vectors[j]] for a in vectors[j + 1]])
                for j in range(len(vectors) - 1)
            )
        return cls(values, projectors, vectors, float(dt), rank_one, overlaps)


@dataclass(frozen=True, eq=False)
class DiscretizedProtocol:
    spec: object
    K: int
    dt: float
    times: np.ndarray
    schrodinger_H: tuple
    propagators: tuple
    heisenberg_H: tuple
    heisenberg_power: tuple
    spectra: tuple
    alphabet: TrajectoryAlphabet
    backend: str
    work_quantum: float | None = None
    options: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.schrodinger_H[0].dim

    @property
    def tau(self) -> float:
        return self.K * self.dt

    @property
    def h_initial(self) -> HermitianOperator:
        return self.heisenberg_H[0]

    @property
    def h_final_heisenberg(self) -> HermitianOperator:
        return self.heisenberg_H[-1]

    @property
    def h_final_schrodinger(self) -> HermitianOperator:
        return self.schrodinger_H[-1]

    @property
    def is_fixed_basis(self) -> bool:
        return isinstance(self.spec, FixedBasis)

    def rediscretize(self, K: int) -> "DiscretizedProtocol":
        """Same continuous protocol and options on a different grid."""
        if isinstance(self.spec, Tabulated):
            raise DomainError("a tabulated protocol has no continuous form to rediscretize")
        return discretize(self.spec, K, backend=self.backend, **self.options)


def _magnus4_step(spec, t0: float, h: float) -> np.ndarray:
    c = math.sqrt(3) / 6
    h1 = spec.hamiltonian(t0 + (0.5 - c) * h)
    h2 = spec.hamiltonian(t0 + (0.5 + c) * h)
    # exp(-i G) with G = h/2 (H1 + H2) - i (sqrt3 h^2 / 12) [H2, H1]
    g = h / 2 * (h1 + h2) - 1j * math.sqrt(3) * h * h / 12 * (h2 @ h1 - h1 @ h2)
    return unitary_step(HermitianOperator(g, tol=1e-8), 1.0).matrix


def _integrated_unitaries(spec, times: np.ndarray, min_substeps: int = 2048) -> list:
    """Fourth-order Magnus propagators on a fine sub-grid, sampled at ``times``."""
    tau = times[-1]
    out = [np.eye(spec.dim, dtype=complex)]
    for t0, t1 in zip(times[:-1], times[1:]):
        n = max(4, math.ceil(min_substeps * (t1 - t0) / tau))
        h = (t1 - t0) / n
        u = out[-1]
        for k in range(n):
            u = _magnus4_step(spec, t0 + k * h, h) @ u
        out.append(u)
    return [UnitaryOperator(u, tol=1e-9) for u in out]


def _decompose(x: HermitianOperator, strict: bool) -> SpectralDecomposition:
    return spectral_decompose(x, strict=strict)


def discretize(
    spec,
    K: int,
    backend: str | None = None,
    midpoint: bool = False,
    strict_degeneracy: bool = False,
    fixed_basis_power: str = "difference",
) -> DiscretizedProtocol:
    """Discretize ``spec`` onto K steps of length tau/K.

    backend:
        ``"exact"`` uses closed-form propagators (QubitDrive, FixedBasis) or a
        fine fourth-order Magnus integration (LinearRamp); ``"stepped"`` uses
        the first-order product V_j = exp(-i H_j dt) V_{j-1}. Default: exact
        when the variant supports it.
    midpoint:
        sample the power source at t_j + dt/2 instead of t_j.
    fixed_basis_power:
        ``"difference"`` assigns (E_n(t_{j+1}) - E_n(t_j))/dt to level n at step
        j, which makes the endpoint/level-hop split of work exact at any K;
        ``"derivative"`` uses dE_n/dt at the sample time.
    """
    if not isinstance(K, (int, np.integer)) or K < 1:
        raise ConfigError(f"K must be a positive integer, got {K!r}", key="K")
    K = int(K)
    if isinstance(spec, Tabulated) and len(spec.hamiltonians) != K + 1:
        raise ConfigError(
            f"Tabulated protocol has {len(spec.hamiltonians)} Hamiltonians but K+1 = {K + 1}", key="K"
        )
    if backend is None:
        backend = "stepped" if isinstance(spec, Tabulated) else "exact"
    if backend not in ("exact", "stepped"):
        raise ConfigError(f"unknown backend {backend!r}", key="backend")
    if backend == "exact" and isinstance(spec, Tabulated):
        raise ConfigError("Tabulated protocols only support the stepped backend", key="backend")
    if fixed_basis_power not in ("difference", "derivative"):
        raise ConfigError(f"unknown fixed_basis_power {fixed_basis_power!r}")

    dt = spec.tau / K
    times = np.arange(K + 1) * dt
    shift = dt / 2 if midpoint else 0.0

    if isinstance(spec, Tabulated):
        hs = list(spec.hamiltonians)
    else:
        hs = [HermitianOperator(spec.hamiltonian(t)) for t in times]

    # propagators at the grid points, and at shifted sample points for the power source
    if backend == "stepped":
        props = [UnitaryOperator.identity(spec.dim)]
        for j in range(1, K + 1):
            props.append(UnitaryOperator(unitary_step(hs[j], dt).matrix @ props[-1].matrix, tol=1e-9))
        sample_props = props
    elif isinstance(spec, LinearRamp):
        props = _integrated_unitaries(spec, times)
        if midpoint:
            sample_times = np.concatenate([[0.0], times + shift])
            sample_props = _integrated_unitaries(spec, sample_times)[1:]
        else:
            sample_props = props
    else:
        props = [spec.exact_unitary(t) for t in times]
        sample_props = [spec.exact_unitary(t + shift) for t in times] if midpoint else props

    heis_h = [HermitianOperator(hs[0].matrix)] + [heisenberg_transform(h, v) for h, v in zip(hs[1:], props[1:])]

    # power source in the Schrodinger picture at slots 0..K
    if isinstance(spec, Tabulated):
        src = [(hs[j + 1].matrix - hs[j].matrix) / dt for j in range(K)]
        src.append((hs[K].matrix - hs[K - 1].matrix) / dt)
    elif isinstance(spec, FixedBasis) and fixed_basis_power == "difference":
        energies = [spec.energies(t) for t in np.arange(K + 2) * dt]
        rates = [(energies[j + 1] - energies[j]) / dt for j in range(K + 1)]
        src = [sum(x * p for x, p in zip(r, spec.projectors)) for r in rates]
    else:
        src = [spec.power(t + shift) for t in times]

    powers = [heisenberg_transform(HermitianOperator(s, tol=1e-8), v) for s, v in zip(src, sample_props)]

    if isinstance(spec, FixedBasis):
        # the fixed projectors are the trajectory alphabet; levels keep their labels
        vecs = []
        for p in spec.projectors:
            vals, vv = np.linalg.eigh(p)
            vecs.append(vv[:, -1].copy() if round(np.trace(p).real) == 1 else None)
        slots = []
        for x in powers:
            xs = [float(np.real(np.trace(x.matrix @ p)) / np.trace(p).real) for p in spec.projectors]
            slots.append((xs, spec.projectors, vecs))
        spectra = tuple(
            SpectralDecomposition(
                eigenvalues=np.array(s[0]),
                projectors=tuple(spec.projectors),
                ranks=tuple(int(round(np.trace(p).real)) for p in spec.projectors),
                vectors=tuple(vecs),
            )
            for s in slots
        )
    else:
        spectra = tuple(_decompose(x, strict_degeneracy) for x in powers)
        slots = [(s.eigenvalues, s.projectors, s.vectors) for s in spectra]

    alphabet = TrajectoryAlphabet.build(slots, dt)
    quantum = spec.work_quantum(dt) if hasattr(spec, "work_quantum") else None
    options = {"midpoint": midpoint, "strict_degeneracy": strict_degeneracy, "fixed_basis_power": fixed_basis_power}
    return DiscretizedProtocol(
        spec=spec,
        K=K,
        dt=dt,
        times=times,
        schrodinger_H=tuple(hs),
        propagators=tuple(props),
        heisenberg_H=tuple(heis_h),
        heisenberg_power=tuple(powers[:K]),
        spectra=spectra,
        alphabet=alphabet,
        backend=backend,
        work_quantum=quantum,
        options=options,
    )


def check_shapes(proto: DiscretizedProtocol, rho) -> None:
    d = getattr(rho, "dim", None) or np.asarray(rho).shape[0]
    if d != proto.dim:
        raise ShapeError(f"state has dimension {d}, protocol has {proto.dim}")
