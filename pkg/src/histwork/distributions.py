"""Work distributions, their moments and the fluctuation-relation diagnostics.

Four distributions are built for a discretized protocol and an initial state:

``histories``      real part of trajectory amplitudes Tr[C rho] (quasi-probability)
``measured``       Tr[C^dagger C rho], power measured at every step (probability)
``tpm``            two projective energy measurements (probability)
``margenau_hill``  symmetrized two-time energy joint (quasi-probability)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import DomainError, NumericalError
from .operators import (
    TOL,
    commutator,
    hermitian_function,
    log_partition_function,
    max_norm,
    spectral_decompose,
    thermal_state,
)
from .protocol import DiscretizedProtocol, LinearRamp, Tabulated, discretize
from .trajectories import (
    EnumerationGuard,
    TrajectoryTable,
    merged_table,
    trajectory_table,
)

__all__ = [
    "WorkDistribution",
    "work_operator",
    "internal_energy_change",
    "hamiltonians_commute",
    "jarzynski_terms",
    "default_bin_tol",
    "bin_work",
    "trajectory_weights",
    "histories_distribution",
    "measured_distribution",
    "path_distributions",
    "tpm_distribution",
    "tpm_backward_distribution",
    "mh_distribution",
    "mh_backward_distribution",
    "cumulative",
    "moment",
    "closed_form_moment",
    "mh_closed_form_moment",
    "finite_k_moment",
    "richardson",
    "continuum_moment",
    "mgf",
    "mgf_series",
    "JarzynskiReport",
    "jarzynski_report",
    "max_bin_gap",
    "total_variation",
    "zeno_limit_distribution",
    "TimeReversalReport",
    "time_reversal_check",
    "DistributionRow",
    "ComparisonReport",
    "comparison_report",
    "MomentReport",
    "moment_report",
]

KINDS = ("quasi", "probability")
ORIGINS = ("histories", "measured", "tpm", "margenau_hill", "zeno_limit")

# largest trajectory count enumerated one by one when method="auto"
AUTO_ENUMERATION_MAX = 2**17


def default_bin_tol(values) -> float:
    v = np.asarray(values, dtype=float)
    scale = float(np.max(np.abs(v))) if v.size else 0.0
    return max(1e-9 * scale, 1e-12)


def bin_work(values, weights, bin_tol: float, quantum: float | None = None):
    """Cluster sorted work values whose neighbours are closer than ``bin_tol``.

    A bin is represented by its smallest member, snapped to ``quantum * k`` when
    the protocol exposes a work lattice.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.size == 0:
        return values, weights
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order]
    starts = np.flatnonzero(np.concatenate([[True], np.diff(v) > bin_tol]))
    reps = v[starts]
    if quantum:
        reps = quantum * np.round(reps / quantum)
    return reps, np.add.reduceat(w, starts)


@dataclass(frozen=True, eq=False)
class WorkDistribution:
    """Weights on an ascending, binned support of work values."""

    values: np.ndarray
    weights: np.ndarray
    kind: str
    origin: str
    bin_tol: float
    quantum: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.origin not in ORIGINS:
            raise ValueError(f"origin must be one of {ORIGINS}")
        v = np.asarray(self.values, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if v.shape != w.shape or v.ndim != 1:
            raise ValueError("values and weights must be 1-d arrays of equal length")
        if v.size > 1 and np.min(np.diff(v)) <= self.bin_tol:
            raise ValueError("support must be strictly ascending with gaps larger than bin_tol")
        total = float(np.sum(w))
        if abs(total - 1.0) > TOL.normalization:
            raise NumericalError(f"{self.origin} distribution sums to {total!r}")
        if self.kind == "probability":
            if v.size and w.min() < -TOL.clamp:
                raise NumericalError(f"probability distribution has weight {w.min():.3e}")
            w = np.maximum(w, 0.0)
        v.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_samples(cls, values, weights, kind, origin, bin_tol=None, quantum=None) -> "WorkDistribution":
        bin_tol = default_bin_tol(values) if bin_tol is None else float(bin_tol)
        v, w = bin_work(values, weights, bin_tol, quantum)
        return cls(v, w, kind, origin, bin_tol, quantum)

    def __len__(self):
        return len(self.values)

    @property
    def support(self) -> list:
        return list(zip(self.values.tolist(), self.weights.tolist()))

    @property
    def min_weight(self) -> float:
        return float(self.weights.min())

    @property
    def mean(self) -> float:
        return self.moment(1)

    @property
    def variance(self) -> float:
        return self.moment(2) - self.moment(1) ** 2

    def moment(self, m: int) -> float:
        if m < 0:
            raise DomainError("moment order must be >= 0")
        return float(np.sum(self.weights * self.values**m))

    def exp_average(self, beta: float) -> float:
        """Sum of weight * exp(-beta w)."""
        return float(np.sum(self.weights * np.exp(-beta * self.values)))

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.weights)

    def reflected(self) -> "WorkDistribution":
        """The distribution of -w."""
        return WorkDistribution(-self.values[::-1], self.weights[::-1], self.kind, self.origin, self.bin_tol, self.quantum)

    def rebin(self, bin_tol: float | None = None) -> "WorkDistribution":
        tol = self.bin_tol if bin_tol is None else bin_tol
        return WorkDistribution.from_samples(self.values, self.weights, self.kind, self.origin, tol, self.quantum)

    def weight_at(self, w: float, tol: float | None = None) -> float:
        tol = self.bin_tol if tol is None else tol
        hit = np.abs(self.values - w) <= tol
        return float(self.weights[hit].sum())


def cumulative(dist: WorkDistribution) -> list:
    """Running sums Q(w) over the ascending support, as (w, Q) pairs."""
    return list(zip(dist.values.tolist(), dist.cumulative().tolist()))


def moment(dist: WorkDistribution, m: int) -> float:
    return dist.moment(m)


# --------------------------------------------------------------------------
# trajectory-based distributions


def trajectory_weights(
    proto: DiscretizedProtocol,
    rho,
    method: str = "auto",
    guard: EnumerationGuard | None = None,
    threads: int = 1,
) -> TrajectoryTable:
    """Weights for every trajectory (``enumerate``) or every merged work class (``merged``).

    ``auto`` enumerates up to :data:`AUTO_ENUMERATION_MAX` trajectories and
    merges beyond that.
    """
    guard = guard or EnumerationGuard()
    if method == "auto":
        method = "enumerate" if proto.alphabet.total <= min(guard.cap, AUTO_ENUMERATION_MAX) else "merged"
    if method == "enumerate":
        return trajectory_table(proto, rho, guard, threads=threads)
    if method == "merged":
        return merged_table(proto, rho, guard)
    raise ValueError(f"unknown method {method!r}")


def _from_table(table, proto, which: str, bin_tol, kind, origin, reverse=False):
    col = getattr(table, which)
    work = -table.work if reverse else table.work
    return WorkDistribution.from_samples(work, col, kind, origin, bin_tol, proto.work_quantum)


def path_distributions(
    proto: DiscretizedProtocol,
    rho,
    bin_tol: float | None = None,
    method: str = "auto",
    guard: EnumerationGuard | None = None,
    threads: int = 1,
) -> dict:
    """Forward and backward histories and measured distributions from one traversal.

    Also returns ``measured_commutator``: per bin at -w the sum of
    Tr[[C, C^dagger] rho], i.e. the amount by which the backward measured
    distribution deviates from the reflected forward one.
    """
    t = trajectory_weights(proto, rho, method, guard, threads)
    if bin_tol is None:
        bin_tol = default_bin_tol(t.work)
    comm_v, comm_w = bin_work(-t.work, t.reverse_measured - t.measured, bin_tol, proto.work_quantum)
    return {
        "histories": _from_table(t, proto, "linear", bin_tol, "quasi", "histories"),
        "histories_back": _from_table(t, proto, "reverse_linear", bin_tol, "quasi", "histories", reverse=True),
        "measured": _from_table(t, proto, "measured", bin_tol, "probability", "measured"),
        "measured_back": _from_table(t, proto, "reverse_measured", bin_tol, "probability", "measured", reverse=True),
        "measured_commutator": (comm_v, comm_w),
        "table": t,
    }


def histories_distribution(proto, rho, bin_tol=None, method="auto", guard=None, threads=1) -> WorkDistribution:
    """Histories work quasi-probability: trajectory linear weights binned by work."""
    t = trajectory_weights(proto, rho, method, guard, threads)
    return _from_table(t, proto, "linear", bin_tol, "quasi", "histories")


def measured_distribution(proto, rho, bin_tol=None, method="auto", guard=None, threads=1) -> WorkDistribution:
    """Work probability when the power operator is projectively measured at every step."""
    t = trajectory_weights(proto, rho, method, guard, threads)
    return _from_table(t, proto, "measured", bin_tol, "probability", "measured")


# --------------------------------------------------------------------------
# two-time energy distributions


def _energy_pairs(proto: DiscretizedProtocol):
    s0 = spectral_decompose(proto.h_initial)
    st = spectral_decompose(proto.h_final_heisenberg)
    return s0, st


def _rho(rho) -> np.ndarray:
    return np.asarray(getattr(rho, "matrix", rho), dtype=complex)


def _two_time(proto, rho, joint, bin_tol, kind, origin, reverse):
    r = _rho(rho)
    s0, st = _energy_pairs(proto)
    ws, ps = [], []
    for e0, p0 in zip(s0.eigenvalues, s0.projectors):
        for et, pt in zip(st.eigenvalues, st.projectors):
            ws.append(et - e0)
            ps.append(joint(p0, pt, r))
    ws = np.array(ws)
    if reverse:
        ws = -ws
    return WorkDistribution.from_samples(ws, ps, kind, origin, bin_tol)


def _tpm_forward(p0, pt, r):
    a = pt @ p0
    return float(np.trace(a @ r @ a.conj().T).real)


def _tpm_backward(p0, pt, r):
    a = p0 @ pt
    return float(np.trace(a @ r @ a.conj().T).real)


def _mh_forward(p0, pt, r):
    return float(np.trace(pt @ p0 @ r).real)


def _mh_backward(p0, pt, r):
    return float(np.trace(p0 @ pt @ r).real)


def tpm_distribution(proto, rho, bin_tol=None) -> WorkDistribution:
    """Two-point measurement: joint Tr[Pi_m(tau) Pi_n(0) rho Pi_n(0) Pi_m(tau)] at w = e_m(tau) - e_n(0)."""
    return _two_time(proto, rho, _tpm_forward, bin_tol, "probability", "tpm", False)


def tpm_backward_distribution(proto, rho, bin_tol=None) -> WorkDistribution:
    """Reversed measurement order, binned at -w."""
    return _two_time(proto, rho, _tpm_backward, bin_tol, "probability", "tpm", True)


def mh_distribution(proto, rho, bin_tol=None) -> WorkDistribution:
    """Margenau-Hill quasi-probability (1/2) Tr[{Pi_m(tau), Pi_n(0)} rho]."""
    return _two_time(proto, rho, _mh_forward, bin_tol, "quasi", "margenau_hill", False)


def mh_backward_distribution(proto, rho, bin_tol=None) -> WorkDistribution:
    return _two_time(proto, rho, _mh_backward, bin_tol, "quasi", "margenau_hill", True)


# --------------------------------------------------------------------------
# closed forms


def work_operator(proto: DiscretizedProtocol) -> np.ndarray:
    """H_H(tau) - H(0)."""
    return proto.h_final_heisenberg.matrix - proto.h_initial.matrix


def internal_energy_change(proto: DiscretizedProtocol, rho) -> float:
    return float(np.trace(work_operator(proto) @ _rho(rho)).real)


def closed_form_moment(proto: DiscretizedProtocol, rho, m: int) -> float:
    """Tr[(H_H(tau) - H(0))^m rho], the continuum moments of the histories distribution."""
    if m < 0:
        raise DomainError("moment order must be >= 0")
    w = work_operator(proto)
    return float(np.trace(np.linalg.matrix_power(w, m) @ _rho(rho)).real)


def mh_closed_form_moment(proto: DiscretizedProtocol, rho, m: int) -> float:
    """(1/2) sum_l C(m,l) Tr[{H_H(tau)^l, (-H(0))^(m-l)} rho]."""
    if m < 0:
        raise DomainError("moment order must be >= 0")
    a = proto.h_final_heisenberg.matrix
    b = -proto.h_initial.matrix
    r = _rho(rho)
    total = 0.0
    for l in range(m + 1):
        al = np.linalg.matrix_power(a, l)
        bl = np.linalg.matrix_power(b, m - l)
        total += comb(m, l) * np.trace((al @ bl + bl @ al) @ r).real
    return float(total / 2)


def finite_k_moment(proto: DiscretizedProtocol, rho, m: int) -> float:
    """Exact moments of the histories distribution at the protocol's own K, for m <= 2.

    m = 1: dt sum_j Tr[X_j rho]; m = 2: dt^2 sum_{i,j} Tr[X_i X_j rho].
    """
    r = _rho(rho)
    s = proto.dt * sum(x.matrix for x in proto.heisenberg_power)
    if m == 0:
        return float(np.trace(r).real)
    if m == 1:
        return float(np.trace(s @ r).real)
    if m == 2:
        return float(np.trace(s @ s @ r).real)
    raise DomainError("finite-K operator moments are available for m <= 2")


def richardson(values, ks, powers=None) -> float:
    """Limit K -> infinity of samples f(K) = L + sum_p c_p K^-p.

    ``powers`` lists the exponents present in the error expansion; the default
    is 1, 2, ..., n-1 for n samples. Midpoint-sampled protocols only carry
    even powers.
    """
    values = np.asarray(values, dtype=float)
    h = 1.0 / np.asarray(ks, dtype=float)
    if powers is None:
        powers = range(1, len(values))
    powers = [0, *powers]
    if len(powers) != len(values):
        raise ValueError("need exactly one sample per unknown coefficient")
    a = np.column_stack([h**p for p in powers])
    return float(np.linalg.solve(a, values)[0])


def continuum_moment(proto: DiscretizedProtocol, rho, m: int, ks=(2, 4, 8, 16), method="auto", guard=None) -> float:
    """Histories moment extrapolated to dt -> 0 from midpoint-sampled grids.

    Each grid's moment is taken from the distribution itself; the midpoint rule
    leaves only even powers of dt in the error, which Richardson removes.
    """
    if isinstance(proto.spec, Tabulated):
        raise DomainError("a tabulated protocol has no continuum limit")
    opts = dict(proto.options, midpoint=True)
    vals = []
    for k in ks:
        pk = discretize(proto.spec, k, backend=proto.backend, **opts)
        vals.append(histories_distribution(pk, rho, method=method, guard=guard).moment(m))
    return richardson(vals, ks, powers=range(2, 2 * len(ks), 2))


def mgf(proto: DiscretizedProtocol, rho, lam: complex) -> complex:
    """Tr[exp(i lam (H_H(tau) - H(0))) rho]; lam = i beta gives <exp(-beta w)>."""
    w = work_operator(proto)
    e = hermitian_function(w, lambda x: np.exp(1j * lam * x))
    return complex(np.trace(e @ _rho(rho)))


def mgf_series(proto: DiscretizedProtocol, rho, lam: complex, order: int = 6) -> complex:
    return complex(
        sum((1j * lam) ** m * closed_form_moment(proto, rho, m) / math.factorial(m) for m in range(order + 1))
    )


# --------------------------------------------------------------------------
# Jarzynski


@dataclass(frozen=True)
class JarzynskiReport:
    beta: float
    lhs: float
    lhs_closed_form: float
    rhs: float
    delta_f: float
    gap: float
    commuting_flag: bool
    thermal: bool
    origin: str

    @property
    def discretization_gap(self) -> float:
        return self.lhs - self.lhs_closed_form


def hamiltonians_commute(proto: DiscretizedProtocol, tol: float | None = None) -> bool:
    tol = TOL.commuting if tol is None else tol
    return max_norm(commutator(proto.h_final_heisenberg, proto.h_initial)) <= tol


def is_thermal(proto: DiscretizedProtocol, rho, beta: float, tol: float = 1e-10) -> bool:
    return max_norm(_rho(rho) - thermal_state(proto.h_initial, beta).matrix) <= tol


def jarzynski_terms(proto: DiscretizedProtocol, beta: float) -> tuple:
    """(Z_tau / Z_0, delta F); delta F is nan at beta = 0."""
    log_ratio = log_partition_function(proto.h_final_schrodinger, beta) - log_partition_function(proto.h_initial, beta)
    delta_f = -log_ratio / beta if beta > 0 else float("nan")
    return float(np.exp(log_ratio)), delta_f


def jarzynski_report(proto: DiscretizedProtocol, rho, beta: float, dist: WorkDistribution | None = None) -> JarzynskiReport:
    """Compare <exp(-beta w)> with exp(-beta delta F) = Z_tau / Z_0.

    Without ``dist`` the left side is the continuum histories closed form
    Tr[exp(-beta (H_H(tau) - H(0))) rho]; with it, the distribution average.
    """
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    rhs, delta_f = jarzynski_terms(proto, beta)
    closed = mgf(proto, rho, 1j * beta).real
    lhs = dist.exp_average(beta) if dist is not None else closed
    return JarzynskiReport(
        beta=float(beta),
        lhs=float(lhs),
        lhs_closed_form=float(closed),
        rhs=rhs,
        delta_f=delta_f,
        gap=float(lhs - rhs),
        commuting_flag=hamiltonians_commute(proto),
        thermal=is_thermal(proto, rho, beta),
        origin=dist.origin if dist is not None else "histories",
    )


# --------------------------------------------------------------------------
# comparisons between distributions


def _signed_bins(p: WorkDistribution, q: WorkDistribution, tol: float | None):
    tol = max(p.bin_tol, q.bin_tol) if tol is None else tol
    v = np.concatenate([p.values, q.values])
    w = np.concatenate([p.weights, -q.weights])
    return bin_work(v, w, tol)


def max_bin_gap(p: WorkDistribution, q: WorkDistribution, tol: float | None = None) -> float:
    """max_w |p(w) - q(w)| after aligning both supports within ``tol``."""
    _, diff = _signed_bins(p, q, tol)
    return float(np.max(np.abs(diff))) if diff.size else 0.0


def total_variation(p: WorkDistribution, q: WorkDistribution, tol: float | None = None) -> float:
    _, diff = _signed_bins(p, q, tol)
    return float(0.5 * np.sum(np.abs(diff)))


def zeno_limit_distribution(proto: DiscretizedProtocol, rho, bin_tol=None) -> WorkDistribution:
    """Frequent-measurement limit for H = A + lambda(t) B: weight Tr[P_n(0) rho] at (lambda(tau) - lambda(0)) b_n."""
    spec = proto.spec
    if not isinstance(spec, LinearRamp):
        raise DomainError("the Zeno limit is defined for A + lambda(t) B protocols")
    sd = spectral_decompose(spec.b)
    dl = spec.schedule.value(spec.tau, spec.tau) - spec.schedule.value(0.0, spec.tau)
    r = _rho(rho)
    ws = dl * sd.eigenvalues
    ps = [float(np.trace(p @ r).real) for p in sd.projectors]
    return WorkDistribution.from_samples(ws, ps, "probability", "zeno_limit", bin_tol)


@dataclass(frozen=True)
class TimeReversalReport:
    histories: float
    measured: float
    tpm: float
    margenau_hill: float
    measured_commutator: tuple
    # max_w |p~_back(w) - p~(-w) - commutator(w)|; zero up to rounding
    measured_identity_residual: float

    def as_dict(self) -> dict:
        return {
            "histories": self.histories,
            "measured": self.measured,
            "tpm": self.tpm,
            "margenau_hill": self.margenau_hill,
        }


def time_reversal_check(
    proto: DiscretizedProtocol, rho, bin_tol=None, method="auto", guard=None, threads=1, paths: dict | None = None
) -> TimeReversalReport:
    """max_w |p_back(w) - p(-w)| for each of the four distributions."""
    paths = paths or path_distributions(proto, rho, bin_tol, method, guard, threads)
    comm_v, comm_w = paths["measured_commutator"]
    reflected = paths["measured"].reflected()
    v = np.concatenate([paths["measured_back"].values, reflected.values, comm_v])
    w = np.concatenate([paths["measured_back"].weights, -reflected.weights, -comm_w])
    _, resid = bin_work(v, w, paths["measured"].bin_tol)
    return TimeReversalReport(
        histories=max_bin_gap(paths["histories_back"], paths["histories"].reflected()),
        measured=max_bin_gap(paths["measured_back"], reflected),
        tpm=max_bin_gap(tpm_backward_distribution(proto, rho, bin_tol), tpm_distribution(proto, rho, bin_tol).reflected()),
        margenau_hill=max_bin_gap(
            mh_backward_distribution(proto, rho, bin_tol), mh_distribution(proto, rho, bin_tol).reflected()
        ),
        measured_commutator=(comm_v, comm_w),
        measured_identity_residual=float(np.max(np.abs(resid))) if resid.size else 0.0,
    )


@dataclass(frozen=True)
class DistributionRow:
    name: str
    kind: str
    support_size: int
    mean: float
    variance: float
    min_weight: float
    energy_gap: float
    time_reversal_gap: float
    jarzynski_gap: float | None


@dataclass(frozen=True)
class ComparisonReport:
    K: int
    dt: float
    beta: float | None
    delta_u: float
    rows: dict
    histories_finite_k_identity_gap: float
    histories_finite_k_energy_gap: float
    histories_extrapolated_energy_gap: float | None
    jarzynski: JarzynskiReport | None
    commutators: dict
    classical_limit: bool
    coincidence_gap: float
    coincident: bool
    distributions: dict = field(default_factory=dict, repr=False)


def _extrapolated_first_moment(proto: DiscretizedProtocol, rho, levels: int = 4) -> float | None:
    if isinstance(proto.spec, Tabulated):
        return None
    ks = [proto.K * 2**i for i in range(levels)]
    vals = [finite_k_moment(proto if k == proto.K else proto.rediscretize(k), rho, 1) for k in ks]
    # left-endpoint sums: one odd term, then even powers
    powers = range(2, 2 * levels, 2) if proto.options.get("midpoint") else [1, *range(2, 2 * levels - 2, 2)]
    return richardson(vals, ks, powers)


def comparison_report(
    proto: DiscretizedProtocol,
    rho,
    beta: float | None = None,
    bin_tol=None,
    method="auto",
    guard=None,
    threads=1,
    coincidence_tol: float = 1e-9,
) -> ComparisonReport:
    """Positivity, energy conservation, time reversal and Jarzynski columns for all four distributions."""
    r = _rho(rho)
    paths = path_distributions(proto, rho, bin_tol, method, guard, threads)
    dists = {
        "histories": paths["histories"],
        "measured": paths["measured"],
        "tpm": tpm_distribution(proto, rho, bin_tol),
        "margenau_hill": mh_distribution(proto, rho, bin_tol),
    }
    tr = time_reversal_check(proto, rho, bin_tol, paths=paths).as_dict()
    du = internal_energy_change(proto, rho)
    identity_gap = abs(dists["histories"].mean - finite_k_moment(proto, rho, 1))
    finite_gap = abs(dists["histories"].mean - du)
    extrap = _extrapolated_first_moment(proto, rho)
    extrap_gap = abs(extrap - du) if extrap is not None else None

    rhs = None
    jr = None
    if beta is not None:
        rhs, _ = jarzynski_terms(proto, beta)
        if beta > 0:
            jr = jarzynski_report(proto, rho, beta)

    rows = {}
    for name, d in dists.items():
        egap = abs(d.mean - du)
        if name == "histories" and extrap_gap is not None:
            egap = extrap_gap
        rows[name] = DistributionRow(
            name=name,
            kind=d.kind,
            support_size=len(d),
            mean=d.mean,
            variance=d.variance,
            min_weight=d.min_weight,
            energy_gap=egap,
            time_reversal_gap=tr[name],
            jarzynski_gap=(d.exp_average(beta) - rhs) if beta is not None else None,
        )

    h0 = proto.h_initial.matrix
    ht = proto.h_final_heisenberg.matrix
    comms = {
        "rho_H0": max_norm(commutator(r, h0)),
        "rho_HtauH": max_norm(commutator(r, ht)),
        "H0_HtauH": max_norm(commutator(h0, ht)),
    }
    names = list(dists)
    coincidence = max(
        (max_bin_gap(dists[a], dists[b], max(coincidence_tol, dists[a].bin_tol)) for i, a in enumerate(names) for b in names[i + 1 :]),
        default=0.0,
    )
    return ComparisonReport(
        K=proto.K,
        dt=proto.dt,
        beta=beta,
        delta_u=du,
        rows=rows,
        histories_finite_k_identity_gap=identity_gap,
        histories_finite_k_energy_gap=finite_gap,
        histories_extrapolated_energy_gap=extrap_gap,
        jarzynski=jr,
        commutators=comms,
        classical_limit=all(v <= TOL.commuting for v in comms.values()),
        coincidence_gap=coincidence,
        coincident=coincidence <= coincidence_tol,
        distributions=dists,
    )


# --------------------------------------------------------------------------
# moment reports


@dataclass(frozen=True)
class MomentReport:
    origin: str
    orders: tuple
    enumerated: tuple
    closed_form: tuple
    gaps: tuple


def moment_report(dist: WorkDistribution, proto: DiscretizedProtocol, rho, max_order: int) -> MomentReport:
    """Distribution moments against the operator closed form matching ``dist.origin``.

    Histories are compared with the continuum expression, so their gaps carry
    the O(dt) discretization error; Margenau-Hill and TPM moments are exact.
    """
    orders = tuple(range(max_order + 1))
    enumerated = tuple(dist.moment(m) for m in orders)
    if dist.origin == "margenau_hill":
        closed = tuple(mh_closed_form_moment(proto, rho, m) for m in orders)
    elif dist.origin == "tpm":
        closed = tuple(_tpm_closed_moment(proto, rho, m) for m in orders)
    else:
        closed = tuple(closed_form_moment(proto, rho, m) for m in orders)
    gaps = tuple(abs(a - b) for a, b in zip(enumerated, closed))
    return MomentReport(dist.origin, orders, enumerated, closed, gaps)


def _tpm_closed_moment(proto, rho, m: int) -> float:
    # moments of H_H(tau) - H(0) evaluated on the dephased state in the H(0) eigenbasis
    r = _rho(rho)
    s0 = spectral_decompose(proto.h_initial)
    total = 0.0
    ht = proto.h_final_heisenberg.matrix
    for e0, p in zip(s0.eigenvalues, s0.projectors):
        shifted = ht - e0 * np.eye(len(ht))
        total += np.trace(np.linalg.matrix_power(shifted, m) @ p @ r @ p).real
    return float(total)
