"""Power-operator trajectories, their class-operator weights and work values.

A trajectory ``n = (n_0, ..., n_K)`` picks one projector per time slot. Its
class operator is C_n = P_K ... P_0 and four scalar weights follow from it:

* amplitude            Tr[C rho]             (linear weight = real part)
* measured weight      Tr[C^dagger C rho]
* reversed amplitude   Tr[C^dagger rho]
* reversed measured    Tr[C C^dagger rho]

Two traversals produce them for all trajectories: a depth-first walk with
prefix reuse (one record per trajectory) and a breadth-first dynamic program
that merges prefixes sharing the same current slot and accumulated work. The
second is exact because every weight above is linear in a prefix state.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import DomainError, NumericalError, ResourceError, ShapeError
from .operators import TOL
from .protocol import DiscretizedProtocol, FixedBasis, TrajectoryAlphabet

__all__ = [
    "DEFAULT_CAP",
    "EnumerationGuard",
    "TrajectoryRecord",
    "TrajectoryTable",
    "work_value",
    "class_operator",
    "amplitude",
    "linear_weight",
    "measured_weight",
    "reverse_weight",
    "reverse_measured_weight",
    "endpoint_decomposition",
    "enumerate_trajectories",
    "trajectory_table",
    "merged_table",
    "write_spill",
]

DEFAULT_CAP = 2**24


@dataclass(frozen=True)
class EnumerationGuard:
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.cap < 1:
            raise ValueError("enumeration cap must be >= 1")

    def check(self, required: int, what: str = "trajectories") -> None:
        if required > self.cap:
            raise ResourceError(
                f"{required} {what} required, cap is {self.cap}", required=required, cap=self.cap
            )


@dataclass(frozen=True)
class TrajectoryRecord:
    trajectory: tuple
    work: float
    amplitude: complex
    linear_weight: float
    measured_weight: float


@dataclass(frozen=True, eq=False)
class TrajectoryTable:
    """Column store of per-trajectory (or per merged prefix-class) weights."""

    work: np.ndarray
    amplitude: np.ndarray
    measured: np.ndarray
    reverse_amplitude: np.ndarray
    reverse_measured: np.ndarray
    indices: np.ndarray | None = None

    def __len__(self):
        return len(self.work)

    @property
    def linear(self) -> np.ndarray:
        return self.amplitude.real

    @property
    def reverse_linear(self) -> np.ndarray:
        return self.reverse_amplitude.real

    @classmethod
    def concatenate(cls, parts: Sequence["TrajectoryTable"]) -> "TrajectoryTable":
        idx = None
        if all(p.indices is not None for p in parts):
            idx = np.concatenate([p.indices for p in parts])
        return cls(
            work=np.concatenate([p.work for p in parts]),
            amplitude=np.concatenate([p.amplitude for p in parts]),
            measured=np.concatenate([p.measured for p in parts]),
            reverse_amplitude=np.concatenate([p.reverse_amplitude for p in parts]),
            reverse_measured=np.concatenate([p.reverse_measured for p in parts]),
            indices=idx,
        )


def _clamp_measured(p: float) -> float:
    if p < 0:
        if p < -TOL.clamp:
            raise NumericalError(f"measured weight {p:.3e} is negative beyond rounding")
        return 0.0
    return p


def _rho_matrix(rho, proto) -> np.ndarray:
    m = np.asarray(getattr(rho, "matrix", rho), dtype=complex)
    if m.shape != (proto.dim, proto.dim):
        raise ShapeError(f"state has shape {m.shape}, protocol dimension is {proto.dim}")
    return m


def _check_traj(traj, alphabet: TrajectoryAlphabet) -> tuple:
    traj = tuple(int(n) for n in traj)
    if len(traj) != alphabet.K + 1:
        raise ShapeError(f"trajectory has {len(traj)} indices, expected K+1 = {alphabet.K + 1}")
    for j, (n, c) in enumerate(zip(traj, alphabet.counts)):
        if not 0 <= n < c:
            raise ShapeError(f"index {n} at slot {j} outside [0, {c})")
    return traj


# --------------------------------------------------------------------------
# single-trajectory evaluations


def work_value(traj, proto: DiscretizedProtocol) -> float:
    """dt * sum_{j<K} x^{(j)}_{n_j}; the final index does not contribute."""
    a = proto.alphabet
    traj = _check_traj(traj, a)
    s = 0.0
    for j in range(a.K):
        s += a.values[j][traj[j]]
    return a.dt * s


def class_operator(traj, proto: DiscretizedProtocol) -> np.ndarray:
    """Time-ordered product P_K ... P_0 by explicit matrix multiplication."""
    a = proto.alphabet
    traj = _check_traj(traj, a)
    c = np.eye(a.dim, dtype=complex)
    for j, n in enumerate(traj):
        c = a.projectors[j][n] @ c
    return c


def _use_chain(method: str, a: TrajectoryAlphabet) -> bool:
    if method not in ("auto", "chain", "matrix"):
        raise ValueError(f"unknown method {method!r}")
    if method == "chain" and not a.rank_one:
        raise DomainError("amplitude chains need rank-1 projectors at every slot")
    return method == "chain" or (method == "auto" and a.rank_one)


def _chain(traj, a: TrajectoryAlphabet, rho_m: np.ndarray):
    """Rank-1 amplitude chain: (prod of overlaps, first vector, last vector)."""
    c = 1.0 + 0.0j
    for j in range(a.K):
        c *= a.overlaps[j][traj[j + 1], traj[j]]
    return c, a.vectors[0][traj[0]], a.vectors[a.K][traj[a.K]]


def amplitude(traj, proto: DiscretizedProtocol, rho, method: str = "auto") -> complex:
    """Tr[C rho]. ``method`` is ``chain`` (rank-1 only), ``matrix`` or ``auto``."""
    a = proto.alphabet
    traj = _check_traj(traj, a)
    r = _rho_matrix(rho, proto)
    if _use_chain(method, a):
        c, first, last = _chain(traj, a, r)
        return complex(c * np.vdot(first, r @ last))
    return complex(np.trace(class_operator(traj, proto) @ r))


def linear_weight(traj, proto: DiscretizedProtocol, rho, method: str = "auto") -> float:
    """Re Tr[C rho] = (1/2) Tr[(C + C^dagger) rho]."""
    return amplitude(traj, proto, rho, method).real


def measured_weight(traj, proto: DiscretizedProtocol, rho, method: str = "auto") -> float:
    """Tr[C^dagger C rho]; non-negative."""
    a = proto.alphabet
    traj = _check_traj(traj, a)
    r = _rho_matrix(rho, proto)
    if _use_chain(method, a):
        c, first, _ = _chain(traj, a, r)
        val = abs(c) ** 2 * np.vdot(first, r @ first).real
    else:
        cm = class_operator(traj, proto)
        val = np.trace(cm.conj().T @ cm @ r).real
    return _clamp_measured(float(val))


def reverse_weight(traj, proto: DiscretizedProtocol, rho, method: str = "auto") -> tuple:
    """Linear weight Re Tr[C^dagger rho] of the reversed history and its work -w."""
    a = proto.alphabet
    traj = _check_traj(traj, a)
    r = _rho_matrix(rho, proto)
    if _use_chain(method, a):
        c, first, last = _chain(traj, a, r)
        val = (np.conj(c) * np.vdot(last, r @ first)).real
    else:
        cm = class_operator(traj, proto)
        val = np.trace(cm.conj().T @ r).real
    return float(val), -work_value(traj, proto)


def reverse_measured_weight(traj, proto: DiscretizedProtocol, rho, method: str = "auto") -> float:
    """Tr[C C^dagger rho], the measured weight with the time order of projectors reversed."""
    a = proto.alphabet
    traj = _check_traj(traj, a)
    r = _rho_matrix(rho, proto)
    if _use_chain(method, a):
        c, _, last = _chain(traj, a, r)
        val = abs(c) ** 2 * np.vdot(last, r @ last).real
    else:
        cm = class_operator(traj, proto)
        val = np.trace(cm @ cm.conj().T @ r).real
    return _clamp_measured(float(val))


def endpoint_decomposition(traj, proto: DiscretizedProtocol) -> tuple:
    """Split the work of a fixed-basis trajectory into endpoint difference and level hops.

    Returns ``(E_{n_K}(tau) - E_{n_0}(0), dE)`` with
    ``dE = sum_j (E_{n_{j+1}}(t_{j+1}) - E_{n_j}(t_{j+1}))``, so that
    ``work = endpoint - dE`` (exactly, up to rounding, with the default
    finite-difference power eigenvalues).
    """
    if not isinstance(proto.spec, FixedBasis):
        raise DomainError("endpoint decomposition needs a fixed-basis protocol")
    a = proto.alphabet
    traj = _check_traj(traj, a)
    energies = [proto.spec.energies(t) for t in proto.times]
    endpoint = energies[a.K][traj[a.K]] - energies[0][traj[0]]
    hops = 0.0
    for j in range(a.K):
        hops += energies[j + 1][traj[j + 1]] - energies[j + 1][traj[j]]
    return float(endpoint), float(hops)


# --------------------------------------------------------------------------
# depth-first enumeration with prefix reuse


def _dfs_chain(a: TrajectoryAlphabet, rho_m: np.ndarray, roots: Sequence[int]) -> Iterator[tuple]:
    K = a.K
    dt = a.dt
    values = [v.tolist() for v in a.values]
    overlaps = [o.tolist() for o in a.overlaps]
    # <0,n0| rho |K,nK>, <0,n0| rho |0,n0>, <K,nK| rho |K,nK>
    first = np.array(a.vectors[0])
    last = np.array(a.vectors[K])
    cross = (first.conj() @ rho_m @ last.T).tolist()
    pop0 = np.einsum("na,ab,nb->n", first.conj(), rho_m, first).real.tolist()
    popK = np.einsum("na,ab,nb->n", last.conj(), rho_m, last).real.tolist()
    counts = a.counts

    path = [0] * (K + 1)

    def visit(j, c, xs):
        nj = path[j]
        if j == K:
            mod2 = c.real * c.real + c.imag * c.imag
            amp = c * cross[path[0]][nj]
            yield (
                tuple(path),
                dt * xs,
                amp,
                mod2 * pop0[path[0]],
                c.conjugate() * cross[path[0]][nj].conjugate(),
                mod2 * popK[nj],
            )
            return
        xs2 = xs + values[j][nj]
        row_src = overlaps[j]
        for m in range(counts[j + 1]):
            path[j + 1] = m
            yield from visit(j + 1, c * row_src[m][nj], xs2)

    for n0 in roots:
        path[0] = n0
        yield from visit(0, 1.0 + 0.0j, 0.0)


def _dfs_matrix(a: TrajectoryAlphabet, rho_m: np.ndarray, roots: Sequence[int]) -> Iterator[tuple]:
    K = a.K
    dt = a.dt
    values = [v.tolist() for v in a.values]
    counts = a.counts
    path = [0] * (K + 1)

    def visit(j, f, xs):
        if j == K:
            fr = f @ rho_m
            amp = complex(np.trace(fr))
            meas = float(np.trace(fr @ f.conj().T).real)
            ramp = complex(np.trace(f.conj().T @ rho_m))
            rmeas = float(np.trace(f @ f.conj().T @ rho_m).real)
            yield tuple(path), dt * xs, amp, meas, ramp, rmeas
            return
        xs2 = xs + values[j][path[j]]
        for m in range(counts[j + 1]):
            path[j + 1] = m
            yield from visit(j + 1, a.projectors[j + 1][m] @ f, xs2)

    for n0 in roots:
        path[0] = n0
        yield from visit(0, np.array(a.projectors[0][n0]), 0.0)


def _walk(a: TrajectoryAlphabet, rho_m: np.ndarray, roots: Sequence[int]) -> Iterator[tuple]:
    if a.rank_one:
        return _dfs_chain(a, rho_m, roots)
    return _dfs_matrix(a, rho_m, roots)


def enumerate_trajectories(
    proto: DiscretizedProtocol, rho, guard: EnumerationGuard | None = None
) -> Iterator[TrajectoryRecord]:
    """Yield one record per trajectory, depth-first in lexicographic index order."""
    guard = guard or EnumerationGuard()
    a = proto.alphabet
    guard.check(a.total)
    r = _rho_matrix(rho, proto)
    for traj, w, amp, meas, _, _ in _walk(a, r, range(a.counts[0])):
        yield TrajectoryRecord(traj, w, amp, amp.real, _clamp_measured(meas))


def _table_from_walk(a: TrajectoryAlphabet, rho_m: np.ndarray, roots, keep_indices: bool) -> TrajectoryTable:
    rows = list(_walk(a, rho_m, roots))
    n = len(rows)
    work = np.fromiter((r[1] for r in rows), float, n)
    amp = np.fromiter((r[2] for r in rows), complex, n)
    meas = np.fromiter((r[3] for r in rows), float, n)
    ramp = np.fromiter((r[4] for r in rows), complex, n)
    rmeas = np.fromiter((r[5] for r in rows), float, n)
    idx = np.array([r[0] for r in rows], dtype=np.int16).reshape(n, a.K + 1) if keep_indices else None
    return TrajectoryTable(work, amp, meas, ramp, rmeas, idx)


def _worker(args):
    a, rho_m, roots, keep = args
    return _table_from_walk(a, rho_m, roots, keep)


def _clamp_column(col: np.ndarray) -> np.ndarray:
    low = col.min() if col.size else 0.0
    if low < -TOL.clamp:
        raise NumericalError(f"measured weight {low:.3e} is negative beyond rounding")
    return np.maximum(col, 0.0)


def trajectory_table(
    proto: DiscretizedProtocol,
    rho,
    guard: EnumerationGuard | None = None,
    threads: int = 1,
    keep_indices: bool = False,
) -> TrajectoryTable:
    """Enumerate every trajectory into a column table.

    With ``threads > 1`` the subtrees under each first index are handed to a
    process pool; parts are concatenated in index order, so the result equals
    the single-worker table.
    """
    guard = guard or EnumerationGuard()
    a = proto.alphabet
    guard.check(a.total)
    r = _rho_matrix(rho, proto)
    roots = list(range(a.counts[0]))
    threads = max(1, min(int(threads), len(roots), os.cpu_count() or 1))
    if threads == 1:
        t = _table_from_walk(a, r, roots, keep_indices)
    else:
        # one subtree per first index; map() preserves order
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_worker, [(a, r, [n0], keep_indices) for n0 in roots]))
        t = TrajectoryTable.concatenate(parts)
    return TrajectoryTable(
        t.work, t.amplitude, _clamp_column(t.measured), t.reverse_amplitude, _clamp_column(t.reverse_measured), t.indices
    )


# --------------------------------------------------------------------------
# merged-prefix dynamic program


def _merge_states(n_idx, xsum, arrays, key_tol):
    order = np.lexsort((xsum, n_idx))
    n_idx, xsum = n_idx[order], xsum[order]
    arrays = [x[order] for x in arrays]
    new_group = np.ones(len(n_idx), dtype=bool)
    new_group[1:] = (n_idx[1:] != n_idx[:-1]) | (np.diff(xsum) > key_tol)
    starts = np.flatnonzero(new_group)
    return n_idx[starts], xsum[starts], [np.add.reduceat(x, starts, axis=0) for x in arrays]


def merged_table(proto: DiscretizedProtocol, rho, guard: EnumerationGuard | None = None) -> TrajectoryTable:
    """Per work-class weights without enumerating trajectories.

    Prefixes ending on the same projector with the same accumulated power sum
    are merged after every slot. Each row of the result aggregates all
    trajectories with one final index and one work value; rows are not
    individual trajectories (``indices`` is None).
    """
    guard = guard or EnumerationGuard()
    a = proto.alphabet
    r = _rho_matrix(rho, proto)
    d = a.dim
    scale = max((float(np.max(np.abs(v))) for v in a.values), default=0.0) * max(a.K, 1)
    key_tol = max(1e-11 * scale, 1e-300)

    p0 = np.array(a.projectors[0])
    n_idx = np.arange(len(p0))
    xsum = np.zeros(len(p0))
    fwd = p0 @ r  # P_j..P_0 rho
    meas = p0 @ r @ p0  # F rho F^dagger
    rev = p0.copy()  # F F^dagger
    radj = r @ p0  # rho F^dagger

    for j in range(a.K):
        step_vals = a.values[j][n_idx]
        base_x = xsum + step_vals
        projs = np.array(a.projectors[j + 1])
        m = len(projs)
        n_new = np.repeat(np.arange(m), len(n_idx))
        x_new = np.tile(base_x, m)
        fwd = np.einsum("mab,sbc->msac", projs, fwd).reshape(-1, d, d)
        meas = np.einsum("mab,sbc,mcd->msad", projs, meas, projs).reshape(-1, d, d)
        rev = np.einsum("mab,sbc,mcd->msad", projs, rev, projs).reshape(-1, d, d)
        radj = np.einsum("sab,mbc->msac", radj, projs).reshape(-1, d, d)
        n_idx, xsum, (fwd, meas, rev, radj) = _merge_states(n_new, x_new, [fwd, meas, rev, radj], key_tol)
        guard.check(len(n_idx), what="merged prefix states")

    tr = lambda x: np.einsum("saa->s", x)
    t = TrajectoryTable(
        work=a.dt * xsum,
        amplitude=tr(fwd),
        measured=tr(meas).real,
        reverse_amplitude=tr(radj),
        reverse_measured=np.einsum("sab,ba->s", rev, r).real,
        indices=None,
    )
    return t


def write_spill(path, proto: DiscretizedProtocol, rho, guard: EnumerationGuard | None = None) -> int:
    """Write one tab-separated line per trajectory; returns the record count."""
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in enumerate_trajectories(proto, rho, guard):
            fh.write(
                "\t".join(
                    [
                        ",".join(str(i) for i in rec.trajectory),
                        f"{rec.work:.12g}",
                        f"{rec.amplitude.real:.12g}",
                        f"{rec.amplitude.imag:.12g}",
                        f"{rec.linear_weight:.12g}",
                        f"{rec.measured_weight:.12g}",
                    ]
                )
                + "\n"
            )
            n += 1
    return n
