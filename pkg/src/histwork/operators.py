"""Dense operator algebra on small finite-dimensional Hilbert spaces.

Units: hbar = 1. All matrices are stored as read-only complex128 numpy arrays,
so instances can be shared freely between workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneracyError, DomainError, NumericalError, ShapeError

__all__ = [
    "Tolerances",
    "TOL",
    "HermitianOperator",
    "UnitaryOperator",
    "DensityMatrix",
    "SpectralDecomposition",
    "spectral_decompose",
    "unitary_step",
    "thermal_state",
    "heisenberg_transform",
    "commutator",
    "max_norm",
    "PAULI_I",
    "PAULI_X",
    "PAULI_Y",
    "PAULI_Z",
]


@dataclass(frozen=True)
class Tolerances:
    hermiticity: float = 1e-10
    unitarity: float = 1e-10
    trace: float = 1e-12
    positivity: float = 1e-10
    spectral: float = 1e-10
    # relative to the spectral norm
    degeneracy_rel: float = 1e-9
    degeneracy_abs: float = 1e-12
    commuting: float = 1e-9
    normalization: float = 1e-10
    clamp: float = 1e-12


TOL = Tolerances()

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
for _m in (PAULI_I, PAULI_X, PAULI_Y, PAULI_Z):
    _m.setflags(write=False)


def max_norm(a) -> float:
    return float(np.max(np.abs(a))) if np.size(a) else 0.0


def commutator(a, b) -> np.ndarray:
    a = getattr(a, "matrix", a)
    b = getattr(b, "matrix", b)
    return a @ b - b @ a


def _as_square(matrix) -> np.ndarray:
    m = np.array(matrix, dtype=complex, copy=True)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ShapeError(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericalError("matrix has non-finite entries")
    return m


def _frozen(m: np.ndarray) -> np.ndarray:
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Hermitian matrix, stored in symmetrized form (A + A^dagger)/2."""

    matrix: np.ndarray

    def __init__(self, matrix, tol: float | None = None):
        m = _as_square(matrix)
        tol = TOL.hermiticity if tol is None else tol
        skew = max_norm(m - m.conj().T)
        if skew > tol:
            raise DomainError(f"matrix is not Hermitian: max|A - A^dagger| = {skew:.3e}")
        object.__setattr__(self, "matrix", _frozen((m + m.conj().T) / 2))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def expectation(self, rho: "DensityMatrix | np.ndarray") -> float:
        r = getattr(rho, "matrix", rho)
        return float(np.real(np.trace(self.matrix @ r)))

    def __add__(self, other):
        return HermitianOperator(self.matrix + getattr(other, "matrix", other))

    def __sub__(self, other):
        return HermitianOperator(self.matrix - getattr(other, "matrix", other))

    def __mul__(self, scalar: float):
        return HermitianOperator(float(scalar) * self.matrix)

    __rmul__ = __mul__

    def __repr__(self):
        return f"HermitianOperator(dim={self.dim})"


@dataclass(frozen=True, eq=False)
class UnitaryOperator:
    matrix: np.ndarray

    def __init__(self, matrix, tol: float | None = None):
        m = _as_square(matrix)
        tol = TOL.unitarity if tol is None else tol
        dev = max_norm(m.conj().T @ m - np.eye(m.shape[0]))
        if dev > tol:
            raise NumericalError("matrix is not unitary", residual=dev)
        object.__setattr__(self, "matrix", _frozen(m))

    @classmethod
    def identity(cls, dim: int) -> "UnitaryOperator":
        return cls(np.eye(dim, dtype=complex))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def H(self) -> "UnitaryOperator":
        return UnitaryOperator(self.matrix.conj().T)

    def __matmul__(self, other: "UnitaryOperator") -> "UnitaryOperator":
        return UnitaryOperator(self.matrix @ other.matrix)

    def __repr__(self):
        return f"UnitaryOperator(dim={self.dim})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Positive semidefinite, unit-trace Hermitian matrix."""

    matrix: np.ndarray

    def __init__(self, matrix, tol: float | None = None):
        m = _as_square(matrix)
        herm_tol = TOL.hermiticity if tol is None else tol
        skew = max_norm(m - m.conj().T)
        if skew > herm_tol:
            raise DomainError(f"density matrix is not Hermitian: {skew:.3e}")
        m = (m + m.conj().T) / 2
        tr = np.trace(m).real
        if abs(tr - 1.0) > TOL.trace:
            raise DomainError(f"density matrix trace is {tr!r}, expected 1")
        lam_min = float(np.linalg.eigvalsh(m)[0])
        if lam_min < -TOL.positivity:
            raise DomainError(f"density matrix has negative eigenvalue {lam_min:.3e}")
        object.__setattr__(self, "matrix", _frozen(m))

    @classmethod
    def pure(cls, psi) -> "DensityMatrix":
        v = np.asarray(psi, dtype=complex).ravel()
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=complex) / dim)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenvalues in ascending order with matching orthogonal projectors.

    ``vectors[n]`` is the unit eigenvector when ``ranks[n] == 1`` and ``None``
    otherwise.
    """

    eigenvalues: np.ndarray
    projectors: tuple
    ranks: tuple
    vectors: tuple = field(default=())

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    @property
    def all_rank_one(self) -> bool:
        return all(r == 1 for r in self.ranks)

    def reconstruct(self) -> np.ndarray:
        return sum(x * p for x, p in zip(self.eigenvalues, self.projectors))

    def residuals(self, matrix=None) -> dict:
        """Orthogonality, completeness and (optionally) reconstruction residuals."""
        d = self.dim
        orth = 0.0
        for n, p in enumerate(self.projectors):
            for m, q in enumerate(self.projectors):
                target = p if n == m else 0.0
                orth = max(orth, max_norm(p @ q - target))
        out = {
            "orthogonality": orth,
            "completeness": max_norm(sum(self.projectors) - np.eye(d)),
        }
        if matrix is not None:
            out["reconstruction"] = max_norm(self.reconstruct() - getattr(matrix, "matrix", matrix))
        return out


def spectral_decompose(
    a: HermitianOperator,
    degeneracy_tol: float | None = None,
    strict: bool = False,
) -> SpectralDecomposition:
    """Eigendecompose ``a``, merging eigenvalue clusters closer than ``degeneracy_tol``.

    With ``strict=True`` a cluster of size > 1 raises :class:`DegeneracyError`
    instead of producing a higher-rank projector.
    """
    m = a.matrix if isinstance(a, HermitianOperator) else HermitianOperator(a).matrix
    try:
        vals, vecs = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        resid = max_norm(m - m.conj().T)
        raise NumericalError(f"eigensolver did not converge: {exc}", residual=resid) from exc
    if degeneracy_tol is None:
        scale = float(np.max(np.abs(vals))) if vals.size else 0.0
        degeneracy_tol = max(TOL.degeneracy_rel * scale, TOL.degeneracy_abs)
    if degeneracy_tol <= 0:
        raise DomainError("degeneracy_tol must be positive")

    clusters = [[0]]
    for k in range(1, len(vals)):
        if vals[k] - vals[clusters[-1][-1]] < degeneracy_tol:
            clusters[-1].append(k)
        else:
            clusters.append([k])
    if strict and any(len(c) > 1 for c in clusters):
        sizes = [len(c) for c in clusters]
        raise DegeneracyError(f"degenerate eigenvalues (cluster sizes {sizes}) in strict mode")

    eigenvalues, projectors, ranks, vectors = [], [], [], []
    for c in clusters:
        block = vecs[:, c]
        p = block @ block.conj().T
        eigenvalues.append(float(np.mean(vals[c])))
        projectors.append(_frozen(p))
        ranks.append(len(c))
        vectors.append(_frozen(block[:, 0].copy()) if len(c) == 1 else None)

    sd = SpectralDecomposition(
        eigenvalues=_frozen(np.array(eigenvalues)),
        projectors=tuple(projectors),
        ranks=tuple(ranks),
        vectors=tuple(vectors),
    )
    res = max_norm(sd.reconstruct() - m)
    # merged clusters shift eigenvalues by up to degeneracy_tol
    if res > TOL.spectral + degeneracy_tol:
        raise NumericalError("spectral reconstruction failed", residual=res)
    return sd


def unitary_step(h: HermitianOperator, dt: float) -> UnitaryOperator:
    """exp(-i h dt) via the eigenbasis of ``h``."""
    if not np.isfinite(dt):
        raise DomainError("dt must be finite")
    try:
        vals, vecs = np.linalg.eigh(h.matrix)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver did not converge: {exc}") from exc
    return UnitaryOperator((vecs * np.exp(-1j * vals * dt)) @ vecs.conj().T)


def hermitian_function(h: HermitianOperator | np.ndarray, fn) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its eigenbasis."""
    m = getattr(h, "matrix", h)
    vals, vecs = np.linalg.eigh(m)
    return (vecs * fn(vals)) @ vecs.conj().T


def partition_function(h: HermitianOperator, beta: float) -> float:
    """Tr exp(-beta h), evaluated as a log-sum-exp of the eigenvalues."""
    return float(np.exp(log_partition_function(h, beta)))


def log_partition_function(h: HermitianOperator, beta: float) -> float:
    if beta < 0:
        raise DomainError("beta must be non-negative")
    expo = -beta * np.linalg.eigvalsh(h.matrix)
    top = expo.max()
    return float(top + np.log(np.sum(np.exp(expo - top))))


def thermal_state(h: HermitianOperator, beta: float) -> DensityMatrix:
    """Gibbs state exp(-beta h)/Z."""
    if not beta >= 0:
        raise DomainError(f"beta must be non-negative, got {beta}")
    vals, vecs = np.linalg.eigh(h.matrix)
    expo = -beta * vals
    w = np.exp(expo - expo.max())
    w /= w.sum()
    return DensityMatrix((vecs * w) @ vecs.conj().T)


def heisenberg_transform(x: HermitianOperator, v: UnitaryOperator) -> HermitianOperator:
    """V^dagger X V."""
    if x.dim != v.dim:
        raise ShapeError(f"dimension mismatch: operator {x.dim}, unitary {v.dim}")
    u = v.matrix
    return HermitianOperator(u.conj().T @ x.matrix @ u)
