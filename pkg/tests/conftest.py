from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import settings

from histwork import (
    PAULI_X,
    PAULI_Z,
    DensityMatrix,
    FixedBasis,
    HermitianOperator,
    LinearRamp,
    QubitDrive,
    Schedule,
    Tabulated,
    discretize,
    thermal_state,
)


# reproducible example generation; every property test also sets its own budget
settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")


def random_hermitian(rng, d, scale=1.0):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (g + g.conj().T) / 2


def random_density(rng, d, rank=None):
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    r = g @ g.conj().T
    return DensityMatrix(r / np.trace(r).real)


def random_unitary(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_spec(rng, d, K, kind=None):
    """A random protocol of dimension d; ``kind`` picks the variant."""
    kind = kind or rng.choice(["linear_ramp", "cosine_ramp", "tabulated", "qubit_drive"] if d == 2 else ["linear_ramp", "cosine_ramp", "tabulated"])
    tau = float(rng.uniform(0.5, 2.0))
    if kind == "qubit_drive":
        return QubitDrive(omega=float(rng.uniform(0.5, 2)), g=float(rng.uniform(0.5, 2)), tau=tau)
    if kind in ("linear_ramp", "cosine_ramp"):
        sched = Schedule("linear" if kind == "linear_ramp" else "cosine", 0.0, float(rng.uniform(0.5, 1.5)))
        return LinearRamp(HermitianOperator(random_hermitian(rng, d)), HermitianOperator(random_hermitian(rng, d, 0.7)), sched, tau)
    if kind == "fixed_basis":
        tracks = [Schedule("linear", float(rng.normal()), float(rng.normal())) for _ in range(d)]
        return FixedBasis.from_basis(random_unitary(rng, d), tracks, tau)
    hs = [random_hermitian(rng, d)]
    for _ in range(K):
        hs.append(hs[-1] + random_hermitian(rng, d, 0.3))
    return Tabulated(tuple(hs), tau)


def random_thermal_instance(seed, dims=(2, 3), ks=range(3, 9), kind=None):
    """(proto, rho, beta) with d in ``dims`` and K in ``ks``; K <= 6 when d = 3 to bound the tree."""
    rng = np.random.default_rng(seed)
    d = int(rng.choice(dims))
    K = int(rng.choice(list(ks)))
    if d == 3:
        K = min(K, 6)
    proto = discretize(random_spec(rng, d, K, kind), K)
    beta = float(rng.uniform(0.1, 2.0))
    return proto, thermal_state(proto.h_initial, beta), beta, rng


def random_instance(seed, dims=(2, 3), ks=range(3, 9), thermal=False, kind=None):
    """(proto, rho); rho is a random full-rank state unless ``thermal``."""
    proto, th, _, rng = random_thermal_instance(seed, dims, ks, kind)
    return proto, th if thermal else random_density(rng, proto.dim)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def fig2_run():
    proto = discretize(QubitDrive.quarter_period_grid(1.0, 1.0, 15), 15)
    rho = thermal_state(proto.h_initial, 0.1)
    return proto, rho


@pytest.fixture(scope="session")
def ramp_spec():
    return LinearRamp(HermitianOperator(0.5 * PAULI_X), HermitianOperator(0.5 * PAULI_Z), Schedule("linear", 0.0, 1.0), 1.0)


@pytest.fixture(scope="session")
def ramp_rho():
    return DensityMatrix.pure([1.0, 0.5 + 0.3j])


@pytest.fixture(scope="session")
def zeno_spec():
    return LinearRamp(HermitianOperator(0.1 * PAULI_X), HermitianOperator(PAULI_Z), Schedule("linear", 0.0, 1.0), 1.0)


@pytest.fixture(scope="session")
def coherent_qubit_run():
    # a generic duration: on the quarter-period grid V(tau) is trivial and reversal gaps vanish
    proto = discretize(QubitDrive(omega=1.0, g=1.0, tau=1.0), 4)
    rho = DensityMatrix.pure([1.0, 1.0j * math.sqrt(2)])
    return proto, rho


@pytest.fixture(scope="session")
def fixed_basis_spec():
    rng = np.random.default_rng(7)
    tracks = [Schedule("linear", 0.0, 1.0), Schedule("cosine", 1.0, 0.2), Schedule("linear", 2.0, 3.5)]
    return FixedBasis.from_basis(random_unitary(rng, 3), tracks, 1.3)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
