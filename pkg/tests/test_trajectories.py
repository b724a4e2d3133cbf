import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_density, random_instance
from histwork import (
    DomainError,
    EnumerationGuard,
    FixedBasis,
    HermitianOperator,
    LinearRamp,
    ResourceError,
    Schedule,
    ShapeError,
    Tabulated,
    amplitude,
    bin_work,
    class_operator,
    discretize,
    endpoint_decomposition,
    enumerate_trajectories,
    linear_weight,
    measured_weight,
    merged_table,
    reverse_measured_weight,
    reverse_weight,
    trajectory_table,
    work_value,
)
from histwork.trajectories import write_spill

seeds = st.integers(0, 2**31)


def all_trajectories(proto):
    return list(np.ndindex(*proto.alphabet.counts))


def test_work_ignores_final_index(ramp_spec):
    proto = discretize(ramp_spec, 3)
    a = proto.alphabet
    w0 = work_value((0, 1, 0, 0), proto)
    assert w0 == work_value((0, 1, 0, 1), proto)
    assert w0 == pytest.approx(proto.dt * (a.values[0][0] + a.values[1][1] + a.values[2][0]))


def test_bad_trajectories(ramp_spec):
    proto = discretize(ramp_spec, 2)
    with pytest.raises(ShapeError):
        work_value((0, 1), proto)
    with pytest.raises(ShapeError):
        work_value((0, 2, 0), proto)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_chain_and_matrix_weights_agree(seed):
    proto, rho = random_instance(seed, dims=(2,), ks=range(1, 5))
    if not proto.alphabet.rank_one:
        return
    for traj in all_trajectories(proto):
        c = class_operator(traj, proto)
        r = rho.matrix
        assert amplitude(traj, proto, rho, "chain") == pytest.approx(np.trace(c @ r), abs=1e-12)
        assert measured_weight(traj, proto, rho, "chain") == pytest.approx(np.trace(c.conj().T @ c @ r).real, abs=1e-12)
        val, w = reverse_weight(traj, proto, rho, "chain")
        assert val == pytest.approx(np.trace(c.conj().T @ r).real, abs=1e-12)
        assert w == -work_value(traj, proto)
        assert reverse_measured_weight(traj, proto, rho, "chain") == pytest.approx(np.trace(c @ c.conj().T @ r).real, abs=1e-12)


def test_chain_refused_for_rank_two_slots():
    spec = LinearRamp(HermitianOperator(np.diag([0.0, 1.0, 2.0])), HermitianOperator(np.diag([1.0, 1.0, 0.0])), Schedule(), 1.0)
    proto = discretize(spec, 2)
    assert not proto.alphabet.rank_one
    rho = random_density(np.random.default_rng(0), 3)
    with pytest.raises(DomainError):
        amplitude((0, 0, 0), proto, rho, "chain")
    assert linear_weight((0, 0, 0), proto, rho) == pytest.approx(np.trace(class_operator((0, 0, 0), proto) @ rho.matrix).real)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_walk_matches_single_trajectory_functions(seed):
    proto, rho = random_instance(seed, ks=range(1, 4))
    recs = list(enumerate_trajectories(proto, rho))
    assert [r.trajectory for r in recs] == all_trajectories(proto)
    for rec in recs:
        assert rec.amplitude == pytest.approx(amplitude(rec.trajectory, proto, rho, "matrix"), abs=1e-12)
        assert rec.measured_weight == pytest.approx(measured_weight(rec.trajectory, proto, rho, "matrix"), abs=1e-12)
        assert rec.work == pytest.approx(work_value(rec.trajectory, proto), abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_table_sums(seed):
    proto, rho = random_instance(seed, ks=range(1, 6))
    t = trajectory_table(proto, rho)
    assert len(t.work) == proto.alphabet.total
    assert t.linear.sum() == pytest.approx(1, abs=1e-10)
    assert t.measured.sum() == pytest.approx(1, abs=1e-10)
    assert t.reverse_linear.sum() == pytest.approx(1, abs=1e-10)
    assert np.all(t.measured >= 0)


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_merged_table_matches_enumeration(seed):
    proto, rho = random_instance(seed, ks=range(2, 6))
    full = trajectory_table(proto, rho)
    merged = merged_table(proto, rho)
    assert len(merged.work) <= len(full.work)
    tol = 1e-9
    for col in ("linear", "measured", "reverse_linear", "reverse_measured"):
        v1, w1 = bin_work(full.work, getattr(full, col), tol)
        v2, w2 = bin_work(merged.work, getattr(merged, col), tol)
        assert np.allclose(v1, v2, atol=1e-9)
        assert np.allclose(w1, w2, atol=1e-12)


def test_parallel_table_equals_serial():
    proto, rho = random_instance(3, dims=(3,), ks=(5,))
    a = trajectory_table(proto, rho, threads=1, keep_indices=True)
    b = trajectory_table(proto, rho, threads=3, keep_indices=True)
    assert np.array_equal(a.indices, b.indices)
    for col in ("work", "amplitude", "measured", "reverse_amplitude", "reverse_measured"):
        assert np.max(np.abs(getattr(a, col) - getattr(b, col))) <= 1e-10


def test_guard_refuses_large_trees(ramp_spec):
    proto = discretize(ramp_spec, 12)
    with pytest.raises(ResourceError) as err:
        trajectory_table(proto, np.eye(2) / 2, EnumerationGuard(cap=1000))
    assert err.value.required == 2**13 and err.value.cap == 1000
    with pytest.raises(ResourceError):
        next(enumerate_trajectories(proto, np.eye(2) / 2, EnumerationGuard(cap=10)))
    with pytest.raises(ResourceError):
        merged_table(proto, np.eye(2) / 2, EnumerationGuard(cap=4))


def test_state_shape_is_checked(ramp_spec):
    with pytest.raises(ShapeError):
        trajectory_table(discretize(ramp_spec, 2), np.eye(3) / 3)


def two_level_fixed_basis():
    return FixedBasis((np.diag([1.0, 0.0]), np.diag([0.0, 1.0])), (Schedule("linear", 0.0, 1.0), Schedule("linear", 2.0, 5.0)), 1.0)


def test_endpoint_decomposition_examples():
    proto = discretize(two_level_fixed_basis(), 2)
    endpoint, de = endpoint_decomposition((1, 1, 1), proto)
    assert de == 0.0
    assert endpoint == pytest.approx(3.0)
    assert work_value((1, 1, 1), proto) == pytest.approx(3.0)
    # one hop from level 0 to level 1 at step 1 -> 2: the gap E_1 - E_0 at t_2
    endpoint, de = endpoint_decomposition((0, 0, 1), proto)
    e = proto.spec.energies(proto.times[2])
    assert de == pytest.approx(e[1] - e[0])
    assert work_value((0, 0, 1), proto) == pytest.approx(endpoint - de, abs=1e-12)


def test_endpoint_decomposition_needs_fixed_basis(ramp_spec):
    with pytest.raises(DomainError):
        endpoint_decomposition((0, 0, 0), discretize(ramp_spec, 2))


def test_spill_file(tmp_path):
    proto = discretize(Tabulated((np.diag([0.0, 1.0]), np.array([[0, 1], [1, 0.5]])), 1.0), 1)
    n = write_spill(tmp_path / "spill.tsv", proto, np.eye(2) / 2)
    lines = (tmp_path / "spill.tsv").read_text().splitlines()
    assert n == len(lines) == 4
    assert lines[0].split("\t")[0] == "0,0"


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_amplitudes_sum_to_trace(seed):
    proto, rho = random_instance(seed, ks=range(1, 5))
    t = trajectory_table(proto, rho)
    assert abs(t.amplitude.sum() - 1) <= 1e-10
