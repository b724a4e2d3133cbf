"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` or as a script with
``python tests/test_acceptance.py``. The lines are also collected into the
pytest terminal summary.
"""

from __future__ import annotations

import functools
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import random_density, random_instance, random_spec, random_thermal_instance, random_unitary  # noqa: E402

from histwork import (  # noqa: E402
    PAULI_X,
    PAULI_Z,
    DensityMatrix,
    FixedBasis,
    HermitianOperator,
    LinearRamp,
    QubitDrive,
    Schedule,
    amplitude,
    class_operator,
    closed_form_moment,
    continuum_moment,
    discretize,
    endpoint_decomposition,
    enumerate_trajectories,
    finite_k_moment,
    histories_distribution,
    internal_energy_change,
    jarzynski_report,
    jarzynski_terms,
    max_bin_gap,
    measured_distribution,
    mgf,
    mgf_series,
    mh_closed_form_moment,
    mh_distribution,
    path_distributions,
    thermal_state,
    time_reversal_check,
    total_variation,
    tpm_distribution,
    trajectory_table,
    work_value,
    zeno_limit_distribution,
)
from histwork.cli import fig2_checks, fig2_distributions  # noqa: E402

pytestmark = pytest.mark.acceptance

RESULTS: list = []
N_RANDOM = 50


def report(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


@functools.lru_cache(maxsize=None)
def instance(seed: int, thermal: bool = False):
    return random_instance(seed, thermal=thermal)


@functools.lru_cache(maxsize=None)
def thermal_instance(seed: int):
    return random_thermal_instance(seed)


def ramp():
    return (
        LinearRamp(HermitianOperator(0.5 * PAULI_X), HermitianOperator(0.5 * PAULI_Z), Schedule("linear", 0.0, 1.0), 1.0),
        DensityMatrix.pure([1.0, 0.5 + 0.3j]),
    )


def fixed_basis_specs():
    out = []
    for seed in range(4):
        rng = np.random.default_rng(100 + seed)
        d = 2 + seed % 3
        tracks = [Schedule(str(rng.choice(["linear", "cosine"])), float(rng.normal()), float(rng.normal())) for _ in range(d)]
        out.append(FixedBasis.from_basis(random_unitary(rng, d), tracks, float(rng.uniform(0.5, 2))))
    return out


# --------------------------------------------------------------------------


def test_criterion_01_normalization():
    worst = 0.0
    for seed in range(N_RANDOM):
        proto, rho = instance(seed)
        t = trajectory_table(proto, rho)
        worst = max(worst, abs(t.linear.sum() - 1), abs(t.measured.sum() - 1))
    report(1, "normalization", worst <= 1e-10, f"max |sum - 1| = {worst:.2e} over {N_RANDOM} instances (tol 1e-10)")


def test_criterion_02_finite_k_first_law():
    worst = 0.0
    for seed in range(N_RANDOM):
        proto, rho = instance(seed)
        worst = max(worst, abs(histories_distribution(proto, rho).mean - finite_k_moment(proto, rho, 1)))
    report(2, "finite-K first law", worst <= 1e-9, f"max |<w> - dt sum Tr[X rho]| = {worst:.2e} (tol 1e-9)")


def test_criterion_03_continuum_energy_conservation():
    spec, rho = ramp()
    ks = (4, 8, 16, 32)
    gaps = []
    for K in ks:
        proto = discretize(spec, K, backend="exact")
        gaps.append(abs(histories_distribution(proto, rho).mean - internal_energy_change(proto, rho)))
    ratios = [a / b for a, b in zip(gaps, gaps[1:])]
    ok = all(r >= 1.8 for r in ratios)
    report(3, "continuum energy conservation", ok, "gap ratios per doubling " + ", ".join(f"{r:.3f}" for r in ratios) + " (need >= 1.8)")


def test_criterion_04_time_reversal():
    worst_h = worst_mh = 0.0
    for seed in range(N_RANDOM):
        proto, rho = instance(seed)
        tr = time_reversal_check(proto, rho)
        worst_h = max(worst_h, tr.histories)
        worst_mh = max(worst_mh, tr.margenau_hill)
    proto = discretize(QubitDrive(omega=1.0, g=1.0, tau=1.0), 4)
    rho = DensityMatrix.pure([1.0, 1.0j * math.sqrt(2)])
    w = time_reversal_check(proto, rho)
    ok = worst_h <= 1e-10 and worst_mh <= 1e-10 and w.measured > 1e-6 and w.tpm > 1e-6
    report(
        4,
        "time-reversal symmetry",
        ok,
        f"histories {worst_h:.2e}, MH {worst_mh:.2e} (tol 1e-10); witness measured {w.measured:.3e}, TPM {w.tpm:.3e} (need > 1e-6)",
    )


def test_criterion_05_fig2_regression():
    t0 = time.perf_counter()
    proto, hist, meas = fig2_distributions()
    checks = fig2_checks(proto, hist, meas)
    elapsed = time.perf_counter() - t0
    ok = all(checks.values()) and elapsed < 5.0
    failed = [k for k, v in checks.items() if not v]
    report(
        5,
        "driven-qubit regression",
        ok,
        f"histories min weight {hist.min_weight:.4f}, measured min weight {meas.min_weight:.2e}, "
        f"{len(hist)} bins, {elapsed:.2f} s (limit 5 s)" + (f"; failed {failed}" if failed else ""),
    )


def test_criterion_06_jarzynski():
    worst_tpm = 0.0
    min_hist = math.inf
    for seed in range(N_RANDOM):
        proto, rho, beta, _ = thermal_instance(seed)
        rhs, _ = jarzynski_terms(proto, beta)
        worst_tpm = max(worst_tpm, abs(tpm_distribution(proto, rho).exp_average(beta) - rhs))
        min_hist = min(min_hist, jarzynski_report(proto, rho, beta).gap)
    commuting = []
    for spec in fixed_basis_specs():
        proto = discretize(spec, 4)
        rho = thermal_state(proto.h_initial, 0.8)
        jr = jarzynski_report(proto, rho, 0.8)
        commuting.append(abs(jr.gap) if jr.commuting_flag else math.inf)
    qubit = []
    for omega, g, tau in ((1.0, 1.0, 15 * math.pi / 2), (1.0, 1.0, 1.0), (2.0, 0.7, 1.3)):
        proto = discretize(QubitDrive(omega, g, tau), 6)
        qubit.append(jarzynski_report(proto, thermal_state(proto.h_initial, 0.1), 0.1).gap)
    ok = worst_tpm <= 1e-9 and max(commuting) <= 1e-9 and min(qubit) > 0 and min_hist >= -1e-9
    report(
        6,
        "Jarzynski",
        ok,
        f"TPM max gap {worst_tpm:.2e}; commuting histories gap {max(commuting):.2e}; "
        f"qubit gaps min {min(qubit):.2e} (> 0); smallest histories gap {min_hist:.2e} (>= -1e-9)",
    )


def test_criterion_07_moments():
    spec, rho = ramp()
    proto = discretize(spec, 2)
    hist_gaps = [abs(continuum_moment(proto, rho, m) - closed_form_moment(proto, rho, m)) for m in (0, 1, 2)]
    mh_gaps = []
    for seed in range(10):
        p, r = instance(seed)
        mh = mh_distribution(p, r)
        for m in (0, 1, 2):
            mh_gaps.append(abs(mh.moment(m) - closed_form_moment(p, r, m)))
            mh_gaps.append(abs(mh.moment(m) - mh_closed_form_moment(p, r, m)))
    q = discretize(QubitDrive(1.0, 1.0, 1.0), 4)
    rq = thermal_state(q.h_initial, 0.5)
    series_gap = abs(mgf_series(q, rq, 0.01, order=6) - mgf(q, rq, 0.01))
    non_comm = abs(mh_distribution(q, rq).moment(3) - closed_form_moment(q, rq, 3))
    fb = discretize(fixed_basis_specs()[1], 4)
    rf = thermal_state(fb.h_initial, 0.5)
    comm = abs(mh_distribution(fb, rf).moment(3) - closed_form_moment(fb, rf, 3))
    ok = max(hist_gaps) <= 1e-8 and max(mh_gaps) <= 1e-10 and series_gap <= 1e-10 and non_comm > 1e-6 and comm <= 1e-10
    report(
        7,
        "moment consistency",
        ok,
        f"extrapolated histories gaps {', '.join(f'{g:.1e}' for g in hist_gaps)} (tol 1e-8); MH m<=2 {max(mh_gaps):.1e}; "
        f"MGF series {series_gap:.1e} (tol 1e-10); m=3 MH-histories non-commuting {non_comm:.3e}, commuting {comm:.1e}",
    )


def test_criterion_08_tpm_recovery():
    worst_mh = 0.0
    for seed in range(N_RANDOM):
        proto, rho = instance(seed, thermal=True)
        worst_mh = max(worst_mh, max_bin_gap(mh_distribution(proto, rho), tpm_distribution(proto, rho)))
    worst_fb = 0.0
    for i, spec in enumerate(fixed_basis_specs()):
        proto = discretize(spec, 3 + i % 2)
        for rho in (thermal_state(proto.h_initial, 0.6), DensityMatrix.maximally_mixed(proto.dim)):
            paths = path_distributions(proto, rho)
            ds = [paths["histories"], paths["measured"], tpm_distribution(proto, rho), mh_distribution(proto, rho)]
            tol = 1e-9
            for a in ds:
                for b in ds:
                    worst_fb = max(worst_fb, max_bin_gap(a, b, max(tol, a.bin_tol, b.bin_tol)))
    ok = worst_mh <= 1e-10 and worst_fb <= 1e-9
    report(8, "TPM recovery", ok, f"MH vs TPM max bin gap {worst_mh:.2e} (tol 1e-10); fixed-basis four-way {worst_fb:.2e} (tol 1e-9)")


def test_criterion_09_zeno_limit():
    spec = LinearRamp(HermitianOperator(0.1 * PAULI_X), HermitianOperator(PAULI_Z), Schedule("linear", 0.0, 1.0), 1.0)
    rho = DensityMatrix.pure([1.0, 0.6 - 0.2j])
    tvs, mean_gap = [], None
    for K in (4, 8, 16, 32):
        proto = discretize(spec, K)
        meas = measured_distribution(proto, rho)
        tvs.append(total_variation(meas, zeno_limit_distribution(proto, rho)))
        if K == 32:
            h = proto.h_final_schrodinger.matrix - proto.h_initial.matrix
            mean_gap = abs(meas.mean - float(np.trace(h @ rho.matrix).real))
    monotone = all(b < a + 1e-12 for a, b in zip(tvs, tvs[1:]))
    ok = monotone and mean_gap <= 1e-3
    report(9, "Zeno limit", ok, "TV " + ", ".join(f"{v:.2e}" for v in tvs) + f"; mean gap at K=32 {mean_gap:.2e} (tol 1e-3)")


def test_criterion_10_endpoint_decomposition():
    worst_split = 0.0
    worst_sum = 0.0
    for i, spec in enumerate(fixed_basis_specs()):
        proto = discretize(spec, 3 + i % 3)
        rho = DensityMatrix.maximally_mixed(proto.dim)
        total = 0.0
        for rec in enumerate_trajectories(proto, rho):
            endpoint, de = endpoint_decomposition(rec.trajectory, proto)
            worst_split = max(worst_split, abs(rec.work - (endpoint - de)))
            total += de
        worst_sum = max(worst_sum, abs(total))
    ok = worst_split <= 1e-12 and worst_sum <= 1e-9
    report(10, "endpoint decomposition", ok, f"max |w - (endpoint - dE)| {worst_split:.2e} (tol 1e-12); |sum dE| {worst_sum:.2e} (tol 1e-9)")


def test_criterion_11_oracle_equivalence():
    worst = 0.0
    count = 0
    for seed in range(12):
        rng = np.random.default_rng(500 + seed)
        K = 1 + seed % 4
        # a cosine ramp has zero rate at t = 0, i.e. a rank-2 first slot
        kind = ("linear_ramp", "qubit_drive", "tabulated")[seed % 3]
        proto = discretize(random_spec(rng, 2, K, kind), K)
        rho = random_density(rng, 2)
        assert proto.alphabet.rank_one
        for traj in np.ndindex(*proto.alphabet.counts):
            chain = amplitude(traj, proto, rho, method="chain")
            direct = complex(np.trace(class_operator(traj, proto) @ rho.matrix))
            worst = max(worst, abs(chain - direct))
            assert work_value(traj, proto) == pytest.approx(proto.dt * sum(proto.alphabet.values[j][n] for j, n in enumerate(traj[:-1])))
            count += 1
    report(11, "oracle equivalence", worst <= 1e-12, f"max |chain - Tr[C rho]| = {worst:.2e} over {count} trajectories (tol 1e-12)")


if __name__ == "__main__":
    failures = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failures += 1
    sys.exit(1 if failures else 0)
