"""Command-line front end.

Exit codes: 0 ok, 2 configuration, 3 resource cap, 4 numerical failure,
5 regression (``fig2`` only).
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import report as rp
from .config import RunSettings, build_run, load_config
from .distributions import (
    comparison_report,
    internal_energy_change,
    jarzynski_report,
    jarzynski_terms,
    mh_distribution,
    moment_report,
    path_distributions,
    total_variation,
    tpm_distribution,
    zeno_limit_distribution,
)
from .errors import ConfigError, HistworkError, RegressionError
from .operators import thermal_state
from .protocol import LinearRamp, QubitDrive, discretize
from .trajectories import EnumerationGuard, write_spill

__all__ = ["main", "build_parser", "fig2_distributions", "FIG2"]

log = logging.getLogger("histwork")

# frozen reproduction parameters; use `dist` for anything else
FIG2 = {"omega": 1.0, "g": 1.0, "K": 15, "beta": 0.1}


def _run_meta(proto, settings: RunSettings | None, beta=None) -> dict:
    spec = proto.spec
    return rp.to_jsonable(
        {
            "protocol": type(spec).__name__,
            "K": proto.K,
            "dt": proto.dt,
            "tau": proto.tau,
            "dim": proto.dim,
            "beta": beta if beta is not None else (settings.beta if settings else None),
            "backend": proto.backend,
            "method": settings.method if settings else "auto",
        }
    )


def _doc(command: str, run: dict, **parts) -> dict:
    doc = {"format": "histwork-report", "version": 1, "command": command, "run": run}
    doc.update({k: v for k, v in parts.items() if v is not None})
    return doc


def _load(args):
    if not args.config:
        raise ConfigError("--config is required for this command", key="config")
    spec, settings = load_config(args.config)
    if args.threads is not None:
        settings.threads = args.threads
    if args.strict_degeneracy:
        settings.strict_degeneracy = True
    return spec, settings


def _out(args, name) -> Path:
    return Path(args.out) / name


def _build_distributions(proto, rho, settings: RunSettings) -> dict:
    guard = EnumerationGuard(settings.enum_cap)
    wanted = settings.distributions
    out = {}
    if "histories" in wanted or "measured" in wanted:
        paths = path_distributions(proto, rho, settings.bin_tol, settings.method, guard, settings.threads)
        for name in ("histories", "measured"):
            if name in wanted:
                out[name] = paths[name]
    if "tpm" in wanted:
        out["tpm"] = tpm_distribution(proto, rho, settings.bin_tol)
    if "margenau_hill" in wanted:
        out["margenau_hill"] = mh_distribution(proto, rho, settings.bin_tol)
    return {name: out[name] for name in wanted}


def cmd_dist(args) -> int:
    spec, settings = _load(args)
    proto, rho = build_run(spec, settings)
    dists = _build_distributions(proto, rho, settings)
    prefix = settings.csv_path or ""
    summaries = []
    for name, d in dists.items():
        path = rp.write_distribution_csv(_out(args, f"{prefix}{name}.csv"), d)
        summaries.append(rp.distribution_summary(name, d, path.name))
        print(f"{name:14s} n={len(d):<6d} mean={rp.fmt(d.mean)} variance={rp.fmt(d.variance)} min_weight={rp.fmt(d.min_weight)}")
    if settings.spill_path:
        write_spill(_out(args, settings.spill_path), proto, rho, EnumerationGuard(settings.enum_cap))
    jr = None
    if settings.beta is not None and settings.beta > 0:
        jr = rp.jarzynski_dict(jarzynski_report(proto, rho, settings.beta))
    doc = _doc("dist", _run_meta(proto, settings), distributions=summaries, jarzynski=jr)
    rp.write_report(_out(args, settings.report_path or "report.json"), doc)
    return 0


def cmd_compare(args) -> int:
    spec, settings = _load(args)
    proto, rho = build_run(spec, settings)
    rep = comparison_report(
        proto, rho, settings.beta, settings.bin_tol, settings.method, EnumerationGuard(settings.enum_cap), settings.threads
    )
    print(f"{'distribution':14s} {'min_weight':>14s} {'energy_gap':>14s} {'reversal_gap':>14s} {'jarzynski_gap':>14s}")
    for row in rep.rows.values():
        print(
            f"{row.name:14s} {rp.fmt(row.min_weight):>14s} {rp.fmt(row.energy_gap):>14s} "
            f"{rp.fmt(row.time_reversal_gap):>14s} {rp.fmt(row.jarzynski_gap):>14s}"
        )
    print(f"classical_limit={rep.classical_limit} coincident={rep.coincident} coincidence_gap={rp.fmt(rep.coincidence_gap)}")
    doc = _doc("compare", _run_meta(proto, settings), comparison=rp.comparison_dict(rep))
    rp.write_report(_out(args, settings.report_path or "report.json"), doc)
    return 0


def _parse_values(text: str, axis: str) -> list:
    try:
        vals = [int(v) if axis == "K" else float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse sweep values {text!r}", key="values") from None
    if not vals:
        raise ConfigError("no sweep values given", key="values")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ConfigError("sweep values must be strictly ascending", key="values")
    if axis == "K" and vals[0] < 1:
        raise ConfigError("K values must be positive", key="values")
    if axis == "beta" and (vals[0] < 0 or not all(math.isfinite(v) for v in vals)):
        raise ConfigError("beta values must be finite and non-negative", key="values")
    return vals


def cmd_sweep(args) -> int:
    spec, settings = _load(args)
    axis = args.axis
    values = _parse_values(args.values, axis)
    if axis == "beta" and settings.rho is not None:
        raise ConfigError("a beta sweep needs a thermal run (beta instead of rho)", key="rho")
    guard = EnumerationGuard(settings.enum_cap)
    header = ["value", "K", "beta", "mean_w", "delta_u", "first_moment_gap", "exp_avg", "exp_neg_beta_delta_f", "jarzynski_gap", "zeno_tv"]
    rows = []
    for v in values:
        if axis == "K":
            proto, rho = build_run(spec, settings, K=v)
            beta = settings.beta
        else:
            proto, rho = build_run(spec, settings, beta=v)
            beta = v
        paths = path_distributions(proto, rho, settings.bin_tol, settings.method, guard, settings.threads)
        hist = paths["histories"]
        du = internal_energy_change(proto, rho)
        exp_avg = rhs = jgap = None
        if beta is not None:
            rhs, _ = jarzynski_terms(proto, beta)
            exp_avg = hist.exp_average(beta)
            jgap = exp_avg - rhs
        zeno = None
        if isinstance(spec, LinearRamp):
            zeno = total_variation(paths["measured"], zeno_limit_distribution(proto, rho, settings.bin_tol))
        rows.append([v, proto.K, beta, hist.mean, du, abs(hist.mean - du), exp_avg, rhs, jgap, zeno])
        print(",".join(rp.fmt(x) for x in rows[-1]))
    csv = rp.write_rows_csv(_out(args, f"{settings.csv_path or ''}sweep_{axis}.csv"), header, rows)
    proto0 = discretize(spec, settings.K, backend=settings.backend, midpoint=settings.midpoint)
    doc = _doc("sweep", _run_meta(proto0, settings), sweep={"axis": axis, "values": rp.to_jsonable(values), "csv": csv.name})
    rp.write_report(_out(args, settings.report_path or "report.json"), doc)
    return 0


def fig2_distributions(threads: int = 1) -> tuple:
    """Histories and measured distributions for the frozen driven-qubit run."""
    proto = discretize(QubitDrive.quarter_period_grid(FIG2["omega"], FIG2["g"], FIG2["K"]), FIG2["K"])
    rho = thermal_state(proto.h_initial, FIG2["beta"])
    paths = path_distributions(proto, rho, threads=threads)
    return proto, paths["histories"], paths["measured"]


def fig2_checks(proto, hist, meas) -> dict:
    quantum = math.pi * FIG2["omega"] / 4
    lattice = quantum * np.arange(-FIG2["K"], FIG2["K"] + 1, 2)
    q_hist, q_meas = hist.cumulative(), meas.cumulative()

    def on_lattice(d):
        return len(d) == len(lattice) and bool(np.allclose(d.values, lattice, atol=1e-9))

    return {
        "histories_on_lattice": on_lattice(hist),
        "measured_on_lattice": on_lattice(meas),
        "histories_has_negative_bin": hist.min_weight < 0,
        "histories_cumulative_non_monotone": bool(np.any(np.diff(q_hist) < 0)),
        "histories_cumulative_reaches_one": abs(q_hist[-1] - 1) <= 1e-10,
        "measured_non_negative": meas.min_weight >= 0,
        "measured_cumulative_monotone": bool(np.all(np.diff(q_meas) >= -1e-12)),
    }


def cmd_fig2(args) -> int:
    t0 = time.perf_counter()
    proto, hist, meas = fig2_distributions(args.threads or 1)
    checks = fig2_checks(proto, hist, meas)
    p1 = rp.write_distribution_csv(_out(args, "fig2_histories.csv"), hist)
    p2 = rp.write_distribution_csv(_out(args, "fig2_measured.csv"), meas)
    summaries = [rp.distribution_summary("histories", hist, p1.name), rp.distribution_summary("measured", meas, p2.name)]
    meta = _run_meta(proto, None, beta=FIG2["beta"])
    rp.write_report(_out(args, "fig2_report.json"), _doc("fig2", meta, distributions=summaries, regression=rp.to_jsonable(checks)))
    log.info("fig2 finished in %.2f s", time.perf_counter() - t0)
    failed = [k for k, ok in checks.items() if not ok]
    if failed:
        raise RegressionError("fig2 regression failed: " + ", ".join(failed))
    print(f"fig2 ok: {len(hist)} support points, histories min weight {rp.fmt(hist.min_weight)}")
    return 0


def cmd_moments(args) -> int:
    spec, settings = _load(args)
    if args.order < 0:
        raise ConfigError("moment order must be >= 0", key="order")
    proto, rho = build_run(spec, settings)
    dists = _build_distributions(proto, rho, settings)
    reports = []
    for name, d in dists.items():
        mr = moment_report(d, proto, rho, args.order)
        reports.append(rp.moment_dict(mr))
        for m, a, b, gap in zip(mr.orders, mr.enumerated, mr.closed_form, mr.gaps):
            print(f"{name:14s} m={m} enumerated={rp.fmt(a)} closed_form={rp.fmt(b)} gap={rp.fmt(gap)}")
    doc = _doc("moments", _run_meta(proto, settings), moments=reports)
    rp.write_report(_out(args, settings.report_path or "report.json"), doc)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="protocol configuration file")
    common.add_argument("--out", default=".", help="output directory (default: current directory)")
    common.add_argument("--threads", type=int, default=None, help="trajectory enumeration workers")
    common.add_argument("--strict-degeneracy", action="store_true", help="fail instead of merging degenerate eigenvalues")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="histwork", description="Quantum work distributions for driven finite-dimensional systems.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("dist", parents=[common], help="write CSV files for the selected distributions").set_defaults(func=cmd_dist)
    sub.add_parser("compare", parents=[common], help="property comparison of all four distributions").set_defaults(func=cmd_compare)
    sw = sub.add_parser("sweep", parents=[common], help="sweep K or beta")
    sw.add_argument("--axis", choices=("K", "beta"), required=True)
    sw.add_argument("--values", required=True, help="comma-separated ascending values")
    sw.set_defaults(func=cmd_sweep)
    sub.add_parser("fig2", parents=[common], help="frozen driven-qubit reproduction").set_defaults(func=cmd_fig2)
    mo = sub.add_parser("moments", parents=[common], help="moments against closed forms")
    mo.add_argument("--order", type=int, default=4, help="highest moment order (default 4)")
    mo.set_defaults(func=cmd_moments)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse usage errors are configuration errors
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except HistworkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
