"""Protocol configuration documents.

A document is UTF-8 text with ``[protocol]``, ``[run]`` and ``[output]``
sections holding ``key = value`` lines; ``#`` starts a comment. Matrices are
written row-major with rows separated by ``;`` and entries by ``,``; each entry
is a real or complex literal such as ``0.5``, ``-1j`` or ``0.5+0.25j``::

    [protocol]
    type = linear_ramp
    A = 0, 0.5; 0.5, 0
    B = 0.5, 0; 0, -0.5
    schedule = linear
    tau = 1

    [run]
    K = 8
    rho = 0.8, 0.1-0.2j; 0.1+0.2j, 0.2

Unknown or misplaced keys are errors.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, HistworkError
from .operators import DensityMatrix, HermitianOperator, thermal_state
from .protocol import FixedBasis, LinearRamp, QubitDrive, Schedule, Tabulated, discretize
from .trajectories import DEFAULT_CAP

__all__ = ["RunSettings", "parse_protocol_config", "load_config", "build_run", "DISTRIBUTION_NAMES"]

DISTRIBUTION_NAMES = ("histories", "measured", "tpm", "margenau_hill")

_PROTOCOL_KEYS = {
    "qubit_drive": {"type", "omega", "g", "tau"},
    "linear_ramp": {"type", "a", "b", "schedule", "lambda_start", "lambda_end", "samples", "tau"},
    "fixed_basis": {"type", "basis", "tracks", "energy_start", "energy_end", "tau"},
    "tabulated": {"type", "tau"},
}
_RUN_KEYS = {
    "k", "beta", "rho", "bin_tol", "enum_cap", "distributions", "method",
    "backend", "midpoint", "threads", "strict_degeneracy",
}
_OUTPUT_KEYS = {"csv_path", "report_path", "spill_path"}
_SECTIONS = ("protocol", "run", "output")
_TAB_KEY = re.compile(r"^h(\d+)$")


@dataclass
class RunSettings:
    K: int
    beta: float | None = None
    rho: np.ndarray | None = None
    bin_tol: float | None = None
    enum_cap: int = DEFAULT_CAP
    distributions: tuple = DISTRIBUTION_NAMES
    method: str = "auto"
    backend: str | None = None
    midpoint: bool = False
    threads: int = 1
    strict_degeneracy: bool = False
    csv_path: str | None = None
    report_path: str | None = None
    spill_path: str | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.beta is None) == (self.rho is None):
            raise ConfigError("exactly one of beta and rho must be given", key="beta")


def _parse_matrix(text: str, key: str, line: int) -> np.ndarray:
    try:
        rows = [r for r in text.split(";")]
        data = [[complex(e.strip().replace(" ", "")) for e in r.split(",")] for r in rows]
    except ValueError as exc:
        raise ConfigError(f"cannot parse matrix entry: {exc}", key=key, line=line) from None
    if len({len(r) for r in data}) != 1 or len(data) != len(data[0]):
        raise ConfigError("matrix must be square", key=key, line=line)
    return np.array(data, dtype=complex)


def _hermitian(text, key, line) -> HermitianOperator:
    m = _parse_matrix(text, key, line)
    try:
        return HermitianOperator(m)
    except HistworkError as exc:
        raise ConfigError(str(exc), key=key, line=line) from None


def _float(text, key, line) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}", key=key, line=line) from None
    if not math.isfinite(v):
        raise ConfigError("value must be finite", key=key, line=line)
    return v


def _int(text, key, line) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}", key=key, line=line) from None


def _floats(text, key, line) -> list:
    return [_float(t.strip(), key, line) for t in text.split(",") if t.strip()]


def _bool(text, key, line) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}", key=key, line=line)


def _read_sections(text: str) -> dict:
    sections: dict = {s: {} for s in _SECTIONS}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in sections:
                raise ConfigError(f"unknown section [{name}]", line=lineno)
            current = name
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", line=lineno)
        if current is None:
            raise ConfigError("key outside of any section", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        norm = key.lower()
        if norm in sections[current]:
            raise ConfigError("duplicate key", key=key, line=lineno)
        sections[current][norm] = (value, lineno, key)
    return sections


def parse_protocol_config(text: str):
    """Parse a configuration document into ``(protocol spec, RunSettings)``."""
    sec = _read_sections(text)
    proto, run, out = sec["protocol"], sec["run"], sec["output"]

    missing = []
    if "type" not in proto:
        missing.append("protocol.type")
    if "k" not in run:
        missing.append("run.K")
    if "beta" not in run and "rho" not in run:
        missing.append("run.beta|run.rho")
    if missing:
        raise ConfigError("missing required keys: " + ", ".join(missing), key=missing[0])

    ptype, pline, _ = proto["type"]
    ptype = ptype.lower()
    if ptype not in _PROTOCOL_KEYS:
        raise ConfigError(f"unknown protocol type {ptype!r}", key="type", line=pline)
    allowed = _PROTOCOL_KEYS[ptype]
    for norm, (_, lineno, key) in proto.items():
        if norm in allowed or (ptype == "tabulated" and _TAB_KEY.match(norm)):
            continue
        raise ConfigError(f"unknown key for a {ptype} protocol", key=key, line=lineno)
    for norm, (_, lineno, key) in run.items():
        if norm not in _RUN_KEYS:
            raise ConfigError("unknown key in [run]", key=key, line=lineno)
    for norm, (_, lineno, key) in out.items():
        if norm not in _OUTPUT_KEYS:
            raise ConfigError("unknown key in [output]", key=key, line=lineno)

    kval, kline, _ = run["k"]
    K = _int(kval, "K", kline)
    if K <= 0:
        raise ConfigError("K must be positive", key="K", line=kline)

    def get(section, name, conv, default=None):
        if name not in section:
            return default
        value, lineno, key = section[name]
        return conv(value, key, lineno)

    def need(section, name, conv, label):
        if name not in section:
            raise ConfigError(f"{ptype} protocol needs '{label}'", key=label)
        return get(section, name, conv)

    try:
        if ptype == "qubit_drive":
            omega = need(proto, "omega", _float, "omega")
            g = need(proto, "g", _float, "g")
            tau = get(proto, "tau", _float, K * math.pi / (2 * g) if g > 0 else 1.0)
            spec = QubitDrive(omega=omega, g=g, tau=tau)
        elif ptype == "linear_ramp":
            a = need(proto, "a", _hermitian, "A")
            b = need(proto, "b", _hermitian, "B")
            kind = get(proto, "schedule", lambda v, k, l: v.strip().lower(), "linear")
            samples = tuple(get(proto, "samples", _floats, []))
            sched = Schedule(
                kind,
                start=get(proto, "lambda_start", _float, 0.0),
                end=get(proto, "lambda_end", _float, 1.0),
                samples=samples,
            )
            spec = LinearRamp(a, b, sched, need(proto, "tau", _float, "tau"))
        elif ptype == "fixed_basis":
            e0 = need(proto, "energy_start", _floats, "energy_start")
            e1 = need(proto, "energy_end", _floats, "energy_end")
            if len(e0) != len(e1):
                raise ConfigError("energy_start and energy_end differ in length", key="energy_end")
            basis = get(proto, "basis", _parse_matrix, np.eye(len(e0), dtype=complex))
            if basis.shape[0] != len(e0):
                raise ConfigError("basis dimension does not match the number of levels", key="basis")
            if np.max(np.abs(basis.conj().T @ basis - np.eye(len(e0)))) > 1e-10:
                raise ConfigError("basis must be unitary (columns are the eigenvectors)", key="basis")
            kind = get(proto, "tracks", lambda v, k, l: v.strip().lower(), "linear")
            tracks = [Schedule(kind, s, e) for s, e in zip(e0, e1)]
            spec = FixedBasis.from_basis(basis, tracks, need(proto, "tau", _float, "tau"))
        else:
            mats = {}
            for norm, (value, lineno, key) in proto.items():
                m = _TAB_KEY.match(norm)
                if m:
                    mats[int(m.group(1))] = _hermitian(value, key, lineno)
            if sorted(mats) != list(range(len(mats))):
                raise ConfigError("tabulated Hamiltonians must be numbered H0, H1, ... without gaps", key="H0")
            if len(mats) != K + 1:
                raise ConfigError(f"{len(mats)} Hamiltonians given but K+1 = {K + 1}", key="K", line=kline)
            spec = Tabulated(tuple(mats[i] for i in range(len(mats))), need(proto, "tau", _float, "tau"))
    except ConfigError:
        raise
    except HistworkError as exc:
        raise ConfigError(str(exc)) from None

    rho = None
    if "rho" in run:
        value, lineno, key = run["rho"]
        rho = _parse_matrix(value, key, lineno)
        try:
            rho = DensityMatrix(rho).matrix
        except HistworkError as exc:
            raise ConfigError(str(exc), key=key, line=lineno) from None
        if rho.shape[0] != spec.dim:
            raise ConfigError(f"rho has dimension {rho.shape[0]}, protocol {spec.dim}", key=key, line=lineno)
    beta = get(run, "beta", _float)
    if beta is not None and beta < 0:
        raise ConfigError("beta must be non-negative", key="beta", line=run["beta"][1])
    if beta is not None and rho is not None:
        raise ConfigError("give either beta or rho, not both", key="rho", line=run["rho"][1])

    dists = get(run, "distributions", lambda v, k, l: tuple(s.strip().lower() for s in v.split(",") if s.strip()))
    if dists is not None:
        bad = [d for d in dists if d not in DISTRIBUTION_NAMES]
        if bad:
            raise ConfigError(f"unknown distribution {bad[0]!r}", key="distributions", line=run["distributions"][1])
    method = get(run, "method", lambda v, k, l: v.strip().lower(), "auto")
    if method not in ("auto", "enumerate", "merged"):
        raise ConfigError(f"unknown method {method!r}", key="method", line=run["method"][1])
    backend = get(run, "backend", lambda v, k, l: v.strip().lower())
    if backend not in (None, "exact", "stepped"):
        raise ConfigError(f"unknown backend {backend!r}", key="backend", line=run["backend"][1])
    cap = get(run, "enum_cap", _int, DEFAULT_CAP)
    if cap < 1:
        raise ConfigError("enum_cap must be >= 1", key="enum_cap", line=run["enum_cap"][1])
    bin_tol = get(run, "bin_tol", _float)
    if bin_tol is not None and bin_tol <= 0:
        raise ConfigError("bin_tol must be positive", key="bin_tol", line=run["bin_tol"][1])
    threads = get(run, "threads", _int, 1)
    if threads < 1:
        raise ConfigError("threads must be >= 1", key="threads", line=run["threads"][1])

    settings = RunSettings(
        K=K,
        beta=beta,
        rho=rho,
        bin_tol=bin_tol,
        enum_cap=cap,
        distributions=dists or DISTRIBUTION_NAMES,
        method=method,
        backend=backend,
        midpoint=get(run, "midpoint", _bool, False),
        threads=threads,
        strict_degeneracy=get(run, "strict_degeneracy", _bool, False),
        csv_path=get(out, "csv_path", lambda v, k, l: v),
        report_path=get(out, "report_path", lambda v, k, l: v),
        spill_path=get(out, "spill_path", lambda v, k, l: v),
    )
    return spec, settings


def load_config(path) -> tuple:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc}") from None
    return parse_protocol_config(text)


def build_run(spec, settings: RunSettings, K: int | None = None, beta: float | None = None):
    """Discretize ``spec`` and construct the initial state for a run."""
    proto = discretize(
        spec,
        settings.K if K is None else K,
        backend=settings.backend,
        midpoint=settings.midpoint,
        strict_degeneracy=settings.strict_degeneracy,
    )
    if settings.rho is not None and beta is None:
        rho = DensityMatrix(settings.rho)
    else:
        rho = thermal_state(proto.h_initial, settings.beta if beta is None else beta)
    return proto, rho
