"""CSV plot data and JSON reports.

Numbers are written with 12 significant digits and LF line endings so that
repeated runs produce byte-identical files.
"""

from __future__ import annotations

import dataclasses
import io
import json
import math
from pathlib import Path

import numpy as np

from .distributions import ComparisonReport, JarzynskiReport, MomentReport, WorkDistribution
from .errors import ConfigError

__all__ = [
    "SIG_DIGITS",
    "fmt",
    "round_sig",
    "distribution_csv",
    "write_distribution_csv",
    "read_distribution_csv",
    "write_rows_csv",
    "to_jsonable",
    "distribution_summary",
    "comparison_dict",
    "jarzynski_dict",
    "moment_dict",
    "dump_report",
    "write_report",
    "REPORT_SCHEMA",
]

SIG_DIGITS = 12
CSV_HEADER = "w,p,Q"


def round_sig(x: float) -> float:
    """Round to the printed precision; -0.0 becomes 0.0."""
    return float(f"{x:.{SIG_DIGITS}g}") + 0.0


def fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return f"{round_sig(x):.{SIG_DIGITS}g}"


# --------------------------------------------------------------------------
# CSV


def distribution_csv(dist: WorkDistribution) -> str:
    buf = io.StringIO(newline="")
    buf.write(CSV_HEADER + "\n")
    for w, p, q in zip(dist.values, dist.weights, dist.cumulative()):
        buf.write(f"{fmt(w)},{fmt(p)},{fmt(q)}\n")
    return buf.getvalue()


def _write_text(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}", key="out") from None
    return path


def write_distribution_csv(path, dist: WorkDistribution) -> Path:
    return _write_text(path, distribution_csv(dist))


def read_distribution_csv(path) -> tuple:
    """Return (w, p, Q) arrays from a file written by :func:`write_distribution_csv`."""
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    if lines[0] != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {lines[0]!r}")
    rows = [tuple(float(x) for x in ln.split(",")) for ln in lines[1:] if ln]
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    return arr[:, 0], arr[:, 1], arr[:, 2]


def write_rows_csv(path, header: list, rows: list) -> Path:
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(fmt(v) if not isinstance(v, str) else v for v in row))
    return _write_text(path, "\n".join(out) + "\n")


# --------------------------------------------------------------------------
# JSON


def to_jsonable(obj):
    """Convert reports, arrays and numbers into a JSON tree with rounded floats."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj) if f.repr}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return round_sig(x) if math.isfinite(x) else None
    if isinstance(obj, complex):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def distribution_summary(name: str, dist: WorkDistribution, csv_path=None) -> dict:
    return to_jsonable(
        {
            "name": name,
            "kind": dist.kind,
            "support_size": len(dist),
            "mean": dist.mean,
            "variance": dist.variance,
            "min_weight": dist.min_weight,
            "csv": str(csv_path) if csv_path is not None else None,
        }
    )


def jarzynski_dict(jr: JarzynskiReport | None):
    if jr is None:
        return None
    d = to_jsonable(jr)
    d["discretization_gap"] = to_jsonable(jr.discretization_gap)
    return d


def comparison_dict(rep: ComparisonReport) -> dict:
    d = to_jsonable(rep)
    d["rows"] = [to_jsonable(r) for r in rep.rows.values()]
    d["jarzynski"] = jarzynski_dict(rep.jarzynski)
    return d


def moment_dict(rep: MomentReport) -> dict:
    return to_jsonable(rep)


def dump_report(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_report(path, doc: dict) -> Path:
    return _write_text(path, dump_report(doc))


# --------------------------------------------------------------------------
# schema (JSON Schema draft 2020-12)

_num = {"type": ["number", "null"]}

_JARZYNSKI = {
    "type": ["object", "null"],
    "required": ["beta", "lhs", "lhs_closed_form", "rhs", "delta_f", "gap", "commuting_flag", "thermal", "origin"],
    "properties": {
        "beta": {"type": "number"},
        "lhs": {"type": "number"},
        "lhs_closed_form": {"type": "number"},
        "rhs": {"type": "number"},
        "delta_f": _num,
        "gap": {"type": "number"},
        "discretization_gap": _num,
        "commuting_flag": {"type": "boolean"},
        "thermal": {"type": "boolean"},
        "origin": {"type": "string"},
    },
}

_ROW = {
    "type": "object",
    "required": ["name", "kind", "support_size", "mean", "variance", "min_weight", "energy_gap", "time_reversal_gap"],
    "properties": {
        "name": {"enum": ["histories", "measured", "tpm", "margenau_hill"]},
        "kind": {"enum": ["quasi", "probability"]},
        "support_size": {"type": "integer", "minimum": 1},
        "mean": {"type": "number"},
        "variance": {"type": "number"},
        "min_weight": {"type": "number"},
        "energy_gap": {"type": "number", "minimum": 0},
        "time_reversal_gap": {"type": "number", "minimum": 0},
        "jarzynski_gap": _num,
    },
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "histwork report",
    "type": "object",
    "required": ["format", "version", "command", "run"],
    "properties": {
        "format": {"const": "histwork-report"},
        "version": {"const": 1},
        "command": {"enum": ["dist", "compare", "sweep", "fig2", "moments"]},
        "run": {
            "type": "object",
            "required": ["protocol", "K", "dt", "tau", "dim"],
            "properties": {
                "protocol": {"type": "string"},
                "K": {"type": "integer", "minimum": 1},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "tau": {"type": "number", "exclusiveMinimum": 0},
                "dim": {"type": "integer", "minimum": 1},
                "beta": _num,
                "backend": {"type": ["string", "null"]},
                "method": {"type": "string"},
            },
        },
        "distributions": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "kind", "support_size", "mean", "variance", "min_weight"],
                "properties": {
                    "name": {"type": "string"},
                    "kind": {"enum": ["quasi", "probability"]},
                    "support_size": {"type": "integer", "minimum": 1},
                    "mean": {"type": "number"},
                    "variance": {"type": "number"},
                    "min_weight": {"type": "number"},
                    "csv": {"type": ["string", "null"]},
                },
            },
        },
        "comparison": {
            "type": "object",
            "required": ["K", "dt", "delta_u", "rows", "commutators", "classical_limit", "coincidence_gap", "coincident"],
            "properties": {
                "K": {"type": "integer"},
                "dt": {"type": "number"},
                "beta": _num,
                "delta_u": {"type": "number"},
                "rows": {"type": "array", "items": _ROW, "minItems": 4, "maxItems": 4},
                "histories_finite_k_identity_gap": {"type": "number"},
                "histories_finite_k_energy_gap": {"type": "number"},
                "histories_extrapolated_energy_gap": _num,
                "jarzynski": _JARZYNSKI,
                "commutators": {
                    "type": "object",
                    "required": ["rho_H0", "rho_HtauH", "H0_HtauH"],
                    "additionalProperties": {"type": "number"},
                },
                "classical_limit": {"type": "boolean"},
                "coincidence_gap": {"type": "number"},
                "coincident": {"type": "boolean"},
            },
        },
        "jarzynski": _JARZYNSKI,
        "moments": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["origin", "orders", "enumerated", "closed_form", "gaps"],
                "properties": {
                    "origin": {"type": "string"},
                    "orders": {"type": "array", "items": {"type": "integer"}},
                    "enumerated": {"type": "array", "items": {"type": "number"}},
                    "closed_form": {"type": "array", "items": {"type": "number"}},
                    "gaps": {"type": "array", "items": {"type": "number"}},
                },
            },
        },
        "sweep": {
            "type": "object",
            "required": ["axis", "values", "csv"],
            "properties": {
                "axis": {"enum": ["K", "beta"]},
                "values": {"type": "array", "items": {"type": "number"}},
                "csv": {"type": "string"},
            },
        },
        "regression": {"type": "object", "additionalProperties": {"type": "boolean"}},
    },
}
