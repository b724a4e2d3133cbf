import json

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from histwork import WorkDistribution, comparison_report, discretize, moment_report, mh_distribution, thermal_state
from histwork import report as rp


def test_fmt_uses_twelve_significant_digits():
    assert rp.fmt(1 / 3) == "0.333333333333"
    assert rp.fmt(-0.0) == "0"
    assert rp.fmt(1e-20) == "1e-20"
    assert rp.fmt(None) == ""
    assert rp.fmt(float("nan")) == "nan"


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=30, unique=True), st.integers(0, 2**31))
def test_csv_round_trip(tmp_path_factory, values, seed):
    rng = np.random.default_rng(seed)
    w = rng.normal(size=len(values))
    w = w / w.sum() if abs(w.sum()) > 1e-3 else np.full(len(values), 1 / len(values))
    d = WorkDistribution.from_samples(values, w, "quasi", "histories", 1e-9)
    path = tmp_path_factory.mktemp("csv") / "d.csv"
    rp.write_distribution_csv(path, d)
    raw = path.read_bytes()
    assert raw.startswith(b"w,p,Q\n") and b"\r" not in raw
    v, p, q = rp.read_distribution_csv(path)
    assert np.array_equal(v, [rp.round_sig(x) for x in d.values])
    assert np.array_equal(p, [rp.round_sig(x) for x in d.weights])
    assert np.array_equal(q, [rp.round_sig(x) for x in d.cumulative()])
    assert np.all(np.diff(v) > 0)


def test_csv_rejects_foreign_header(tmp_path):
    (tmp_path / "x.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        rp.read_distribution_csv(tmp_path / "x.csv")


def test_comparison_report_validates_against_schema(coherent_qubit_run):
    proto, rho = coherent_qubit_run
    th = thermal_state(proto.h_initial, 0.5)
    rep = comparison_report(proto, th, beta=0.5)
    doc = {
        "format": "histwork-report",
        "version": 1,
        "command": "compare",
        "run": {"protocol": "QubitDrive", "K": proto.K, "dt": proto.dt, "tau": proto.tau, "dim": 2, "beta": 0.5},
        "comparison": rp.comparison_dict(rep),
        "moments": [rp.moment_dict(moment_report(mh_distribution(proto, rho), proto, rho, 3))],
    }
    text = rp.dump_report(doc)
    parsed = json.loads(text)
    jsonschema.validate(parsed, rp.REPORT_SCHEMA)
    assert len(parsed["comparison"]["rows"]) == 4
    assert parsed["comparison"]["jarzynski"]["commuting_flag"] is False
    assert "distributions" not in parsed["comparison"]


def test_schema_rejects_a_broken_report():
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate({"format": "histwork-report", "version": 1, "command": "dist", "run": {"K": 0}}, rp.REPORT_SCHEMA)


def test_jsonable_handles_numpy_and_complex():
    out = rp.to_jsonable({"a": np.float64(1 / 3), "b": np.array([1, 2]), "c": 1 + 2j, "d": np.bool_(True), "e": float("inf")})
    assert out == {"a": 0.333333333333, "b": [1, 2], "c": {"re": 1.0, "im": 2.0}, "d": True, "e": None}
    with pytest.raises(TypeError):
        rp.to_jsonable(object())


def test_report_write_is_deterministic(tmp_path, ramp_spec, ramp_rho):
    proto = discretize(ramp_spec, 3)
    doc = {"format": "histwork-report", "version": 1, "command": "compare", "run": {}, "comparison": rp.comparison_dict(comparison_report(proto, ramp_rho))}
    rp.write_report(tmp_path / "a.json", doc)
    rp.write_report(tmp_path / "b.json", doc)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
