import json

import pytest

import copolicy


def test_synth_panel_shape():
    panel = copolicy.synth_panel()
    assert len(panel["unit"]) == 900
    assert len(set(panel["unit"])) == 50
    assert min(panel["year"]) == 1999 and max(panel["year"]) == 2016
    assert panel == copolicy.synth_panel()
    assert panel != copolicy.synth_panel(seed=1)


def test_run_scenario_is_deterministic():
    a = copolicy.run_scenario(gap="C2", reps=20, seed=7)
    b = copolicy.run_scenario(gap="C2", reps=20, seed=7)
    assert a == b
    assert set(a) == {"primary", "secondary"}
    m = a["primary"]
    assert m["n_reps"] == 20
    assert m["truth"] < 0
    assert m["type1"] is None
    assert 0.0 <= m["coverage"] <= 1.0
    lhs = m["rmse"] ** 2
    rhs = m["var_empirical"] * 19 / 20 + m["bias"] ** 2
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_misspecified_reports_primary_only():
    r = copolicy.run_scenario(specification="misspecified", reps=10)
    assert set(r) == {"primary"}


def test_bad_arguments():
    with pytest.raises(ValueError):
        copolicy.run_scenario(gap="C9", reps=5)
    with pytest.raises(copolicy.InvalidConfig):
        copolicy.run_scenario(n_treated=51, reps=5)
    with pytest.raises(copolicy.InvalidConfig):
        copolicy.run_config({"grid": {"bogus": 1}})


CONFIG = {
    "grid": {"effects": [-0.1, -0.1], "gaps": ["C1", "C2", "C3", "C4"], "n_treated": 30,
             "phase_in": "instantaneous", "ordering": "random", "model": "AR"},
    "run": {"reps": 5, "seed": 3, "workers": 1},
}


def test_run_config_rows():
    rows = copolicy.run_config(CONFIG)
    # 4 gaps x (2 correct + 1 misspecified policy rows).
    assert len(rows) == 12
    assert {r["gap"] for r in rows} == {"C1", "C2", "C3", "C4"}
    assert all(r["master_seed"] == 3 for r in rows)
    assert all(r["type1"] is None for r in rows)


def test_figure_from_csv():
    csv = copolicy.run_config_csv(CONFIG)
    assert csv.count("\n") == 13
    points = copolicy.figure_points(csv, "1")
    assert {p["x"] for p in points} == {"C1", "C2", "C3", "C4"}
    coverage = [p for p in points if p["metric"] == "coverage"]
    assert all(0.0 <= p["value"] <= 1.0 for p in coverage)
    with pytest.raises(copolicy.CopolicyError, match="primary_first"):
        copolicy.figure_points(csv, "3")


def test_reference_data():
    t = copolicy.thresholds()
    assert t["bias_bands"]["non_null"]["edges"] == [5, 10, 20]
    assert copolicy.classify_bias(12.0) == "moderate"
    assert copolicy.classify_bias(-3.0) == "none"
    assert copolicy.classify_bias(0.5, "null") == "large"
    with pytest.raises(ValueError):
        copolicy.classify_bias(1.0, "other")
    assert isinstance(copolicy.__version__, str)
