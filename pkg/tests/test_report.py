import json
import math

import numpy as np
import pytest

from zeronoise import report
from zeronoise.deterministic import extremal_solution
from zeronoise.dsl import drift_from_text
from zeronoise.montecarlo import SimConfig, simulate_ensemble

CFG = {"run": {"drift": "x"}, "sim": {"master_seed": 11}}


def test_canonical_json_ignores_key_order():
    a = report.canonical_json({"b": 1, "a": [1.0, np.float64(2.5)]})
    b = report.canonical_json({"a": (1.0, 2.5), "b": np.int64(1)})
    assert a == b
    assert report.config_hash({"x": 1}) != report.config_hash({"x": 2})
    assert len(report.config_hash(CFG)) == 64


def test_provenance_block(tmp_path):
    path = report.write_json(str(tmp_path / "out.json"), {"value": 1.5}, CFG)
    data = json.loads(open(path).read())
    assert data["provenance"]["master_seed"] == 11
    assert data["provenance"]["config_sha256"] == report.config_hash(CFG)


def test_method_tags():
    assert report.tagged(0.5, "analytic") == {"value": 0.5, "method": "analytic"}
    with pytest.raises(ValueError):
        report.tagged(0.5, "guess")


def test_csv_round_trip_with_censoring(tmp_path):
    p = str(tmp_path / "t.csv")
    report.write_csv(p, ["a", "b"], [(1.0, math.nan), (0.1, 2)], CFG)
    lines = open(p).read().splitlines()
    assert lines[0] == f"# config_sha256={report.config_hash(CFG)}"
    assert lines[1] == "# master_seed=11"
    header, rows = report.read_csv(p)
    assert header == ["a", "b"]
    assert rows == [["1.0", "censored"], ["0.1", "2"]]
    assert float(rows[1][0]) == 0.1


def test_ensemble_files(tmp_path):
    d = drift_from_text("sign(x)*abs(x)^0.5")
    cfg = SimConfig([0.1, 0.01], dt=1e-2, t_final=0.3, n_paths=20, levels=[0.01])
    stats = simulate_ensemble(d, cfg)
    files = report.write_ensemble(stats, str(tmp_path), {"sim": cfg.to_dict()})
    names = sorted(p.split("/")[-1] for p in files)
    assert names == ["cdf_eps0.csv", "cdf_eps1.csv", "paths.csv", "summary.json"]
    header, rows = report.read_csv(str(tmp_path / "paths.csv"))
    assert "tau_0.01" in header and len(rows) == 40


def test_svg_is_deterministic():
    d = drift_from_text("sign(x)*abs(x)^0.5")
    cfg = SimConfig([0.1, 0.01], dt=1e-2, t_final=0.3, n_paths=10, record="full-paths")
    s = simulate_ensemble(d, cfg)
    psi_p = extremal_solution(d, "plus", 0.3)
    psi_m = extremal_solution(d, "minus", 0.3)
    args = (cfg.stored_times, [e.paths for e in s.per_eps], cfg.eps_list, s.per_eps[1].final,
            psi_m, psi_p, "test", {"sim": cfg.to_dict()})
    a, b = report.figure_svg(*args), report.figure_svg(*args)
    assert a == b
    assert a.startswith("<?xml") and a.rstrip().endswith("</svg>")
    assert "#d62728" in a and "stroke-dasharray" in a and "config_sha256=" in a


def test_format_table():
    t = report.format_table([(1, "abc")], ["n", "name"])
    assert t.splitlines()[0].split() == ["n", "name"]
    assert set(t.splitlines()[1]) <= {"-", " "}
