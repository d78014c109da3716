import json
import math
import os
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from mmdscan.cli import eval_number, main, read_csv
from mmdscan.geometry import SizeBounds
from mmdscan.sim import ExperimentConfig, estimate_risk


def write_samples(path, values, header="node,value"):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for i, v in enumerate(values):
            fh.write(f"{i},{float(v)!r}\n")
    return str(path)


def small_doc(**kw):
    doc = {
        "geometry": {"kind": "line", "n": 30, "min_size": 5, "max_size": 15},
        "kernel": {"family": "gaussian", "bandwidth": 1.0},
        "p": {"family": "gaussian", "mean": 0.0, "var": 1.0},
        "q": {"family": "gaussian", "mean": 2.0, "var": 1.0},
        "threshold": {"rule": "known_mmd", "value": 0.5},
        "trials": 20,
        "seed": 5,
    }
    doc.update(kw)
    return doc


def write_config(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


# --- detect -------------------------------------------------------------------

def test_detect_planted(tmp_path, capsys):
    v = np.zeros(12)
    v[4:8] = 100.0
    f = write_samples(tmp_path / "s.csv", v)
    out = tmp_path / "o"
    code = main(["detect", f, "--n", "12", "--min-size", "4", "--max-size", "4", "--threshold", "0.5",
                 "--out", str(out), "--report", "report.json"])
    assert code == 0
    text = capsys.readouterr().out
    assert "decision: H1" in text and "argmax: type=line_interval start=4 length=4" in text
    rep = json.loads((out / "report.json").read_text())
    assert rep["argmax"] == {"type": "line_interval", "start": 4, "length": 4}
    assert (out / "detect.csv").read_text().startswith("# manifest=manifest.json\n")


def test_detect_constant_kernel_zeros(tmp_path, capsys):
    f = write_samples(tmp_path / "z.csv", np.zeros(200))
    code = main(["detect", f, "--n", "200", "--min-size", "10", "--max-size", "100", "--kernel", "constant",
                 "--threshold", "0.01"])
    assert code == 0
    text = capsys.readouterr().out
    assert "decision: H0" in text and "max_stat: 0.0" in text


def test_detect_count_mismatch(tmp_path, capsys):
    f = write_samples(tmp_path / "s.csv", np.zeros(10))
    assert main(["detect", f, "--n", "12", "--min-size", "3", "--max-size", "5", "--threshold", "1"]) == 2
    assert "node count mismatch" in capsys.readouterr().err


@pytest.mark.parametrize("body,needle", [
    ("node,value\n0,1\n1,abc\n", ":3: value 'abc'"),
    ("node,value\n0,1\n0,2\n", ":3: node 0 listed twice"),
    ("idx,val\n0,1\n", ":1: expected header"),
    ("node,value\n0,1,2\n", ":2: expected 2 fields"),
    ("node,value\n0,nan\n", ":2: value 'nan' is not finite"),
])
def test_detect_malformed(tmp_path, capsys, body, needle):
    f = tmp_path / "bad.csv"
    f.write_text(body)
    assert main(["detect", str(f), "--n", "12", "--min-size", "3", "--max-size", "5", "--threshold", "1"]) == 2
    assert needle in capsys.readouterr().err


def test_detect_bad_flags(tmp_path):
    f = write_samples(tmp_path / "s.csv", np.zeros(12))
    assert main(["detect", f, "--n", "12", "--min-size", "3", "--max-size", "5"]) == 2
    assert main(["detect", f, "--n", "12", "--min-size", "3", "--max-size", "5", "--threshold", "1",
                 "--bandwidth", "-1"]) == 2
    # sizes leaving a single node outside need --clip-bounds
    assert main(["detect", f, "--n", "12", "--min-size", "1", "--max-size", "11", "--threshold", "1"]) == 2
    assert main(["detect", f, "--n", "12", "--min-size", "1", "--max-size", "11", "--threshold", "1",
                 "--clip-bounds"]) == 0


def test_detect_lattice_vanishing(tmp_path, capsys):
    v = np.random.default_rng(0).normal(size=49)
    f = write_samples(tmp_path / "s.csv", v)
    assert main(["detect", f, "--geometry", "lattice2d", "--n", "7", "--min-size", "5", "--max-size", "13",
                 "--vanishing", "0.5"]) == 0
    assert f"threshold: {0.5 / math.log(math.log(49))!r}" in capsys.readouterr().out


# --- bounds -------------------------------------------------------------------

def test_bounds_rows(tmp_path):
    out = tmp_path / "b"
    assert main(["bounds", "type1_line", "--param", "n=10", "--param", "t=1", "--param", "I_min=3",
                 "--param", "I_max=5", "--out", str(out)]) == 0
    rows = read_csv(out / "bounds.csv")
    assert float(rows[0]["value"]) == pytest.approx(15.7284, abs=1e-4)
    assert list(rows[0]) == ["n", "t", "K", "I_min", "I_max", "value", "error"]


def test_bounds_bayes_and_iterated(tmp_path):
    out = tmp_path / "b"
    assert main(["bounds", "bayes_lower_bound", "--param", "n=10", "--param", "k=3", "--param", "mu=1",
                 "--param", "geometry=ring,line", "--out", str(out)]) == 0
    rows = read_csv(out / "bounds.csv")
    assert float(rows[0]["value"]) == pytest.approx(0.0605825, abs=1e-7)
    assert float(rows[1]["value"]) == 0.0
    out2 = tmp_path / "c"
    assert main(["bounds", "iterated_log", "--param", "n=exp(e)", "--param", "k=2", "--out", str(out2)]) == 0
    assert float(read_csv(out2 / "bounds.csv")[0]["value"]) == pytest.approx(1.0, rel=1e-15)


def test_bounds_errors_per_row(tmp_path):
    out = tmp_path / "b"
    assert main(["bounds", "type2", "--param", "n_total=10", "--param", "t=0.25,0.6", "--param", "mmd2=0.5",
                 "--param", "size=5", "--out", str(out)]) == 0
    rows = read_csv(out / "bounds.csv")
    assert rows[0]["error"] == "" and float(rows[0]["value"]) == pytest.approx(0.980658, abs=1e-6)
    assert rows[1]["value"] == "" and "t < MMD" in rows[1]["error"]


def test_bounds_overlap_table(tmp_path):
    out = tmp_path / "b"
    assert main(["bounds", "overlap", "--param", "n=10", "--param", "k=3", "--out", str(out)]) == 0
    rows = read_csv(out / "bounds.csv")
    assert [float(r["value"]) for r in rows] == [0.46875, 0.1875, 0.21875, 0.125]
    assert [int(r["Z"]) for r in rows] == [0, 1, 2, 3]


def test_bounds_bad_params():
    assert main(["bounds", "type1_line", "--param", "n=10"]) == 2
    assert main(["bounds", "type1_line", "--param", "zz=1"]) == 2
    assert main(["bounds", "nonsense"]) == 2


def test_eval_number():
    assert eval_number("exp(e)") == math.exp(math.e)
    assert eval_number("10**6") == 1e6
    assert eval_number("e^2") == math.e ** 2
    assert eval_number("-3.5") == -3.5
    with pytest.raises(Exception):
        eval_number("__import__('os')")


# --- risk and compare -----------------------------------------------------------

def test_risk_grid_rows_and_heatmap(tmp_path):
    doc = small_doc(geometry={"kind": "line", "n": 40, "min_size": 2, "max_size": 38},
                    grid={"min_sizes": [1, 3, 5, 8, 10], "max_sizes": [20, 25, 30, 35, 38]}, trials=10)
    out = tmp_path / "r"
    assert main(["risk", write_config(tmp_path, doc), "--out", str(out), "--svg", "heat.svg"]) == 0
    rows = read_csv(out / "risk.csv")
    assert len(rows) == 25
    assert [(int(r["min_size"]), int(r["max_size"])) for r in rows[:3]] == [(1, 20), (1, 25), (1, 30)]
    assert all(0 <= float(r["risk"]) / 2 <= 1 for r in rows)
    root = ET.parse(out / "heat.svg").getroot()
    assert root.tag.endswith("svg")
    text = (out / "heat.svg").read_text()
    # self-contained: vector cells only, no embedded or linked images
    assert "<image" not in text and 'href="http' not in text


def test_risk_single_point_equals_direct(tmp_path):
    doc = small_doc()
    out = tmp_path / "r"
    assert main(["risk", write_config(tmp_path, doc), "--out", str(out)]) == 0
    row, = read_csv(out / "risk.csv")
    est = estimate_risk(ExperimentConfig.from_dict(doc))
    # repr formatting round-trips exactly
    for key, want in [("type1", est.type1), ("type2_worst", est.type2_worst), ("risk", est.risk),
                      ("hw1", est.hw1), ("hw2", est.hw2), ("t", est.threshold)]:
        assert float(row[key]) == want


def test_risk_overrides(tmp_path):
    out = tmp_path / "r"
    assert main(["risk", write_config(tmp_path, small_doc()), "--out", str(out), "--seed", "9",
                 "--trials", "7"]) == 0
    row, = read_csv(out / "risk.csv")
    assert row["seed"] == "9" and row["trials"] == "7"
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 9 and man["job"]["config"]["trials"] == 7


def test_risk_exhaustive_budget_exit_3(tmp_path):
    doc = small_doc(placement="exhaustive", exhaustive_budget=3)
    assert main(["risk", write_config(tmp_path, doc)]) == 3


def test_risk_bad_config(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{ not json")
    assert main(["risk", str(p)]) == 2
    assert main(["risk", write_config(tmp_path, small_doc(trials=0))]) == 2
    assert main(["risk", str(tmp_path / "missing.json")]) == 2


def test_compare_columns(tmp_path):
    doc = small_doc(pairs=[[5, 15], [8, 12]], trials=10)
    out = tmp_path / "c"
    assert main(["compare", write_config(tmp_path, doc), "--out", str(out), "--svg", "bars.svg"]) == 0
    rows = read_csv(out / "compare.csv")
    assert len(rows) == 2
    assert {"ttest", "smirnov", "mmd", "mmd_type1", "ttest_hw"} <= set(rows[0])
    ET.parse(out / "bars.svg")


# --- manifests -----------------------------------------------------------------

def _replay_same(tmp_path, argv, name):
    out = tmp_path / "first"
    assert main(argv + ["--out", str(out)]) == 0
    again = tmp_path / "again"
    assert main(["replay", str(out / "manifest.json"), "--out", str(again)]) == 0
    return (out / name).read_bytes() == (again / name).read_bytes()


def test_replay_risk(tmp_path):
    cfg = write_config(tmp_path, small_doc(grid={"min_sizes": [5, 6], "max_sizes": [10, 15]}))
    assert _replay_same(tmp_path, ["risk", cfg, "--svg", "h.svg"], "risk.csv")
    assert (tmp_path / "again" / "h.svg").read_bytes() == (tmp_path / "first" / "h.svg").read_bytes()


def test_replay_detect_and_bounds(tmp_path):
    f = write_samples(tmp_path / "s.csv", np.random.default_rng(1).normal(size=20))
    assert _replay_same(tmp_path, ["detect", f, "--n", "20", "--min-size", "3", "--max-size", "9",
                                   "--threshold", "0.2"], "detect.csv")
    sub = tmp_path / "bounds"
    sub.mkdir()
    assert _replay_same(sub, ["bounds", "type1_ring", "--param", "n=10,20", "--param", "t=1", "--param", "I_min=3",
                               "--param", "I_max=5"], "bounds.csv")


def test_manifest_contents(tmp_path):
    out = tmp_path / "m"
    assert main(["bounds", "iterated_log", "--param", "n=100", "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "bounds" and man["tool"] == "mmdscan"
    assert man["outputs"]["csv"]["path"] == "bounds.csv"
    assert len(man["outputs"]["csv"]["sha256"]) == 64
    assert {"started", "finished", "version", "job"} <= set(man)


def test_replay_bad_manifest(tmp_path):
    p = tmp_path / "m.json"
    p.write_text("nope")
    assert main(["replay", str(p), "--out", str(tmp_path / "o")]) == 2
