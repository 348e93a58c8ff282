import csv
import json

import pytest

from probinformed import cli, harness


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def dist_csv(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("outcome_id,p\n0,0.4\n1,0.3\n2,0.2\n3,0.1\n")
    return path


def test_chain(capsys):
    code, out, _ = run(capsys, "chain")
    assert code == 0
    report = json.loads(out)
    assert report["L"] == 10 and report["T"] == 20 and report["n"] == 10
    assert report["v1_below_v0"] is True
    assert report["detected_outcomes"] == 184756
    assert abs(report["pi"] + report["complement"] - 1) < 1e-12


def test_chain_sweep(capsys, tmp_path):
    out_path = tmp_path / "sweep.csv"
    code, out, _ = run(capsys, "chain", "--sweep-p1", "0.1,0.9", "--sweep-p2", "0.5", "--out", str(out_path))
    assert code == 0 and out == ""
    rows = list(csv.DictReader(out_path.open()))
    assert [(r["p1"], r["v1_below_v0"]) for r in rows] == [("0.1", "True"), ("0.9", "False")]


def test_chain_sweep_needs_both(capsys):
    code, _, err = run(capsys, "chain", "--sweep-p1", "0.1")
    assert code == 1 and "go together" in err


def test_compare(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 5, "L": 2, "T": 3, "p1": 0.5, "p2": 0.5, "reps": 3}))
    code, out, _ = run(capsys, "compare", "--config", str(cfg), "--n", "2,4", "--estimators", "pi0,pi1")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == ",".join(harness.COMPARE_COLUMNS)
    assert [line.split(",")[:3] for line in lines[1:]] == [
        ["pi0", "2", "3"], ["pi1", "2", "3"], ["pi0", "4", "3"], ["pi1", "4", "3"],
    ]


def test_compare_seed_override(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 5, "L": 2, "T": 3, "reps": 2}))
    _, a, _ = run(capsys, "compare", "--config", str(cfg))
    _, b, _ = run(capsys, "compare", "--config", str(cfg), "--seed", "6")
    _, c, _ = run(capsys, "compare", "--L", "2", "--T", "3", "--reps", "2", "--seed", "6")
    assert a != b and b == c


@pytest.mark.parametrize(
    "argv",
    [
        ["compare"],
        ["compare", "--seed", "-1"],
        ["compare", "--seed", str(2**64)],
        ["compare", "--seed", "1", "--estimators", "pi9"],
        ["compare", "--seed", "1", "--config", "/nonexistent.json"],
        ["hyptest"],
        ["hyptest", "--seed", "1", "--level", "1.5"],
        ["hyptest", "--seed", "1", "--network", "g.txt"],
        ["chain", "--p1", "2"],
        ["frobnicate"],
        [],
    ],
)
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 1
    assert err


def test_hyptest(capsys):
    code, out, _ = run(capsys, "hyptest", "--L", "3", "--T", "6", "--p1", "0.3", "--p2", "0.6", "--n", "200", "--seed", "1")
    assert code == 0
    res = json.loads(out)
    assert res["estimator"] == "pi1" and res["n"] == 200
    assert res["decision"] in ("reject", "retain")
    code, out, _ = run(capsys, "hyptest", "--L", "3", "--T", "6", "--n", "200", "--seed", "1", "--estimators", "pi2,pi1")
    assert json.loads(out)["estimator"] == "pi2"


def test_hyptest_network(capsys, tmp_path):
    (tmp_path / "g.txt").write_text("0 1\n")
    (tmp_path / "s.csv").write_text("node,time\n")
    code, out, _ = run(
        capsys, "hyptest", "--network", str(tmp_path / "g.txt"), "--schedule", str(tmp_path / "s.csv"),
        "--T", "2", "--seed", "3",
    )
    assert code == 0 and json.loads(out)["pi_hat"] == 1.0


def test_oracle_ok(capsys, tmp_path):
    code, out, err = run(capsys, "oracle", "--budget", "4", "--out", str(tmp_path / "r.json"))
    assert code == 0 and out == ""
    report = json.loads((tmp_path / "r.json").read_text())
    assert report["failed"] == 0 and report["checked"] > 0
    assert "checked" in err


def test_oracle_failure_exit_code(capsys, monkeypatch):
    def failing(budget):
        return {"checked": 1, "failed": 1, "unattainable": 0, "max_discrepancy": 0.5, "entries": []}

    monkeypatch.setattr(harness, "run_oracle_suite", failing)
    code, _, err = run(capsys, "oracle")
    assert code == 2 and "1 failed" in err


def test_design(capsys, tmp_path, dist_csv):
    out_path = tmp_path / "design.csv"
    code, out, _ = run(capsys, "design", "--dist", str(dist_csv), "--event", "0,1,2,3", "--n", "10", "--out", str(out_path))
    assert code == 0
    summary = json.loads(out)
    assert summary["exact_v1"] < summary["v1_plain"]
    rows = list(csv.DictReader(out_path.open()))
    assert [r["outcome_id"] for r in rows] == ["0", "1", "2", "3"]
    assert abs(sum(float(r["p_prime"]) for r in rows) - 1) < 1e-12


def test_design_unknown_outcome(capsys, dist_csv):
    code, _, err = run(capsys, "design", "--dist", str(dist_csv), "--event", "7", "--n", "3")
    assert code == 1 and "error" in err


def test_design_warns_on_excluded_mass(capsys, dist_csv):
    with pytest.warns(UserWarning, match="unsampled"):
        code, out, _ = run(capsys, "design", "--dist", str(dist_csv), "--event", "0,1,2,3", "--n", "3")
    assert code == 0 and json.loads(out)["excluded_mass"] > 0
