from __future__ import annotations

import csv
import io
import json

import numpy as np
import pytest

from isomlab import cli
from isomlab.reports import ANCHORS, ExperimentConfig, Report, Row, parse_tolerances, to_plain


@pytest.fixture
def files(tmp_path):
    def write(name, data):
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return str(path)

    lp = lambda p, d: {"kind": "lp", "p": p, "dim": d}  # noqa: E731
    return {
        "a": write("a.json", {"dist": [[0, 1, 2], [1, 0, 1.5], [2, 1.5, 0]]}),
        "b": write("b.json", {"dist": [[0, 3, 2], [3, 0, 2], [2, 2, 0]]}),
        "pt": write("pt.json", {"dist": [[0]]}),
        "pair2": write("pair2.json", {"dist": [[0, 2], [2, 0]]}),
        "triangle": write("triangle.json", {"dist": [[0, 1, 1], [1, 0, 1], [1, 1, 0]]}),
        "bad": write("bad.json", {"dist": [[0, 1, 3], [1, 0, 1], [3, 1, 0]]}),
        "linear": write("linear.json", {"map": "linear", "matrix": [[0, 1], [1, 0]], "eps": 0.1, "V": lp(2, 2), "W": lp(2, 2)}),
        "noisy": write(
            "noisy.json",
            {"map": "noisy_linear", "matrix": [[0, 1], [-1, 0]], "noise": 0.05, "eps": 0.1, "V": lp(2, 2), "W": lp(2, 2)},
        ),
        "sqrt": write("sqrt.json", {"map": "f_phi", "phi": "sqrt_scaled", "eps": 0.01, "V": lp(2, 2), "plane": lp(2, 2)}),
        "proj": write("proj.json", {"map": "linear", "matrix": [[1, 0]], "V": lp(2, 2), "W": lp(2, 1)}),
    }


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    return code, json.loads(out)


def rows(report):
    return {r["claim"]: r for r in report["rows"]}


def test_gh_examples(capsys, files):
    code, rep = run_json(capsys, "gh", "--x", files["a"], "--y", files["a"])
    assert code == 0 and rep["results"]["value"] == 0
    code, rep = run_json(capsys, "gh", "--x", files["pt"], "--y", files["pair2"])
    assert code == 0 and rep["results"]["value"] == 1
    assert all(r["status"] in ("pass", "report") for r in rep["rows"])


def test_gh_scale(capsys, files):
    _, base = run_json(capsys, "gh", "--x", files["a"], "--y", files["b"])
    code, rep = run_json(capsys, "gh", "--x", files["a"], "--y", files["b"], "--scale", "3")
    assert code == 0
    assert rep["results"]["value"] == 3 * base["results"]["value"]
    assert rows(rep)["d_GH(sX, sY) == s d_GH(X, Y)"]["status"] == "pass"


def test_gh_budget_downgrades_to_bounds(capsys, files):
    code, rep = run_json(capsys, "gh", "--x", files["a"], "--y", files["b"], "--budget-nodes", "1")
    assert code == 0
    assert not rep["results"]["branch_and_bound"]["exact"]
    bracket = rows(rep)["branch-and-bound budget exhausted; bracket"]
    assert bracket["status"] == "report"
    assert bracket["value"][0] <= rep["results"]["value"] <= bracket["value"][1]


def test_scaling_table(capsys, files):
    code, rep = run_json(capsys, "scaling", "--x", files["pair2"], "--y", files["triangle"], "--lambdas", "1,2,4")
    assert code == 0
    assert [t["ratio"] for t in rep["results"]["table"]] == [1.0, 2.0, 4.0]
    code, rep = run_json(capsys, "scaling", "--x", files["a"], "--lambdas", "1,2")
    assert [t["value"] for t in rep["results"]["table"]] == [0.0, 0.0]


def test_scaling_rejects_zero(capsys, files):
    code, _, err = run(capsys, "scaling", "--x", files["a"], "--lambdas", "0,1")
    assert code == 2 and "positive" in err


def test_recover_exact_isometry(capsys, files):
    code, rep = run_json(capsys, "recover", "--map", files["linear"])
    bounds = [r for r in rep["rows"] if r["anchor"].startswith("bound-")]
    assert code == 0 and len(bounds) == 5
    assert all(r["status"] == "pass" and r["value"] == 0 for r in bounds)


def test_recover_noisy_isometry(capsys, files):
    code, rep = run_json(capsys, "recover", "--map", files["noisy"])
    assert code == 0
    assert rows(rep)["sup ||f - U|| <= 2eps at radius 10.0"]["status"] == "pass"


def test_recover_sqrt_counterexample_is_expected_fail(capsys, files):
    code, rep = run_json(capsys, "recover", "--map", files["sqrt"], "--radius", "4")
    assert code == 0
    assert rows(rep)["sup ||f - U|| <= 10eps at radius 4.0"]["status"] == "expected-fail"
    assert rep["results"]["eps_audit"] <= 0.01


def test_bm(capsys):
    code, rep = run_json(capsys, "bm", "--v", "l1:2", "--w", "linf:2", "--restarts", "2")
    assert code == 0 and rep["results"]["estimate"]["value"] <= 1e-3
    assert "error_bars" in rep["results"]["estimate"]


def test_embed_and_simplex(capsys, files):
    code, rep = run_json(capsys, "embed", "--s", files["triangle"], "--w", "l2:2")
    assert code == 0 and rep["results"]["embedding"]["residual"] <= 1e-9
    code, rep = run_json(capsys, "simplex", "--w", "linf:3", "--m", "8")
    assert code == 0 and rep["results"]["equilateral"]["residual"] == 0
    code, rep = run_json(capsys, "simplex", "--w", "linf:2", "--m", "5", "--restarts", "4")
    assert code == 0 and rep["rows"][0]["status"] == "report"


def test_borsuk(capsys, files):
    code, rep = run_json(capsys, "borsuk", "--map", files["proj"], "--radii", "1,10,100")
    assert code == 0
    assert [w["distortion_lb"] for w in rep["results"]["witnesses"]] == [2.0, 20.0, 200.0]


def test_csv_schema(capsys, files):
    code, out, _ = run(capsys, "gh", "--x", files["a"], "--y", files["b"], "--format", "csv")
    table = list(csv.reader(io.StringIO(out)))
    assert table[0] == ["experiment", "claim", "anchor", "value", "tolerance", "status"]
    assert all(row[0] == "gh" for row in table[1:])


def test_out_file_matches_stdout(capsys, files, tmp_path):
    _, out, _ = run(capsys, "gh", "--x", files["a"], "--y", files["b"])
    target = tmp_path / "rep.json"
    code, printed, _ = run(capsys, "gh", "--x", files["a"], "--y", files["b"], "--out", str(target))
    assert code == 0 and printed == "" and target.read_text() == out


def test_reports_are_reproducible(capsys, files):
    a = run(capsys, "embed", "--s", files["a"], "--w", "l1:2", "--seed", "3")[1]
    b = run(capsys, "embed", "--s", files["a"], "--w", "l1:2", "--seed", "3")[1]
    assert a == b


@pytest.mark.parametrize(
    "argv",
    [
        ["gh"],
        ["gh", "--x", "missing.json"],
        ["nonsense"],
        ["bm", "--v", "l1:2", "--w", "warp:2"],
        ["simplex", "--w", "linf:2", "--m", "1"],
    ],
)
def test_usage_errors_exit_two(capsys, argv):
    assert cli.main(argv) == 2


def test_invalid_metric_exits_two(capsys, files):
    code, _, err = run(capsys, "gh", "--x", files["bad"])
    assert code == 2 and "triangle" in err


def test_tolerance_flags(capsys, files):
    code, rep = run_json(capsys, "gh", "--x", files["a"], "--tol", "agree=1e-6")
    assert rep["inputs"]["config"]["tolerances"]["agree"] == 1e-6
    assert run(capsys, "gh", "--x", files["a"], "--tol", "agree=0")[0] == 2
    assert run(capsys, "gh", "--x", files["a"], "--tol", "agree")[0] == 2


def test_failed_row_exits_three(capsys, monkeypatch, files):
    def failing(args, cfg):
        rep = Report("gh", cfg)
        rep.add(Row("forced", "gh-two-map-formulation", 1.0, 1e-12, "fail"))
        return rep

    monkeypatch.setattr(cli, "cmd_gh", failing)
    assert run(capsys, "gh", "--x", files["a"])[0] == 3


def test_report_rows_validate_status_and_anchor():
    with pytest.raises(ValueError):
        Row("x", "gh-two-map-formulation", 0, None, "maybe")
    with pytest.raises(ValueError):
        Row("x", "no-such-anchor", 0, None, "pass")
    rep = Report("x", ExperimentConfig())
    rep.add(Row("x", "gh-two-map-formulation", 0, None, "expected-fail"))
    assert rep.exit_code == 0
    assert set(json.loads(rep.dumps())["provenance"]) <= set(ANCHORS)


def test_serialisation_round_trips_floats():
    x = 0.1 + 0.2
    data = json.loads(json.dumps(to_plain({"v": np.float64(x), "inf": np.inf, "a": np.arange(2)})))
    assert data == {"v": x, "inf": "inf", "a": [0, 1]}


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(format="xml")
    with pytest.raises(ValueError):
        parse_tolerances(["bogus=1"])
