import csv
import json

import pytest

from sigmaspace import cli


@pytest.fixture
def space(tmp_path):
    def make(name, *params):
        path = tmp_path / f"{name}.json"
        args = ["export", name, "--out", str(path)]
        for p in params:
            args += ["--param", p]
        assert cli.main(args) == 0
        return str(path)
    return make


def run_json(args, capsys):
    code = cli.main([*args, "--json"])
    return code, json.loads(capsys.readouterr().out)


def test_check_exit_codes(space, capsys):
    code, doc = run_json(["check", space("kossowski"), "--grid", "3"], capsys)
    assert code == 0 and doc["verdict"] == "pass"
    code, doc = run_json(["check", space("discussion1"), "--grid", "3"], capsys)
    assert code == 1
    s = doc["samples"][0]
    assert s["left_derivative"] == pytest.approx(3, abs=1e-3)
    assert s["right_derivative"] == pytest.approx(1, abs=1e-3)
    code, doc = run_json(["check", space("euclidean")], capsys)
    assert code == 1 and doc["verdict"].startswith("fail")


def test_malformed_space_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"dim": 2, "alpha": 1, "domain": [[-1, 1], [-1, 1]], '
                   '"metric": [["1", "0"], ["0", "x2 +"]]}')
    assert cli.main(["check", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "metric[1][1]" in err and "offset 4" in err
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert cli.main(["check", str(broken)]) == 2
    assert "offset 1" in capsys.readouterr().err
    assert cli.main(["check", str(tmp_path / "missing.json")]) == 2


def test_usage_errors(capsys):
    assert cli.main([]) == 2
    assert cli.main(["baldomero", "--r", "-1", "--psi", "1"]) == 2
    assert cli.main(["baldomero", "--r", "1", "--psi", "sin("]) == 2
    assert cli.main(["export", "distorted_normal", "--param", "amplitude=0.9"]) == 2
    assert cli.main(["export", "kossowski", "--param", "oops"]) == 2
    capsys.readouterr()


def test_baldomero(tmp_path, capsys):
    out = tmp_path / "b.csv"
    code, doc = run_json(["baldomero", "--r", "1", "--psi", "1", "--out", str(out)], capsys)
    assert code == 0 and doc["verdict_order"] >= 3
    assert doc["f_prime_zero_formula"] == pytest.approx(2 ** -0.5)
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["t", "F", "dF"] and len(rows) == 42
    orders = list(csv.reader((tmp_path / "b_orders.csv").open()))
    assert [r[0] for r in orders] == ["order", "0", "1", "2", "3"]


def test_baldomero_with_parameters(capsys):
    code, doc = run_json(["baldomero", "--r", "2", "--psi", "l1 + l2*x", "--lambda", "1.5,0.2",
                          "--orders", "2"], capsys)
    assert code == 0 and doc["lambda"] == [1.5, 0.2]


def test_geodesic(space, tmp_path, capsys):
    out = tmp_path / "g.csv"
    k = space("kossowski")
    code, doc = run_json(["geodesic", k, "--start", "0,0.5", "--velocity", "0,1",
                          "--tspan", "0,0.3", "--samples", "11", "--out", str(out)], capsys)
    assert code == 0 and doc["status"] == "ok" and doc["max_residual"] <= 1e-6
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["param", "x1", "x2", "v1", "v2", "speed2", "residual"] and len(rows) == 12
    code, doc = run_json(["geodesic", k, "--start", "0,0", "--velocity", "0,1", "--tspan", "0,0.3"], capsys)
    assert code == 1 and doc["status"] == "halted_near_sigma"
    assert cli.main(["geodesic", k, "--start", "0,2", "--velocity", "0,1", "--tspan", "0,1"]) == 2
    assert cli.main(["geodesic", k, "--start", "0", "--velocity", "0,1", "--tspan", "0,1"]) == 2
    capsys.readouterr()


def test_normalize(space, tmp_path, capsys):
    out = tmp_path / "chart.json"
    code, doc = run_json(["normalize", space("normal_form", "alpha=2"), "--grid", "3",
                          "--out", str(out)], capsys)
    assert code == 0 and doc["verdict"] == "pass"
    assert json.loads(out.read_text()) == doc
    code, doc = run_json(["normalize", space("discussion1"), "--grid", "3"], capsys)
    assert code == 1 and doc["verdict"].startswith("fail")
    code, doc = run_json(["normalize", space("esp"), "--grid", "3"], capsys)
    assert code == 1 and doc["verdict"] == "fail(NotGeodesicField)"
    assert cli.main(["normalize", space("esp"), "--field", "nope"]) == 2
    capsys.readouterr()


def test_export_to_stdout_is_loadable(tmp_path, capsys):
    assert cli.main(["export", "esp", "--param", "m=3", "--param", "alpha=0.5"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["dim"] == 3 and doc["alpha"] == 0.5
    path = tmp_path / "esp.json"
    path.write_text(json.dumps(doc))
    assert cli.load_space(path).metric.dim == 3
