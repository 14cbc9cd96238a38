import csv
import io
import json

import pytest

from coherent_deal.cli import CommandLineApp


@pytest.fixture
def run():
    def invoke(*argv):
        out, err = io.StringIO(), io.StringIO()
        code = CommandLineApp(environ={}, stdout=out, stderr=err).run([str(a) for a in argv])
        return code, out.getvalue(), err.getvalue()
    return invoke


def _write_json(path, document):
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


@pytest.fixture
def two_point(tmp_path):
    return _write_json(tmp_path / "market.json", {
        "labels": ["up", "down"],
        "probs": [0.5, 0.5],
        "columns": {"X": [1.0, -1.0], "F": [1.0, 0.0]},
    })


def test_price_with_oracle(run, two_point):
    code, out, err = run("price", "--scenarios", two_point, "--group", "tailvar:0.5", "--claim", "F", "--oracle")
    assert code == 0, err
    payload = json.loads(out)
    assert payload["interval"] == pytest.approx([0.5, 0.5], abs=1e-9)
    assert payload["assets"] == ["X"]
    assert payload["oracle"]["agree"] is True


def test_price_with_explicit_group_file(run, two_point, tmp_path):
    group = _write_json(tmp_path / "group.json", {"type": "measures", "masses": [[0.5, 0.5]]})
    code, out, _ = run("price", "--scenarios", two_point, "--group", f"file:{group}", "--claim", "F")
    assert code == 0
    assert json.loads(out)["interval"] == pytest.approx([0.5, 0.5], abs=1e-9)


def test_risk_kinds(run, two_point):
    code, out, _ = run("risk", "--scenarios", two_point, "--variable", "X", "--measure", "tailvar:0.5")
    assert code == 0
    assert json.loads(out)["risk"] == pytest.approx(1.0)
    code, out, _ = run(
        "risk", "--scenarios", two_point, "--variable", "F", "--measure", "tailvar:0.5",
        "--kind", "contribution", "--wealth", "X"
    )
    payload = json.loads(out)
    assert payload["risk"] == pytest.approx(0.0)
    assert payload["measure"] == pytest.approx([0.0, 1.0])
    code, _, err = run("risk", "--scenarios", two_point, "--variable", "X", "--measure", "tailvar:0.5", "--kind", "factor")
    assert code == 2
    assert json.loads(err)["error"] == "usage"


def test_ftap(run, two_point, tmp_path):
    code, out, _ = run("ftap", "--scenarios", two_point, "--asset", "X", "--group", "tailvar:0.5")
    assert code == 0
    assert json.loads(out)["nsao"] == "holds"
    free = _write_json(tmp_path / "free.json", {"probs": [0.5, 0.5], "columns": {"X": [1.0, 1.0]}})
    code, out, err = run("ftap", "--scenarios", free, "--group", "tailvar:0.5")
    assert code == 4
    assert out == ""
    assert json.loads(err)["error"] == "nsao_violated"


def test_superrep_plan(run, two_point):
    code, out, _ = run("superrep", "--scenarios", two_point, "--group", "tailvar:0.5", "--claim", "F")
    assert code == 0
    plan = json.loads(out)
    assert plan["upper_price"] == pytest.approx(0.5, abs=1e-9)
    assert len(plan["tranches"]) == 1


def test_liquidity_csv(run, two_point):
    code, out, _ = run(
        "liquidity", "--scenarios", two_point, "--group", "tailvar:0.5", "--claim", "F",
        "--box", "-1:1", "--volumes", "1,4"
    )
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["v", "upper", "lower"]
    values = [[float(cell) for cell in row] for row in rows[1:]]
    assert values[0] == pytest.approx([1.0, 0.5, 0.5], abs=1e-9)
    assert values[1] == pytest.approx([4.0, 0.75, 0.25], abs=1e-9)
    code, _, _ = run("liquidity", "--scenarios", two_point, "--group", "tailvar:0.5", "--claim", "F", "--volumes", "1")
    assert code == 2


def test_call_delta(run, tmp_path):
    scenarios = _write_json(tmp_path / "delta.json", {
        "probs": [0.5, 0.5],
        "columns": {"X": [1.0, -1.0], "xi": [0.8, 1.2]},
    })
    code, out, _ = run(
        "delta", "--scenarios", scenarios, "--group", "tailvar:0.5", "--payoff", "call", "--xi", "xi",
        "--spot", 100, "--strike", 100, "--rate", 0, "--expiry", 1
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["derivative"] == pytest.approx([0.0, 1.2])
    assert payload["interval"] == pytest.approx([0.6, 0.6], abs=1e-9)


def test_estimate(run, tmp_path):
    samples = tmp_path / "samples.csv"
    samples.write_text("x,w\n0.125,4\n0.375,1\n0.625,3\n0.875,2\n", encoding="utf-8")
    code, out, _ = run("estimate", "--samples", samples, "--estimator", "wvar", "--column", "x", "--measure", "tailvar:0.5")
    assert code == 0
    assert json.loads(out)["estimate"] == pytest.approx(-0.25)
    code, out, _ = run(
        "estimate", "--samples", samples, "--estimator", "contribution", "--column", "x",
        "--wealth", "w", "--measure", "tailvar:0.5"
    )
    assert json.loads(out)["estimate"] == pytest.approx(0.625)
    code, out, _ = run(
        "estimate", "--samples", samples, "--estimator", "alphavar", "--column", "x",
        "--alpha", 2, "--resamples", 500, "--seed", 9
    )
    payload = json.loads(out)
    assert payload["seed"] == 9
    assert payload["resamples"] == 500
    code, _, _ = run("estimate", "--samples", samples, "--estimator", "betavar", "--column", "x", "--alpha", 2)
    assert code == 2


def test_convolve_file_measures(run, tmp_path):
    first = _write_json(tmp_path / "mu1.json", {"type": "discrete", "atoms": [[1.0 / 3.0, 0.5], [1.0, 0.5]]})
    second = _write_json(tmp_path / "mu2.json", {"type": "tailvar", "lambda": 2.0 / 3.0})
    code, out, _ = run("convolve", "--group", f"file:{first}", "--group", f"file:{second}", "--majorant")
    assert code == 0
    payload = json.loads(out)
    atoms = payload["measure"]["atoms"]
    assert [a for atom in atoms for a in atom] == pytest.approx([0.5, 0.5, 1.0, 0.5])
    majorant = payload["majorant"]["measure"]["atoms"]
    assert [a for atom in majorant for a in atom] == pytest.approx([1 / 3, 1 / 3, 2 / 3, 2 / 3])


def test_usage_and_data_errors(run, two_point, tmp_path):
    code, _, err = run("frobnicate")
    assert code == 2
    assert json.loads(err)["error"] == "usage"
    code, _, err = run("price", "--scenarios", tmp_path / "missing.json", "--group", "tailvar:0.5", "--claim", "F")
    assert code == 3
    assert json.loads(err)["error"] == "parse"
    code, _, _ = run("--threads", 0, "price", "--scenarios", two_point, "--group", "tailvar:0.5", "--claim", "F")
    assert code == 2
    code, _, err = run("price", "--scenarios", two_point, "--group", "tailvar:1.5", "--claim", "F")
    assert code == 3
    code, _, err = run("price", "--scenarios", two_point, "--group", "tailvar:0.5", "--claim", "G")
    assert code == 3
    assert "G" in json.loads(err)["message"]


def test_config_and_output_file(run, two_point, tmp_path):
    settings = _write_json(tmp_path / "settings.json", {"precision": 3})
    scenarios = _write_json(tmp_path / "y.json", {"probs": [0.5, 0.5], "columns": {"Y": [0.123456789, 0.2]}})
    target = tmp_path / "out" / "risk.json"
    code, out, _ = run(
        "--config", settings, "--output", target,
        "risk", "--scenarios", scenarios, "--variable", "Y", "--measure", "tailvar:1"
    )
    assert code == 0
    assert out == ""
    assert json.loads(target.read_text(encoding="utf-8"))["risk"] == -0.162


def test_convolve_output_reloads_as_a_measure(run, tmp_path):
    scenarios = _write_json(tmp_path / "y.json", {
        "probs": [0.25] * 4,
        "columns": {"Y": [1.0, 2.0, 3.0, 4.0], "X": [-1.5, -0.5, 0.5, 1.5]},
    })
    saved = tmp_path / "merged.json"
    code, _, err = run("--output", saved, "convolve", "--group", "tailvar:0.1", "--group", "tailvar:0.3")
    assert code == 0, err
    assert json.loads(saved.read_text(encoding="utf-8"))["measure"]["type"] == "discrete"

    code, out, err = run("risk", "--scenarios", scenarios, "--variable", "Y", "--measure", f"file:{saved}")
    assert code == 0, err
    assert json.loads(out)["risk"] == pytest.approx(-7.0 / 6.0)
    _, direct, _ = run("risk", "--scenarios", scenarios, "--variable", "Y", "--measure", "tailvar:0.3")
    assert json.loads(out)["risk"] == pytest.approx(json.loads(direct)["risk"])

    code, out, err = run("price", "--scenarios", scenarios, "--group", f"file:{saved}", "--claim", "Y", "--asset", "X")
    assert code == 0, err
    # Y = X + 2.5 is replicable
    assert json.loads(out)["interval"] == pytest.approx([2.5, 2.5], abs=1e-9)


def test_malformed_grid_and_masses_exit_cleanly(run, two_point, tmp_path):
    code, out, err = run(
        "liquidity", "--scenarios", two_point, "--group", "tailvar:0.5", "--claim", "F",
        "--box", "-1:1", "--volumes", "0:1:-3"
    )
    assert code == 2
    assert out == ""
    assert json.loads(err)["error"] == "usage"

    group = _write_json(tmp_path / "group.json", {"type": "measures", "masses": [[0.5, 0.5], ["half", 0.5]]})
    code, _, err = run("price", "--scenarios", two_point, "--group", f"file:{group}", "--claim", "F")
    assert code == 3
    report = json.loads(err)
    assert report["error"] == "parse"
    assert report["row"] == 2
    assert report["column"] == "masses"
