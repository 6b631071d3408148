import json
import os
import subprocess
import sys

import pytest

from weightalloc.cli import main

EXP_SELF = '{"kind": "self", "marginal": {"kind": "exponential", "rate": 1}}'
IND = '{"kind": "indicator", "p": 0.9}'


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def three_rows(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("x,y\n1,10\n3,30\n2,20\n")
    return str(p)


# estimate ---------------------------------------------------------------------------

def test_estimate_example(capsys, three_rows):
    code, out, _ = _run(capsys, "estimate", "--data", three_rows, "--weight", '{"kind": "indicator", "p": 0.5}')
    assert code == 0
    assert json.loads(out)["estimate"] == 2.0


def test_estimate_premium_single_column(capsys, tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("x\n1\n2\n")
    code, out, _ = _run(capsys, "estimate", "--data", str(p), "--weight", '{"kind": "constant", "c": 1}',
                        "--variant", "premium")
    assert code == 0 and json.loads(out)["estimate"] == 1.5


def test_estimate_weight_from_file(capsys, tmp_path, three_rows):
    w = tmp_path / "w.json"
    w.write_text('{"kind": "indicator", "p": 0.5}')
    code, out, _ = _run(capsys, "estimate", "--data", three_rows, "--weight", f"@{w}")
    assert code == 0 and json.loads(out)["estimate"] == 2.0


def test_estimate_with_interval(capsys, tmp_path):
    lines = ["x,y"] + [f"{(k * 37) % 101},{k}" for k in range(200)]
    p = tmp_path / "big.csv"
    p.write_text("\n".join(lines) + "\n")
    code, out, _ = _run(capsys, "estimate", "--data", str(p), "--weight", IND, "--level", "0.95")
    assert code == 0
    rep = json.loads(out)
    assert rep["ci"]["lower"] <= rep["estimate"] <= rep["ci"]["upper"]
    assert rep["ci"]["level"] == 0.95


@pytest.mark.parametrize("content, needle", [("", "empty sample"), ("x,y\n", "empty sample"), ("x,y\n1,a\n", "")])
def test_estimate_data_errors(capsys, tmp_path, content, needle):
    p = tmp_path / "bad.csv"
    p.write_text(content)
    code, _, err = _run(capsys, "estimate", "--data", str(p), "--weight", IND)
    assert code == 3
    e = json.loads(err)
    assert e["exit_code"] == 3 and needle in e["message"]


def test_estimate_missing_file(capsys, tmp_path):
    code, _, err = _run(capsys, "estimate", "--data", str(tmp_path / "nope.csv"), "--weight", IND)
    assert code == 2 and json.loads(err)["error"] == "InvalidSpecError"


def test_estimate_bad_weight_json(capsys, three_rows):
    code, _, _ = _run(capsys, "estimate", "--data", three_rows, "--weight", "{oops")
    assert code == 2


def test_estimate_zero_denominator(capsys, three_rows):
    # ranks 1..3 map to 0.25, 0.5, 0.75: Indicator(0.9) vanishes on all of them
    code, _, err = _run(capsys, "estimate", "--data", three_rows, "--weight", IND, "--variant", "ratio")
    assert code == 4 and json.loads(err)["error"] == "ZeroDenominatorError"


def test_estimate_is_idempotent(capsys, three_rows):
    outs = {_run(capsys, "estimate", "--data", three_rows, "--weight", IND)[1] for _ in range(3)}
    assert len(outs) == 1


# true-value / variance --------------------------------------------------------------

def test_true_value_tce(capsys):
    code, out, _ = _run(capsys, "true-value", "--model", EXP_SELF, "--weight", IND)
    d = json.loads(out)
    assert code == 0 and d["quantity"] == "pi"
    assert d["value"] == pytest.approx(3.302585093, rel=1e-9)
    assert d["sigma_sq"] == pytest.approx(19.0, rel=1e-3)


def test_true_value_independent_mean(capsys):
    model = '{"kind": "independent", "marginalX": {"kind": "exponential", "rate": 2}, "marginalY": {"kind": "uniform"}}'
    code, out, _ = _run(capsys, "true-value", "--model", model, "--weight", '{"kind": "constant", "c": 1}')
    d = json.loads(out)
    assert code == 0 and d["quantity"] == "Pi"
    assert d["value"] == pytest.approx(0.5, rel=1e-9)


def test_true_value_ph(capsys):
    code, out, _ = _run(capsys, "true-value", "--model", EXP_SELF, "--weight", '{"kind": "ph", "nu": 0.8}')
    assert code == 0 and json.loads(out)["value"] == pytest.approx(1.25, rel=1e-8)


def test_true_value_reports_infinite_variance(capsys):
    code, out, _ = _run(capsys, "true-value", "--model", EXP_SELF, "--weight", '{"kind": "ph", "nu": 0.5}')
    d = json.loads(out)
    assert code == 0 and d["sigma_sq"] is None and "DivergenceError" in d["sigma_sq_error"]


def test_variance_methods(capsys, tmp_path):
    lines = ["x,y"] + [f"{(k * 37) % 101},{k}" for k in range(300)]
    p = tmp_path / "big.csv"
    p.write_text("\n".join(lines) + "\n")
    code, out, _ = _run(capsys, "variance", "--data", str(p), "--weight", IND)
    assert code == 0 and json.loads(out)["sigma_sq"] > 0
    a = _run(capsys, "variance", "--data", str(p), "--weight", IND, "--method", "bootstrap",
             "--seed", "7", "--bootstrap-b", "100")[1]
    b = _run(capsys, "variance", "--data", str(p), "--weight", IND, "--method", "bootstrap",
             "--seed", "7", "--bootstrap-b", "100")[1]
    assert a == b
    code, out, _ = _run(capsys, "variance", "--model", EXP_SELF, "--weight", IND, "--method", "oracle")
    assert json.loads(out)["sigma_sq"] == pytest.approx(19.0, rel=1e-3)


def test_variance_missing_inputs(capsys):
    assert _run(capsys, "variance", "--weight", IND, "--method", "oracle")[0] == 2
    assert _run(capsys, "variance", "--weight", IND)[0] == 2


# simulate ---------------------------------------------------------------------------

def _config(tmp_path, **kw):
    d = {
        "model": {"kind": "bvn", "muX": 0, "muY": 0, "sigmaX": 1, "sigmaY": 1, "rho": 0.5},
        "weight": {"kind": "indicator", "p": 0.9},
        "sample_sizes": [100, 200],
        "replications": 30,
        "master_seed": 1,
        "experiment": "coverage",
        "output_path": str(tmp_path / "out" / "nested"),
    }
    d.update(kw)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(d))
    return str(p)


def test_simulate_coverage(capsys, tmp_path):
    code, out, _ = _run(capsys, "simulate", _config(tmp_path))
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("n=100 ") and lines[1].startswith("n=200 ")
    assert "coverage=0." in lines[0] or "coverage=1.0" in lines[0]
    assert os.path.exists(tmp_path / "out" / "nested" / "coverage.csv")
    assert os.path.exists(tmp_path / "out" / "nested" / "coverage.json")


def test_simulate_overrides_and_idempotence(capsys, tmp_path):
    cfg = _config(tmp_path)
    args = ("simulate", cfg, "--seed", "9", "--level", "0.9", "--method", "plugin", "--workers", "2")
    first = _run(capsys, *args)[1]
    data1 = (tmp_path / "out" / "nested" / "coverage.json").read_bytes()
    second = _run(capsys, *args)[1]
    assert first == second
    assert data1 == (tmp_path / "out" / "nested" / "coverage.json").read_bytes()
    conf = json.loads(data1)["config"]
    assert conf["master_seed"] == 9 and conf["ci_level"] == 0.9 and conf["variance_method"] == "plugin"


def test_simulate_single_replication_warns(capsys, tmp_path):
    code, _, err = _run(capsys, "simulate", _config(tmp_path, replications=1, experiment="consistency"))
    assert code == 0 and "statistics degenerate" in err


def test_simulate_config_errors(capsys, tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{")
    assert _run(capsys, "simulate", str(p))[0] == 2
    assert _run(capsys, "simulate", _config(tmp_path, replications=0))[0] == 2


def test_simulate_abort_exit_code(capsys, tmp_path):
    cfg = _config(tmp_path, experiment="consistency", estimator="ratio", sample_sizes=[2])
    code, _, err = _run(capsys, "simulate", cfg)
    assert code == 5 and json.loads(err)["error"] == "ExperimentAbort"


# plumbing ---------------------------------------------------------------------------

@pytest.mark.parametrize("sub", [[], ["estimate"], ["true-value"], ["variance"], ["simulate"]])
def test_help(sub):
    r = subprocess.run([sys.executable, "-m", "weightalloc", *sub, "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    assert "usage:" in r.stdout


def test_estimate_help_lists_every_option():
    r = subprocess.run([sys.executable, "-m", "weightalloc", "estimate", "--help"], capture_output=True, text=True)
    for opt in ("--data", "--weight", "--variant", "--level", "--method", "--seed", "--bootstrap-b"):
        assert opt in r.stdout
