from __future__ import annotations

import io
import json
import re

import pytest

from symsq.cli import EXIT_CONTRACT, EXIT_OK, EXIT_USAGE, cmd_dispatch, dumps


def run(*argv):
    buf = io.StringIO()
    code = cmd_dispatch(list(argv), buf)
    return code, buf.getvalue()


def test_exponents_command():
    code, text = run("exponents", "--kappa", "2")
    assert code == EXIT_OK
    rep = json.loads(text)
    assert rep["subconvex_interval"] == ["13/64", "3/8"]
    assert "13/64" in text and "3/8" in text


def test_voronoi_check_example():
    code, text = run("voronoi-check", "--c", "3", "--a", "1", "--X", "10")
    assert code == EXIT_OK
    assert json.loads(text)["rel_err"] < 1e-6


def test_moment_cross_check_example():
    code, text = run("moment", "--P", "5", "--kappa", "2", "--k", "12", "--ell", "1", "--Y", "1",
                     "--cross-check")
    assert code == EXIT_OK
    assert json.loads(text)["rel_gap"] < 1e-4


def test_kloosterman_contracts():
    code, text = run("kloosterman", "--m", "3", "--n", "5", "--c", "91")
    out = json.loads(text)
    assert code == EXIT_OK
    assert out["direct"] == pytest.approx(out["crt"], abs=1e-10)


def test_floats_at_seventeen_digits():
    assert dumps({"x": 0.1}) == '{"x": 0.10000000000000001}'
    _, text = run("kloosterman", "--m", "1", "--n", "2", "--c", "7")
    num = json.loads(text)["weil_bound"]
    digits = re.search(r'"weil_bound": ([0-9.e+-]+)', text).group(1)
    assert float(digits) == num and len(digits.replace(".", "").lstrip("0")) >= 16


def test_usage_errors_exit_one():
    assert run("exponents", "--tol", "1")[0] == EXIT_USAGE
    assert run("nonsense")[0] == EXIT_USAGE
    assert run()[0] == EXIT_USAGE
    # only the level-5 weight-4 newform is available
    assert run("moment", "--P", "7")[0] == EXIT_USAGE


def test_failed_contract_exits_two():
    code, text = run("petersson-check", "--k", "12", "--c-cap", "2", "--uncertified")
    assert code == EXIT_CONTRACT
    assert json.loads(text)["contracts"][0]["passed"] is False


def test_numerical_error_exits_two():
    code, text = run("voronoi-check", "--c", "3", "--X", "10", "--precision", "100")
    assert code == EXIT_CONTRACT
    assert json.loads(text)["error"] == "PrecisionError"


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nm = 2\nn = 3\nc = 12\n")
    _, text = run("kloosterman", "--config", str(cfg))
    assert (json.loads(text)["m"], json.loads(text)["c"]) == (2, 12)
    _, text = run("kloosterman", "--config", str(cfg), "--c", "15")
    assert json.loads(text)["c"] == 15
    bad = tmp_path / "bad.cfg"
    bad.write_text("no equals sign\n")
    assert run("kloosterman", "--config", str(bad))[0] == EXIT_USAGE


def test_threads_environment(monkeypatch):
    monkeypatch.setenv("SYMSQ_THREADS", "0")
    assert run("exponents")[0] == EXIT_USAGE
    monkeypatch.setenv("SYMSQ_THREADS", "2")
    assert run("exponents")[0] == EXIT_OK
    # the flag wins over the environment
    monkeypatch.setenv("SYMSQ_THREADS", "0")
    assert run("exponents", "--threads", "1")[0] == EXIT_OK


def test_csv_output():
    code, text = run("kloosterman", "--m", "1", "--n", "2", "--c", "7", "--format", "csv")
    header, row = text.strip().splitlines()
    assert code == EXIT_OK
    assert dict(zip(header.split(","), row.split(",")))["c"] == "7"


def test_out_file(tmp_path):
    target = tmp_path / "r.json"
    code, text = run("eigen", "--n", "5", "--out", str(target))
    assert code == EXIT_OK and text == ""
    assert json.loads(target.read_text())["a"] == [1, -24, 252, -1472, 4830]
