import json

import pytest

from fluxks.cli import (EXIT_CERT_FAIL, EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE, ConfigError, main,
                        parse_config)


def write(tmp_path, text, name="case.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_parse_defaults_and_types():
    cfg = parse_config("problem.n = 2  # dimension\n\nproblem.chi=1.5\nsweep.m = 0.1, 0.2\n"
                       "solver.stop_on_detect = no\n")
    assert cfg["problem.n"] == 2 and cfg["problem.chi"] == 1.5
    assert cfg["sweep.m"] == [0.1, 0.2]
    assert cfg["solver.stop_on_detect"] is False
    assert cfg["solver.cfl"] == 0.9 and cfg["init.mode"] == "uniform"


@pytest.mark.parametrize("text,fragment", [
    ("problem.n = 1\nnonsense\n", ":2: expected 'key = value'"),
    ("problem.q = 1\n", ":1: unknown key"),
    ("problem.n = one\n", ":1: bad value for problem.n"),
    ("problem.n = 1\nproblem.n = 2\n", ":2: duplicate key"),
    ("init.mode = magic\n", "init.mode must be one of"),
])
def test_parse_errors_carry_line_numbers(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(text, "x.cfg")


def test_certify_exit_codes(tmp_path, capsys):
    infeasible = write(tmp_path, "problem.n = 1\nproblem.chi = 2\nproblem.m = 0.5\n")
    assert main(["certify", "--config", infeasible, "--out", str(tmp_path / "a")]) == EXIT_INFEASIBLE
    assert "m_c" in capsys.readouterr().out
    low_chi = write(tmp_path, "problem.n = 2\nproblem.chi = 0.9\nproblem.m = 1\n", "b.cfg")
    assert main(["certify", "--config", low_chi, "--out", str(tmp_path / "b")]) == EXIT_INFEASIBLE
    assert "chi <= 1" in capsys.readouterr().out
    ok = write(tmp_path, "problem.n = 2\nproblem.chi = 2\nproblem.m = 0.5\n"
                         "certify.s_nodes = 200\ncertify.t_nodes = 200\n", "c.cfg")
    out = tmp_path / "c"
    assert main(["certify", "--config", ok, "--out", str(out)]) == EXIT_OK
    cert = json.loads((out / "cert.json").read_text())
    assert cert["passed"] is True
    assert (out / "constraints.csv").read_text().startswith("name,required,actual,satisfied")
    literal = write(tmp_path, "problem.n = 1\nproblem.chi = 2\nproblem.m = 1\n"
                              "feasibility.recipe = literal\ncertify.s_nodes = 150\n"
                              "certify.t_nodes = 150\n", "d.cfg")
    assert main(["certify", "--config", literal, "--out", str(tmp_path / "d")]) == EXIT_CERT_FAIL


def test_usage_errors(tmp_path):
    assert main(["certify", "--config", str(tmp_path / "missing.cfg")]) == EXIT_USAGE
    bad = write(tmp_path, "problem.n = 1\nbogus\n")
    assert main(["run", "--config", bad, "--out", str(tmp_path)]) == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == EXIT_USAGE


def test_run_writes_report_and_traces(tmp_path):
    cfg = write(tmp_path, "problem.n = 1\nproblem.chi = 2\nproblem.m = 0.4\nsolver.s_nodes = 65\n"
                          "solver.t_end = 0.2\ninit.mode = uniform\n")
    out = tmp_path / "run"
    assert main(["run", "--config", cfg, "--out", str(out)]) == EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    assert rep["outcome"] == "bounded_at_horizon"
    assert (out / "traces.csv").read_text().startswith("t,sup_u,min_defect,mass,dt\n")


def test_run_rejects_negative_custom_profile(tmp_path):
    prof = tmp_path / "u.csv"
    prof.write_text("r,u\n0,1\n0.5,-0.2\n1,1\n")
    cfg = write(tmp_path, "problem.n = 1\nproblem.chi = 2\nproblem.m = 0.4\nsolver.t_end = 0.1\n"
                          f"init.mode = custom\ninit.profile = {prof}\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_USAGE


def test_run_threshold_mode_infeasible(tmp_path):
    cfg = write(tmp_path, "problem.n = 1\nproblem.chi = 2\nproblem.m = 0.4\ninit.mode = threshold\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_INFEASIBLE


def test_sweep_errors(tmp_path):
    empty = write(tmp_path, "problem.n = 1\nproblem.chi = 2\nsweep.m =\nsolver.t_end = 0.1\n")
    assert main(["sweep", "--config", empty, "--out", str(tmp_path / "o")]) == EXIT_USAGE
    ok = write(tmp_path, "problem.n = 1\nproblem.chi = 2\nsweep.m = 0.3\nsolver.t_end = 0.1\n", "k.cfg")
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["sweep", "--config", ok, "--out", str(blocker / "sub")]) == EXIT_USAGE
    assert main(["sweep", "--config", ok, "--out", str(tmp_path / "o"), "--workers", "0"]) == EXIT_USAGE


def test_sweep_table_layout_and_order(tmp_path):
    cfg = write(tmp_path, "problem.n = 2\nproblem.m = 0.5\nsweep.chi = 2.0, 0.5\n"
                          "solver.s_nodes = 64\nsolver.t_end = 0.05\ninit.mode = concentrated\n"
                          "init.core_width = 0.1\n")
    out = tmp_path / "o"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == EXIT_OK
    lines = (out / "phase.csv").read_text().splitlines()
    assert lines[0] == "n,R,chi,m,feasible,outcome,t_detect,T_ext"
    assert [l.split(",")[2] for l in lines[1:]] == ["0.5", "2.0"]
    assert lines[1].split(",")[4] == "false" and lines[2].split(",")[4] == "true"
