import json

import pytest

from zeronoise import cli


def test_precedence(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"dt": 0.01, "n_paths": 50, "seed": 3}))
    env = {"ZERONOISE_N_PATHS": "70", "ZERONOISE_SEED": "4"}
    cfg = cli.resolve({"seed": 5}, str(conf), env=env)
    assert cfg.dt == 0.01        # config over default
    assert cfg.n_paths == 70     # env over config
    assert cfg.seed == 5         # flag over env
    assert cfg.horizon == cli.RunConfig().horizon


def test_env_lists_and_params():
    cfg = cli.resolve({}, env={"ZERONOISE_EPS": "0.1,0.01", "ZERONOISE_PARAMS": "rho=0.3"})
    assert cfg.eps == [0.1, 0.01]
    assert cfg.params == {"rho": 0.3}


def test_unknown_config_key(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"nonsense": 1}))
    with pytest.raises(ValueError):
        cli.resolve({}, str(conf), env={})


def test_analyze(tmp_path, capsys):
    out = tmp_path / "a"
    code = cli.main(["analyze", "--drift", "sign(x)*abs(x)^0.5", "--eps", "0.5,0.1", "-o", str(out)])
    assert code == cli.EXIT_OK
    data = json.loads((out / "analysis.json").read_text())
    assert data["limit_law"]["p"] == {"value": 0.5, "method": "quadrature"}
    assert len(data["limit_law"]["p_eps_trace"]) == 2
    assert (out / "psi.csv").read_text().startswith("# config_sha256=")
    assert "regime: repulsive" in capsys.readouterr().out


def test_analyze_unsupported(tmp_path):
    code = cli.main(["analyze", "--builtin", "example2", "--eps", "0.5", "-o", str(tmp_path)])
    assert code == cli.EXIT_UNSUPPORTED


def test_syntax_error_exit_code(capsys):
    assert cli.main(["analyze", "--drift", "x +* 2"]) == cli.EXIT_ERROR
    assert "column 4" in capsys.readouterr().err


def test_simulate(tmp_path, monkeypatch):
    monkeypatch.setenv("ZERONOISE_N_PATHS", "30")
    code = cli.main(["simulate", "--builtin", "example1", "--param", "rho=0.5", "--eps", "0.1",
                     "--dt", "0.01", "-o", str(tmp_path)])
    assert code == cli.EXIT_OK
    rows = (tmp_path / "paths.csv").read_text().splitlines()
    assert len(rows) == 3 + 30
    assert (tmp_path / "figure.svg").exists()


def test_verify_filter_and_tighten(tmp_path):
    out = tmp_path / "v.json"
    assert cli.main(["verify", "--filter", "zero-drift", "--json", str(out)]) == cli.EXIT_OK
    assert json.loads(out.read_text())["results"][0]["passed"] is True
    assert cli.main(["verify", "--filter", "7", "--tighten"]) == cli.EXIT_ACCEPTANCE


def test_verify_unknown_filter():
    assert cli.main(["verify", "--filter", "no-such-thing"]) == cli.EXIT_ERROR
