import json
import os
import subprocess
import sys

import pytest

from mvmilstein.cli import execute_command, main
from mvmilstein.config import (load_config, parse_config, parse_step,
                               scheme_entries, write_config_echo)
from mvmilstein.errors import ConfigError


def _minimal(**overrides):
    cfg = {
        "model": {"preset": "double_well.case2"},
        "scheme": {"kind": "taming_milstein", "taming": "tanh",
                   "dt": "2^-4", "N": 16},
        "seed": 1,
    }
    cfg.update(overrides)
    return cfg


def _write(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def test_preset_resolves_paper_parameters():
    cfg = load_config(_minimal())
    p = cfg.model.params
    assert (p["lambda1"], p["lambda2"], p["mu1"], p["mu2"]) == (5, 1, .1, .1)
    assert cfg.model.initial_law.as_dict() == {"kind": "point",
                                               "value": [0.0]}
    assert cfg.scheme["T"] == 1.0  # preset horizon


def test_defaults_materialised():
    cfg = load_config(_minimal())
    assert cfg.scheme["wiktorsson_K"] == 20
    assert cfg.scheme["blow_up_threshold"] == 1e10
    assert cfg.scheme["cross_N_ceiling"] == 64
    assert cfg.scheme["include_measure_term"] is False


def test_parse_step_forms():
    assert parse_step("2^-6") == 2.0 ** -6
    assert parse_step("2**-6") == 2.0 ** -6
    assert parse_step(0.25) == 0.25
    with pytest.raises(ConfigError):
        parse_step("fast")
    with pytest.raises(ConfigError):
        parse_step(-0.1)


def test_unknown_taming_kind_named_in_error():
    data = _minimal()
    data["scheme"]["taming"] = "cosh"
    with pytest.raises(ConfigError, match="cosh"):
        load_config(data)


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="bogus"):
        load_config(_minimal(bogus=1))
    data = _minimal()
    data["scheme"]["step"] = 0.1
    with pytest.raises(ConfigError, match="step"):
        load_config(data)
    data2 = _minimal()
    data2["model"]["flavour"] = "hot"
    with pytest.raises(ConfigError, match="flavour"):
        load_config(data2)


def test_unknown_preset_rejected():
    data = _minimal()
    data["model"]["preset"] = "triple_well.case9"
    with pytest.raises(ConfigError, match="triple_well"):
        load_config(data)


def test_measure_term_above_ceiling_rejected():
    data = _minimal()
    data["scheme"]["include_measure_term"] = True
    data["scheme"]["N"] = 128
    with pytest.raises(ConfigError, match="cross_N_ceiling"):
        load_config(data)


def test_seed_validation_and_override():
    with pytest.raises(ConfigError, match="seed"):
        load_config(_minimal(seed=-3))
    cfg = load_config(_minimal(), seed_override=9)
    assert cfg.seed == 9


def test_env_output_dir_override(tmp_path, monkeypatch):
    monkeypatch.setenv("MVMILSTEIN_OUTPUT_DIR", str(tmp_path / "envdir"))
    cfg = load_config(_minimal())
    assert cfg.io["output_dir"] == str(tmp_path / "envdir")


def test_echo_roundtrip(tmp_path):
    cfg = load_config(_minimal())
    out = tmp_path / "out"
    out.mkdir()
    echo = write_config_echo(cfg, str(out))
    cfg2 = parse_config(echo)
    assert cfg2.resolved() == cfg.resolved()


def test_scheme_entries_expansion():
    data = _minimal()
    data["experiment"] = {"schemes": ["tanh", "mixed", "classical_milstein",
                                      "tamed_euler"]}
    cfg = load_config(data)
    entries = scheme_entries(cfg)
    assert set(entries) == {"tanh", "mixed", "classical_milstein",
                            "tamed_euler"}
    assert entries["mixed"].taming.kinds == ("tanh", "sine", "tamed", "tanh")
    assert entries["classical_milstein"].taming.kinds == ("identity",) * 4
    assert entries["tamed_euler"].kind == "tamed_euler"
    with pytest.raises(ConfigError, match="unknown scheme entry"):
        data["experiment"]["schemes"] = ["leapfrog"]
        scheme_entries(load_config(data))


def test_simulate_outputs_and_determinism(tmp_path):
    data = _minimal()
    runs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        cfg = load_config(data, out_override=str(out))
        assert execute_command("simulate", cfg) == 0
        runs.append((out / "snapshots.csv").read_bytes())
        assert (out / "config_echo.json").exists()
        assert (out / "snapshots.csv.meta.json").exists()
    assert runs[0] == runs[1]


def test_simulate_rerun_from_echo_reproduces(tmp_path):
    cfg = load_config(_minimal(), out_override=str(tmp_path / "a"))
    execute_command("simulate", cfg)
    echo = tmp_path / "a" / "config_echo.json"
    cfg2 = parse_config(str(echo), out_override=str(tmp_path / "b"))
    execute_command("simulate", cfg2)
    assert ((tmp_path / "a" / "snapshots.csv").read_bytes()
            == (tmp_path / "b" / "snapshots.csv").read_bytes())


def test_validate_command(tmp_path):
    data = _minimal()
    data["experiment"] = {"sample_count": 2000, "fd_trials": 10,
                          "dissipativity_samples": 200}
    cfg = load_config(data, out_override=str(tmp_path))
    assert execute_command("validate", cfg) == 0
    report = json.loads((tmp_path / "validation_report.json").read_text())
    assert report["all_passed"] is True
    assert set(report["taming"]) == {"identity", "tanh", "sine", "tamed"}
    assert report["taming"]["identity"]["bound_checked"] is False


def test_probe_command(tmp_path):
    data = _minimal()
    data["model"] = {"preset": "double_well.case1"}
    data["scheme"] = {"kind": "classical_milstein", "dt": "2^-6", "N": 64}
    cfg = load_config(data, out_override=str(tmp_path))
    assert execute_command("probe", cfg) == 0
    rep = json.loads((tmp_path / "probe_report.json").read_text())
    assert rep["blown_fraction"] > 0.5
    assert (tmp_path / "first_blowup_times.csv").exists()


def test_moments_command(tmp_path):
    data = _minimal()
    data["experiment"] = {"p": 4, "dt_list": ["2^-4", "2^-5"]}
    cfg = load_config(data, out_override=str(tmp_path))
    assert execute_command("moments", cfg) == 0
    summary = json.loads((tmp_path / "moments_summary.json").read_text())
    assert summary["p"] == 4
    assert len(summary["suprema"]) == 2


def test_converge_command(tmp_path):
    data = _minimal()
    data["scheme"].update({"dt_list": ["2^-4", "2^-5", "2^-6"],
                           "ref_dt": "2^-8"})
    data["experiment"] = {"schemes": ["tanh"], "seeds": [1, 2]}
    cfg = load_config(data, out_override=str(tmp_path))
    assert execute_command("converge", cfg) == 0
    summary = json.loads(
        (tmp_path / "convergence_summary.json").read_text())
    assert "tanh" in summary["schemes"]
    assert 0.3 < summary["schemes"]["tanh"]["slope"] < 1.7
    csv_text = (tmp_path / "convergence.csv").read_text()
    assert csv_text.splitlines()[0] == ("model,scheme,taming,dt,ref_dt,N,"
                                        "seed,mse,diverged,wallclock_s")
    assert len(csv_text.splitlines()) == 1 + 3 * 2


def test_converge_resume_skips_completed(tmp_path):
    data = _minimal()
    data["scheme"].update({"dt_list": ["2^-4"], "ref_dt": "2^-6"})
    data["experiment"] = {"schemes": ["tanh"], "seeds": [1]}
    cfg = load_config(data, out_override=str(tmp_path))
    execute_command("converge", cfg)
    first = (tmp_path / "convergence.csv").read_text()
    execute_command("converge", cfg)
    assert (tmp_path / "convergence.csv").read_text() == first


def test_experiment_block_keys_checked(tmp_path):
    data = _minimal()
    data["experiment"] = {"p": 4}
    cfg = load_config(data, out_override=str(tmp_path))
    with pytest.raises(ConfigError, match="experiment"):
        execute_command("simulate", cfg)


def test_cli_error_json_on_bad_config(tmp_path, capsys):
    path = _write(tmp_path, {"model": {"preset": "nope.case0"}})
    code = main(["simulate", "--config", path,
                 "--out", str(tmp_path / "o")])
    assert code == 2
    err = capsys.readouterr().err
    payload = json.loads(err)
    assert payload["error"]["type"] == "ConfigError"
    assert "nope" in payload["error"]["message"]


def test_cli_malformed_json(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["probe", "--config", str(path)]) == 2
    assert "malformed JSON" in json.loads(capsys.readouterr().err)[
        "error"]["message"]


def test_cli_subprocess_entry(tmp_path):
    path = _write(tmp_path, _minimal())
    out = tmp_path / "run"
    res = subprocess.run(
        [sys.executable, "-m", "mvmilstein", "simulate", "--config", path,
         "--out", str(out), "--seed", "5"],
        capture_output=True, text=True,
        cwd=str(tmp_path), env={**os.environ})
    assert res.returncode == 0, res.stderr
    meta = json.loads((out / "snapshots.csv.meta.json").read_text())
    assert meta["seed"] == 5
