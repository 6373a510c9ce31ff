import json

import numpy as np
import pytest

from secondgrade import reference as ref
from secondgrade.cli import ConfigError, RunConfig, main, parse_config, serialize_config


def test_empty_config_gives_defaults():
    cfg = parse_config("")
    assert cfg == RunConfig()
    assert cfg.nu == ref.NU and cfg.epsilon == ref.EPSILON and cfg.seed == ref.SEED


def test_comments_and_whitespace():
    cfg = parse_config("# comment\n  nu = 0.3   # trailing\n\nintegrator=heun\n")
    assert cfg.nu == 0.3 and cfg.integrator == "heun"


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config("viscosity = 0.1\n")


def test_malformed_line_rejected():
    with pytest.raises(ConfigError):
        parse_config("nu 0.1\n")
    with pytest.raises(ConfigError):
        parse_config("nonlinear = maybe\n")


def test_constraint_violation_rejected():
    with pytest.raises(ConfigError):
        parse_config("dt = -1\n")
    with pytest.raises(ConfigError):
        parse_config("t_end = 50\n")


def test_round_trip():
    cfg = parse_config("nu = 0.15\nt_list = 1,2.5,7\nnonlinear = false\nforce = linear\nforce_gain = 0.3\n")
    again = parse_config(serialize_config(cfg))
    assert again == cfg


def test_deterministic_flag(tmp_path):
    cfg = parse_config("epsilon = 0\n")
    assert cfg.deterministic
    conf = tmp_path / "c.txt"
    conf.write_text("epsilon = 0\nt_end = 0.1\n")
    assert main(["simulate", "--config", str(conf), "--out", str(tmp_path / "o")]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["deterministic"] is True


def test_dissipativity_bound_enforced(model, capsys):
    bound = ref.NU / model.P2
    text = f"force = linear\nforce_gain = {1.01 * bound}\n"
    with pytest.raises(ConfigError, match="C_F") as info:
        parse_config(text, kind="attractor")
    assert f"{bound:.6g}" in str(info.value)
    parse_config(text, kind="simulate")
    parse_config(f"force = linear\nforce_gain = {0.99 * bound}\n", kind="attractor")


def test_config_error_exit_code(tmp_path, capsys):
    conf = tmp_path / "c.txt"
    conf.write_text("bogus = 1\n")
    assert main(["simulate", "--config", str(conf), "--out", str(tmp_path)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "config"


def test_simulate_is_byte_identical(tmp_path):
    conf = tmp_path / "c.txt"
    conf.write_text("t_end = 0.2\n")
    for d in ("a", "b"):
        assert main(["simulate", "--config", str(conf), "--seed", "3", "--dump-coefficients",
                     "--out", str(tmp_path / d)]) == 0
    for name in ("trajectory.csv", "summary.json", "config.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    text = (tmp_path / "a" / "trajectory.csv").read_text()
    assert "# seed = 3" in text
    header = [line for line in text.splitlines() if not line.startswith("#")][0]
    assert header.split(",")[-1] == f"c_{ref.N_MODES}"
    rows = [line for line in text.splitlines() if not line.startswith("#")][1:]
    assert len(rows) == 201


def test_verify_passes(tmp_path, capsys):
    assert main(["verify", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    doc = json.loads((tmp_path / "verify.json").read_text())
    assert doc["passed"] and all(c["passed"] for c in doc["checks"])


def test_linearize(tmp_path):
    assert main(["linearize", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "linearize.json").read_text())
    assert len(doc["errors"]) == 4 and np.isfinite(doc["order"])


def test_pullback_reports_radius(tmp_path):
    assert main(["pullback", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "radius.json").read_text())
    assert doc["r_empirical"] <= doc["r_certified"]


@pytest.mark.slow
def test_attractor_and_sweep(tmp_path):
    assert main(["attractor", "--out", str(tmp_path / "a")]) == 0
    doc = json.loads((tmp_path / "a" / "attractor.json").read_text())
    assert doc["converged"] and np.all(np.diff(doc["cauchy_gaps"]) < 0)
    assert main(["sweep", "--out", str(tmp_path / "s")]) == 0
    doc = json.loads((tmp_path / "s" / "sweep.json").read_text())
    assert np.all(np.diff(doc["distances"]) <= 0)
    assert doc["eps_values"] == list(ref.EPS_LIST)
