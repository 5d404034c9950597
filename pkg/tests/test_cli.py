import csv
import json

import pytest

from g2torus.cli import main, parse_config_text, validate_config
from g2torus.profile import Grid, Profile, save_profile


def run(args, tmp_path, name="out"):
    out = tmp_path / name
    code = main(list(args) + ["--out", str(out)])
    return code, out


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_identities(tmp_path):
    code, out = run(["identities", "--seed", "42", "--trials", "100"], tmp_path)
    assert code == 0
    res = json.loads((out / "identities.json").read_text())
    assert res["pass"] and max(res["float_max_error"].values()) < 1e-8
    assert max(res["exact_max_error"].values()) == 0
    m = manifest(out)
    assert m["status"] == 0 and m["seed"] == 42
    assert {"numpy", "scipy", "python", "g2torus"} <= set(m["versions"])
    assert len(m["inputs_hash"]) == 64 and "identities.json" in m["artifacts"]


def test_shock_exit_code(tmp_path, capsys):
    code, out = run(["geodesic", "ivp", "--u0", "0:1:0", "--f0", "1:0:1", "--t-final", "2",
                     "--n", "64"], tmp_path)
    assert code == 2
    assert "ShockDetected" in capsys.readouterr().err
    assert manifest(out)["status"] == 2


def test_counterexample(tmp_path):
    code, out = run(["counterexample", "--chi", "power:0.3333", "--u", "1.0"], tmp_path)
    assert code == 0
    res = json.loads((out / "counterexample.json").read_text())
    assert abs(res["r"] + 2 / 9) < 1e-4 and abs(res["s"] - 1 / 9) < 1e-4
    assert abs(res["lambda_max"] - 1 / 6) < 1e-4
    assert res["verdict"] == "NOT_NSD" and len(res["eigenvalues"]) == 12
    code, out = run(["counterexample", "--chi", "power:0.3333333333333333"], tmp_path, "exact")
    res = json.loads((out / "counterexample.json").read_text())
    assert res["lambda_max"] >= 1 / 6 - 1e-12


def test_config_errors(tmp_path, capsys):
    empty = tmp_path / "empty.cfg"
    empty.write_text("# nothing\n")
    assert main(["--config", str(empty)]) == 1
    assert "missing subcommand" in capsys.readouterr().err
    assert main(["flow", "--n", "100", "--out", str(tmp_path / "x")]) == 1
    assert "power of two" in capsys.readouterr().err
    assert main(["geodesic", "sideways", "--out", str(tmp_path / "y")]) == 1
    assert main(["nonsense", "--out", str(tmp_path / "z")]) == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("command flow\n")
    assert main(["--config", str(bad)]) == 1


def test_heat_config(tmp_path):
    cfg = tmp_path / "heat.cfg"
    cfg.write_text("subcommand = flow\nchi = heat\nn = 64\nt_final = 0.05\nu0 = 0:1:0,1:0.1:0\n"
                   f"out = {tmp_path / 'heat'}\n")
    assert main(["--config", str(cfg)]) == 0
    out = tmp_path / "heat"
    rows = list(csv.reader(open(out / "flow.csv")))
    assert rows[0] == ["t", "vol_chi", "energy", "entropy", "min_u", "max_u"]
    assert json.loads((out / "flow.json").read_text())["monotone"]


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("command = curvature\nn = 32\n")
    code, out = run(["--config", str(cfg), "--n", "64"], tmp_path)
    assert code == 0
    assert manifest(out)["config"]["n"] == 64


def test_manifest_replay_is_byte_identical(tmp_path):
    code, out = run(["geodesic", "bvp", "--n", "64", "--steps", "4"], tmp_path, "a")
    assert code == 0
    m = manifest(out)
    code = main(["--config", str(out / "manifest.json"), "--out", str(tmp_path / "b")])
    assert code == 0
    m2 = manifest(tmp_path / "b")
    assert m2["artifacts"] == m["artifacts"] and m2["inputs_hash"] == m["inputs_hash"]
    for name in m["artifacts"]:
        assert (out / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_fixed_seed_determinism(tmp_path):
    a = run(["counterexample", "--budget", "6", "--seed", "3"], tmp_path, "a")[1]
    b = run(["counterexample", "--budget", "6", "--seed", "3"], tmp_path, "b")[1]
    assert (a / "counterexample.json").read_bytes() == (b / "counterexample.json").read_bytes()


def test_sweep(tmp_path):
    code, out = run(["curvature", "--sweep", "n=32,64"], tmp_path)
    assert code == 0
    sweep = json.loads((out / "sweep.json").read_text())
    assert sweep["exit_codes"] == [0, 0]
    assert (out / "n=32" / "curvature.json").exists() and (out / "n=64" / "manifest.json").exists()


def test_validate_dry_run(tmp_path, capsys):
    cfg = tmp_path / "v.cfg"
    cfg.write_text("command = hessian\nn = 64\n")
    assert main(["validate", "--config", str(cfg)]) == 0
    assert "config ok" in capsys.readouterr().out
    assert not (tmp_path / "g2torus-out").exists()
    cfg.write_text("command = hessian\nn = 63\ndt = -1\n")
    assert main(["validate", "--config", str(cfg)]) == 1
    assert capsys.readouterr().err.count("config error") == 2


def test_profile_file_input(tmp_path):
    import numpy as np

    n = 64
    x = np.arange(n) / n
    p = tmp_path / "u0.txt"
    save_profile(Profile(Grid(n), 1 + 0.2 * np.cos(2 * np.pi * x)), p)
    code, out = run(["hessian", "--n", str(n), "--u0", str(p)], tmp_path)
    assert code == 0
    res = json.loads((out / "hessian.json").read_text())
    assert res["hessian_vol"] <= 0


@pytest.mark.parametrize("command", ["curvature", "m3", "volbound", "contraction"])
def test_other_commands(tmp_path, command):
    code, out = run([command, "--n", "64", "--trials", "5"], tmp_path)
    assert code == 0, manifest(out)["message"]
    assert manifest(out)["artifacts"]


def test_parse_config_text():
    cfg = parse_config_text("subcommand = flow  # trailing\nt-final = 0.1\n\n")
    assert cfg == {"command": "flow", "t_final": "0.1"}
    assert validate_config(cfg) == []
    assert parse_config_text('{"config": {"command": "m3", "seed": null}}') == {"command": "m3"}
