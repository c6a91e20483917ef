import json

import pytest
import yaml

from aqecsim.cli import main, parse_gamma
from aqecsim.device import ConfigError, profile_path
from aqecsim.io import build_manifest, table_csv, table_json, write_outputs


def _bad_profile(tmp_path, edit):
    raw = yaml.safe_load(profile_path("paper-default").read_text())
    edit(raw)
    p = tmp_path / "bad.yaml"
    p.write_text(yaml.safe_dump(raw))
    return str(p)


def test_parse_gamma():
    assert parse_gamma("2x1380") == pytest.approx(2 / 1380)
    assert parse_gamma("0.001") == pytest.approx(0.001)
    with pytest.raises(ConfigError):
        parse_gamma("2xfoo")


def test_table_csv_has_units_line():
    text = table_csv(["t", "f"], [[1.0, 0.5]], ["us", "1"])
    lines = text.splitlines()
    assert lines[0] == "# t [us], f [1]"
    assert lines[1] == "t,f"
    assert json.loads(table_json(["t"], [[1.0]], ["us"]))["units"] == ["us"]
    with pytest.raises(ValueError):
        table_csv(["t"], [], [])


def test_manifest_digest_stable(tmp_path):
    files = {"a.csv": "x\n1\n"}
    m1 = write_outputs(tmp_path / "o1", files, {"k": 1})
    m2 = build_manifest({"k": 1}, files)
    assert m1["content_digest"] == m2["content_digest"]
    on_disk = json.loads((tmp_path / "o1" / "manifest.json").read_text())
    assert on_disk["files"]["a.csv"] == m1["files"]["a.csv"]


def test_budget_prints_total(tmp_path, capsys):
    assert main(["run", "budget", "--out", str(tmp_path / "b")]) == 0
    assert "87.2%" in capsys.readouterr().out
    assert (tmp_path / "b" / "manifest.json").exists()


def test_rate_prints_optimum(tmp_path, capsys):
    assert main(["run", "rate", "--epsilon", "0.076", "--gamma", "2x1380", "--out", str(tmp_path / "r")]) == 0
    assert "269" in capsys.readouterr().out


def test_pass_prints_values(tmp_path, capsys):
    assert main(["run", "pass", "--out", str(tmp_path / "p")]) == 0
    out = capsys.readouterr().out
    assert "-3.589" in out


def test_unknown_param_exits_1_without_output(tmp_path, capsys):
    out = tmp_path / "x"
    assert main(["run", "rate", "--set", "bogus=1", "--out", str(out)]) == 1
    assert "params.bogus" in capsys.readouterr().err
    assert not out.exists()


def test_malformed_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("schema_version: 1\nkind: rate\nparams: {epsilon: abc}\n")
    out = tmp_path / "x"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 1
    assert "params.epsilon" in capsys.readouterr().err
    assert not out.exists()
    cfg.write_text("schema_version: 7\nkind: rate\n")
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 1
    assert "schema_version" in capsys.readouterr().err


def test_same_seed_identical_output(tmp_path):
    args = ["run", "sweep", "--set", "points=3", "--set", "rounds=4", "--seed", "5"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--jobs", "2", "--out", str(tmp_path / "b")]) == 0
    a = json.loads((tmp_path / "a" / "manifest.json").read_text())
    b = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert a["content_digest"] == b["content_digest"]


def test_json_format(tmp_path):
    assert main(["run", "rate", "--format", "json", "--out", str(tmp_path / "j")]) == 0
    files = [p.name for p in (tmp_path / "j").iterdir()]
    assert any(f.endswith(".json") and f != "manifest.json" for f in files)


def test_simulate_small(tmp_path, capsys):
    assert main(["run", "simulate", "--rounds", "3", "--out", str(tmp_path / "s")]) == 0


def test_grape_nonconvergence_exit_2(tmp_path):
    rc = main(["run", "grape", "--gate", "encode", "--set", "max_iters=1", "--set", "duration=0.2",
               "--set", "dt=0.01", "--set", "cavity_dim=6", "--out", str(tmp_path / "g")])
    assert rc == 2


def test_validate_default_passes(capsys):
    assert main(["validate"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_validate_rejects_t2_above_2t1(tmp_path, capsys):
    def edit(raw):
        raw["modes"]["S1"]["t2_us"] = 3 * raw["modes"]["S1"]["t1_us"]
    rc = main(["validate", "--profile", _bad_profile(tmp_path, edit)])
    assert rc == 1
    captured = capsys.readouterr()
    assert "S1" in captured.out + captured.err


def test_validate_rejects_asymmetric_kerr(tmp_path, capsys):
    def edit(raw):
        raw["kerr_mhz"].append(["S1", "I1", -2.0])
    assert main(["validate", "--profile", _bad_profile(tmp_path, edit)]) == 1
    captured = capsys.readouterr()
    assert "I1" in captured.out + captured.err
