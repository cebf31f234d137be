import json

import pytest

from strbc.cli import ConfigError, ExperimentConfig, main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


# ---------------------------------------------------------------------------
# Config validation.


def test_config_requires_schema_version():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"case": "u1"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"schema_version": 2, "case": "u1"})


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(
            {"schema_version": 1, "case": "u1", "towr": {}}
        )
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(
            {"schema_version": 1, "tower": {"q": 3, "e": 1, "f": 1,
                                            "ramification": 3}}
        )


def test_config_rejects_unknown_case():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"schema_version": 1, "case": "e7f3"})


def test_config_needs_case_or_tower():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"schema_version": 1})


def test_config_builds_stratum_from_tower_block():
    cfg = ExperimentConfig.from_dict({
        "schema_version": 1,
        "tower": {"q": 3, "e": 3, "f": 1, "N": 8},
        "stratum": {"c": [[0, -1]]},
    })
    s = cfg.build_stratum()
    assert s.tower.e == 3
    assert tuple(s.r_list) == (1,)


def test_config_recheck_catches_bad_stratum():
    cfg = ExperimentConfig.from_dict({
        "schema_version": 1,
        "tower": {"q": 3, "e": 3, "f": 1, "N": 8},
        "stratum": {"c": [[0, 1]]},  # non-negative valuation
    })
    with pytest.raises(ValueError):
        cfg.build_stratum()


def test_config_load_bad_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{nope")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(str(p))


# ---------------------------------------------------------------------------
# Commands.


def test_cli_sign_u1(capsys):
    code, out, _ = run(["sign", "--case", "u1"], capsys)
    assert code == 0
    assert "epsilon = 1" in out
    assert "pass" in out


def test_cli_gauss_default_grid(capsys, tmp_path):
    path = tmp_path / "g.json"
    code, out, _ = run(["gauss", "--seed", "7", "--json", str(path)], capsys)
    assert code == 0
    assert "all-match" in out
    payload = json.loads(path.read_text())
    assert payload["ok"] is True
    assert any(r["n"] == 0 for r in payload["rows"])


def test_cli_reducibility_e3f1(capsys, tmp_path):
    path = tmp_path / "r.json"
    code, out, _ = run(
        ["reducibility", "--case", "e3f1", "--json", str(path)], capsys)
    assert code == 0
    assert "b_y = 6" in out
    assert "pi*i/log qE" in out
    payload = json.loads(path.read_text())
    assert payload["b_z_high"] == 0
    assert payload["b_z_low"] == 6
    assert payload["spectra"] == {"y": [-1, 3], "z": [-1, 3]}
    assert payload["provenance"]["c"] == [{"exponent": -1, "coeff": [1]}]


def test_cli_base_change_u1(capsys, tmp_path):
    path = tmp_path / "b.json"
    code, out, _ = run(
        ["base-change", "--case", "u1", "--json", str(path)], capsys)
    assert code == 0
    payload = json.loads(path.read_text())
    values = {(r["rho(-1)"], r["varpi_F"]) for r in payload["rows"]}
    assert values == {(1, 1), (-1, -1)}


def test_cli_json_roundtrip_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(["sign", "--case", "e3f1", "--json", str(a)], capsys)[0] == 0
    assert run(["sign", "--case", "e3f1", "--json", str(b)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_config_file_drives_sign(capsys, tmp_path):
    cfgp = tmp_path / "cfg.json"
    cfgp.write_text(json.dumps({
        "schema_version": 1,
        "tower": {"q": 3, "e": 1, "f": 1},
        "stratum": {"c": [[0, -1]]},
    }))
    code, out, _ = run(["sign", str(cfgp)], capsys)
    assert code == 0
    assert "epsilon = 1" in out


def test_cli_missing_config_errors(capsys):
    code, _, err = run(["sign"], capsys)
    assert code == 2
    assert "config" in err


def test_cli_bad_config_path(capsys):
    code, _, err = run(["sign", "/nonexistent/x.json"], capsys)
    assert code == 2
    assert "error" in err
