from __future__ import annotations

import json

import pytest
from hypothesis import given, settings, strategies as st

from desitter_kg.cli import DEFAULTS, OUTPUT_ENV, ExperimentConfig, main
from desitter_kg.errors import ConfigError


def test_roots_prints_json(capsys):
    assert main(["roots", "--n", "2", "--lambda", "3/16"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["s_plus"] == pytest.approx(0.75)
    assert doc["regime"] == "NonIntegerGap"


def test_scatter_writes_csv(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert main(["scatter", "--kmax", "8", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 10


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path))
    assert main(["scatter", "--kmax", "2", "--out", "nested/s.csv"]) == 0
    assert (tmp_path / "nested" / "s.csv").exists()


def test_scatter_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["scatter", "--kmax", "3", "--out", str(a)])
    main(["scatter", "--kmax", "3", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_unknown_config_key_exits_two(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "roots", "params": {"n": 2, "mass": 1}}))
    assert main(["roots", "--config", str(cfg)]) == 2
    assert "mass" in capsys.readouterr().err


def test_malformed_json_reports_position(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"command": "roots",\n "params": {"n": }}')
    assert main(["roots", "--config", str(cfg)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "roots", "params": {"n": 2, "lambda": "0"}}))
    assert main(["roots", "--config", str(cfg), "--lambda", "1/4"]) == 0
    assert json.loads(capsys.readouterr().out)["regime"] == "Threshold"


def test_nonpositive_tolerance_rejected():
    with pytest.raises(ConfigError):
        ExperimentConfig("scatter", {"rtol": 0.0})


def test_verify_single_criterion(capsys):
    assert main(["verify", "--only", "1"]) == 0
    assert "[PASS]" in capsys.readouterr().err


param_values = st.one_of(st.integers(-5, 50), st.floats(1e-6, 10), st.text(max_size=6), st.booleans(), st.none())


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(sorted(DEFAULTS)), st.data(), st.integers(0, 2**31))
def test_config_round_trip(command, data, seed):
    keys = data.draw(st.lists(st.sampled_from(sorted(DEFAULTS[command])), unique=True))
    params = {}
    for k in keys:
        params[k] = data.draw(st.floats(1e-6, 10) if k in ("rtol", "cfl", "x_min", "x") else param_values)
    cfg = ExperimentConfig(command, params, seed)
    back = ExperimentConfig.from_json(cfg.to_json())
    assert back == cfg
