from __future__ import annotations

import json

import pytest

from agora import pgg
from agora.cli import main

from conftest import tiny_config


@pytest.fixture
def pgg_config(tmp_path):
    path = tmp_path / "world.json"
    path.write_text(json.dumps(pgg.build_pgg_world(pgg.GameSpec.uniform(4, 20), seed=7)))
    return path


def _stderr_json(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_run_and_replay(tmp_path, pgg_config, capsys):
    out = tmp_path / "run"
    assert main(["run", "--config", str(pgg_config), "--out", str(out)]) == 0
    assert (out / "ledger.json").exists() and len(list((out / "agents").iterdir())) == 5
    assert main(["replay", str(out), "--out", str(tmp_path / "replayed")]) == 0
    assert "identical" in capsys.readouterr().out


def test_same_seed_same_bytes(tmp_path, pgg_config):
    for name in ("a", "b"):
        assert main(["run", "--config", str(pgg_config), "--seed", "3", "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a" / "events.jsonl").read_bytes() == (tmp_path / "b" / "events.jsonl").read_bytes()


def test_http_without_key_is_a_config_error(tmp_path, pgg_config, capsys, monkeypatch):
    monkeypatch.delenv("AGORA_API_KEY", raising=False)
    out = tmp_path / "run"
    assert main(["run", "--config", str(pgg_config), "--out", str(out), "--backend", "http"]) == 2
    err = _stderr_json(capsys)
    assert err["error"] == "BackendConfigurationError" and "AGORA_API_KEY" in err["message"]
    assert not out.exists()


def test_invalid_config_is_a_config_error(tmp_path, capsys):
    bad = tiny_config()
    del bad["agents"][0]["public_bio"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "run")]) == 2
    assert _stderr_json(capsys)["error"] == "SchemaError"


def test_failed_run_exits_one(tmp_path, pgg_config, capsys):
    rc = main(["run", "--config", str(pgg_config), "--out", str(tmp_path / "run"), "--params", '{"absent": ["Bob"]}'])
    assert rc == 1
    assert _stderr_json(capsys)["error"] == "TimeoutHalt"
    assert (tmp_path / "run" / "error.json").exists()


def test_replicate_and_report(tmp_path, capsys):
    out = tmp_path / "batch"
    assert main(["replicate", "--pack", "s3_cart", "--out", str(out), "--report"]) == 0
    assert (out / "report" / "rates.tsv").exists()
    capsys.readouterr()
    assert main(["report", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "% of simulations with cart returned" in text


def test_bad_pack_and_empty_report(tmp_path, capsys):
    path = tmp_path / "pack.json"
    raw = json.loads(json.dumps({"pack_id": "x", "scenario": "cart", "replications": 2, "cells": [{"label": "a", "spec": {}}], "seeds": [1, "y"]}))
    path.write_text(json.dumps(raw))
    assert main(["replicate", "--pack", str(path), "--out", str(tmp_path / "b")]) == 2
    assert "seeds[1]" in _stderr_json(capsys)["message"]
    (tmp_path / "empty").mkdir()
    assert main(["report", "--out", str(tmp_path / "empty")]) == 2
    assert _stderr_json(capsys)["error"] == "MissingExtraction"


def test_bad_params_json(tmp_path, pgg_config, capsys):
    assert main(["run", "--config", str(pgg_config), "--out", str(tmp_path / "r"), "--params", "{oops"]) == 2
    assert "--params" in _stderr_json(capsys)["message"]
