import csv
import json

import httpx
import pytest
from fastapi.testclient import TestClient

from persdel.api import create_app
from persdel.cli import EXIT_INVALID, EXIT_OK, EXIT_REFUTED, run


def _json(capsys):
    return json.loads(capsys.readouterr().out)


def test_demo_kg(capsys):
    assert run(["demo", "kg"]) == EXIT_OK
    rep = _json(capsys)
    assert rep["oracle"]["best"] == pytest.approx([0.0, 0.4, 1.0])
    assert rep["persuasion_value"] == pytest.approx(0.6, abs=1e-9)


def test_demo_regulation_tables(tmp_path, capsys):
    assert run(["demo", "regulation-triangular", "--csv-dir", str(tmp_path)]) == EXIT_OK
    rep = _json(capsys)
    assert rep["ordered"] and rep["theta_star"] > rep["theta_star_star"]
    heads = {}
    for name in ("nu", "price", "partition", "price_no_participation"):
        with (tmp_path / f"{name}.csv").open() as fh:
            heads[name] = next(csv.reader(fh))
    assert heads["nu"] == ["m", "nu", "dnu"]
    assert heads["price"] == ["gamma", "x_star"]
    assert heads["partition"] == ["interval_lo", "interval_hi", "kind"]


def test_demo_producer(capsys):
    assert run(["demo", "producer"]) == EXIT_OK
    rep = _json(capsys)
    assert rep["gap_to_regulation"] < 1e-5
    assert rep["upper_censorship"]["principal"] >= rep["full_disclosure"]["principal"]


def test_strict_refuted_exit(capsys):
    assert run(["verify", "ms1991-k1", "--set", "[-2, 3]"]) == EXIT_OK
    assert run(["verify", "ms1991-k1", "--set", "[-2, 3]", "--strict"]) == EXIT_REFUTED
    assert run(["solve-linear", "ms1991-k3", "--strict"]) == EXIT_OK


def test_validation_errors(tmp_path, capsys):
    assert run(["eval", "kg", "--set", "[0, 0.5]"]) == EXIT_INVALID
    assert run(["eval", str(tmp_path / "missing.json")]) == EXIT_INVALID
    assert run(["eval", "{\"name\": 3}"]) == EXIT_INVALID
    assert "error" in capsys.readouterr().err


def test_usage_error_exit():
    with pytest.raises(SystemExit) as e:
        run(["nonsense"])
    assert e.value.code == 2


def test_output_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(["oracle", "kg", "--n", "8", "--seed", "5", "--out", str(a)])
    run(["oracle", "kg", "--n", "8", "--seed", "5", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_remote_matches_local(monkeypatch, capsys):
    client = TestClient(create_app())

    def fake(method, url, json=None, timeout=None):
        return client.request(method, url.replace("http://svc", ""), json=json)

    monkeypatch.setattr(httpx, "request", fake)
    assert run(["solve-regulation", "--density", "triangular", "--server", "http://svc"]) == EXIT_OK
    remote = _json(capsys)
    assert run(["solve-regulation", "--density", "triangular"]) == EXIT_OK
    assert _json(capsys) == remote
    assert run(["eval", "kg", "--set", "[0, 0.5]", "--server", "http://svc"]) == EXIT_INVALID
