import pytest
from fastapi.testclient import TestClient

from persdel.api import create_app
from persdel.service import run_eval, run_transform


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def test_health(client):
    assert client.get("/health").json() == {"status": "ok"}


def test_eval_kg_with_twin(client):
    r = client.post("/eval", json={"scenario": "kg"}).json()
    rep = r["report"]
    assert rep["principal"] == pytest.approx(0.6, abs=1e-9)
    assert rep["unnormalized"]["principal"] == pytest.approx(0.6, abs=1e-9)
    assert rep["twin"]["gap_principal"] < 1e-7
    assert r["tables"]["partition"]


def test_transform_residual_zero():
    rep = run_transform("uniform-quadratic").report
    assert rep["target"] == "persuasion"
    assert rep["duality_residual"]["max_abs_U"] == 0.0


def test_regulation_endpoint(client):
    r = client.post("/solve-regulation", json={"density_name": "triangular", "theta_bar": 1.0}).json()
    assert r["verified"] is True
    assert r["report"]["theta_star"] == pytest.approx(0.6288864005, abs=1e-9)
    assert r["tables"]["price"][0] == pytest.approx([0.0, 0.5])


def test_verify_refuted(client):
    r = client.post("/verify", json={"scenario": "ms1991-k1", "set": [-2.0, 3.0]}).json()
    assert r["verified"] is False


def test_bad_input_is_422(client):
    r = client.post("/eval", json={"scenario": "kg", "set": [0.0, 0.5]})
    assert r.status_code == 422 and r.json()["error"] == "UnbalancedSet"
    assert client.get("/demo/nope").status_code == 422
    assert client.post("/oracle", json={"scenario": "kg", "n": 40}).status_code == 422


def test_eval_schedule():
    rep = run_eval("uniform-quadratic", items=[0.0, 0.5, 1.0], schedule=5).report
    assert [x for _, x in rep["schedule"]] == pytest.approx([0.0, 0.5, 0.5, 1.0, 1.0])


def test_demo_kg(client):
    rep = client.get("/demo/kg").json()["report"]
    assert rep["oracle"]["best"] == pytest.approx([0.0, 0.4, 1.0])
    assert rep["gap"] < 1e-7
