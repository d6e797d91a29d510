import pytest
from fastapi.testclient import TestClient

from ditherlab.config import default_config
from ditherlab.service import create_app
from ditherlab.service.models import (
    ConfigModel,
    config_from_model,
    model_from_config,
)


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


_SMALL_BODY = {
    "trials": 15,
    "dither_grid": 8,
    "estimator_samples": 20000,
    "seed": 20260817,
}


def test_healthz(client):
    response = client.get("/healthz")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


def test_region_endpoint_defaults(client):
    response = client.post("/region", json=_SMALL_BODY)
    assert response.status_code == 200
    payload = response.json()
    assert payload["mode"] == "region"
    assert payload["config"]["source"]["kind"] == "uniform-square"


def test_all_driver_endpoints_run(client):
    for path in ("/quantize-demo", "/sw-sim", "/estimate", "/pipeline"):
        response = client.post(path, json=_SMALL_BODY)
        assert response.status_code == 200, (path, response.text)
        payload = response.json()
        assert payload["wall_clock_seconds"] is None
        assert all(check["status"] == "pass" for check in payload["checks"])


def test_config_errors_map_to_400(client):
    response = client.post("/region", json={"distortion1": -1.0})
    assert response.status_code == 400
    body = response.json()
    assert body["error"]["code"] == "config"
    assert "distortion" in body["error"]["message"]


def test_runtime_budget_errors_map_to_422(client):
    # Margins beyond the lossless width are a rate feasibility failure.
    response = client.post("/pipeline", json={**_SMALL_BODY, "margin1": 5.0, "margin2": 5.0})
    assert response.status_code == 422
    assert response.json()["error"]["code"] == "RateInfeasibleError"


def test_discrete_source_body(client):
    body = {
        **_SMALL_BODY,
        "source": {
            "kind": "discrete-grid",
            "halfwidth": 1.0,
            "atoms": [[1.0, 1.0, 0.475], [-1.0, -1.0, 0.475], [1.0, -1.0, 0.05]],
        },
    }
    response = client.post("/region", json=body)
    assert response.status_code == 200
    assert response.json()["config"]["source"]["kind"] == "discrete-grid"


def test_selftest_endpoint_runs_every_check(client):
    response = client.post("/selftest")
    assert response.status_code == 200
    payload = response.json()
    assert payload["mode"] == "selftest"
    assert payload["total"] == 10
    assert payload["passed"] is True


def test_model_round_trip_matches_ini_config():
    config = default_config().with_overrides(
        source_kind="truncated-gaussian",
        source_params={"halfwidth": 2.0, "sigma1": 1.0, "sigma2": 0.5, "rho": 0.3},
        trials=5,
    )
    model = model_from_config(config)
    assert config_from_model(model) == config
    # Default body equals the default config.
    assert config_from_model(ConfigModel()) == default_config()
