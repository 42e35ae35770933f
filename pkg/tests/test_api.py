import pytest
from fastapi.testclient import TestClient

from src.app import app
from tests.conftest import IC1, REFERENCE_OFFSET, as_controller, pd_gain

client = TestClient(app)

SHORT_RUN = {"simulation": {"dt_s": 0.002, "horizon_s": 0.2, "min_normal_force_n": 0.02}}


@pytest.fixture(scope="module")
def controller_json(params):
    return as_controller(pd_gain(params, IC1 + REFERENCE_OFFSET)).to_dict()


def test_health():
    response = client.get("/health")
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "ok"
    assert "clarabel" in body["solvers"]


class TestSampleSize:
    def test_feasibility_sizing(self):
        response = client.post("/sample-size", json={"eps": 0.5, "beta": 1e-3, "d": 39})
        assert response.status_code == 200
        body = response.json()
        assert body["mode"] == "feasibility"
        assert body["N"] == 110
        assert body["tail"] <= 1e-3 < body["tail_previous"]

    def test_default_dimension(self):
        assert client.post("/sample-size", json={"eps": 0.5, "beta": 1e-3}).json()["d"] == 39

    def test_out_of_range_eps(self):
        assert client.post("/sample-size", json={"eps": 1.5, "beta": 1e-3}).status_code == 422

    def test_optimality_needs_both_constants(self):
        assert client.post("/sample-size", json={"eps": 0.5, "beta": 1e-3, "n_xi": 4}).status_code == 422

    def test_missing_field(self):
        assert client.post("/sample-size", json={"beta": 1e-3}).status_code == 422


def test_unknown_designer_rejected():
    assert client.post("/design", json={"designer": "bisection"}).status_code == 422


def test_unknown_config_key_rejected():
    assert client.post("/design", json={"config": {"region": {"sigma": 1.0}}}).status_code == 422


def test_lipschitz_on_two_coordinates():
    response = client.post(
        "/lipschitz", json={"pairs": 4, "seed": 1, "free": ["py", "delta"], "mu": 10.0}
    )
    assert response.status_code == 200
    body = response.json()
    assert body["n_xi"] == 2
    assert body["dynamics"]["pairs"] == 4
    assert set(body["blocks"]) == {"decay", "disk", "cone", "overall"}


class TestSimulate:
    def test_single_case(self, controller_json):
        response = client.post(
            "/simulate", json={"config": SHORT_RUN, "controller": controller_json, "cases": ["IC1_delta+0.0mm"]}
        )
        assert response.status_code == 200
        body = response.json()
        assert list(body["cases"]) == ["IC1_delta+0.0mm"]
        case = body["cases"]["IC1_delta+0.0mm"]
        assert case["reason"] == "completed"
        assert case["steps"] == 101
        assert case["min_cone_margin"] > 0.0
        assert len(body["config_hash"]) == 64

    def test_unknown_case(self, controller_json):
        response = client.post(
            "/simulate", json={"config": SHORT_RUN, "controller": controller_json, "cases": ["IC9_delta+0.0mm"]}
        )
        assert response.status_code == 422

    def test_malformed_controller(self):
        response = client.post("/simulate", json={"config": SHORT_RUN, "controller": {"gain": [[1.0]]}})
        assert response.status_code == 422

    def test_analyze_without_violation_samples(self, controller_json):
        response = client.post(
            "/analyze",
            json={
                "config": SHORT_RUN, "controller": controller_json, "cases": ["IC1_delta+0.0mm"],
                "violation_samples": 0,
            },
        )
        assert response.status_code == 200
        body = response.json()
        assert body["violation"] is None
        assert body["designer"] == "pd"
        assert body["cases"]["IC1_delta+0.0mm"]["samples"] == 3
