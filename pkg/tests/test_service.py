import pytest
from fastapi.testclient import TestClient

from lorasim.service import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


SMALL_MODEL = {
    "rank": 4,
    "lora_targets": ["k"],
    "blocks": [
        {"d_model": 64, "d_context": 64, "n_img": 64, "n_txt": 8, "count": 1, "name": "b"},
    ],
}


class TestHealth:
    def test_ok(self, client):
        r = client.get("/health")
        assert r.status_code == 200
        assert r.json()["status"] == "ok"


class TestSimulate:
    def test_default_configs(self, client):
        r = client.post("/simulate", json={"policy": "hybrid", "include_ops": False})
        assert r.status_code == 200
        body = r.json()
        assert body["cycles"] > 0
        assert body["ops"] == []
        assert 0 < body["achieved_tops"] < 3.2768

    def test_per_op_rows(self, client):
        r = client.post("/simulate", json={"model": SMALL_MODEL, "policy": "ws"})
        body = r.json()
        assert len(body["ops"]) == 26
        assert all(op["dataflow"] == "ws" for op in body["ops"])
        assert body["cycles"] == sum(op["cycles"] for op in body["ops"])

    def test_forced_policy_matches_programmatic_run(self, client):
        from lorasim.configio import load_hw_config, default_hw_path
        from lorasim.sched import Policy, run_trace
        from lorasim.workload import build_lora_trace, default_model_config

        r = client.post("/simulate", json={"policy": "os", "include_ops": False})
        array, mem, energy = load_hw_config(default_hw_path())
        want = run_trace(build_lora_trace(default_model_config()), array, mem, energy,
                         Policy.FORCE_OS)
        assert r.json()["cycles"] == want.cycles
        assert r.json()["energy_j"] == pytest.approx(want.energy_j)

    def test_invalid_model_rejected(self, client):
        bad = dict(SMALL_MODEL, blocks=[])
        r = client.post("/simulate", json={"model": bad})
        assert r.status_code == 422

    def test_invalid_hw_rejected(self, client):
        r = client.post("/simulate", json={"hw": {"array": {"rows": 0}}})
        assert r.status_code == 422


class TestCompare:
    def test_ratios_and_reference(self, client):
        r = client.post("/compare", json={"model": SMALL_MODEL})
        assert r.status_code == 200
        body = r.json()
        assert {row["config"] for row in body["rows"]} == {
            "full-fp32", "lora-os", "lora-ws", "lora-hybrid"}
        assert body["hybrid_vs_os_speedup"] >= 1.0
        assert body["hybrid_vs_ws_speedup"] >= 1.0
        assert body["reference"]["hybrid_vs_full_speedup"] == 1.81

    def test_hybrid_speedup_at_least_forced(self, client):
        body = client.post("/compare", json={}).json()
        times = {row["config"]: row["time_s"] for row in body["rows"]}
        assert times["lora-hybrid"] <= times["lora-os"]
        assert times["lora-hybrid"] <= times["lora-ws"]


class TestTrainDemo:
    def test_rows_and_determinism(self, client):
        req = {"steps": 5, "seed": 7}
        a = client.post("/train-demo", json=req).json()
        b = client.post("/train-demo", json=req).json()
        assert a == b
        assert len(a["rows"]) == 5
        assert a["rows"][0]["step"] == 0

    def test_zero_steps(self, client):
        r = client.post("/train-demo", json={"steps": 0})
        assert r.json()["rows"] == []

    def test_bad_dims_rejected(self, client):
        r = client.post("/train-demo", json={"d1": 0})
        assert r.status_code == 422


class TestTraceDump:
    def test_lora_and_full_variants(self, client):
        lora = client.post("/trace-dump", json={"model": SMALL_MODEL}).json()
        full = client.post("/trace-dump", json={"model": SMALL_MODEL, "variant": "full"}).json()
        assert len(lora["ops"]) == 26
        assert len(full["ops"]) == 18
        assert lora["total_macs"] < full["total_macs"]

    def test_unknown_variant_rejected(self, client):
        r = client.post("/trace-dump", json={"variant": "dense"})
        assert r.status_code == 422
