import math
import time

import pytest
from fastapi.testclient import TestClient

from ctxattr import make_planted_case, make_poison_case
from ctxattr.config import ServiceConfig, load_config
from ctxattr.errors import ProviderUnavailable
from ctxattr.providers.synthetic import CannedScoreOracle, PlantedLinearOracle
from ctxattr.server import create_app


def poll_job(client, job_id, timeout_s=10.0):
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        record = client.get(f"/v1/jobs/{job_id}").json()
        if record["status"] in ("done", "failed"):
            return record
        time.sleep(0.01)
    raise AssertionError("job did not finish in time")


@pytest.fixture
def planted_client(tmp_path):
    case = make_planted_case(d=8, k=2, seed=31)
    config = ServiceConfig(cache_dir=str(tmp_path / "cache"), max_in_flight=4)
    app = create_app(config, provider=case.provider)
    with TestClient(app) as client:
        yield client, case


def attribute_body(case, **overrides):
    body = {
        "context": case.partition.context_text,
        "query": case.query,
        "template": case.template,
        "response": case.response_text,
        "n": 16,
        "seed": 5,
        "granularity": "sentence",
    }
    body.update(overrides)
    return body


class TestAttributeJob:
    def test_submit_poll_done(self, planted_client):
        client, case = planted_client
        resp = client.post("/v1/attribute", json=attribute_body(case))
        assert resp.status_code == 200
        job_id = resp.json()["jobId"]
        record = poll_job(client, job_id)
        assert record["status"] == "done"
        weights = record["result"]["attribution"]["weights"]
        assert len(weights) == case.partition.d
        assert record["progress"] == {"completed": 16, "total": 16}

    def test_statement_snapping_in_job(self, planted_client):
        client, case = planted_client
        resp = client.post("/v1/attribute", json=attribute_body(
            case, statement={"charStart": 1, "charEnd": 3},
        ))
        record = poll_job(client, resp.json()["jobId"])
        assert record["status"] == "done"
        statement = record["result"]["statement"]
        assert statement["charStart"] <= 1
        assert statement["charEnd"] >= 3
        assert statement["tokenEnd"] > statement["tokenStart"]

    def test_malformed_body_is_400(self, planted_client):
        client, _ = planted_client
        resp = client.post("/v1/attribute", json={"query": "missing context"})
        assert resp.status_code == 400
        assert resp.json()["code"] == "bad_request"

    def test_unknown_job_is_404(self, planted_client):
        client, _ = planted_client
        resp = client.get("/v1/jobs/doesnotexist")
        assert resp.status_code == 404
        assert resp.json()["code"] == "not_found"

    def test_warm_cache_second_job_needs_no_provider_calls(self, planted_client):
        client, case = planted_client
        first = client.post("/v1/attribute", json=attribute_body(case))
        record1 = poll_job(client, first.json()["jobId"])
        calls_after_first = case.provider.call_count
        stats1 = client.get("/v1/cache/stats").json()
        second = client.post("/v1/attribute", json=attribute_body(case))
        record2 = poll_job(client, second.json()["jobId"])
        stats2 = client.get("/v1/cache/stats").json()
        assert case.provider.call_count == calls_after_first  # zero new calls
        assert stats2["hits"] == stats1["hits"] + 16
        assert record1["result"]["attribution"] == record2["result"]["attribution"]


class TestOtherEndpoints:
    def test_generate(self, planted_client):
        client, case = planted_client
        resp = client.post("/v1/generate", json={
            "context": case.partition.context_text,
            "query": case.query,
            "template": case.template,
        })
        assert resp.status_code == 200
        data = resp.json()
        assert data["response"] == case.response_text
        assert len(data["tokens"]) == len(case.response_tokens)

    def test_partitions_preview(self, planted_client):
        client, _ = planted_client
        resp = client.get("/v1/partitions", params={
            "context": "A cat sat. A dog ran.", "granularity": "sentence",
        })
        assert resp.status_code == 200
        data = resp.json()
        assert data["d"] == 2
        assert data["sources"][0]["text"] == "A cat sat."
        assert data["sources"][0]["trailingSeparator"] == " "

    def test_partitions_bad_granularity_is_400(self, planted_client):
        client, _ = planted_client
        resp = client.get("/v1/partitions", params={"context": "abc", "granularity": "char"})
        assert resp.status_code == 400

    def test_verify_endpoint(self, tmp_path):
        provider = CannedScoreOracle({"yes": math.log(0.8), "no": math.log(0.2)})
        app = create_app(ServiceConfig(), provider=provider)
        with TestClient(app) as client:
            resp = client.post("/v1/verify", json={
                "context": "Fact one. Fact two. Fact three.",
                "query": "What is fact one?",
                "answer": "the first fact",
                "k": 2,
                "n": 8,
            })
            assert resp.status_code == 200
            data = resp.json()
            assert data["score"] == pytest.approx(0.8, abs=1e-9)
            assert data["mergedStatement"].startswith("The answer to")

    def test_prune_endpoint(self, planted_client):
        client, case = planted_client
        resp = client.post("/v1/prune", json={
            "context": case.partition.context_text,
            "query": case.query,
            "template": case.template,
            "k": 2,
            "n": 16,
            "seed": 3,
        })
        assert resp.status_code == 200
        data = resp.json()
        assert len(data["prunedSources"]) <= case.partition.d
        assert "newResponse" in data and "firstResponse" in data

    def test_poison_scan_endpoint(self, tmp_path):
        case = make_poison_case(d=10, seed=17)
        app = create_app(ServiceConfig(), provider=case.provider)
        with TestClient(app) as client:
            resp = client.post("/v1/poison-scan", json={
                "context": case.partition.context_text,
                "query": case.query,
                "template": case.template,
                "k": 3,
                "n": 32,
                "seed": 9,
            })
            assert resp.status_code == 200
            data = resp.json()
            assert data["flagged"][0] == case.poison_index

    def test_provider_failure_maps_to_502(self):
        class DownProvider(PlantedLinearOracle):
            def generate(self, prompt, max_tokens=256, seed=None):
                raise ProviderUnavailable("endpoint down")

        provider = DownProvider(["Solo source."], [1.0], 0.0)
        app = create_app(ServiceConfig(), provider=provider)
        with TestClient(app) as client:
            resp = client.post("/v1/generate", json={"context": "Solo source.", "query": "q"})
            assert resp.status_code == 502
            assert resp.json()["code"] == "provider_unavailable"

    def test_no_provider_configured(self):
        app = create_app(ServiceConfig())
        with TestClient(app) as client:
            resp = client.post("/v1/generate", json={"context": "c.", "query": "q"})
            assert resp.status_code == 502

    def test_cache_stats_disabled(self):
        case = make_planted_case(d=4, k=1, seed=1)
        app = create_app(ServiceConfig(), provider=case.provider)
        with TestClient(app) as client:
            stats = client.get("/v1/cache/stats").json()
            assert stats == {"hits": 0, "misses": 0, "entries": 0, "enabled": False}

    def test_static_hosting(self, tmp_path):
        static = tmp_path / "ui"
        static.mkdir()
        (static / "index.html").write_text("<html><body>ui shell</body></html>")
        case = make_planted_case(d=4, k=1, seed=1)
        app = create_app(ServiceConfig(static_dir=str(static)), provider=case.provider)
        with TestClient(app) as client:
            resp = client.get("/")
            assert resp.status_code == 200
            assert "ui shell" in resp.text

    def test_bearer_token_enforced(self):
        case = make_planted_case(d=4, k=1, seed=1)
        app = create_app(ServiceConfig(service_token="hunter2"), provider=case.provider)
        with TestClient(app) as client:
            denied = client.get("/v1/cache/stats")
            assert denied.status_code == 401
            allowed = client.get("/v1/cache/stats", headers={"Authorization": "Bearer hunter2"})
            assert allowed.status_code == 200


class TestConfigPrecedence:
    def test_flags_beat_env_beat_file(self, tmp_path):
        config_file = tmp_path / "service.conf"
        config_file.write_text(
            "port=1111\nprovider_url=http://from-file\nmax_in_flight=2  # comment\n"
        )
        env = {"PROVIDER_URL": "http://from-env", "PROVIDER_TIMEOUT_MS": "500"}
        config = load_config(
            flags={"port": 2222}, env=env, config_file=config_file,
        )
        assert config.port == 2222
        assert config.provider_url == "http://from-env"
        assert config.provider_timeout_ms == 500
        assert config.max_in_flight == 2

    def test_unknown_keys_rejected(self, tmp_path):
        config_file = tmp_path / "bad.conf"
        config_file.write_text("warp_drive=на\n")
        with pytest.raises(ValueError):
            load_config(env={}, config_file=config_file)

    def test_malformed_line_rejected(self, tmp_path):
        config_file = tmp_path / "bad.conf"
        config_file.write_text("just a line\n")
        with pytest.raises(ValueError):
            load_config(env={}, config_file=config_file)
