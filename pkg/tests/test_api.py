import asyncio

import httpx
import pytest
from fastapi.testclient import TestClient

from main import app
from routers.bot_router import DEPLOYMENT_KEYS
from services.market_data import write_candles
from services.strategy import PublicParams
from services.zkproof import Witness, prove


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


@pytest.fixture
def candles_bytes(losing_series, tmp_path):
    return write_candles(losing_series, tmp_path / "candles.csv").read_bytes()


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "healthy"
    assert "X-Request-ID" in response.headers
    assert client.get("/api/v1/health").json()["circuit"] == "bollinger-v1"


def test_circuit_is_published(client):
    body = client.get("/api/v1/circuit").json()
    assert body["verifier_matches_source"] is True
    assert "public  price" in body["source"]
    assert body["verification_key_digest"] == DEPLOYMENT_KEYS.vk_digest()


def test_verify_proof(client):
    p = PublicParams(price=9000, upper=12000, lower=10000)
    proof = prove(DEPLOYMENT_KEYS.proving_key, p, Witness(buy_sell_flag=1, bound_percentage=0), bytes(16))
    assert client.post("/api/v1/proofs/verify", json={"proof": proof.hex()}).json()["valid"] is True
    assert client.post("/api/v1/proofs/verify", json={"proof": "zz"}).json()["valid"] is False
    tampered = proof.hex()[:-2] + ("00" if proof.hex()[-2:] != "00" else "01")
    assert client.post("/api/v1/proofs/verify", json={"proof": tampered}).json()["valid"] is False


def test_train(client, candles_bytes):
    response = client.post(
        "/api/v1/train",
        files={"file": ("candles.csv", candles_bytes, "text/csv")},
        data={"input_period": "3600", "method": "avg", "top": "2"},
    )
    assert response.status_code == 200
    body = response.json()
    assert body["success"] is True
    assert len(body["ranking"]["rows"]) == 2
    assert body["windows"]["train"] >= body["windows"]["test"] > 0
    assert len(body["input"]["sha256"]) == 64


def test_simulate(client, candles_bytes):
    response = client.post(
        "/api/v1/simulate",
        files={"file": ("candles.csv", candles_bytes, "text/csv")},
        data={"params": "5.1.0.0", "input_period": "3600", "rounds": "12", "users": "3"},
    )
    assert response.status_code == 200
    body = response.json()
    assert body["report"]["rounds"] == 12
    assert "rows" not in body["report"]["settlement"]
    assert all('"decision"' not in line for line in body["trace"])


def test_rejects_unsupported_upload(client):
    response = client.post(
        "/api/v1/train",
        files={"file": ("candles.txt", b"timestamp,close\n0,1\n", "text/plain")},
    )
    assert response.status_code == 400
    assert response.json()["success"] is False


def test_bad_config_label_is_client_error(client, candles_bytes):
    response = client.post(
        "/api/v1/simulate",
        files={"file": ("candles.csv", candles_bytes, "text/csv")},
        data={"params": "5.1.0", "input_period": "3600"},
    )
    assert response.status_code == 400


@pytest.mark.asyncio
async def test_concurrent_verifications():
    p = PublicParams(price=9000, upper=12000, lower=10000)
    proofs = [prove(DEPLOYMENT_KEYS.proving_key, p, Witness(buy_sell_flag=1, bound_percentage=0), bytes([i]) * 16)
              for i in range(8)]
    transport = httpx.ASGITransport(app=app)
    async with httpx.AsyncClient(transport=transport, base_url="http://bot.test") as ac:
        responses = await asyncio.gather(
            *(ac.post("/api/v1/proofs/verify", json={"proof": proof.hex()}) for proof in proofs),
            ac.post("/api/v1/proofs/verify", json={"proof": "00" * 120}),
        )
    assert [r.json()["valid"] for r in responses] == [True] * 8 + [False]
    assert len({r.headers["X-Request-ID"] for r in responses}) == 9


@pytest.mark.asyncio
async def test_async_upload_rejected_with_error_body():
    transport = httpx.ASGITransport(app=app)
    async with httpx.AsyncClient(transport=transport, base_url="http://bot.test") as ac:
        response = await ac.post("/api/v1/train", files={"file": ("candles.txt", b"timestamp,close\n0,1\n", "text/plain")})
    assert response.status_code == 400
    body = response.json()
    assert body["success"] is False
    assert set(body) >= {"error", "request_id", "processing_time"}
