import json

import httpx
import pytest

from weakstore import History, StoreConfig, satisfies
from weakstore.server import ServerThread


@pytest.fixture()
def causal_server():
    config = StoreConfig(level="causal", seed=5, default_value=0)
    with ServerThread(config, begin_timeout=0.2) as server:
        with httpx.Client(base_url=server.address, timeout=5.0) as client:
            yield client


def _session(client):
    token = client.post("/session").json()["token"]
    return {"X-Session-Token": token}


def test_session_and_kv_lifecycle(causal_server):
    client = causal_server
    headers = _session(client)
    assert client.post("/kv/begin", headers=headers).status_code == 200
    r = client.post("/kv/write", headers=headers, json={"key": "k", "value": 42})
    assert r.status_code == 200
    r = client.post("/kv/read", headers=headers, json={"key": "k"})
    assert r.json() == {"value": 42}
    assert client.post("/kv/commit", headers=headers).status_code == 200


def test_read_returns_axiom_valid_value(causal_server):
    client = causal_server
    writer = _session(client)
    client.post("/kv/begin", headers=writer)
    client.post("/kv/write", headers=writer, json={"key": "cart:u", "value": "I"})
    client.post("/kv/commit", headers=writer)
    reader = _session(client)
    client.post("/kv/begin", headers=reader)
    value = client.post("/kv/read", headers=reader, json={"key": "cart:u"}).json()["value"]
    client.post("/kv/commit", headers=reader)
    assert value in (0, "I")


def test_sql_endpoint(causal_server):
    client = causal_server
    headers = _session(client)
    for q in (
        "CREATE TABLE A (Id, Name, City)",
        "INSERT INTO A VALUES (1, 'Alice', 'Paris')",
    ):
        assert client.post("/sql", headers=headers, json={"query": q}).status_code == 200
    rows = client.post(
        "/sql", headers=headers, json={"query": "SELECT Name FROM A WHERE City = 'Paris'"}
    ).json()
    assert rows == {"rows": [{"Name": "Alice"}]}


def test_history_dump_parses_and_satisfies(causal_server):
    client = causal_server
    headers = _session(client)
    client.post("/kv/begin", headers=headers)
    client.post("/kv/write", headers=headers, json={"key": "k", "value": 1})
    client.post("/kv/read", headers=headers, json={"key": "other"})
    client.post("/kv/commit", headers=headers)
    dump = client.get("/history").json()
    history = History.parse(dump)
    assert satisfies(history, "causal")


def test_config_endpoint(causal_server):
    cfg = causal_server.get("/config").json()
    assert cfg["isolation"] == "causal"
    assert cfg["seed"] == 5
    assert cfg["latest_reads"] is False


def test_error_codes(causal_server):
    client = causal_server
    r = client.post("/kv/begin", headers={"X-Session-Token": "bogus"})
    assert r.status_code == 404
    assert r.json()["error"]["code"] == "unknown-session"

    headers = _session(client)
    r = client.post("/kv/read", headers=headers, json={"key": "k"})
    assert r.status_code == 409
    assert r.json()["error"]["code"] == "no-live-transaction"

    r = client.post(
        "/sql", headers=headers, json={"query": "SELECT * FROM Missing"}
    )
    assert r.status_code == 400
    assert r.json()["error"]["code"] == "unknown-table"

    r = client.request(
        "POST", "/kv/read", headers={**headers, "Content-Type": "application/json"},
        content=b"{broken",
    )
    assert r.status_code == 400
    assert r.json()["error"]["code"] == "malformed-request"


def test_begin_blocks_until_timeout_conflict(causal_server):
    client = causal_server
    first = _session(client)
    second = _session(client)
    client.post("/kv/begin", headers=first)
    r = client.post("/kv/begin", headers=second)
    assert r.status_code == 409
    assert r.json()["error"]["code"] == "begin-timeout"
    client.post("/kv/commit", headers=first)
    assert client.post("/kv/begin", headers=second).status_code == 200
    client.post("/kv/commit", headers=second)


def test_token_isolation(causal_server):
    client = causal_server
    a = _session(client)
    b = _session(client)
    client.post("/kv/begin", headers=a)
    # b has no live transaction: its commit cannot touch a's
    r = client.post("/kv/commit", headers=b)
    assert r.status_code == 409
    client.post("/kv/commit", headers=a)


def test_idle_sessions_expire():
    from weakstore.server import StoreService

    service = StoreService(StoreConfig(level="causal"), session_ttl=0.0)
    stale = service.create_session()
    service.create_session()  # sweeps expired idle sessions
    with pytest.raises(Exception) as err:
        service.kv_begin(stale)
    assert getattr(err.value, "code", "") == "unknown-session"


def test_delete_session(causal_server):
    client = causal_server
    headers = _session(client)
    token = headers["X-Session-Token"]
    client.post("/kv/begin", headers=headers)
    r = client.delete(f"/session/{token}")
    assert r.status_code == 409  # live transaction, refuse
    client.post("/kv/commit", headers=headers)
    assert client.delete(f"/session/{token}").status_code == 200
    assert client.post("/kv/begin", headers=headers).status_code == 404
