import json
import threading

import httpx
import pytest

from navmem.client import ChatClient, TransportError


def ok(content="Action: A"):
    return httpx.Response(200, json={"choices": [{"message": {"content": content}}]})


def make(handler, **kw):
    sleeps = []
    client = ChatClient("http://llm.test/v1/", "m", transport=httpx.MockTransport(handler),
                        sleep=sleeps.append, **kw)
    return client, sleeps


def test_request_shape_and_auth(monkeypatch):
    monkeypatch.setenv("NAVMEM_API_KEY", "sekret")
    seen = {}

    def handler(request):
        seen["url"] = str(request.url)
        seen["auth"] = request.headers.get("authorization")
        seen["body"] = json.loads(request.content)
        return ok("hello")

    client, _ = make(handler)
    assert client.complete("sys", "usr") == "hello"
    assert seen["url"] == "http://llm.test/v1/chat/completions"
    assert seen["auth"] == "Bearer sekret"
    assert seen["body"]["temperature"] == 0.0
    assert [m["role"] for m in seen["body"]["messages"]] == ["system", "user"]


def test_no_key_no_header(monkeypatch):
    monkeypatch.delenv("NAVMEM_API_KEY", raising=False)
    client, _ = make(lambda r: ok() if "authorization" not in r.headers else httpx.Response(400))
    assert client.complete("s", "u") == "Action: A"


def test_retries_with_exponential_backoff():
    codes = iter([429, 503, 200])
    client, sleeps = make(lambda r: ok() if (c := next(codes)) == 200 else httpx.Response(c), backoff=0.5)
    assert client.complete("s", "u") == "Action: A"
    assert sleeps == [0.5, 1.0]


def test_transport_errors_exhaust_retries():
    def handler(request):
        raise httpx.ConnectError("refused", request=request)

    client, sleeps = make(handler, max_retries=2)
    with pytest.raises(TransportError):
        client.complete("s", "u")
    assert len(sleeps) == 2


def test_client_error_is_not_retried():
    calls = []
    client, sleeps = make(lambda r: calls.append(1) or httpx.Response(401, text="bad key"))
    with pytest.raises(TransportError, match="401"):
        client.complete("s", "u")
    assert len(calls) == 1 and sleeps == []


def test_malformed_body():
    client, _ = make(lambda r: httpx.Response(200, json={"nope": 1}))
    with pytest.raises(TransportError, match="malformed"):
        client.complete("s", "u")


def test_in_flight_cap():
    lock = threading.Lock()
    state = {"now": 0, "peak": 0}
    gate = threading.Event()

    def handler(request):
        with lock:
            state["now"] += 1
            state["peak"] = max(state["peak"], state["now"])
        gate.wait(0.05)
        with lock:
            state["now"] -= 1
        return ok()

    client, _ = make(handler, max_in_flight=2)
    threads = [threading.Thread(target=client.complete, args=("s", "u")) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert 1 <= state["peak"] <= 2
