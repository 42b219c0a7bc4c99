import hashlib
import json
import threading

import httpx
import pytest

from cascadetest.errors import BackendUnavailable, CassetteError, ReplayMiss
from cascadetest.llm import (
    ChatOptions,
    ChatReply,
    ChatRequest,
    HttpBackend,
    RecordingBackend,
    ReplayBackend,
    TokenBucket,
    complete,
    load_cassette,
    make_backend,
    record_cassette,
)


def req(text="hello", model="gpt-3.5-turbo"):
    return ChatRequest((("system", "role"), ("user", text)), model_id=model)


def completion(content="x();", reason="stop"):
    return {"choices": [{"message": {"role": "assistant", "content": content}, "finish_reason": reason}],
            "usage": {"prompt_tokens": 11, "completion_tokens": 3}}


# -- requests ---------------------------------------------------------------------


def test_request_validation():
    with pytest.raises(ValueError):
        ChatRequest(())
    with pytest.raises(ValueError):
        ChatRequest((("robot", "x"),))
    with pytest.raises(ValueError):
        ChatRequest((("user", "x"),), temperature=-0.1)


def test_wire_shape():
    body = req().wire()
    assert set(body) == {"model", "messages", "max_tokens", "temperature"}
    assert body["messages"][0] == {"role": "system", "content": "role"}
    assert ChatRequest.from_wire(body) == req()


def test_hash_is_stable():
    # independent recomputation: sha256 of sorted-key, compact JSON of the wire body
    canonical = ('{"max_tokens":1024,"messages":[{"content":"role","role":"system"},'
                 '{"content":"hello","role":"user"}],"model":"gpt-3.5-turbo","temperature":0.0}')
    assert req().hash() == hashlib.sha256(canonical.encode()).hexdigest()
    assert req().hash() != req("other").hash()
    assert req().hash() != req(model="gpt-4").hash()
    assert len(req().hash()) == 64


def test_chat_options():
    r = ChatOptions("m", 10, 0.5).request([{"role": "user", "content": "hi"}])
    assert (r.model_id, r.max_output_tokens, r.temperature) == ("m", 10, 0.5)


# -- http backend -------------------------------------------------------------------------


def fake_server(statuses, seen=None):
    """Answer each request with the next scripted status (200 carries a completion)."""
    it = iter(statuses)

    def handler(request):
        if seen is not None:
            seen.append(request)
        status = next(it)
        if status == 200:
            return httpx.Response(200, json=completion())
        return httpx.Response(status, json={"error": "busy"})

    return httpx.Client(transport=httpx.MockTransport(handler))


def test_http_retries_429_with_backoff():
    sleeps, seen = [], []
    backend = HttpBackend("https://llm.local/v1", client=fake_server([429, 429, 200], seen),
                          backoff_base=0.5, sleep=sleeps.append)
    reply = backend.complete(req())
    assert reply == ChatReply("x();", "stop", (11, 3))
    assert sleeps == [0.5, 1.0]
    assert len(seen) == 3
    assert seen[0].url == "https://llm.local/v1/chat/completions"
    assert json.loads(seen[0].content) == req().wire()


def test_http_gives_up_after_r_retries():
    sleeps = []
    backend = HttpBackend("https://llm.local/v1", client=fake_server([429] * 10), retries=3,
                          backoff_base=1.0, sleep=sleeps.append)
    with pytest.raises(BackendUnavailable):
        backend.complete(req())
    assert sleeps == [1.0, 2.0, 4.0]


def test_http_client_error_is_not_retried():
    sleeps = []
    backend = HttpBackend("https://llm.local/v1", client=fake_server([401, 200]), sleep=sleeps.append)
    with pytest.raises(BackendUnavailable, match="401"):
        backend.complete(req())
    assert sleeps == []


def test_http_transport_errors_are_retried():
    calls = []

    def handler(request):
        calls.append(1)
        if len(calls) == 1:
            raise httpx.ConnectError("refused")
        return httpx.Response(200, json=completion("y();"))

    backend = HttpBackend("https://llm.local/v1", client=httpx.Client(transport=httpx.MockTransport(handler)),
                          sleep=lambda s: None)
    assert complete(req(), backend).content == "y();"


def test_http_sends_api_key(monkeypatch):
    seen = []
    monkeypatch.setenv("MY_KEY", "sekrit")
    backend = HttpBackend("https://llm.local/v1", api_key_env="MY_KEY", client=fake_server([200], seen))
    backend.complete(req())
    assert seen[0].headers["authorization"] == "Bearer sekrit"


def test_token_bucket_waits():
    now = [0.0]
    waits = []

    def sleep(s):
        waits.append(s)
        now[0] += s

    bucket = TokenBucket(2.0, capacity=1, clock=lambda: now[0], sleep=sleep)
    bucket.acquire()
    bucket.acquire()
    assert waits == [pytest.approx(0.5)]


# -- cassettes ------------------------------------------------------------------------------


def test_cassette_roundtrip(tmp_path):
    session = [(req("a"), ChatReply("a();")), (req("b"), ChatReply("b();", "length", (5, 2)))]
    record_cassette(session, tmp_path / "c.jsonl")
    loaded = load_cassette(tmp_path / "c.jsonl")
    assert [(r, rep) for r, rep, _ in loaded] == session
    replay = ReplayBackend.from_cassette(tmp_path / "c.jsonl")
    assert replay.complete(req("b")) == ChatReply("b();", "length", (5, 2))


def test_empty_cassette(tmp_path):
    record_cassette([], tmp_path / "c.jsonl")
    assert (tmp_path / "c.jsonl").read_text() == ""
    assert load_cassette(tmp_path / "c.jsonl") == []


def test_replay_miss(tmp_path):
    record_cassette([(req(), ChatReply("a();"))], tmp_path / "c.jsonl")
    replay = ReplayBackend.from_cassette(tmp_path / "c.jsonl")
    with pytest.raises(ReplayMiss):
        replay.complete(req(model="unknown-model"))


def test_corrupted_cassette_names_the_line(tmp_path):
    session = [(req(str(i)), ChatReply(f"c{i}();")) for i in range(3)]
    path = tmp_path / "c.jsonl"
    record_cassette(session, path)
    lines = path.read_text().splitlines()
    lines[1] = lines[1][: len(lines[1]) // 2]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(CassetteError, match="line 2"):
        load_cassette(path)


def test_tampered_hash_is_detected(tmp_path):
    path = tmp_path / "c.jsonl"
    record_cassette([(req(), ChatReply("a();"))], path)
    rec = json.loads(path.read_text())
    rec["request_hash"] = "0" * 64
    path.write_text(json.dumps(rec) + "\n")
    with pytest.raises(CassetteError, match="line 1"):
        load_cassette(path)


def test_unwritable_cassette(tmp_path):
    (tmp_path / "file").write_text("")
    with pytest.raises(CassetteError):
        record_cassette([], tmp_path / "file" / "c.jsonl")


def test_recording_backend(tmp_path):
    class Echo:
        def complete(self, request):
            return ChatReply(request.messages[-1][1] + "();")

    rec = RecordingBackend(Echo())
    threads = [threading.Thread(target=rec.complete, args=(req(str(i)),)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    rec.save(tmp_path / "c.jsonl")
    replay = ReplayBackend.from_cassette(tmp_path / "c.jsonl")
    assert replay.complete(req("5")).content == "5();"
    # saved in hash order, so re-recording the same exchanges is byte-identical
    first = (tmp_path / "c.jsonl").read_bytes()
    rec.save(tmp_path / "d.jsonl")
    assert (tmp_path / "d.jsonl").read_bytes() == first


def test_make_backend(tmp_path):
    with pytest.raises(BackendUnavailable):
        make_backend({"backend": "replay"})
    with pytest.raises(BackendUnavailable):
        make_backend({"backend": "carrier-pigeon"})
    assert isinstance(make_backend({"backend": "http", "record_to": "x.jsonl"}), RecordingBackend)
    assert isinstance(make_backend({"backend": "http"}), HttpBackend)
