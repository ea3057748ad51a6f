from __future__ import annotations

import hashlib
import json

import httpx
import pytest

from agora.backends import (
    HttpChatBackend,
    RecordingBackend,
    ReplayBackend,
    SamplingParams,
    ScriptedBackend,
    TranscriptRecord,
    derive_seed,
    keyword_importance,
    read_transcript,
    write_transcript,
)
from agora.cognition import PromptBundle, assemble_prompt, importance_bundle
from agora.errors import BackendConfigurationError, BackendError, ReplayMissError
from agora.world import load_world


def test_derive_seed_definition():
    expected = int.from_bytes(hashlib.sha256(b"42:round:3").digest()[:8], "big") & (2**63 - 1)
    assert derive_seed(42, "round", 3) == expected
    assert derive_seed(42, "round", 3) != derive_seed(42, "round", 4)
    assert 0 <= derive_seed(2**64 - 1, "x") < 2**63


def _bundle(config, who="Ann"):
    world = load_world(config)
    world.tick = 1
    return assemble_prompt(world.agent(who), world, [], "What now?")


def test_scripted_backend_is_deterministic(config):
    def policy(obs, rng, params):
        return f"SAY: {obs.owner} rolled {rng.randint(0, 10**9)}"

    backend = ScriptedBackend(policy)
    a, b = _bundle(config), _bundle(config)
    assert backend.complete(a) == backend.complete(b)
    assert backend.complete(_bundle(config, "Ben")).startswith("SAY: Ben rolled")


def test_scripted_backend_routes_importance_requests():
    backend = ScriptedBackend(lambda *_: "SAY: should not be used")
    assert backend.complete(importance_bundle('Ben says: "I will contribute $5"')) == "8"
    assert keyword_importance("Ben waits in the Hall.") == "3"


def test_record_then_replay(tmp_path, config):
    inner = ScriptedBackend(lambda obs, rng, p: "WAIT")
    rec = RecordingBackend(inner)
    b = _bundle(config)
    rec.complete(b)
    rec.complete(importance_bundle("x"))
    rec.save(tmp_path / "t.jsonl")
    records = read_transcript(tmp_path / "t.jsonl")
    assert records[0] == TranscriptRecord(b.digest, b.text, "WAIT")
    replay = ReplayBackend(records)
    assert replay.complete(b) == "WAIT"
    assert replay.remaining == 1
    with pytest.raises(ReplayMissError):
        replay.complete(b)  # only recorded once
    with pytest.raises(ReplayMissError):
        replay.complete(PromptBundle("never", "seen", "before"))


def test_replay_answers_repeated_prompts_in_order(tmp_path):
    p = PromptBundle("s", "c", "r")
    write_transcript([TranscriptRecord(p.digest, p.text, "one"), TranscriptRecord(p.digest, p.text, "two")], tmp_path / "t.jsonl")
    replay = ReplayBackend.from_file(tmp_path / "t.jsonl")
    assert [replay.complete(p), replay.complete(p)] == ["one", "two"]


# -- http --------------------------------------------------------------------------


def _ok(content: str) -> httpx.Response:
    return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": content}}]})


def _http(handler, **kw) -> tuple[HttpChatBackend, list[float]]:
    sleeps: list[float] = []
    backend = HttpChatBackend(
        api_key="test-key",
        base_url="http://llm.local/v1",
        model="m1",
        transport=httpx.MockTransport(handler),
        sleep=sleeps.append,
        **kw,
    )
    return backend, sleeps


def test_http_requires_api_key(monkeypatch):
    monkeypatch.delenv("AGORA_API_KEY", raising=False)
    with pytest.raises(BackendConfigurationError, match="AGORA_API_KEY"):
        HttpChatBackend()


def test_http_reads_environment(monkeypatch):
    monkeypatch.setenv("AGORA_API_KEY", "k")
    monkeypatch.setenv("AGORA_BASE_URL", "http://example.test/api/")
    monkeypatch.setenv("AGORA_MODEL", "tiny")
    backend = HttpChatBackend()
    assert backend.base_url == "http://example.test/api"
    assert backend.model == "tiny"
    assert backend.sampling == SamplingParams(1.0, 256)


def test_http_request_shape():
    seen = []

    def handler(request: httpx.Request) -> httpx.Response:
        seen.append(request)
        return _ok("CONTINUE")

    backend, sleeps = _http(handler, sampling=SamplingParams(0.3, 64))
    bundle = PromptBundle("system part", "context part", "request part")
    assert backend.complete(bundle) == "CONTINUE"
    (req,) = seen
    assert str(req.url) == "http://llm.local/v1/chat/completions"
    assert req.headers["authorization"] == "Bearer test-key"
    body = json.loads(req.content)
    assert body["model"] == "m1" and body["temperature"] == 0.3 and body["max_tokens"] == 64
    assert body["messages"][0] == {"role": "system", "content": "system part"}
    assert body["messages"][1]["content"] == "context part\n\nrequest part"
    assert sleeps == []


def test_http_retries_with_exponential_backoff():
    statuses = iter([503, 429])

    def handler(request):
        code = next(statuses, 200)
        return _ok("WAIT") if code == 200 else httpx.Response(code)

    backend, sleeps = _http(handler, base_delay=0.5)
    assert backend.complete(PromptBundle("s", "c", "r")) == "WAIT"
    assert sleeps == [0.5, 1.0]


def test_http_gives_up_after_three_attempts():
    calls = []

    def handler(request):
        calls.append(1)
        raise httpx.ConnectError("refused", request=request)

    backend, sleeps = _http(handler)
    with pytest.raises(BackendError, match="after 3 attempts"):
        backend.complete(PromptBundle("s", "c", "r"))
    assert len(calls) == 3 and sleeps == [1.0, 2.0]


def test_http_does_not_retry_client_errors():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(400, json={"error": "bad request"})

    backend, sleeps = _http(handler)
    with pytest.raises(BackendError, match="bad response"):
        backend.complete(PromptBundle("s", "c", "r"))
    assert len(calls) == 1 and sleeps == []


def test_http_malformed_body_is_a_backend_error():
    backend, _ = _http(lambda r: httpx.Response(200, json={"nothing": True}))
    with pytest.raises(BackendError):
        backend.complete(PromptBundle("s", "c", "r"))
