"""Cognition backends.

Every backend answers ``complete(bundle, sampling) -> str``. Three ship here:

* :class:`ScriptedBackend` runs a deterministic policy over the bundle's
  structured observation; randomness is derived from the world seed, the
  agent and the prompt digest, so the same state always gives the same reply.
* :class:`ReplayBackend` answers from a recorded transcript and refuses to
  invent anything it has not seen.
* :class:`HttpChatBackend` talks to an OpenAI-compatible chat-completions
  endpoint with bounded exponential backoff.

:class:`RecordingBackend` wraps any of them and captures a transcript that a
``ReplayBackend`` can later consume.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
from collections import defaultdict, deque
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

import httpx

from agora.cognition import Observation, PromptBundle, RequestKind
from agora.errors import BackendConfigurationError, BackendError, ReplayMissError

log = logging.getLogger(__name__)

API_KEY_ENV = "AGORA_API_KEY"
BASE_URL_ENV = "AGORA_BASE_URL"
MODEL_ENV = "AGORA_MODEL"
DEFAULT_BASE_URL = "https://api.openai.com/v1"
DEFAULT_MODEL = "gpt-4o-mini"


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 1.0
    max_tokens: int = 256


def derive_seed(master: int, *labels: object) -> int:
    """Split a master seed into an independent 63-bit child seed.

    The child is the first 8 bytes of SHA-256 over ``"master:label1:label2..."``
    interpreted big-endian, with the top bit cleared.
    """
    text = ":".join([str(int(master))] + [str(l) for l in labels])
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big") & (2**63 - 1)


# -- scripted ---------------------------------------------------------------------

Policy = Callable[[Observation, random.Random, Mapping[str, Any]], str]


class ScriptedBackend:
    """Deterministic policy backend.

    ``policy`` receives the observation, a ``random.Random`` seeded from
    ``(world seed, owner, tick, prompt digest)`` and the ``params`` mapping.
    Importance requests are answered by ``importance_policy`` (keyword based
    by default).
    """

    def __init__(self, policy: Policy, params: Mapping[str, Any] | None = None, importance_policy=None):
        self.policy = policy
        self.params = dict(params or {})
        self.importance_policy = importance_policy or keyword_importance

    def complete(self, bundle: PromptBundle, sampling: SamplingParams | None = None) -> str:
        obs = bundle.observation
        if obs is None or obs.request is RequestKind.IMPORTANCE:
            return self.importance_policy(bundle.request_text)
        rng = random.Random(derive_seed(obs.seed, obs.owner, obs.tick, bundle.digest))
        return self.policy(obs, rng, self.params)


_IMPORTANT_WORDS = ("contribute", "payoff", "copy", "assignment", "cart", "late", "midterm", "answers")


def keyword_importance(request_text: str) -> str:
    text = request_text.lower()
    score = 3
    if "says:" in text:
        score += 2
    if any(w in text for w in _IMPORTANT_WORDS):
        score += 3
    return str(score)


# -- transcripts / replay ---------------------------------------------------------


@dataclass(frozen=True)
class TranscriptRecord:
    digest: str
    prompt: str
    reply: str

    def to_dict(self) -> dict[str, str]:
        return {"digest": self.digest, "prompt": self.prompt, "reply": self.reply}


def write_transcript(records: Iterable[TranscriptRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False, separators=(",", ":")) + "\n")


def read_transcript(path: str | Path) -> list[TranscriptRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                out.append(TranscriptRecord(d["digest"], d["prompt"], d["reply"]))
    return out


class RecordingBackend:
    """Pass-through wrapper that records every (prompt, reply) pair in call order."""

    def __init__(self, inner):
        self.inner = inner
        self.records: list[TranscriptRecord] = []
        self.bundles: list[PromptBundle] = []
        self._lock = threading.Lock()

    def complete(self, bundle: PromptBundle, sampling: SamplingParams | None = None) -> str:
        reply = self.inner.complete(bundle, sampling)
        with self._lock:
            self.records.append(TranscriptRecord(bundle.digest, bundle.text, reply))
            self.bundles.append(bundle)
        return reply

    def save(self, path: str | Path) -> None:
        write_transcript(self.records, path)


class ReplayBackend:
    """Answers prompts from a transcript, keyed by prompt digest.

    Repeated identical prompts are answered in recorded order.
    """

    def __init__(self, records: Iterable[TranscriptRecord]):
        self._queues: dict[str, deque[str]] = defaultdict(deque)
        for r in records:
            self._queues[r.digest].append(r.reply)

    @classmethod
    def from_file(cls, path: str | Path) -> ReplayBackend:
        return cls(read_transcript(path))

    def complete(self, bundle: PromptBundle, sampling: SamplingParams | None = None) -> str:
        queue = self._queues.get(bundle.digest)
        if not queue:
            raise ReplayMissError(f"prompt {bundle.digest[:12]} not in transcript", agent=bundle.owner)
        return queue.popleft()

    @property
    def remaining(self) -> int:
        return sum(len(q) for q in self._queues.values())


# -- live endpoint ----------------------------------------------------------------

RETRYABLE_STATUS = {408, 409, 429, 500, 502, 503, 504}


class HttpChatBackend:
    """Blocking client for an OpenAI-compatible ``/chat/completions`` endpoint."""

    def __init__(
        self,
        *,
        api_key: str | None = None,
        base_url: str | None = None,
        model: str | None = None,
        sampling: SamplingParams | None = None,
        attempts: int = 3,
        base_delay: float = 1.0,
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        if not api_key:
            raise BackendConfigurationError(f"{API_KEY_ENV} is not set")
        self.base_url = (base_url or os.environ.get(BASE_URL_ENV) or DEFAULT_BASE_URL).rstrip("/")
        self.model = model or os.environ.get(MODEL_ENV) or DEFAULT_MODEL
        self.sampling = sampling or SamplingParams()
        self.attempts = attempts
        self.base_delay = base_delay
        self._sleep = sleep
        self._client = httpx.Client(
            timeout=timeout,
            transport=transport,
            headers={"Authorization": f"Bearer {api_key}"},
        )

    def payload(self, bundle: PromptBundle, sampling: SamplingParams) -> dict[str, Any]:
        return {
            "model": self.model,
            "messages": [
                {"role": "system", "content": bundle.system_text},
                {"role": "user", "content": f"{bundle.context_text}\n\n{bundle.request_text}".strip()},
            ],
            "temperature": sampling.temperature,
            "max_tokens": sampling.max_tokens,
        }

    def complete(self, bundle: PromptBundle, sampling: SamplingParams | None = None) -> str:
        body = self.payload(bundle, sampling or self.sampling)
        url = f"{self.base_url}/chat/completions"
        last: Exception | None = None
        for attempt in range(self.attempts):
            try:
                resp = self._client.post(url, json=body)
                if resp.status_code in RETRYABLE_STATUS:
                    raise BackendError(f"HTTP {resp.status_code} from {url}")
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"] or ""
            except (httpx.TransportError, BackendError) as exc:
                last = exc
                if attempt + 1 < self.attempts:
                    delay = self.base_delay * 2**attempt
                    log.warning("chat call failed (%s); retrying in %.1fs", exc, delay)
                    self._sleep(delay)
            except (httpx.HTTPStatusError, KeyError, IndexError, ValueError) as exc:
                raise BackendError(f"bad response from {url}: {exc}", agent=bundle.owner) from exc
        raise BackendError(f"chat call failed after {self.attempts} attempts: {last}", agent=bundle.owner)

    def close(self) -> None:
        self._client.close()
