"""Model backends: live HTTP chat, scripted replay, and transcript capture.

Everything downstream talks to a backend through one method,
``complete(call) -> str``. The scripted backend keys replies by a stable
fingerprint of (role, rendered prompt) so recorded sessions replay
byte-for-byte regardless of concurrency or call order.
"""
from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass
from typing import Optional, Protocol

import httpx

from currigen.errors import BackendError, StorageError


@dataclass(frozen=True)
class AgentCall:
    role: str
    prompt: str
    temperature: float = 0.0
    max_tokens: Optional[int] = None


class Backend(Protocol):
    def complete(self, call: AgentCall) -> str: ...


def fingerprint(role: str, prompt: str) -> str:
    digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]
    return f"{role}:{digest}"


class HttpChatBackend:
    """OpenAI-compatible chat-completions client.

    The API key is read from the named environment variable at construction;
    an unset variable is fine for local servers that skip auth.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_env: Optional[str] = None,
        timeout: float = 120.0,
        max_tokens: Optional[int] = None,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.model = model
        self.max_tokens = max_tokens
        headers = {}
        if api_key_env:
            key = os.environ.get(api_key_env, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"
        self._client = httpx.Client(
            base_url=base_url.rstrip("/"),
            timeout=timeout,
            headers=headers,
            transport=transport,
        )

    def complete(self, call: AgentCall) -> str:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": call.prompt}],
            "temperature": call.temperature,
        }
        limit = call.max_tokens if call.max_tokens is not None else self.max_tokens
        if limit is not None:
            payload["max_tokens"] = limit
        try:
            resp = self._client.post("/chat/completions", json=payload)
        except httpx.HTTPError as exc:
            raise BackendError(f"chat request failed: {exc}") from exc
        if resp.status_code != 200:
            raise BackendError(
                f"chat request returned {resp.status_code}: {resp.text[:200]}"
            )
        try:
            body = resp.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed chat response: {exc}") from exc
        if not isinstance(text, str):
            raise BackendError("chat response content is not a string")
        return text

    def close(self):
        self._client.close()


class ScriptedBackend:
    """Replays canned replies keyed by prompt fingerprint. Strict: an

    unknown fingerprint is an error, never a silent default."""

    def __init__(self, replies: dict):
        for k, v in replies.items():
            if not isinstance(k, str) or not isinstance(v, str):
                raise BackendError("scripted replies must map str -> str")
        self._replies = dict(replies)

    @classmethod
    def from_file(cls, path) -> "ScriptedBackend":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise StorageError(str(path), f"cannot read script: {exc}") from exc
        except ValueError as exc:
            raise BackendError(f"script {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise BackendError(f"script {path} must be a JSON object")
        return cls(data)

    def complete(self, call: AgentCall) -> str:
        key = fingerprint(call.role, call.prompt)
        try:
            return self._replies[key]
        except KeyError:
            raise BackendError(
                f"no scripted reply for {key} (role={call.role})"
            ) from None


class TranscriptRecorder:
    """Wraps a backend and captures fingerprint -> reply pairs.

    flush() writes them sorted by key, so the artifact is stable however
    many worker threads interleaved during recording.
    """

    def __init__(self, inner: Backend):
        self._inner = inner
        self._lock = threading.Lock()
        self._seen: dict = {}

    def complete(self, call: AgentCall) -> str:
        reply = self._inner.complete(call)
        key = fingerprint(call.role, call.prompt)
        with self._lock:
            prior = self._seen.get(key)
            if prior is not None and prior != reply:
                raise BackendError(
                    f"non-deterministic replies for {key}; cannot record a replayable script"
                )
            self._seen[key] = reply
        return reply

    def flush(self, path):
        with self._lock:
            snapshot = dict(sorted(self._seen.items()))
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                json.dump(snapshot, fh, ensure_ascii=False, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            raise StorageError(str(path), f"cannot write script: {exc}") from exc
