"""Single choke-point for model calls.

All modules that need a model go through LlmGateway.complete_chat; nothing
else in the codebase performs provider network I/O. Remote mode targets an
Ollama-compatible HTTP chat endpoint; stub mode is a pure function of the
request (see stub.py). Transport failures and schema-invalid responses are
retried up to max_retries with exponential backoff (0.5 s then 1 s;
backoff sleeps apply to remote mode only).
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import httpx
import jsonschema

from blockclass.errors import ProviderTimeout, ProviderUnavailable, SchemaValidationFailed
from blockclass.llm.config import ProviderConfig
from blockclass.llm.stub import StubProvider, StubTimeout, StubTransportError

logger = logging.getLogger(__name__)

BACKOFF_SCHEDULE_S = (0.5, 1.0)


@dataclass
class ChatRequest:
    system: str
    messages: list[dict] = field(default_factory=list)  # {"role": ..., "text": ...}
    json_schema: dict | None = None
    temperature: float | None = None

    def payload(self) -> dict:
        return {
            "system": self.system,
            "messages": self.messages,
            "json_schema": self.json_schema,
            "temperature": self.temperature,
        }


@dataclass
class ChatResponse:
    text: str
    finish_reason: str
    latency_ms: int


def request_hash(request: ChatRequest) -> str:
    canonical = json.dumps(request.payload(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class LlmGateway:
    def __init__(
        self,
        config: ProviderConfig,
        stub: StubProvider | None = None,
        sleeper: Callable[[float], None] | None = None,
        http_client: httpx.Client | None = None,
    ):
        self.config = config
        self.stub = stub if stub is not None else StubProvider()
        self._sleeper = sleeper
        self._http = http_client
        self.calls_attempted = 0

    def _sleep(self, seconds: float) -> None:
        if self._sleeper is not None:
            self._sleeper(seconds)
        elif self.config.mode == "remote":
            time.sleep(seconds)

    def complete_chat(self, request: ChatRequest) -> ChatResponse:
        """Run one chat completion, honoring timeout, retries, and the
        optional output schema. Raises ProviderUnavailable / ProviderTimeout
        after exhausting transport retries, SchemaValidationFailed after
        exhausting schema retries."""
        attempts = self.config.max_retries + 1
        last_error: Exception | None = None
        schema_failure = False

        for attempt in range(attempts):
            if attempt > 0:
                idx = min(attempt - 1, len(BACKOFF_SCHEDULE_S) - 1)
                self._sleep(BACKOFF_SCHEDULE_S[idx])
            self.calls_attempted += 1
            started = time.monotonic()
            try:
                text, finish = self._call_provider(request)
            except StubTimeout as exc:
                last_error, schema_failure = exc, False
                logger.warning("provider timeout (attempt %d/%d)", attempt + 1, attempts)
                continue
            except StubTransportError as exc:
                last_error, schema_failure = exc, False
                logger.warning("provider transport error (attempt %d/%d)", attempt + 1, attempts)
                continue
            except httpx.TimeoutException as exc:
                last_error, schema_failure = exc, False
                logger.warning("provider timeout (attempt %d/%d)", attempt + 1, attempts)
                continue
            except httpx.HTTPError as exc:
                last_error, schema_failure = exc, False
                logger.warning(
                    "provider transport error (attempt %d/%d): %s", attempt + 1, attempts, exc
                )
                continue

            if request.json_schema is not None:
                try:
                    parsed = json.loads(text)
                    jsonschema.validate(parsed, request.json_schema)
                except (json.JSONDecodeError, jsonschema.ValidationError) as exc:
                    last_error, schema_failure = exc, True
                    logger.warning(
                        "provider output failed schema (attempt %d/%d): %s",
                        attempt + 1,
                        attempts,
                        str(exc)[:120],
                    )
                    continue

            latency = 0 if self.config.mode == "stub" else int((time.monotonic() - started) * 1000)
            return ChatResponse(text=text, finish_reason=finish, latency_ms=latency)

        if schema_failure:
            raise SchemaValidationFailed(f"output failed schema after {attempts} attempts")
        if isinstance(last_error, (StubTimeout, httpx.TimeoutException)):
            raise ProviderTimeout(f"provider timed out after {attempts} attempts")
        raise ProviderUnavailable(f"provider unreachable after {attempts} attempts")

    def _call_provider(self, request: ChatRequest) -> tuple[str, str]:
        if self.config.mode == "stub":
            return self.stub.complete(request.payload(), request_hash(request)), "stop"
        return self._call_remote(request)

    def _call_remote(self, request: ChatRequest) -> tuple[str, str]:
        temperature = request.temperature
        if temperature is None:
            temperature = (
                self.config.temperature_structured
                if request.json_schema is not None
                else self.config.temperature_chat
            )
        messages = [{"role": "system", "content": request.system}]
        messages += [{"role": m["role"], "content": m["text"]} for m in request.messages]
        body = {
            "model": self.config.model_name,
            "messages": messages,
            "stream": False,
            "options": {"temperature": temperature},
        }
        if request.json_schema is not None:
            body["format"] = "json"

        client = self._http
        url = self.config.base_url.rstrip("/") + "/api/chat"
        if client is not None:
            resp = client.post(url, json=body, timeout=self.config.request_timeout_s)
        else:
            resp = httpx.post(url, json=body, timeout=self.config.request_timeout_s)
        resp.raise_for_status()
        data = resp.json()
        text = data.get("message", {}).get("content", "")
        finish = data.get("done_reason", "stop")
        return text, finish
