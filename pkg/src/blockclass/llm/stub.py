"""Deterministic provider stand-in.

The stub makes every model-adjacent behavior testable offline:

* default mode is a pure function of the request hash -- identical
  requests always produce identical responses; when the request carries a
  JSON schema, a conforming instance is synthesized from the hash;
* scripted mode pops pre-arranged responses or failures in order, for
  exercising retry and validation policy;
* canned responses can be keyed by a request-hash prefix.

Every call is recorded, so tests can assert exact provider call counts.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any


class StubTransportError(Exception):
    """Simulated transport failure."""


class StubTimeout(Exception):
    """Simulated request timeout."""


@dataclass
class ScriptEntry:
    kind: str  # "text" | "transport_error" | "timeout"
    text: str = ""
    hash_prefix: str | None = None

    @classmethod
    def reply(cls, text: str, hash_prefix: str | None = None) -> ScriptEntry:
        return cls(kind="text", text=text, hash_prefix=hash_prefix)

    @classmethod
    def transport_error(cls) -> ScriptEntry:
        return cls(kind="transport_error")

    @classmethod
    def timeout(cls) -> ScriptEntry:
        return cls(kind="timeout")


def _hash_int(seed: str) -> int:
    return int(hashlib.sha256(seed.encode("utf-8")).hexdigest()[:12], 16)


def _hash_hex(seed: str, n: int = 8) -> str:
    return hashlib.sha256(seed.encode("utf-8")).hexdigest()[:n]


def synthesize_instance(schema: dict, seed: str) -> Any:
    """Deterministically build an instance conforming to a (small) JSON
    schema. Supports object/array/string/number/integer/boolean and enum;
    arrays default to 4 elements when the schema does not pin a size.
    Booleans synthesize False so classification-style schemas come out
    negative by default."""
    if "enum" in schema:
        return schema["enum"][0]
    stype = schema.get("type")
    if stype == "object":
        props = schema.get("properties", {})
        return {name: synthesize_instance(sub, f"{seed}/{name}") for name, sub in props.items()}
    if stype == "array":
        items = schema.get("items", {"type": "string"})
        count = max(schema.get("minItems", 0), 4)
        if "maxItems" in schema:
            count = min(count, schema["maxItems"])
        return [synthesize_instance(items, f"{seed}[{i}]") for i in range(count)]
    if stype == "string":
        title = schema.get("title", "text")
        return f"{title} stub-{_hash_hex(seed)}"
    if stype == "integer":
        lo = int(schema.get("minimum", 0))
        hi = int(schema.get("maximum", lo + 100))
        return lo + _hash_int(seed) % (hi - lo + 1)
    if stype == "number":
        lo = float(schema.get("minimum", 0.0))
        hi = float(schema.get("maximum", lo + 10.0))
        frac = (_hash_int(seed) % 10_001) / 10_000.0
        return round(lo + frac * (hi - lo), 2)
    if stype == "boolean":
        return False
    if stype == "null":
        return None
    return f"stub-{_hash_hex(seed)}"


class StubProvider:
    def __init__(
        self,
        script: list[ScriptEntry] | None = None,
        canned: dict[str, str] | None = None,
    ):
        self.script: list[ScriptEntry] = list(script or [])
        self.canned = dict(canned or {})
        self.calls: list[dict] = []

    @property
    def call_count(self) -> int:
        return len(self.calls)

    def complete(self, payload: dict, req_hash: str) -> str:
        """Produce the stub response text for one request."""
        self.calls.append({"hash": req_hash, "payload": payload})

        for i, entry in enumerate(self.script):
            if entry.hash_prefix is None or req_hash.startswith(entry.hash_prefix):
                del self.script[i]
                if entry.kind == "transport_error":
                    raise StubTransportError("scripted transport failure")
                if entry.kind == "timeout":
                    raise StubTimeout("scripted timeout")
                return entry.text

        for prefix, text in self.canned.items():
            if req_hash.startswith(prefix):
                return text

        schema = payload.get("json_schema")
        if schema is not None:
            return json.dumps(synthesize_instance(schema, req_hash), sort_keys=True)
        return f"[stub {req_hash[:10]}] deterministic reply"
