"""Two-tier message moderation.

Tier 1 is a configurable denylist: case-insensitive, word-boundary
matching, immune to surrounding punctuation, fully deterministic. Tier 2
asks the provider to classify the message; any provider failure degrades
to tier-1 only, so moderation never goes dark with the model down.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

from blockclass.errors import BlockClassError
from blockclass.llm.gateway import ChatRequest, LlmGateway
from blockclass.llm.prompts import render

logger = logging.getLogger(__name__)

DEFAULT_DENYLIST = ("cheat for me", "dumbass", "idiot", "shut up", "stupid")

_MODERATION_SCHEMA = {
    "type": "object",
    "properties": {
        "flagged": {"type": "boolean", "title": "Flagged"},
        "reason": {"type": "string", "title": "Reason"},
    },
    "required": ["flagged", "reason"],
}


@dataclass
class ModerationVerdict:
    reason: str  # "denylist_term" | "provider_flag"
    detail: str


class Denylist:
    def __init__(self, terms: list[str] | tuple[str, ...] = DEFAULT_DENYLIST):
        self.terms = [t.strip().lower() for t in terms if t.strip()]
        self._patterns = [
            (term, re.compile(r"(?<![a-z0-9])" + re.escape(term) + r"(?![a-z0-9])"))
            for term in self.terms
        ]

    @classmethod
    def from_file(cls, path: str | Path) -> Denylist:
        """One term per line; blank lines and '#' comments ignored."""
        terms = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                terms.append(line)
        return cls(terms)

    def match(self, text: str) -> str | None:
        lowered = text.lower()
        for term, pattern in self._patterns:
            if pattern.search(lowered):
                return term
        return None


def moderate_text(
    text: str,
    denylist: Denylist,
    gateway: LlmGateway | None = None,
) -> ModerationVerdict | None:
    """Tier-1 denylist check, then tier-2 provider classification when a
    gateway is supplied. Returns None for clean messages."""
    term = denylist.match(text)
    if term is not None:
        return ModerationVerdict(reason="denylist_term", detail=f"matched denylist term {term!r}")

    if gateway is None:
        return None
    try:
        response = gateway.complete_chat(
            ChatRequest(
                system=render("moderation_check", question=text),
                messages=[{"role": "user", "text": text}],
                json_schema=_MODERATION_SCHEMA,
                temperature=0.0,
            )
        )
        verdict = json.loads(response.text)
        if verdict.get("flagged"):
            return ModerationVerdict(
                reason="provider_flag", detail=str(verdict.get("reason", ""))
            )
    except BlockClassError as exc:
        logger.warning("tier-2 moderation unavailable, falling back to denylist only: %s", exc)
    return None
