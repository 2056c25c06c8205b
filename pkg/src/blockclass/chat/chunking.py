"""Deterministic manual chunking.

The reference manual arrives as plain text (markdown-style '#' headings
allowed). Chunking is on paragraph boundaries with a greedy packing rule,
so identical input always produces identical chunks:

* paragraphs are blank-line separated; a '#' heading starts a new chunk
  and becomes the section label for what follows;
* before adding a paragraph: flush if the chunk would exceed 4/3 of the
  target word count; after adding: flush once the chunk has reached the
  target;
* the final partial chunk is flushed as-is, so chunks partition the text.

Chunk ids are content hashes (with an occurrence ordinal, so repeated
passages still get unique ids); re-ingesting identical text reproduces the
same ids.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

from blockclass.errors import EmptyCorpus

DEFAULT_CHUNK_TARGET_WORDS = 300

_WORD_RE = re.compile(r"\S+")


@dataclass
class ManualChunk:
    chunk_id: str
    source_section: str
    text: str
    term_frequencies: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "source_section": self.source_section,
            "text": self.text,
        }


def _word_count(text: str) -> int:
    return len(_WORD_RE.findall(text))


def _chunk_id(text: str, ordinal: int) -> str:
    return "ch" + hashlib.sha256(f"{ordinal}:{text}".encode("utf-8")).hexdigest()[:12]


def chunk_manual(text: str, chunk_target_words: int = DEFAULT_CHUNK_TARGET_WORDS) -> list[ManualChunk]:
    if not text or not text.strip():
        raise EmptyCorpus("manual text is empty")

    max_words = (chunk_target_words * 4 + 2) // 3
    paragraphs = [p.strip() for p in re.split(r"\n\s*\n", text) if p.strip()]

    chunks: list[ManualChunk] = []
    seen_texts: dict[str, int] = {}
    current: list[str] = []
    current_words = 0
    current_section = ""
    section_of_chunk = ""

    def flush() -> None:
        nonlocal current, current_words
        if not current:
            return
        body = "\n\n".join(current)
        ordinal = seen_texts.get(body, 0)
        seen_texts[body] = ordinal + 1
        chunks.append(
            ManualChunk(
                chunk_id=_chunk_id(body, ordinal),
                source_section=section_of_chunk,
                text=body,
            )
        )
        current = []
        current_words = 0

    for para in paragraphs:
        first_line = para.splitlines()[0]
        if first_line.lstrip().startswith("#"):
            # headings delimit sections; start a fresh chunk under the new label
            flush()
            current_section = first_line.lstrip("# ").strip()
        else:
            words = _word_count(para)
            if current and current_words + words > max_words:
                flush()
        if not current:
            section_of_chunk = current_section
        current.append(para)
        current_words += _word_count(para)
        if current_words >= chunk_target_words:
            flush()
    flush()

    if not chunks:
        raise EmptyCorpus("manual text contained no paragraphs")
    return chunks
