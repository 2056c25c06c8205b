"""Lexical BM25 retrieval over manual chunks.

Okapi BM25 with k1=1.2, b=0.75 and the non-negative idf variant
ln(1 + (N - df + 0.5) / (df + 0.5)). Query terms are deduplicated, and
per-term contributions are accumulated in ascending term order so scores
are bit-reproducible; ranking ties break by chunk_id ascending. Zero-score
chunks are never returned.

The index is immutable once built; re-ingesting swaps in a fresh index
atomically.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field

from blockclass.chat.chunking import ManualChunk
from blockclass.errors import IndexNotBuilt

BM25_K1 = 1.2
BM25_B = 0.75

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass
class RetrievalIndex:
    chunks: list[ManualChunk]
    doc_freq: dict[str, int]
    doc_len: dict[str, int]
    avg_doc_len: float
    k1: float = BM25_K1
    b: float = BM25_B
    by_id: dict[str, ManualChunk] = field(default_factory=dict)

    @property
    def chunk_count(self) -> int:
        return len(self.chunks)

    def idf(self, term: str) -> float:
        df = self.doc_freq.get(term, 0)
        n = len(self.chunks)
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))

    def score(self, query_terms: list[str], chunk: ManualChunk) -> float:
        dl = self.doc_len[chunk.chunk_id]
        norm = self.k1 * (1.0 - self.b + self.b * dl / self.avg_doc_len)
        total = 0.0
        for term in sorted(set(query_terms)):
            tf = chunk.term_frequencies.get(term, 0)
            if tf == 0:
                continue
            total += self.idf(term) * tf * (self.k1 + 1.0) / (tf + norm)
        return total

    def retrieve(self, query: str, k: int = 4) -> list[tuple[str, float]]:
        """Top-k (chunk_id, score) by BM25, ties broken by chunk_id."""
        terms = tokenize(query)
        scored = []
        for chunk in self.chunks:
            s = self.score(terms, chunk)
            if s > 0.0:
                scored.append((chunk.chunk_id, s))
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        return scored[:k]


def build_index(chunks: list[ManualChunk]) -> RetrievalIndex:
    """Compute term statistics and return an immutable index. Also fills
    each chunk's cached term_frequencies bag."""
    doc_freq: Counter = Counter()
    doc_len: dict[str, int] = {}
    for chunk in chunks:
        tokens = tokenize(chunk.text)
        chunk.term_frequencies = dict(Counter(tokens))
        doc_len[chunk.chunk_id] = len(tokens)
        doc_freq.update(set(tokens))
    avg = sum(doc_len.values()) / len(chunks) if chunks else 0.0
    return RetrievalIndex(
        chunks=list(chunks),
        doc_freq=dict(doc_freq),
        doc_len=doc_len,
        avg_doc_len=avg or 1.0,
        by_id={c.chunk_id: c for c in chunks},
    )


def require_index(index: RetrievalIndex | None) -> RetrievalIndex:
    if index is None:
        raise IndexNotBuilt("ingest the manual before querying")
    return index
