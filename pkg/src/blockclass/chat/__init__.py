from blockclass.chat.chunking import ManualChunk, chunk_manual
from blockclass.chat.moderation import Denylist, ModerationVerdict, moderate_text
from blockclass.chat.retrieval import RetrievalIndex, build_index, tokenize
from blockclass.chat.sessions import (
    ChatMessage,
    ChatSession,
    ChatSummary,
    ModerationFlag,
    Rating,
    summary_due,
)

__all__ = [
    "ChatMessage",
    "ChatSession",
    "ChatSummary",
    "Denylist",
    "ManualChunk",
    "ModerationFlag",
    "ModerationVerdict",
    "Rating",
    "RetrievalIndex",
    "build_index",
    "chunk_manual",
    "moderate_text",
    "summary_due",
    "tokenize",
]
