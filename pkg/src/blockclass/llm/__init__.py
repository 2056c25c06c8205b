from blockclass.llm.config import ProviderConfig
from blockclass.llm.gateway import ChatRequest, ChatResponse, LlmGateway, request_hash
from blockclass.llm.stub import ScriptEntry, StubProvider

__all__ = [
    "ChatRequest",
    "ChatResponse",
    "LlmGateway",
    "ProviderConfig",
    "ScriptEntry",
    "StubProvider",
    "request_hash",
]
