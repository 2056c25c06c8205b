"""Model provider configuration.

Defaults target a local Ollama-style chat endpoint with llama3.1:70b; any
server speaking the same HTTP chat API can be configured. Environment
variables BLOCKCLASS_LLM_MODE, BLOCKCLASS_LLM_URL, and BLOCKCLASS_LLM_MODEL
override whatever the config file said.
"""

from __future__ import annotations

import os
from dataclasses import dataclass


@dataclass
class ProviderConfig:
    mode: str = "stub"  # "remote" | "stub"
    base_url: str = "http://localhost:11434"
    model_name: str = "llama3.1:70b"
    request_timeout_s: float = 30.0
    max_retries: int = 2
    temperature_structured: float = 0.0
    temperature_chat: float = 0.7

    def __post_init__(self) -> None:
        if self.mode not in ("remote", "stub"):
            raise ValueError(f"unknown provider mode {self.mode!r}")
        if self.request_timeout_s <= 0:
            raise ValueError("request_timeout_s must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def with_env_overrides(self, env: dict[str, str] | None = None) -> ProviderConfig:
        env = os.environ if env is None else env
        return ProviderConfig(
            mode=env.get("BLOCKCLASS_LLM_MODE", self.mode),
            base_url=env.get("BLOCKCLASS_LLM_URL", self.base_url),
            model_name=env.get("BLOCKCLASS_LLM_MODEL", self.model_name),
            request_timeout_s=self.request_timeout_s,
            max_retries=self.max_retries,
            temperature_structured=self.temperature_structured,
            temperature_chat=self.temperature_chat,
        )
