from __future__ import annotations

import random
import socket

import pytest

from blockclass.clock import VirtualClock
from blockclass.engine import ClassroomEngine
from blockclass.llm.config import ProviderConfig
from blockclass.llm.gateway import LlmGateway
from blockclass.llm.stub import StubProvider

BASE_MS = 1_750_000_000_000


@pytest.fixture(autouse=True)
def no_network(monkeypatch):
    """The whole suite runs with outbound networking disabled: only the
    gateway module would ever dial out, and in stub mode it must not."""

    def guard(self, *args, **kwargs):
        raise OSError("network access attempted during tests")

    monkeypatch.setattr(socket.socket, "connect", guard)
    yield


@pytest.fixture
def clock() -> VirtualClock:
    return VirtualClock(BASE_MS)


@pytest.fixture
def stub_gateway() -> LlmGateway:
    return LlmGateway(ProviderConfig(mode="stub"))


def make_engine(clock: VirtualClock, stub: StubProvider | None = None, **kwargs) -> ClassroomEngine:
    gateway = LlmGateway(ProviderConfig(mode="stub"), stub=stub)
    return ClassroomEngine(
        clock=clock, gateway=gateway, rng=random.Random(1234), **kwargs
    )


@pytest.fixture
def engine(clock) -> ClassroomEngine:
    return make_engine(clock)
