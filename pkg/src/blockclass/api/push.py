"""Push fan-out with per-channel replay buffers.

Channels are "section:<id>" (teacher dashboards) and "user:<id>" (personal
notifications). Each channel keeps a ring buffer of its last 1000 messages
with a monotone per-channel seq, so a consumer that reconnects with its
last-seen seq receives everything it missed; a gap larger than the buffer
is the client's cue to refetch.

Delivery is non-blocking: every connection has a bounded queue, and a slow
consumer whose queue overflows is disconnected rather than back-pressuring
the engine. publish() is thread-safe (REST handlers run in a threadpool).
"""

from __future__ import annotations

import asyncio
import threading
from collections import deque
from dataclasses import dataclass, field

REPLAY_BUFFER_SIZE = 1000
CONNECTION_QUEUE_SIZE = 256

_CLOSE = {"type": "close", "reason": "slow_consumer"}


@dataclass
class PushEnvelope:
    channel: str
    seq: int
    message_type: str
    payload: dict

    def wire(self) -> dict:
        return {
            "type": "push",
            "channel": self.channel,
            "seq": self.seq,
            "msg": {"type": self.message_type, "payload": self.payload},
        }


@dataclass(eq=False)  # identity semantics: each connection is unique
class Connection:
    loop: asyncio.AbstractEventLoop
    queue: asyncio.Queue = field(default_factory=lambda: asyncio.Queue(CONNECTION_QUEUE_SIZE))
    channels: set[str] = field(default_factory=set)
    closed: bool = False


class PushHub:
    def __init__(self, buffer_size: int = REPLAY_BUFFER_SIZE):
        self.buffer_size = buffer_size
        self._lock = threading.Lock()
        self._buffers: dict[str, deque[PushEnvelope]] = {}
        self._seqs: dict[str, int] = {}
        self._connections: set[Connection] = set()

    # ── connection lifecycle (event-loop thread) ───────────────────────

    def connect(self, loop: asyncio.AbstractEventLoop) -> Connection:
        conn = Connection(loop=loop)
        with self._lock:
            self._connections.add(conn)
        return conn

    def subscribe(self, conn: Connection, channel: str, last_seq: int | None = None) -> list[dict]:
        """Add a channel; returns the wire messages missed since last_seq."""
        with self._lock:
            conn.channels.add(channel)
            if last_seq is None:
                return []
            buffer = self._buffers.get(channel, ())
            return [env.wire() for env in buffer if env.seq > last_seq]

    def disconnect(self, conn: Connection) -> None:
        with self._lock:
            conn.closed = True
            self._connections.discard(conn)

    # ── publishing (any thread) ────────────────────────────────────────

    def publish(self, channel: str, message_type: str, payload: dict) -> int:
        with self._lock:
            seq = self._seqs.get(channel, 0) + 1
            self._seqs[channel] = seq
            envelope = PushEnvelope(channel, seq, message_type, payload)
            buffer = self._buffers.setdefault(channel, deque(maxlen=self.buffer_size))
            buffer.append(envelope)
            targets = [c for c in self._connections if channel in c.channels and not c.closed]
        for conn in targets:
            conn.loop.call_soon_threadsafe(self._offer, conn, envelope.wire())
        return seq

    def _offer(self, conn: Connection, wire: dict) -> None:
        if conn.closed:
            return
        try:
            conn.queue.put_nowait(wire)
        except asyncio.QueueFull:
            conn.closed = True
            # drain one slot so the close marker always fits
            try:
                conn.queue.get_nowait()
            except asyncio.QueueEmpty:
                pass
            conn.queue.put_nowait(_CLOSE)

    def last_seq(self, channel: str) -> int:
        with self._lock:
            return self._seqs.get(channel, 0)
