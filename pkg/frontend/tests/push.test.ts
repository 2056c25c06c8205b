import { describe, expect, it } from "vitest";

import { PushChannel, type WebSocketLike } from "../src/push.js";
import type { PushEnvelope } from "../src/types.js";

class FakeSocket implements WebSocketLike {
  onopen: ((event: unknown) => void) | null = null;
  onmessage: ((event: { data: string }) => void) | null = null;
  onclose: ((event: unknown) => void) | null = null;
  readyState = 1;
  sent: string[] = [];

  constructor(public url: string) {}

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.readyState = 3;
  }

  deliver(message: unknown): void {
    this.onmessage?.({ data: JSON.stringify(message) });
  }

  drop(): void {
    this.onclose?.({});
  }
}

function envelope(seq: number): PushEnvelope {
  return {
    type: "push",
    channel: "section:sec-000001",
    seq,
    msg: { type: "presence_update", payload: { student: "s1" } },
  };
}

describe("push channel", () => {
  it("tracks the last seen seq and dispatches envelopes", () => {
    const sockets: FakeSocket[] = [];
    const channel = new PushChannel({
      baseUrl: "ws://test",
      token: "tok",
      section: "sec-000001",
      factory: (url) => {
        const socket = new FakeSocket(url);
        sockets.push(socket);
        return socket;
      },
    });
    const seen: number[] = [];
    channel.onEnvelope((env) => seen.push(env.seq));
    channel.connect();

    sockets[0]!.deliver(envelope(1));
    sockets[0]!.deliver(envelope(2));
    expect(seen).toEqual([1, 2]);
    expect(channel.lastSeenSeq).toBe(2);
    expect(sockets[0]!.url).toContain("token=tok");
    expect(sockets[0]!.url).toContain("section=sec-000001");
    expect(sockets[0]!.url).not.toContain("last_seq");
  });

  it("reconnects with the last seen seq so the server can replay", () => {
    const sockets: FakeSocket[] = [];
    const timers: (() => void)[] = [];
    const channel = new PushChannel({
      baseUrl: "ws://test",
      token: "tok",
      factory: (url) => {
        const socket = new FakeSocket(url);
        sockets.push(socket);
        return socket;
      },
      setTimeoutFn: (fn) => {
        timers.push(fn);
        return 0;
      },
    });
    channel.onEnvelope(() => {});
    channel.connect();
    sockets[0]!.deliver(envelope(1));
    sockets[0]!.deliver(envelope(7));

    sockets[0]!.drop();
    expect(timers.length).toBe(1);
    timers[0]!(); // fire the reconnect timer

    expect(sockets.length).toBe(2);
    expect(sockets[1]!.url).toContain("last_seq=7");
  });

  it("close() stops the reconnect loop", () => {
    const sockets: FakeSocket[] = [];
    const timers: (() => void)[] = [];
    const channel = new PushChannel({
      baseUrl: "ws://test",
      token: "tok",
      factory: (url) => {
        const socket = new FakeSocket(url);
        sockets.push(socket);
        return socket;
      },
      setTimeoutFn: (fn) => {
        timers.push(fn);
        return 0;
      },
    });
    channel.connect();
    channel.close();
    sockets[0]!.drop();
    for (const timer of timers) timer();
    expect(sockets.length).toBe(1);
  });

  it("non-push replies go to the reply handler (acks, errors)", () => {
    const sockets: FakeSocket[] = [];
    const channel = new PushChannel({
      baseUrl: "ws://test",
      token: "tok",
      factory: (url) => {
        const socket = new FakeSocket(url);
        sockets.push(socket);
        return socket;
      },
    });
    const replies: Record<string, unknown>[] = [];
    channel.onReply((reply) => replies.push(reply));
    channel.connect();
    channel.send({ type: "event", kind: "hand_raise", seq: 1 });
    sockets[0]!.deliver({ type: "ack", seq: 1, at: 123, status: "active" });
    expect(JSON.parse(sockets[0]!.sent[0]!)).toMatchObject({ kind: "hand_raise" });
    expect(replies[0]).toMatchObject({ type: "ack", seq: 1 });
  });
});
