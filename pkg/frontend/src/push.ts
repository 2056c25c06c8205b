// WebSocket push channel with seq-aware reconnect. On reconnect the
// client passes its last-seen seq so the server replays the buffered
// messages it missed; anything older than the buffer shows up as a seq
// gap, which the store turns into a refetch.

import type { PushEnvelope } from "./types.js";

export interface WebSocketLike {
  onopen: ((event: unknown) => void) | null;
  onmessage: ((event: { data: string }) => void) | null;
  onclose: ((event: unknown) => void) | null;
  send(data: string): void;
  close(): void;
  readyState: number;
}

export type WebSocketFactory = (url: string) => WebSocketLike;

export interface PushChannelOptions {
  baseUrl: string; // ws://host:port
  token: string;
  section?: string;
  factory?: WebSocketFactory;
  reconnectDelayMs?: number;
  setTimeoutFn?: (fn: () => void, ms: number) => unknown;
}

export class PushChannel {
  private socket: WebSocketLike | null = null;
  private lastSeq = 0;
  private closed = false;
  private handlers: ((envelope: PushEnvelope) => void)[] = [];
  private ackHandlers: ((reply: Record<string, unknown>) => void)[] = [];

  constructor(private options: PushChannelOptions) {}

  onEnvelope(handler: (envelope: PushEnvelope) => void): void {
    this.handlers.push(handler);
  }

  onReply(handler: (reply: Record<string, unknown>) => void): void {
    this.ackHandlers.push(handler);
  }

  connect(): void {
    const factory =
      this.options.factory ?? ((url: string) => new WebSocket(url) as unknown as WebSocketLike);
    const params = new URLSearchParams({ token: this.options.token });
    if (this.options.section) params.set("section", this.options.section);
    if (this.lastSeq > 0) params.set("last_seq", String(this.lastSeq));
    const socket = factory(`${this.options.baseUrl}/ws?${params.toString()}`);
    this.socket = socket;

    socket.onmessage = (event) => {
      const message = JSON.parse(event.data) as Record<string, unknown>;
      if (message.type === "push") {
        const envelope = message as unknown as PushEnvelope;
        if (envelope.seq > this.lastSeq) this.lastSeq = envelope.seq;
        for (const handler of this.handlers) handler(envelope);
      } else {
        for (const handler of this.ackHandlers) handler(message);
      }
    };
    socket.onclose = () => {
      if (this.closed) return;
      const delay = this.options.reconnectDelayMs ?? 1000;
      const schedule = this.options.setTimeoutFn ?? setTimeout;
      schedule(() => {
        if (!this.closed) this.connect();
      }, delay);
    };
  }

  send(message: Record<string, unknown>): void {
    this.socket?.send(JSON.stringify(message));
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }

  get lastSeenSeq(): number {
    return this.lastSeq;
  }
}
