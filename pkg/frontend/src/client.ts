/**
 * Session client: framed WebSocket duplex with reconnect backoff.
 *
 * Outbound messages are validated against the schema registry before they
 * leave the process. Inbound state frames are latest-wins (old proximity
 * is never replayed); audio frames are all delivered, and block-index
 * gaps are counted as the playback-continuity metric.
 */

import {
  Frame,
  OscMessage,
  SceneSnapshot,
  AudioBlock,
  decodeFrame,
  encodeOscFrame,
  validateMessage,
} from "./protocol.js";

export type ClientStatus = "idle" | "connecting" | "open" | "reconnecting" | "closed";

/** Minimal WebSocket surface so tests can substitute a fake. */
export interface SocketLike {
  binaryType: string;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: ArrayBuffer | Uint8Array }) => void) | null;
  send(data: Uint8Array): void;
  close(): void;
}

export interface SessionClientOptions {
  url: string;
  makeSocket?: (url: string) => SocketLike;
  reconnectBaseMs?: number;
  reconnectMaxMs?: number;
  /** injectable timer for tests */
  setTimer?: (fn: () => void, ms: number) => unknown;
  clearTimer?: (handle: unknown) => void;
  random?: () => number;
}

export function reconnectDelay(
  attempt: number,
  base = 500,
  max = 15000,
  random: () => number = Math.random,
): number {
  const raw = Math.min(base * 2 ** attempt, max);
  const jitter = raw * 0.25 * (random() * 2 - 1); // +-25%, avoids thundering herd
  return Math.max(0, Math.round(raw + jitter));
}

export class SessionClient {
  onScene: (snapshot: SceneSnapshot) => void = () => {};
  onAudio: (block: AudioBlock) => void = () => {};
  onStatus: (status: ClientStatus) => void = () => {};
  onStateAvailable: () => void = () => {};
  /** hook for trial recording; called after validation, before send */
  onSend: (msg: OscMessage) => void = () => {};

  status: ClientStatus = "idle";
  blocksReceived = 0;
  blockGaps = 0;
  staleStatesDropped = 0;

  private socket: SocketLike | null = null;
  private attempt = 0;
  private closed = false;
  private lastBlockIndex: number | null = null;
  private pendingState: OscMessage[] | null = null;
  private reconnectHandle: unknown = null;
  private queue: Uint8Array[] = [];

  constructor(private opts: SessionClientOptions) {}

  connect(): void {
    this.closed = false;
    this.open();
  }

  private setStatus(status: ClientStatus) {
    this.status = status;
    this.onStatus(status);
  }

  private open(): void {
    const make =
      this.opts.makeSocket ??
      ((url: string) => new WebSocket(url) as unknown as SocketLike);
    this.setStatus(this.attempt === 0 ? "connecting" : "reconnecting");
    const sock = make(this.opts.url);
    sock.binaryType = "arraybuffer";
    this.socket = sock;
    sock.onopen = () => {
      this.attempt = 0;
      this.lastBlockIndex = null; // fresh stream after reconnect
      this.setStatus("open");
      for (const data of this.queue.splice(0)) sock.send(data);
    };
    sock.onmessage = (ev) => {
      const data = ev.data instanceof Uint8Array ? ev.data : new Uint8Array(ev.data);
      this.handleFrame(decodeFrame(data));
    };
    const onDrop = () => {
      if (this.socket !== sock) return;
      this.socket = null;
      if (this.closed) {
        this.setStatus("closed");
        return;
      }
      this.scheduleReconnect();
    };
    sock.onclose = onDrop;
    sock.onerror = () => {};
  }

  private scheduleReconnect(): void {
    const delay = reconnectDelay(
      this.attempt++,
      this.opts.reconnectBaseMs ?? 500,
      this.opts.reconnectMaxMs ?? 15000,
      this.opts.random ?? Math.random,
    );
    this.setStatus("reconnecting");
    const setTimer = this.opts.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
    this.reconnectHandle = setTimer(() => this.open(), delay);
  }

  private handleFrame(frame: Frame): void {
    if (frame.type === "scene") {
      this.onScene(frame.snapshot);
    } else if (frame.type === "audio") {
      const idx = frame.block.blockIndex;
      if (this.lastBlockIndex !== null && idx > this.lastBlockIndex + 1) {
        this.blockGaps += idx - this.lastBlockIndex - 1;
      }
      this.lastBlockIndex = idx;
      this.blocksReceived += 1;
      this.onAudio(frame.block);
    } else {
      if (this.pendingState !== null) this.staleStatesDropped += 1;
      this.pendingState = frame.messages; // newest wins
      this.onStateAvailable();
    }
  }

  /** Newest unconsumed state bundle, or null; consuming clears it. */
  takeState(): OscMessage[] | null {
    const state = this.pendingState;
    this.pendingState = null;
    return state;
  }

  send(msg: OscMessage): void {
    validateMessage(msg); // never emit anything off-registry
    this.onSend(msg);
    const data = encodeOscFrame(msg);
    if (this.socket && this.status === "open") {
      this.socket.send(data);
    } else {
      this.queue.push(data); // flushed on (re)connect
    }
  }

  close(): void {
    this.closed = true;
    const clearTimer = this.opts.clearTimer ?? ((h) => clearTimeout(h as never));
    if (this.reconnectHandle !== null) clearTimer(this.reconnectHandle);
    this.socket?.close();
    this.setStatus("closed");
  }
}
