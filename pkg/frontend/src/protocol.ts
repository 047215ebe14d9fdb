/**
 * OSC 1.0 codec (i/f/s/b subset), message schema registry, and the
 * length-prefixed session framing. Byte-exact mirror of the server side;
 * layouts are documented in docs/protocol.md.
 */

export class ProtocolError extends Error {}

export type OscArg =
  | { kind: "i"; value: number }
  | { kind: "f"; value: number }
  | { kind: "s"; value: string }
  | { kind: "b"; value: Uint8Array };

export interface OscMessage {
  address: string;
  args: OscArg[];
}

export const int = (value: number): OscArg => ({ kind: "i", value: value | 0 });
export const float = (value: number): OscArg => ({ kind: "f", value });
export const str = (value: string): OscArg => ({ kind: "s", value });
export const blob = (value: Uint8Array): OscArg => ({ kind: "b", value });

export const FRAME_OSC = 1;
export const FRAME_AUDIO = 2;
export const FRAME_SCENE = 3;

const BUNDLE_TAG = "#bundle";
const textEncoder = new TextEncoder();
const textDecoder = new TextDecoder("utf-8", { fatal: true });

const pad4 = (n: number) => (n + 3) & ~3;

function encodeString(s: string): Uint8Array {
  const raw = textEncoder.encode(s);
  const out = new Uint8Array(pad4(raw.length + 1));
  out.set(raw);
  return out;
}

export function typeTags(msg: OscMessage): string {
  return "," + msg.args.map((a) => a.kind).join("");
}

export function encodeMessage(msg: OscMessage): Uint8Array {
  if (!msg.address.startsWith("/")) {
    throw new ProtocolError(`address must start with '/': ${msg.address}`);
  }
  const parts: Uint8Array[] = [encodeString(msg.address), encodeString(typeTags(msg))];
  for (const arg of msg.args) {
    if (arg.kind === "i") {
      const b = new Uint8Array(4);
      new DataView(b.buffer).setInt32(0, arg.value, false);
      parts.push(b);
    } else if (arg.kind === "f") {
      const b = new Uint8Array(4);
      new DataView(b.buffer).setFloat32(0, arg.value, false);
      parts.push(b);
    } else if (arg.kind === "s") {
      parts.push(encodeString(arg.value));
    } else {
      const body = new Uint8Array(4 + pad4(arg.value.length));
      new DataView(body.buffer).setInt32(0, arg.value.length, false);
      body.set(arg.value, 4);
      parts.push(body);
    }
  }
  return concat(parts);
}

function concat(parts: Uint8Array[]): Uint8Array {
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let at = 0;
  for (const p of parts) {
    out.set(p, at);
    at += p.length;
  }
  return out;
}

/** Bounds-checked cursor; every read is validated against the buffer end. */
class Reader {
  pos = 0;
  private view: DataView;
  constructor(private buf: Uint8Array) {
    this.view = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
  }
  remaining(): number {
    return this.buf.length - this.pos;
  }
  private need(n: number) {
    if (n < 0 || this.pos + n > this.buf.length) {
      throw new ProtocolError(`need ${n} bytes at offset ${this.pos}, have ${this.remaining()}`);
    }
  }
  int32(): number {
    this.need(4);
    const v = this.view.getInt32(this.pos, false);
    this.pos += 4;
    return v;
  }
  float32(): number {
    this.need(4);
    const v = this.view.getFloat32(this.pos, false);
    this.pos += 4;
    return v;
  }
  bytes(n: number): Uint8Array {
    this.need(n);
    const out = this.buf.slice(this.pos, this.pos + n);
    this.pos += n;
    return out;
  }
  string(): string {
    const end = this.buf.indexOf(0, this.pos);
    if (end < 0) throw new ProtocolError("unterminated string");
    const raw = this.buf.slice(this.pos, end);
    const advance = pad4(end - this.pos + 1);
    this.need(advance);
    for (let i = end; i < this.pos + advance; i++) {
      if (this.buf[i] !== 0) throw new ProtocolError("nonzero bytes in string padding");
    }
    this.pos += advance;
    try {
      return textDecoder.decode(raw);
    } catch {
      throw new ProtocolError("invalid utf-8 in string");
    }
  }
}

export function decodeMessage(buf: Uint8Array): OscMessage {
  if (buf.length % 4 !== 0) {
    throw new ProtocolError(`message length ${buf.length} not a multiple of 4`);
  }
  const r = new Reader(buf);
  const address = r.string();
  if (!address.startsWith("/")) {
    throw new ProtocolError(`address must start with '/': ${address}`);
  }
  const tags = r.string();
  if (!tags.startsWith(",")) {
    throw new ProtocolError(`type tags must start with ',': ${tags}`);
  }
  const args: OscArg[] = [];
  for (const tag of tags.slice(1)) {
    if (tag === "i") args.push(int(r.int32()));
    else if (tag === "f") args.push(float(r.float32()));
    else if (tag === "s") args.push(str(r.string()));
    else if (tag === "b") {
      const size = r.int32();
      if (size < 0) throw new ProtocolError(`negative blob size ${size}`);
      const data = r.bytes(size);
      r.bytes(pad4(size) - size);
      args.push(blob(data));
    } else throw new ProtocolError(`unknown type tag '${tag}'`);
  }
  if (r.remaining()) throw new ProtocolError(`${r.remaining()} trailing bytes after message`);
  return { address, args };
}

export function decodePacket(buf: Uint8Array): OscMessage[] {
  if (startsWithBundle(buf)) {
    const r = new Reader(buf);
    r.bytes(8); // "#bundle\0"
    const timetag = r.bytes(8);
    const immediate =
      timetag[7] === 1 && timetag.slice(0, 7).every((b) => b === 0);
    if (!immediate) throw new ProtocolError("only immediate-timetag bundles are supported");
    const out: OscMessage[] = [];
    while (r.remaining()) {
      const size = r.int32();
      if (size < 0 || size % 4 !== 0) throw new ProtocolError(`bad bundle element size ${size}`);
      const element = r.bytes(size);
      if (startsWithBundle(element)) out.push(...decodePacket(element));
      else out.push(decodeMessage(element));
    }
    return out;
  }
  return [decodeMessage(buf)];
}

function startsWithBundle(buf: Uint8Array): boolean {
  if (buf.length < 8) return false;
  for (let i = 0; i < BUNDLE_TAG.length; i++) {
    if (buf[i] !== BUNDLE_TAG.charCodeAt(i)) return false;
  }
  return buf[7] === 0;
}

// ---------------------------------------------------------------------------
// Schema registry (must stay in lockstep with the server)
// ---------------------------------------------------------------------------

export const SCHEMAS: Record<string, string> = {
  "/mmii/prox": "sf",
  "/mmii/inside": "si",
  "/mmii/click": "si",
  "/mmii/probe": "ffff",
  "/mmii/marker": "fff",
  "/mmii/unmark": "",
  "/mmii/hr": "f",
  "/mmii/visual": "sff",
  "/mmii/trial/start": "s",
  "/mmii/trial/end": "",
};

export function validateMessage(msg: OscMessage): void {
  const tags = SCHEMAS[msg.address];
  if (tags === undefined) throw new ProtocolError(`unknown address ${msg.address}`);
  const got = msg.args.map((a) => a.kind).join("");
  if (got !== tags) {
    throw new ProtocolError(`${msg.address}: expected tags ,${tags} got ,${got}`);
  }
  for (const a of msg.args) {
    if (a.kind === "f" && !Number.isFinite(a.value)) {
      throw new ProtocolError(`${msg.address}: non-finite float argument`);
    }
  }
  if (msg.address === "/mmii/prox" && (msg.args[1] as { value: number }).value < 0) {
    throw new ProtocolError("/mmii/prox: distance must be >= 0");
  }
  if (msg.address === "/mmii/hr" && (msg.args[0] as { value: number }).value <= 0) {
    throw new ProtocolError("/mmii/hr: bpm must be positive");
  }
  if (msg.address === "/mmii/probe" && (msg.args[3] as { value: number }).value <= 0) {
    throw new ProtocolError("/mmii/probe: radius must be positive");
  }
}

export const probeMessage = (x: number, y: number, z: number, radius: number): OscMessage => ({
  address: "/mmii/probe",
  args: [float(x), float(y), float(z), float(radius)],
});

export const clickMessage = (structure: string, vertex: number): OscMessage => ({
  address: "/mmii/click",
  args: [str(structure), int(vertex)],
});

export const markerMessage = (x: number, y: number, z: number): OscMessage => ({
  address: "/mmii/marker",
  args: [float(x), float(y), float(z)],
});

export const unmarkMessage = (): OscMessage => ({ address: "/mmii/unmark", args: [] });

export const heartRateMessage = (bpm: number): OscMessage => ({
  address: "/mmii/hr",
  args: [float(bpm)],
});

export const trialStartMessage = (condition: string): OscMessage => ({
  address: "/mmii/trial/start",
  args: [str(condition)],
});

export const trialEndMessage = (): OscMessage => ({ address: "/mmii/trial/end", args: [] });

// ---------------------------------------------------------------------------
// Session framing
// ---------------------------------------------------------------------------

export interface AudioBlock {
  blockIndex: number;
  channels: number;
  frames: number;
  /** interleaved [frame0ch0, frame0ch1, ...] */
  samples: Float32Array;
}

export interface SceneStructure {
  id: string;
  tissue: string;
  dynamic: boolean;
  vertices: number[];
  faces: number[];
}

export interface SceneSnapshot {
  schema: string;
  sample_rate: number;
  block_size: number;
  probe_radius: number;
  ground_truth_id: string | null;
  structures: SceneStructure[];
}

export type Frame =
  | { type: "osc"; messages: OscMessage[] }
  | { type: "audio"; block: AudioBlock }
  | { type: "scene"; snapshot: SceneSnapshot };

export function encodeFrame(frameType: number, payload: Uint8Array): Uint8Array {
  const out = new Uint8Array(5 + payload.length);
  const view = new DataView(out.buffer);
  view.setUint32(0, payload.length + 1, false);
  view.setUint8(4, frameType);
  out.set(payload, 5);
  return out;
}

export function encodeOscFrame(msg: OscMessage): Uint8Array {
  return encodeFrame(FRAME_OSC, encodeMessage(msg));
}

export function decodeFrame(buf: Uint8Array): Frame {
  if (buf.length < 5) throw new ProtocolError("frame shorter than header");
  const view = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
  const length = view.getUint32(0, false);
  if (buf.length !== 4 + length) {
    throw new ProtocolError(`frame length mismatch: header says ${length}, buffer has ${buf.length - 4}`);
  }
  const frameType = view.getUint8(4);
  const payload = buf.slice(5);
  if (frameType === FRAME_OSC) {
    return { type: "osc", messages: decodePacket(payload) };
  }
  if (frameType === FRAME_AUDIO) {
    return { type: "audio", block: decodeAudioPayload(payload) };
  }
  if (frameType === FRAME_SCENE) {
    const snapshot = JSON.parse(textDecoder.decode(payload)) as SceneSnapshot;
    return { type: "scene", snapshot };
  }
  throw new ProtocolError(`unknown frame type ${frameType}`);
}

function decodeAudioPayload(payload: Uint8Array): AudioBlock {
  if (payload.length < 11) throw new ProtocolError("audio frame shorter than header");
  const view = new DataView(payload.buffer, payload.byteOffset, payload.byteLength);
  const blockIndex = Number(view.getBigUint64(0, false));
  const channels = view.getUint8(8);
  const frames = view.getUint16(9, false);
  const need = 11 + 4 * channels * frames;
  if (payload.length !== need) {
    throw new ProtocolError(`audio frame length mismatch (${payload.length} != ${need})`);
  }
  const samples = new Float32Array(channels * frames);
  for (let i = 0; i < samples.length; i++) {
    samples[i] = view.getFloat32(11 + 4 * i, false);
  }
  return { blockIndex, channels, frames, samples };
}
