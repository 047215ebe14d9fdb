/**
 * Gapless scheduling of streamed audio blocks onto a WebAudio-style clock.
 *
 * Blocks are appended back to back on the context timeline: the next
 * block starts exactly where the previous one ended, with a small startup
 * latency cushion. If the stream stalls past the cushion, scheduling
 * resynchronizes from the current time.
 */

import { AudioBlock } from "./protocol.js";

/** The slice of AudioContext the scheduler needs (fakeable in tests). */
export interface AudioContextLike {
  readonly currentTime: number;
  readonly sampleRate: number;
  createBuffer(channels: number, frames: number, sampleRate: number): AudioBufferLike;
  play(buffer: AudioBufferLike, at: number): void;
}

export interface AudioBufferLike {
  copyToChannel(data: Float32Array, channel: number): void;
}

export function webAudioContext(ctx: AudioContext): AudioContextLike {
  return {
    get currentTime() {
      return ctx.currentTime;
    },
    get sampleRate() {
      return ctx.sampleRate;
    },
    createBuffer: (channels, frames, rate) => ctx.createBuffer(channels, frames, rate),
    play: (buffer, at) => {
      const source = ctx.createBufferSource();
      source.buffer = buffer as AudioBuffer;
      source.connect(ctx.destination);
      source.start(at);
    },
  };
}

export class BlockScheduler {
  /** start playback this far ahead of "now" to absorb network jitter */
  latency = 0.06;
  scheduled = 0;
  resyncs = 0;

  private nextStart: number | null = null;

  constructor(
    private ctx: AudioContextLike,
    private streamRate: number,
  ) {}

  push(block: AudioBlock): void {
    const { channels, frames, samples } = block;
    const buffer = this.ctx.createBuffer(channels, frames, this.streamRate);
    for (let ch = 0; ch < channels; ch++) {
      const mono = new Float32Array(frames);
      for (let i = 0; i < frames; i++) mono[i] = samples[i * channels + ch];
      buffer.copyToChannel(mono, ch);
    }
    const now = this.ctx.currentTime;
    if (this.nextStart === null || this.nextStart < now) {
      if (this.nextStart !== null) this.resyncs += 1;
      this.nextStart = now + this.latency;
    }
    this.ctx.play(buffer, this.nextStart);
    this.nextStart += frames / this.streamRate;
    this.scheduled += 1;
  }
}
