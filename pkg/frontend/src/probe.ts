/**
 * Probe controller: turns the pointer ray into /mmii/probe messages.
 *
 * The probe sits at ray origin + depth * direction. While it moves,
 * messages go out at up to the configured rate (>= 30 Hz); when it rests,
 * the rate drops to a 1 Hz keepalive. A radius change rides on the next
 * message out.
 */

import { OscMessage, probeMessage } from "./protocol.js";

export type Vec3 = [number, number, number];

export interface ProbeOptions {
  radius?: number;
  minIntervalMs?: number; // movement send rate cap (default 30 Hz)
  keepaliveMs?: number;
  now?: () => number;
}

export class ProbeController {
  position: Vec3 = [0, 0, 0];
  radius: number;
  sent = 0;

  private minIntervalMs: number;
  private keepaliveMs: number;
  private now: () => number;
  private lastSendAt = -Infinity;
  private lastSent: Vec3 | null = null;
  private lastRadiusSent: number | null = null;

  constructor(
    private send: (msg: OscMessage) => void,
    opts: ProbeOptions = {},
  ) {
    this.radius = opts.radius ?? 0.03;
    this.minIntervalMs = opts.minIntervalMs ?? 33;
    this.keepaliveMs = opts.keepaliveMs ?? 1000;
    this.now = opts.now ?? (() => performance.now());
  }

  setRadius(radius: number): void {
    if (radius <= 0) throw new RangeError("radius must be positive");
    this.radius = radius;
  }

  /** Pointer ray update; sends when due. Returns true if a message left. */
  updateRay(origin: Vec3, direction: Vec3, depth: number): boolean {
    this.position = [
      origin[0] + depth * direction[0],
      origin[1] + depth * direction[1],
      origin[2] + depth * direction[2],
    ];
    return this.maybeSend();
  }

  /** Call on every UI tick; handles the stationary keepalive. */
  tick(): boolean {
    return this.maybeSend();
  }

  private maybeSend(): boolean {
    const t = this.now();
    const since = t - this.lastSendAt;
    const moved =
      this.lastSent === null ||
      this.lastSent[0] !== this.position[0] ||
      this.lastSent[1] !== this.position[1] ||
      this.lastSent[2] !== this.position[2];
    const radiusChanged = this.lastRadiusSent !== this.radius;
    const due = moved || radiusChanged ? since >= this.minIntervalMs : since >= this.keepaliveMs;
    if (!due) return false;
    this.send(probeMessage(this.position[0], this.position[1], this.position[2], this.radius));
    this.lastSendAt = t;
    this.lastSent = [...this.position] as Vec3;
    this.lastRadiusSent = this.radius;
    this.sent += 1;
    return true;
  }
}
