import { describe, expect, it } from "vitest";

import { ProbeController } from "../src/probe.js";
import { OscMessage } from "../src/protocol.js";

function makeProbe(opts: { minIntervalMs?: number; keepaliveMs?: number } = {}) {
  const sent: OscMessage[] = [];
  let clock = 0;
  const probe = new ProbeController((m) => sent.push(m), {
    now: () => clock,
    minIntervalMs: opts.minIntervalMs ?? 33,
    keepaliveMs: opts.keepaliveMs ?? 1000,
  });
  return { probe, sent, tick: (ms: number) => (clock += ms) };
}

const args = (m: OscMessage) => m.args.map((a) => a.value as number);

describe("ProbeController", () => {
  it("places the probe at origin + depth * direction", () => {
    const { probe, sent, tick } = makeProbe();
    tick(100);
    probe.updateRay([0, 0, 0], [0, 0, 1], 0.4);
    expect(sent.length).toBe(1);
    expect(args(sent[0])).toEqual([0, 0, 0.4, 0.03]);
  });

  it("sends at >= 30 Hz while moving, capped by the interval", () => {
    const { probe, sent, tick } = makeProbe({ minIntervalMs: 33 });
    // 60 Hz pointer updates for one second of simulated time
    for (let i = 0; i < 60; i++) {
      tick(1000 / 60);
      probe.updateRay([0, 0, 0], [0, 0, 1], 0.1 + i * 0.001);
    }
    expect(sent.length).toBeGreaterThanOrEqual(30);
    expect(sent.length).toBeLessThanOrEqual(31);
  });

  it("drops to 1 Hz keepalive when stationary", () => {
    const { probe, sent, tick } = makeProbe();
    tick(50);
    probe.updateRay([0, 0, 0], [1, 0, 0], 0.2);
    const afterMove = sent.length;
    // stationary for 3.5 simulated seconds of 60 Hz ticks
    for (let i = 0; i < 210; i++) {
      tick(1000 / 60);
      probe.tick();
    }
    expect(sent.length - afterMove).toBe(3);
  });

  it("carries a radius change on the next message", () => {
    const { probe, sent, tick } = makeProbe();
    tick(50);
    probe.updateRay([0, 0, 0], [1, 0, 0], 0.2);
    probe.setRadius(0.05);
    tick(40);
    probe.tick(); // no movement, but radius changed -> sends at move rate
    expect(sent.length).toBe(2);
    expect(args(sent[1])[3]).toBeCloseTo(0.05);
  });

  it("rejects a non-positive radius", () => {
    const { probe } = makeProbe();
    expect(() => probe.setRadius(0)).toThrow(RangeError);
  });
});
