/**
 * Marker bookkeeping and trial export.
 *
 * Every outbound message is recorded with its session time; the export is
 * JSON-lines in the server's own trial-log schema, so `somasonic eval`
 * scores the file without modification.
 */

import {
  OscMessage,
  markerMessage,
  trialEndMessage,
  trialStartMessage,
  unmarkMessage,
} from "./protocol.js";
import { Vec3 } from "./probe.js";

export const TRIAL_SCHEMA = "somasonic.trial.v1";

export class MarkerStore {
  markers: Vec3[] = [];

  constructor(private send: (msg: OscMessage) => void) {}

  place(position: Vec3): void {
    this.markers.push([...position] as Vec3);
    this.send(markerMessage(position[0], position[1], position[2]));
  }

  undo(): boolean {
    if (this.markers.length === 0) return false;
    this.markers.pop();
    this.send(unmarkMessage());
    return true;
  }
}

interface TrialRecord {
  type: string;
  t?: number;
  address?: string;
  args?: (number | string)[];
  schema?: string;
  session?: string;
  scene?: string | null;
}

export class TrialRecorder {
  private records: TrialRecord[] = [];
  private t0: number | null = null;

  constructor(private now: () => number = () => performance.now()) {
    this.records.push({
      type: "meta",
      schema: TRIAL_SCHEMA,
      session: "ui-client",
      scene: null,
    });
  }

  /** Session-relative time in seconds (clock starts at the first record). */
  private time(): number {
    const t = this.now();
    if (this.t0 === null) this.t0 = t;
    return (t - this.t0) / 1000;
  }

  record(msg: OscMessage): void {
    this.records.push({
      type: "msg",
      t: this.time(),
      address: msg.address,
      args: msg.args.map((a) =>
        a.kind === "b" ? `<blob:${a.value.length}>` : a.value,
      ),
    });
  }

  startTrial(condition: string): OscMessage {
    return trialStartMessage(condition);
  }

  endTrial(): OscMessage {
    return trialEndMessage();
  }

  exportJsonl(): string {
    return this.records.map((r) => JSON.stringify(r)).join("\n") + "\n";
  }
}
