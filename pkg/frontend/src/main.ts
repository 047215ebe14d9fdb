/**
 * Browser entry point: wires the session client, scene view, probe
 * control, markers, and audio playback into the DOM.
 */

import * as THREE from "three";

import { BlockScheduler, webAudioContext } from "./audio.js";
import { SessionClient } from "./client.js";
import { ProbeController, Vec3 } from "./probe.js";
import { clickMessage, heartRateMessage, SceneSnapshot } from "./protocol.js";
import { OrbitRig, SceneView } from "./scene.js";
import { MarkerStore, TrialRecorder } from "./trial.js";

const params = new URLSearchParams(location.search);
const WS_URL = params.get("ws") ?? "ws://127.0.0.1:8765";

const canvas = document.getElementById("view") as HTMLCanvasElement;
const statusEl = document.getElementById("status")!;
const radiusInput = document.getElementById("radius") as HTMLInputElement;
const depthInput = document.getElementById("depth") as HTMLInputElement;
const hrInput = document.getElementById("hr") as HTMLInputElement;
const statsEl = document.getElementById("stats")!;

const renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
const scene3 = new THREE.Scene();
scene3.background = new THREE.Color(0x101418);
scene3.add(new THREE.AmbientLight(0xffffff, 0.55));
const key = new THREE.DirectionalLight(0xffffff, 1.2);
key.position.set(0.4, 0.8, 0.6);
scene3.add(key);

const camera = new THREE.PerspectiveCamera(50, 1, 0.001, 50);
const rig = new OrbitRig(camera);
const view = new SceneView();
scene3.add(view.root);

const recorder = new TrialRecorder();
const client = new SessionClient({ url: WS_URL });
client.onSend = (msg) => recorder.record(msg);
client.onStatus = (status) => {
  statusEl.textContent = status;
  statusEl.className = status;
};

let snapshot: SceneSnapshot | null = null;
let scheduler: BlockScheduler | null = null;
let audioCtx: AudioContext | null = null;

client.onScene = (snap) => {
  snapshot = snap;
  view.loadSnapshot(snap);
  radiusInput.value = String(snap.probe_radius);
  probe.setRadius(snap.probe_radius);
};

client.onAudio = (block) => {
  if (scheduler) scheduler.push(block);
};

const probe = new ProbeController((m) => client.send(m));
const markers = new MarkerStore((m) => client.send(m));

// Audio needs a user gesture to start.
document.getElementById("audio-start")!.addEventListener("click", () => {
  if (audioCtx || !snapshot) return;
  audioCtx = new AudioContext({ sampleRate: snapshot.sample_rate });
  scheduler = new BlockScheduler(webAudioContext(audioCtx), snapshot.sample_rate);
});

// Pointer ray: orbit with right drag, probe follows left hover/drag.
let dragging = false;
canvas.addEventListener("contextmenu", (e) => e.preventDefault());
canvas.addEventListener("pointerdown", (e) => {
  if (e.button === 2) dragging = true;
});
window.addEventListener("pointerup", () => (dragging = false));
canvas.addEventListener("wheel", (e) => rig.zoom(e.deltaY > 0 ? 1.1 : 0.9));
canvas.addEventListener("pointermove", (e) => {
  if (dragging) {
    rig.rotate(e.movementX, e.movementY);
    return;
  }
  const rect = canvas.getBoundingClientRect();
  const ndc = new THREE.Vector2(
    ((e.clientX - rect.left) / rect.width) * 2 - 1,
    -((e.clientY - rect.top) / rect.height) * 2 + 1,
  );
  const ray = new THREE.Raycaster();
  ray.setFromCamera(ndc, camera);
  const depth = parseFloat(depthInput.value);
  probe.updateRay(
    ray.ray.origin.toArray() as Vec3,
    ray.ray.direction.toArray() as Vec3,
    depth,
  );
});

canvas.addEventListener("click", () => {
  const hit = view.nearestVertex(probe.position);
  if (hit) client.send(clickMessage(hit.id, hit.vertex));
});

window.addEventListener("keydown", (e) => {
  if (e.key === "m") {
    markers.place(probe.position);
    view.addMarker(probe.position);
  } else if (e.key === "u") {
    if (markers.undo()) view.removeLastMarker();
  } else if (e.key === "s") {
    client.send(recorder.startTrial("audiovisual"));
  } else if (e.key === "e") {
    client.send(recorder.endTrial());
    downloadTrial();
  }
});

radiusInput.addEventListener("input", () => {
  probe.setRadius(parseFloat(radiusInput.value));
});
hrInput.addEventListener("change", () => {
  client.send(heartRateMessage(parseFloat(hrInput.value)));
});

function downloadTrial(): void {
  const blob = new Blob([recorder.exportJsonl()], { type: "application/jsonl" });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = "trial.jsonl";
  a.click();
  URL.revokeObjectURL(a.href);
}

function resize(): void {
  const w = canvas.clientWidth || canvas.parentElement!.clientWidth;
  const h = canvas.clientHeight || 480;
  renderer.setSize(w, h, false);
  camera.aspect = w / h;
  camera.updateProjectionMatrix();
}
window.addEventListener("resize", resize);
resize();

function frame(): void {
  const state = client.takeState(); // stale bundles already dropped
  if (state) view.applyState(state);
  view.setProbe(probe.position, probe.radius);
  probe.tick();
  statsEl.textContent =
    `blocks ${client.blocksReceived}  gaps ${client.blockGaps}  ` +
    `markers ${markers.markers.length}  probe ${probe.position
      .map((v) => v.toFixed(3))
      .join(", ")}`;
  renderer.render(scene3, camera);
  requestAnimationFrame(frame);
}

client.connect();
requestAnimationFrame(frame);
