/**
 * Three.js scene graph for the session view.
 *
 * Structures come from the server's scene snapshot; scale/albedo pulses
 * are applied verbatim from server state frames (never computed locally,
 * so recordings replay identically). The probe renders as the inner
 * interaction point plus the translucent audible sphere, with three
 * axis-aligned slice-plane indicators tracking it. Markers are small
 * spheres at their logged positions.
 */

import * as THREE from "three";

import { OscMessage, SceneSnapshot } from "./protocol.js";
import { Vec3 } from "./probe.js";

const TISSUE_COLORS: Record<string, number> = {
  vertebra: 0xd8cfc0,
  blood_vessel_wall: 0xb03a2e,
  intervertebral_disc: 0xc8b7a6,
  spinal_cord: 0xe3c16f,
  white_matter: 0xe8e0d8,
  grey_matter: 0x9aa0a6,
  glioma: 0x7d3c98,
};

const HIGHLIGHT = new THREE.Color(0xffffff);

export class SceneView {
  readonly root = new THREE.Group();
  readonly structures = new Map<string, THREE.Mesh>();
  readonly markerGroup = new THREE.Group();

  probePoint: THREE.Mesh;
  probeSphere: THREE.Mesh;
  slicePlanes: THREE.Mesh[] = [];

  private baseColors = new Map<string, THREE.Color>();

  constructor() {
    this.probePoint = new THREE.Mesh(
      new THREE.SphereGeometry(1, 12, 8),
      new THREE.MeshBasicMaterial({ color: 0xffffff }),
    );
    this.probeSphere = new THREE.Mesh(
      new THREE.SphereGeometry(1, 24, 16),
      new THREE.MeshBasicMaterial({
        color: 0x37c871,
        transparent: true,
        opacity: 0.18,
        depthWrite: false,
      }),
    );
    for (let axis = 0; axis < 3; axis++) {
      const plane = new THREE.Mesh(
        new THREE.PlaneGeometry(1, 1),
        new THREE.MeshBasicMaterial({
          color: [0xff6666, 0x66ff66, 0x6699ff][axis],
          transparent: true,
          opacity: 0.08,
          side: THREE.DoubleSide,
          depthWrite: false,
        }),
      );
      if (axis === 0) plane.rotation.y = Math.PI / 2; // sagittal (x = const)
      if (axis === 1) plane.rotation.x = Math.PI / 2; // axial (y = const)
      this.slicePlanes.push(plane);
      this.root.add(plane);
    }
    this.root.add(this.probePoint, this.probeSphere, this.markerGroup);
  }

  loadSnapshot(snapshot: SceneSnapshot): void {
    for (const mesh of this.structures.values()) this.root.remove(mesh);
    this.structures.clear();
    this.baseColors.clear();

    let span = 0.2;
    for (const s of snapshot.structures) {
      const geometry = new THREE.BufferGeometry();
      geometry.setAttribute(
        "position",
        new THREE.BufferAttribute(new Float32Array(s.vertices), 3),
      );
      geometry.setIndex(s.faces);
      geometry.computeVertexNormals();
      geometry.computeBoundingBox();
      const bb = geometry.boundingBox!;
      span = Math.max(span, bb.max.length(), bb.min.length());
      const color = new THREE.Color(TISSUE_COLORS[s.tissue] ?? 0xcccccc);
      const material = new THREE.MeshStandardMaterial({
        color,
        roughness: 0.65,
        metalness: 0.05,
        transparent: true,
        opacity: s.id === snapshot.ground_truth_id ? 0.95 : 0.55,
      });
      const mesh = new THREE.Mesh(geometry, material);
      mesh.name = s.id;
      this.structures.set(s.id, mesh);
      this.baseColors.set(s.id, color.clone());
      this.root.add(mesh);
    }
    const planeSize = span * 2.4;
    for (const plane of this.slicePlanes) plane.scale.setScalar(planeSize);
    this.setProbe([0, 0, 0], snapshot.probe_radius);
  }

  setProbe(position: Vec3, radius: number): void {
    const p = new THREE.Vector3(...position);
    this.probePoint.position.copy(p);
    this.probePoint.scale.setScalar(Math.max(radius * 0.12, 1e-4));
    this.probeSphere.position.copy(p);
    this.probeSphere.scale.setScalar(radius);
    for (const plane of this.slicePlanes) plane.position.copy(p);
  }

  /** Apply one server state bundle (scale/albedo per structure). */
  applyState(messages: OscMessage[]): void {
    for (const msg of messages) {
      if (msg.address !== "/mmii/visual") continue;
      const [name, scale, albedo] = msg.args.map((a) => a.value) as [
        string,
        number,
        number,
      ];
      const mesh = this.structures.get(name);
      if (!mesh) continue;
      mesh.scale.setScalar(scale);
      const base = this.baseColors.get(name)!;
      (mesh.material as THREE.MeshStandardMaterial).color
        .copy(base)
        .lerp(HIGHLIGHT, Math.min(Math.max(albedo, 0), 1));
    }
  }

  addMarker(position: Vec3, radius = 0.0015): void {
    const marker = new THREE.Mesh(
      new THREE.SphereGeometry(radius, 10, 8),
      new THREE.MeshBasicMaterial({ color: 0xffd948 }),
    );
    marker.position.set(...position);
    this.markerGroup.add(marker);
  }

  removeLastMarker(): void {
    const last = this.markerGroup.children.at(-1);
    if (last) this.markerGroup.remove(last);
  }

  /**
   * Nearest structure vertex to a point (client-side click resolution;
   * mirrors the server's rule so explicit clicks carry name + vertex).
   */
  nearestVertex(point: Vec3): { id: string; vertex: number } | null {
    const p = new THREE.Vector3(...point);
    let best: { id: string; vertex: number; d2: number } | null = null;
    for (const [id, mesh] of this.structures) {
      const pos = mesh.geometry.getAttribute("position");
      for (let i = 0; i < pos.count; i++) {
        const dx = pos.getX(i) - p.x;
        const dy = pos.getY(i) - p.y;
        const dz = pos.getZ(i) - p.z;
        const d2 = dx * dx + dy * dy + dz * dz;
        if (best === null || d2 < best.d2) best = { id, vertex: i, d2 };
      }
    }
    return best && { id: best.id, vertex: best.vertex };
  }
}

/** Small drag-orbit / wheel-zoom camera rig (desktop stand-in control). */
export class OrbitRig {
  theta = 0.6;
  phi = 1.1;
  distance = 0.35;
  target = new THREE.Vector3(0, 0, 0);

  constructor(public camera: THREE.PerspectiveCamera) {
    this.apply();
  }

  rotate(dx: number, dy: number): void {
    this.theta -= dx * 0.005;
    this.phi = Math.min(Math.max(this.phi - dy * 0.005, 0.05), Math.PI - 0.05);
    this.apply();
  }

  zoom(factor: number): void {
    this.distance = Math.min(Math.max(this.distance * factor, 0.02), 5);
    this.apply();
  }

  apply(): void {
    const sp = Math.sin(this.phi);
    this.camera.position.set(
      this.target.x + this.distance * sp * Math.sin(this.theta),
      this.target.y + this.distance * Math.cos(this.phi),
      this.target.z + this.distance * sp * Math.cos(this.theta),
    );
    this.camera.lookAt(this.target);
  }
}
