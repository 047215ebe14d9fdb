import { describe, expect, it } from "vitest";
import * as THREE from "three";

import { OrbitRig, SceneView } from "../src/scene.js";
import { SceneSnapshot, float, str } from "../src/protocol.js";

function tetraSnapshot(): SceneSnapshot {
  return {
    schema: "somasonic.scenesnapshot.v1",
    sample_rate: 48000,
    block_size: 128,
    probe_radius: 0.03,
    ground_truth_id: "tumor",
    structures: [
      {
        id: "tumor",
        tissue: "glioma",
        dynamic: false,
        vertices: [0, 0, 0, 0.01, 0, 0, 0, 0.01, 0, 0, 0, 0.01],
        faces: [0, 1, 2, 0, 1, 3, 1, 2, 3, 0, 2, 3],
      },
      {
        id: "cortex",
        tissue: "grey_matter",
        dynamic: false,
        vertices: [0.1, 0, 0, 0.11, 0, 0, 0.1, 0.01, 0, 0.1, 0, 0.01],
        faces: [0, 1, 2, 0, 1, 3, 1, 2, 3, 0, 2, 3],
      },
    ],
  };
}

describe("SceneView", () => {
  it("builds one mesh per structure from the snapshot", () => {
    const view = new SceneView();
    view.loadSnapshot(tetraSnapshot());
    expect(view.structures.size).toBe(2);
    const tumor = view.structures.get("tumor")!;
    expect(tumor.geometry.getAttribute("position").count).toBe(4);
    expect(tumor.geometry.index!.count).toBe(12);
  });

  it("applies server visual state verbatim (scale and albedo blend)", () => {
    const view = new SceneView();
    view.loadSnapshot(tetraSnapshot());
    const tumor = view.structures.get("tumor")!;
    const before = (tumor.material as THREE.MeshStandardMaterial).color.clone();
    view.applyState([
      { address: "/mmii/visual", args: [str("tumor"), float(1.1), float(1.0)] },
    ]);
    expect(tumor.scale.x).toBeCloseTo(1.1);
    const after = (tumor.material as THREE.MeshStandardMaterial).color;
    expect(after.equals(new THREE.Color(0xffffff))).toBe(true);
    view.applyState([
      { address: "/mmii/visual", args: [str("tumor"), float(1.0), float(0.0)] },
    ]);
    expect(tumor.scale.x).toBeCloseTo(1.0);
    expect((tumor.material as THREE.MeshStandardMaterial).color.equals(before)).toBe(true);
  });

  it("ignores state for unknown structures", () => {
    const view = new SceneView();
    view.loadSnapshot(tetraSnapshot());
    view.applyState([
      { address: "/mmii/visual", args: [str("ghost"), float(2.0), float(1.0)] },
    ]);
  });

  it("tracks probe position with sphere and slice planes", () => {
    const view = new SceneView();
    view.loadSnapshot(tetraSnapshot());
    view.setProbe([0.01, 0.02, 0.03], 0.05);
    expect(view.probeSphere.position.toArray()).toEqual([0.01, 0.02, 0.03]);
    expect(view.probeSphere.scale.x).toBeCloseTo(0.05);
    for (const plane of view.slicePlanes) {
      expect(plane.position.toArray()).toEqual([0.01, 0.02, 0.03]);
    }
  });

  it("adds and removes marker spheres", () => {
    const view = new SceneView();
    view.addMarker([1, 2, 3]);
    view.addMarker([4, 5, 6]);
    expect(view.markerGroup.children.length).toBe(2);
    view.removeLastMarker();
    expect(view.markerGroup.children.length).toBe(1);
    expect(view.markerGroup.children[0].position.toArray()).toEqual([1, 2, 3]);
  });

  it("resolves the nearest structure vertex for clicks", () => {
    const view = new SceneView();
    view.loadSnapshot(tetraSnapshot());
    const hit = view.nearestVertex([0.108, 0.001, 0.0]);
    expect(hit).not.toBeNull();
    expect(hit!.id).toBe("cortex");
    expect(hit!.vertex).toBe(1); // vertex at (0.11, 0, 0)
  });
});

describe("OrbitRig", () => {
  it("orbits and zooms around the target", () => {
    const camera = new THREE.PerspectiveCamera();
    const rig = new OrbitRig(camera);
    const d0 = camera.position.length();
    rig.zoom(0.5);
    expect(camera.position.length()).toBeLessThan(d0);
    const before = camera.position.clone();
    rig.rotate(40, 10);
    expect(camera.position.distanceTo(before)).toBeGreaterThan(0);
    expect(camera.position.length()).toBeCloseTo(rig.distance, 6);
  });
});
