"""Generate the bundled demo scene (meshes + config + event script).

Run as ``python -m somasonic.demo <output-dir>`` to (re)create the files
under scenes/demo. The scene is a small head-scale arrangement: a cortex
shell, an embedded tumor (the evaluation ground truth), a pulsatile artery
tube, and a motor-tract tube.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from . import shapes
from .geometry import save_obj

EVENTS_PREAMBLE = [
    {"t": 0.0, "address": "/mmii/trial/start", "args": ["audiovisual"]},
    {"t": 0.05, "address": "/mmii/hr", "args": [72.0]},
]


def write_demo_scene(out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    cortex = shapes.icosphere(radius=0.07, subdivisions=2, structure_id="cortex")
    tumor = shapes.icosphere(
        radius=0.015, subdivisions=2, center=(0.025, 0.01, 0.0), structure_id="tumor"
    )
    artery = shapes.tube(
        radius=0.004, length=0.09, center=(-0.02, 0.0, 0.0), structure_id="artery"
    )
    tract = shapes.tube(
        radius=0.006, length=0.1, center=(0.0, -0.03, 0.0), structure_id="tract"
    )
    for mesh in (cortex, tumor, artery, tract):
        save_obj(mesh, out / f"{mesh.structure_id}.obj")

    config = {
        "schema": "somasonic.scene.v1",
        "structures": [
            {"id": "cortex", "mesh": "cortex.obj", "tissue": "grey_matter"},
            {"id": "tumor", "mesh": "tumor.obj", "tissue": "glioma"},
            {"id": "artery", "mesh": "artery.obj", "tissue": "blood_vessel_wall"},
            {"id": "tract", "mesh": "tract.obj", "tissue": "white_matter"},
        ],
        "probe": {"radius": 0.03},
        "audio": {"sample_rate": 48000, "block_size": 128, "band": [80.0, 8000.0], "max_modes": 64},
        "ground_truth_id": "tumor",
        "heart_rate_bpm": 60.0,
    }
    (out / "demo.json").write_text(json.dumps(config, indent=2) + "\n")

    events = list(EVENTS_PREAMBLE)
    # Probe sweeps toward the tumor, clicks, marks a few corners, withdraws.
    for i in range(30):
        t = 0.1 + 0.05 * i
        x = -0.08 + (0.105 * i / 29)
        events.append(
            {"t": round(t, 3), "address": "/mmii/probe", "args": [round(x, 4), 0.01, 0.0, 0.03]}
        )
    events.append({"t": 1.7, "address": "/mmii/click", "args": ["", 0]})
    for t, (mx, my, mz) in zip(
        (2.0, 2.2, 2.4, 2.6, 2.8, 3.0),
        [
            (0.011, 0.011, 0.001),
            (0.039, 0.011, 0.001),
            (0.025, -0.004, 0.0),
            (0.025, 0.024, 0.0),
            (0.025, 0.01, 0.014),
            (0.025, 0.01, -0.014),
        ],
    ):
        events.append({"t": t, "address": "/mmii/marker", "args": [mx, my, mz]})
    events.append({"t": 3.3, "address": "/mmii/click", "args": ["tumor", 3]})
    events.append({"t": 3.8, "address": "/mmii/trial/end", "args": []})
    with open(out / "events.jsonl", "w") as fh:
        for ev in events:
            fh.write(json.dumps(ev) + "\n")
    return out / "demo.json"


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else "scenes/demo"
    path = write_demo_scene(target)
    print(f"wrote demo scene: {path}")
