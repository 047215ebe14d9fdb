import json
from pathlib import Path

import numpy as np
import pytest

from somasonic import shapes, tissue
from somasonic.geometry import save_obj

# Notes attached to acceptance criteria (e.g. measured timings), shown in
# the terminal summary next to the pass/fail line.
ACCEPTANCE_NOTES: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(name): acceptance criterion checked by this test"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker and rep.when == "call":
        rep._criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = []
    for reps in terminalreporter.stats.values():
        for rep in reps:
            name = getattr(rep, "_criterion", None)
            if name is not None:
                rows.append((name, rep.outcome))
    if not rows:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in rows:
        status = "PASS" if outcome == "passed" else "FAIL"
        note = ACCEPTANCE_NOTES.get(name, "")
        suffix = f"  ({note})" if note else ""
        terminalreporter.write_line(f"[{status}] {name}{suffix}")

CUBE_OBJ = """\
# unit cube, quad faces
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 4 3 2
f 5 6 7 8
f 1 2 6 5
f 2 3 7 6
f 3 4 8 7
f 4 1 5 8
"""


@pytest.fixture
def cube_obj(tmp_path):
    path = tmp_path / "cube.obj"
    path.write_text(CUBE_OBJ)
    return path


@pytest.fixture
def unit_cube():
    return shapes.box(center=(0.5, 0.5, 0.5), structure_id="cube")


@pytest.fixture
def small_sphere():
    return shapes.icosphere(radius=0.05, subdivisions=2, structure_id="sphere")


@pytest.fixture
def test_params():
    return tissue.ModelParams(
        young_modulus=1e6, density=1000.0, poisson=0.3, loss_factor=0.01
    )


@pytest.fixture(scope="session")
def model_cache(tmp_path_factory):
    return tmp_path_factory.mktemp("modal-cache")


def write_scene(
    tmp_path: Path,
    structures,
    probe_radius: float = 0.03,
    ground_truth_id=None,
    max_modes: int = 24,
    extra: dict | None = None,
) -> Path:
    """Write scene JSON + referenced meshes; structures = [(id, mesh, tissue)]."""
    entries = []
    for sid, mesh, tissue_name in structures:
        if mesh is not None:
            save_obj(mesh, tmp_path / f"{sid}.obj")
            entries.append({"id": sid, "mesh": f"{sid}.obj", "tissue": tissue_name})
        else:
            entries.append(
                {
                    "id": sid,
                    "tissue": tissue_name,
                    "rod": {"length": 1.0, "area": 1e-4, "segments": 9},
                    "excite_vertex": 4,
                }
            )
    doc = {
        "schema": "somasonic.scene.v1",
        "structures": entries,
        "probe": {"radius": probe_radius},
        "audio": {
            "sample_rate": 48000,
            "block_size": 128,
            "band": [80.0, 8000.0],
            "max_modes": max_modes,
        },
        "ground_truth_id": ground_truth_id,
    }
    if extra:
        doc.update(extra)
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture
def two_structure_scene(tmp_path):
    tumor = shapes.icosphere(radius=0.012, subdivisions=2, center=(0.02, 0.0, 0.0),
                             structure_id="tumor")
    cortex = shapes.icosphere(radius=0.05, subdivisions=2, structure_id="cortex")
    path = write_scene(
        tmp_path, [("tumor", tumor, "glioma"), ("cortex", cortex, "grey_matter")],
        ground_truth_id="tumor",
    )
    return path


def rigid_motion(points: np.ndarray, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(3, 3))
    q, _ = np.linalg.qr(a)
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    t = rng.normal(size=3)
    return points @ q.T + t
