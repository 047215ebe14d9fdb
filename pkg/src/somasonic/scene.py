"""Scene configuration: JSON document -> loaded meshes, models, and voices.

A scene lists structures (mesh file + tissue + overrides), probe defaults,
and audio settings. Modal models are cached on disk keyed by mesh hash and
parameters so repeated startups skip the eigensolve.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import modal, synth, tissue, wavio
from .errors import SceneError
from .geometry import TriMesh, load_mesh

SCENE_SCHEMA = "somasonic.scene.v1"


@dataclass(frozen=True)
class StructureConfig:
    structure_id: str
    tissue_name: str
    mesh_path: str | None = None
    rod: tuple[float, float, int] | None = None  # (length, area, segments)
    overrides: dict = field(default_factory=dict)
    dynamic: bool | None = None  # None = inherit from tissue record
    excite_vertex: int = 0
    pickup_vertex: int | None = None
    scale: float = 1.0
    spectral_tilt_db_oct: float = 0.0
    invert_map: bool = False

    def __post_init__(self):
        if (self.mesh_path is None) == (self.rod is None):
            raise SceneError(
                f"{self.structure_id}: exactly one of mesh/rod must be given"
            )


@dataclass(frozen=True)
class AudioConfig:
    sample_rate: int = synth.DEFAULT_SAMPLE_RATE
    block_size: int = synth.DEFAULT_BLOCK_SIZE
    band: tuple[float, float] = (80.0, 8000.0)
    max_modes: int = modal.DEFAULT_MAX_MODES
    thickness: float = modal.DEFAULT_THICKNESS
    target_dbfs: float = synth.DEFAULT_TARGET_DBFS


@dataclass(frozen=True)
class ProbeConfig:
    radius: float = 0.03
    gain_exponent: float = 1.0


@dataclass(frozen=True)
class SceneConfig:
    structures: tuple[StructureConfig, ...]
    audio: AudioConfig = AudioConfig()
    probe: ProbeConfig = ProbeConfig()
    ground_truth_id: str | None = None
    heart_rate_bpm: float = 60.0
    korotkoff_wav: str | None = None
    base_dir: Path = Path(".")

    def __post_init__(self):
        ids = [s.structure_id for s in self.structures]
        if len(ids) != len(set(ids)):
            raise SceneError("structure ids must be unique")
        if not ids:
            raise SceneError("scene has no structures")
        if self.ground_truth_id is not None and self.ground_truth_id not in ids:
            raise SceneError(f"ground_truth_id {self.ground_truth_id!r} not in scene")


def load_scene_config(path) -> SceneConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}: invalid JSON: {exc}") from exc
    if doc.get("schema") != SCENE_SCHEMA:
        raise SceneError(f"{path}: expected schema {SCENE_SCHEMA!r}, got {doc.get('schema')!r}")
    try:
        structures = tuple(
            StructureConfig(
                structure_id=s["id"],
                tissue_name=s["tissue"],
                mesh_path=s.get("mesh"),
                rod=(
                    (float(s["rod"]["length"]), float(s["rod"]["area"]), int(s["rod"]["segments"]))
                    if "rod" in s
                    else None
                ),
                overrides=s.get("overrides", {}),
                dynamic=s.get("dynamic"),
                excite_vertex=int(s.get("excite_vertex", 0)),
                pickup_vertex=s.get("pickup_vertex"),
                scale=float(s.get("scale", 1.0)),
                spectral_tilt_db_oct=float(s.get("spectral_tilt_db_oct", 0.0)),
                invert_map=bool(s.get("invert_map", False)),
            )
            for s in doc["structures"]
        )
    except KeyError as exc:
        raise SceneError(f"{path}: structure entry missing field {exc}") from exc
    audio_doc = doc.get("audio", {})
    audio = AudioConfig(
        sample_rate=int(audio_doc.get("sample_rate", synth.DEFAULT_SAMPLE_RATE)),
        block_size=int(audio_doc.get("block_size", synth.DEFAULT_BLOCK_SIZE)),
        band=tuple(audio_doc.get("band", (80.0, 8000.0))),
        max_modes=int(audio_doc.get("max_modes", modal.DEFAULT_MAX_MODES)),
        thickness=float(audio_doc.get("thickness", modal.DEFAULT_THICKNESS)),
        target_dbfs=float(audio_doc.get("target_dbfs", synth.DEFAULT_TARGET_DBFS)),
    )
    probe_doc = doc.get("probe", {})
    probe = ProbeConfig(
        radius=float(probe_doc.get("radius", 0.03)),
        gain_exponent=float(probe_doc.get("gain_exponent", 1.0)),
    )
    return SceneConfig(
        structures=structures,
        audio=audio,
        probe=probe,
        ground_truth_id=doc.get("ground_truth_id"),
        heart_rate_bpm=float(doc.get("heart_rate_bpm", 60.0)),
        korotkoff_wav=doc.get("korotkoff_wav"),
        base_dir=path.parent,
    )


@dataclass
class LoadedStructure:
    config: StructureConfig
    mesh: TriMesh | None  # None for rod structures (no proximity surface)
    tissue: tissue.TissueProperties
    params: tissue.ModelParams
    model: modal.ModalModel

    @property
    def structure_id(self) -> str:
        return self.config.structure_id

    @property
    def dynamic(self) -> bool:
        if self.config.dynamic is not None:
            return bool(self.config.dynamic)
        return self.tissue.dynamic


def _resolve_tissue(cfg: StructureConfig) -> tuple[tissue.TissueProperties, tissue.ModelParams]:
    record = tissue.get_tissue(cfg.tissue_name)
    ov = cfg.overrides
    record = tissue.with_overrides(
        record,
        young_modulus_range=ov.get("young_modulus_range_kpa"),
        density_mean=ov.get("density_kgm3"),
        poisson_range=ov.get("poisson_range"),
        rigidity_class=ov.get("rigidity_class"),
        dynamic=ov.get("dynamic"),
    )
    params = tissue.to_model_params(record)
    if "loss_factor" in ov:
        params = tissue.ModelParams(
            young_modulus=params.young_modulus,
            density=params.density,
            poisson=params.poisson,
            loss_factor=float(ov["loss_factor"]),
        )
    return record, params


def build_structure(
    cfg: StructureConfig,
    audio: AudioConfig,
    base_dir: Path,
    cache_dir: Path | None = None,
) -> LoadedStructure:
    record, params = _resolve_tissue(cfg)

    if cfg.rod is not None:
        length, area, segments = cfg.rod
        system = modal.assemble_rod(length, area, segments, params)
        model = modal.compute_modes(
            system, max_modes=audio.max_modes, loss_factor=params.loss_factor
        )
        return LoadedStructure(cfg, None, record, params, model)

    mesh_path = Path(cfg.mesh_path)
    if not mesh_path.is_absolute():
        mesh_path = base_dir / mesh_path
    try:
        mesh = load_mesh(mesh_path, cfg.structure_id, scale=cfg.scale)
    except FileNotFoundError:
        raise SceneError(f"{cfg.structure_id}: mesh file not found: {mesh_path}")

    model = None
    cache_path = None
    if cache_dir is not None:
        key = modal.model_cache_key(mesh, params, audio.thickness, audio.max_modes)
        cache_path = Path(cache_dir) / f"modal-{key}.npz"
        if cache_path.exists():
            model = modal.load_model(cache_path)
    if model is None:
        system = modal.assemble_shell(mesh, params, thickness=audio.thickness)
        model = modal.compute_modes(
            system, max_modes=audio.max_modes, loss_factor=params.loss_factor
        )
        model = modal.pitch_map(model, audio.band)
        if cache_path is not None:
            cache_path.parent.mkdir(parents=True, exist_ok=True)
            modal.save_model(model, cache_path)
    return LoadedStructure(config=cfg, mesh=mesh, tissue=record, params=params, model=model)


def load_scene(
    config: SceneConfig, cache_dir: Path | None = None
) -> dict[str, LoadedStructure]:
    out = {}
    for cfg in config.structures:
        out[cfg.structure_id] = build_structure(
            cfg, config.audio, config.base_dir, cache_dir
        )
    return out


def _pulse_sample(config: SceneConfig) -> np.ndarray:
    """Korotkoff source: configured recording, else the synthetic pulse."""
    if config.korotkoff_wav:
        path = Path(config.korotkoff_wav)
        if not path.is_absolute():
            path = config.base_dir / path
        samples, sr = wavio.read_wav(path)
        if sr != config.audio.sample_rate:
            raise SceneError(
                f"korotkoff recording is {sr} Hz, scene runs {config.audio.sample_rate} Hz"
            )
        return samples.mean(axis=1)
    return synth.korotkoff_pulse(config.audio.sample_rate)


def build_voices(
    structures: dict[str, LoadedStructure], config: SceneConfig
) -> dict[str, synth.Voice]:
    """Resonator banks (plus granular sources for pulsatile structures)."""
    voices: dict[str, synth.Voice] = {}
    for sid, s in structures.items():
        bank = synth.ResonatorBank(
            s.model,
            mesh=s.mesh,
            excite_vertex=s.config.excite_vertex,
            pickup_vertex=s.config.pickup_vertex,
            sample_rate=config.audio.sample_rate,
            block_size=config.audio.block_size,
            target_dbfs=config.audio.target_dbfs,
            spectral_tilt_db_oct=s.config.spectral_tilt_db_oct,
            invert_gains=s.config.invert_map,
        )
        granular = None
        if s.dynamic:
            granular = synth.GranularSource(
                _pulse_sample(config),
                sample_rate=config.audio.sample_rate,
                heart_rate_bpm=config.heart_rate_bpm,
            )
        voices[sid] = synth.Voice(
            bank=bank,
            granular=granular,
            centroid=s.mesh.centroid() if s.mesh is not None else None,
        )
    return voices


def scene_snapshot(structures: dict[str, LoadedStructure], config: SceneConfig) -> dict:
    """JSON-safe scene description for UI clients (meshes included)."""
    return {
        "schema": "somasonic.scenesnapshot.v1",
        "sample_rate": config.audio.sample_rate,
        "block_size": config.audio.block_size,
        "probe_radius": config.probe.radius,
        "ground_truth_id": config.ground_truth_id,
        "structures": [
            {
                "id": sid,
                "tissue": s.tissue.name,
                "dynamic": s.dynamic,
                "vertices": np.round(s.mesh.vertices, 6).ravel().tolist(),
                "faces": s.mesh.faces.ravel().tolist(),
            }
            for sid, s in structures.items()
            if s.mesh is not None
        ],
    }
