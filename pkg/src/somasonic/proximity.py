"""Probe-driven interaction: sound-sphere gains, clicks, visual feedback.

A probe is a point with an audible radius R. Structures whose surface lies
inside the sphere are sonified with distance-scaled gain; containment of
the probe pins the gain to 1 and raises a distinct cue flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import TriMesh

DEFAULT_RADIUS = 0.03  # head-scale scenes
DEFAULT_TAU_MS = 150.0
CLICK_SCALE = 1.1
CLICK_ALBEDO = 1.0


@dataclass(frozen=True)
class Probe:
    """Interaction point plus the audible sphere radius around it."""

    position: np.ndarray
    radius: float = DEFAULT_RADIUS

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("probe radius must be positive")
        object.__setattr__(
            self, "position", np.asarray(self.position, dtype=np.float64)
        )


@dataclass(frozen=True)
class ProximityEvent:
    structure_id: str
    distance: float
    inside: bool
    gain: float


@dataclass(frozen=True)
class ClickResult:
    structure_id: str | None
    vertex_index: int | None
    distance: float | None

    @property
    def hit(self) -> bool:
        return self.structure_id is not None


def gain_from_distance(distance: float, radius: float, exponent: float = 1.0) -> float:
    """clamp(1 - d/R, 0, 1) ** exponent; exponent is a tuning knob."""
    base = min(max(1.0 - distance / radius, 0.0), 1.0)
    return base**exponent


def update_probe(
    meshes: dict[str, TriMesh], probe: Probe, exponent: float = 1.0
) -> list[ProximityEvent]:
    """One event per structure within the sound sphere (or containing it)."""
    events = []
    for sid, mesh in meshes.items():
        hit = mesh.closest_point(probe.position)
        inside = bool(hit.inside)
        if inside:
            events.append(ProximityEvent(sid, hit.distance, True, 1.0))
        elif hit.distance < probe.radius:
            g = gain_from_distance(hit.distance, probe.radius, exponent)
            events.append(ProximityEvent(sid, hit.distance, False, g))
    return events


def click(meshes: dict[str, TriMesh], probe: Probe) -> ClickResult:
    """Resolve a click to the nearest structure within R and its nearest vertex.

    Empty result (not an error) when nothing is in range.
    """
    best_sid = None
    best_d = math.inf
    for sid, mesh in meshes.items():
        hit = mesh.closest_point(probe.position)
        d = 0.0 if hit.inside else hit.distance
        if d < probe.radius and d < best_d:
            best_sid, best_d = sid, d
    if best_sid is None:
        return ClickResult(None, None, None)
    mesh = meshes[best_sid]
    deltas = mesh.vertices - probe.position
    vertex = int(np.argmin(np.einsum("ij,ij->i", deltas, deltas)))
    return ClickResult(best_sid, vertex, best_d)


@dataclass
class VisualState:
    """Per-structure scale/albedo pulses relaxing exponentially to rest."""

    tau_ms: float = DEFAULT_TAU_MS
    scale: dict[str, float] = field(default_factory=dict)
    albedo: dict[str, float] = field(default_factory=dict)

    def pulse(self, structure_id: str) -> None:
        self.scale[structure_id] = CLICK_SCALE
        self.albedo[structure_id] = CLICK_ALBEDO

    def step(self, dt_ms: float) -> None:
        """Relax toward (scale 1, albedo 0); exact exponential, so stepping
        twice by dt/2 equals one step by dt."""
        if dt_ms < 0:
            raise ValueError("dt must be >= 0")
        if dt_ms == 0:
            return
        decay = math.exp(-dt_ms / self.tau_ms)
        for sid in list(self.scale):
            self.scale[sid] = 1.0 + (self.scale[sid] - 1.0) * decay
        for sid in list(self.albedo):
            self.albedo[sid] = self.albedo[sid] * decay

    def snapshot(self) -> dict[str, tuple[float, float]]:
        ids = set(self.scale) | set(self.albedo)
        return {
            sid: (self.scale.get(sid, 1.0), self.albedo.get(sid, 0.0)) for sid in ids
        }
