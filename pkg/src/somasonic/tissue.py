"""Tissue property registry and conversion to concrete model parameters.

The bundled registry covers seven reference tissues spanning rigid bone to
soft brain parenchyma; users can register additional records or override
fields per scene.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from importlib import resources

from .errors import UnknownTissueError

RIGIDITY_CLASSES = ("rigid", "semi-rigid", "soft")

# Damping by rigidity class; softer tissue is more heavily damped, which is
# why soft structures ring less distinctly.
LOSS_FACTOR_BY_CLASS = {"rigid": 0.002, "semi-rigid": 0.01, "soft": 0.05}

# Fallback for records without a density (e.g. tumours whose density varies
# by grade): near grey matter.
DEFAULT_DENSITY = 1050.0

_POISSON_CAP = 0.49


@dataclass(frozen=True)
class TissueProperties:
    """One registry record, ranges as published."""

    name: str
    young_modulus_range: tuple[float, float]  # kPa
    density_mean: float | None  # kg/m^3, None = unspecified
    density_sd: float | None
    poisson_range: tuple[float, float]
    rigidity_class: str
    dynamic: bool = False

    def __post_init__(self):
        e_min, e_max = self.young_modulus_range
        if not (0 < e_min <= e_max):
            raise ValueError(f"{self.name}: need 0 < E_min <= E_max")
        if self.density_mean is not None and self.density_mean <= 0:
            raise ValueError(f"{self.name}: density must be positive")
        nu_min, nu_max = self.poisson_range
        if not (0 <= nu_min <= nu_max <= 0.5):
            raise ValueError(f"{self.name}: need 0 <= nu_min <= nu_max <= 0.5")
        if self.rigidity_class not in RIGIDITY_CLASSES:
            raise ValueError(f"{self.name}: unknown rigidity class")


@dataclass(frozen=True)
class ModelParams:
    """Concrete scalars consumed by the mechanical assembly."""

    young_modulus: float  # Pa
    density: float  # kg/m^3
    poisson: float
    loss_factor: float

    def __post_init__(self):
        if min(self.young_modulus, self.density, self.loss_factor) <= 0:
            raise ValueError("model parameters must be positive")
        if not (0 <= self.poisson < 0.5):
            raise ValueError("poisson must lie in [0, 0.5)")


def _normalize(name: str) -> str:
    return name.strip().lower().replace(" ", "_").replace("-", "_")


def _load_bundled() -> dict[str, TissueProperties]:
    out: dict[str, TissueProperties] = {}
    text = resources.files("somasonic.data").joinpath("tissues.csv").read_text()
    rows = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    for rec in csv.DictReader(rows):
        name = _normalize(rec["name"])
        density = float(rec["density_kgm3"]) if rec["density_kgm3"] else None
        density_sd = float(rec["density_sd"]) if rec["density_sd"] else None
        out[name] = TissueProperties(
            name=name,
            young_modulus_range=(float(rec["young_min_kpa"]), float(rec["young_max_kpa"])),
            density_mean=density,
            density_sd=density_sd,
            poisson_range=(float(rec["poisson_min"]), float(rec["poisson_max"])),
            rigidity_class=rec["rigidity"],
            dynamic=rec["dynamic"].strip().lower() == "true",
        )
    return out


_REGISTRY: dict[str, TissueProperties] = _load_bundled()


def get_tissue(name: str) -> TissueProperties:
    key = _normalize(name)
    try:
        return _REGISTRY[key]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise UnknownTissueError(f"unknown tissue {name!r} (known: {known})") from None


def register_tissue(props: TissueProperties) -> None:
    _REGISTRY[_normalize(props.name)] = props


def tissue_names() -> list[str]:
    return sorted(_REGISTRY)


def to_model_params(
    t: TissueProperties, default_density: float = DEFAULT_DENSITY
) -> ModelParams:
    """Collapse published ranges to model scalars.

    Stiffness ranges span orders of magnitude, so the Young modulus takes
    the geometric mean of its endpoints; Poisson takes the arithmetic
    midpoint, hard-capped below the incompressible singularity.
    """
    e_min, e_max = t.young_modulus_range
    young_pa = math.sqrt(e_min * e_max) * 1e3
    nu = min(sum(t.poisson_range) / 2.0, _POISSON_CAP)
    density = t.density_mean if t.density_mean is not None else default_density
    return ModelParams(
        young_modulus=young_pa,
        density=density,
        poisson=nu,
        loss_factor=LOSS_FACTOR_BY_CLASS[t.rigidity_class],
    )


def with_overrides(
    t: TissueProperties,
    young_modulus_range: tuple[float, float] | None = None,
    density_mean: float | None = None,
    poisson_range: tuple[float, float] | None = None,
    rigidity_class: str | None = None,
    dynamic: bool | None = None,
) -> TissueProperties:
    """Copy of a record with scene-level field overrides applied."""
    fields = {}
    if young_modulus_range is not None:
        fields["young_modulus_range"] = tuple(young_modulus_range)
    if density_mean is not None:
        fields["density_mean"] = density_mean
    if poisson_range is not None:
        fields["poisson_range"] = tuple(poisson_range)
    if rigidity_class is not None:
        fields["rigidity_class"] = rigidity_class
    if dynamic is not None:
        fields["dynamic"] = dynamic
    return replace(t, **fields) if fields else t
