"""Trial scoring: markers -> convex hull -> voxel Dice, plus aggregation.

Both meshes are voxelized on one shared grid spanning their union bounding
box, so identical meshes score exactly 1 and disjoint meshes exactly 0.
Degenerate marker sets score 0 with a flag instead of failing the batch.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometryError, EvalError
from .geometry import TriMesh, convex_hull, voxelize

SUMMARY_SCHEMA = "somasonic.eval.v1"

DEFAULT_GRID_DIVISIONS = 128


@dataclass(frozen=True)
class DiceResult:
    dice: float
    marked_volume: float
    gt_volume: float
    cell_size: float
    degenerate: bool = False


@dataclass
class TrialScore:
    trial_id: str
    condition: str
    dice: float
    task_time: float
    degenerate: bool = False
    outlier: bool = False


def markers_to_volume(markers) -> TriMesh:
    """Convex hull of the placed markers = marked tumor volume."""
    markers = np.asarray(markers, dtype=np.float64)
    if markers.ndim != 2 or markers.shape[1] != 3 or len(markers) < 4:
        raise DegenerateGeometryError("need at least 4 markers")
    return convex_hull(markers, structure_id="marked-volume")


def default_cell_size(gt: TriMesh, divisions: int = DEFAULT_GRID_DIVISIONS) -> float:
    lo, hi = gt.bounds()
    return float((hi - lo).max()) / divisions


def dice_score(mt: TriMesh, gt: TriMesh, cell_size: float | None = None) -> DiceResult:
    """Volume-overlap Dice of two closed meshes on a shared voxel grid."""
    if cell_size is None:
        cell_size = default_cell_size(gt)
    if cell_size <= 0:
        raise EvalError("cell_size must be positive")
    lo = np.minimum(mt.bounds()[0], gt.bounds()[0])
    hi = np.maximum(mt.bounds()[1], gt.bounds()[1])
    extent = hi - lo
    dims = tuple(int(np.ceil(e / cell_size - 1e-12)) for e in extent)
    if min(dims) < 1:
        raise EvalError("cell_size exceeds the union bounding box")
    occ_mt = voxelize(mt, cell_size, origin=lo, dims=dims).occupancy
    occ_gt = voxelize(gt, cell_size, origin=lo, dims=dims).occupancy
    n_mt = int(occ_mt.sum())
    n_gt = int(occ_gt.sum())
    if n_mt + n_gt == 0:
        raise EvalError("both meshes voxelized to empty occupancy")
    inter = int((occ_mt & occ_gt).sum())
    cell_vol = cell_size**3
    return DiceResult(
        dice=2.0 * inter / (n_mt + n_gt),
        marked_volume=n_mt * cell_vol,
        gt_volume=n_gt * cell_vol,
        cell_size=cell_size,
    )


def score_trial(
    trial_id: str,
    condition: str,
    markers,
    gt: TriMesh,
    task_time: float,
    cell_size: float | None = None,
) -> TrialScore:
    """Dice for one localization attempt; degenerate markers score 0."""
    try:
        mt = markers_to_volume(markers)
    except DegenerateGeometryError:
        return TrialScore(trial_id, condition, 0.0, task_time, degenerate=True)
    result = dice_score(mt, gt, cell_size)
    return TrialScore(trial_id, condition, result.dice, task_time)


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionSummary:
    condition: str
    n: int
    dice_mean: float
    dice_sd: float
    time_mean: float
    time_sd: float


def _mean_sd(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    sd = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return mean, sd


def flag_outliers(scores: list[TrialScore]) -> list[TrialScore]:
    """Optional outlier marking: dice outside mean +- 3 sd, time outside
    the 1.5*IQR fences. Flags only; nothing is removed."""
    if len(scores) < 2:
        return scores
    dice = np.array([s.dice for s in scores])
    times = np.array([s.task_time for s in scores])
    d_lo, d_hi = dice.mean() - 3 * dice.std(ddof=1), dice.mean() + 3 * dice.std(ddof=1)
    q1, q3 = np.percentile(times, [25, 75])
    iqr = q3 - q1
    t_lo, t_hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    for s in scores:
        s.outlier = not (d_lo <= s.dice <= d_hi) or not (t_lo <= s.task_time <= t_hi)
    return scores


def aggregate_trials(
    scores: list[TrialScore], mark_outliers: bool = False
) -> list[ConditionSummary]:
    """Per-condition mean/sd of dice and task time, sorted by condition."""
    if not scores:
        raise EvalError("no trials to aggregate")
    if mark_outliers:
        flag_outliers(scores)
    by_condition: dict[str, list[TrialScore]] = {}
    for s in scores:
        by_condition.setdefault(s.condition, []).append(s)
    out = []
    for condition in sorted(by_condition):
        group = by_condition[condition]
        dice_mean, dice_sd = _mean_sd([s.dice for s in group])
        time_mean, time_sd = _mean_sd([s.task_time for s in group])
        out.append(
            ConditionSummary(condition, len(group), dice_mean, dice_sd, time_mean, time_sd)
        )
    return out


# ---------------------------------------------------------------------------
# Trial extraction from JSON-lines logs
# ---------------------------------------------------------------------------


@dataclass
class TrialData:
    trial_id: str
    condition: str
    markers: list = field(default_factory=list)
    task_time: float = 0.0


def extract_trials(records: list[dict], default_id: str = "trial") -> list[TrialData]:
    """Split a message log into trials via /mmii/trial/start|end markers.

    Markers placed between start and end belong to that trial; /mmii/unmark
    retracts the latest one. Logs without trial boundaries become a single
    trial spanning the whole message sequence.
    """
    trials: list[TrialData] = []
    current: TrialData | None = None
    start_t = 0.0
    loose_markers: list = []
    first_t = last_t = None

    for rec in records:
        if rec.get("type") not in (None, "msg") or "address" not in rec:
            continue
        t = float(rec.get("t", 0.0))
        first_t = t if first_t is None else first_t
        last_t = t
        addr = rec["address"]
        args = rec.get("args", [])
        if addr == "/mmii/trial/start":
            current = TrialData(
                trial_id=f"{default_id}-t{len(trials) + 1}",
                condition=str(args[0]) if args else "unspecified",
            )
            start_t = t
        elif addr == "/mmii/trial/end":
            if current is not None:
                current.task_time = max(0.0, t - start_t)
                trials.append(current)
                current = None
        elif addr == "/mmii/marker":
            target = current.markers if current is not None else loose_markers
            target.append([float(a) for a in args[:3]])
        elif addr == "/mmii/unmark":
            target = current.markers if current is not None else loose_markers
            if target:
                target.pop()

    if current is not None:  # unterminated trial: score what we have
        current.task_time = max(0.0, (last_t or start_t) - start_t)
        trials.append(current)
    if not trials and loose_markers:
        span = (last_t - first_t) if (first_t is not None and last_t is not None) else 0.0
        trials.append(
            TrialData(trial_id=default_id, condition="unspecified",
                      markers=loose_markers, task_time=span)
        )
    return trials


_CSV_FIELDS = ("schema", "condition", "n", "dice_mean", "dice_sd", "time_mean", "time_sd")


def write_summary_csv(summaries: list[ConditionSummary], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_FIELDS)
        for s in summaries:
            writer.writerow(
                [
                    SUMMARY_SCHEMA,
                    s.condition,
                    s.n,
                    f"{s.dice_mean:.6g}",
                    f"{s.dice_sd:.6g}",
                    f"{s.time_mean:.6g}",
                    f"{s.time_sd:.6g}",
                ]
            )


def write_per_trial_json(scores: list[TrialScore], path) -> None:
    doc = {
        "schema": "somasonic.evaltrials.v1",
        "trials": [
            {
                "trial_id": s.trial_id,
                "condition": s.condition,
                "dice": s.dice,
                "task_time": s.task_time,
                "degenerate": s.degenerate,
                "outlier": s.outlier,
            }
            for s in scores
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)


def read_summary_csv(path) -> list[ConditionSummary]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["schema"] != SUMMARY_SCHEMA:
                raise EvalError(f"unexpected summary schema {row['schema']!r}")
            out.append(
                ConditionSummary(
                    condition=row["condition"],
                    n=int(row["n"]),
                    dice_mean=float(row["dice_mean"]),
                    dice_sd=float(row["dice_sd"]),
                    time_mean=float(row["time_mean"]),
                    time_sd=float(row["time_sd"]),
                )
            )
    if not out:
        raise EvalError(f"{path}: empty summary")
    return out
