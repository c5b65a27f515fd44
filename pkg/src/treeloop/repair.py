"""Template-guided mask repair: measure thickness, fill gaps, merge, accept.

Thickness is measured along each fitted curve against the filtered
prediction; rows where no run is found are filled linearly between measured
neighbors (with a 4-px assumption for missing branch tips and a 3-px floor
on generated values), rasterized, and unioned back into the prediction.  A
repair is accepted only when at most half of the tree had to be
reconstructed and the result passes the Y filter — the "usable label" bar.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .filters import FilterConfig, y_shaped_tree_filter
from .gafit import FitResult
from .mask import RowRun, as_mask, empty_mask, keep_largest_blob, runs_by_row
from .template import (
    BRANCH1,
    BRANCH2,
    TRUNK,
    DegenerateGeometryError,
    TemplateCurves,
    build_curves,
    curve_row_domains,
    evaluate_curve,
    rasterize,
)

__all__ = [
    "UNSET",
    "MEASURED",
    "GENERATED",
    "RepairConfig",
    "CurveProfile",
    "ThicknessProfile",
    "RepairOutcome",
    "measure_thickness",
    "fill_thickness",
    "repair",
]

UNSET = 0
MEASURED = 1
GENERATED = 2


@dataclass(frozen=True)
class RepairConfig:
    max_reconstructed_fraction: float = 0.5
    association_window: float = 10.0  # px between run center and template x
    tip_thickness: int = 4  # assumed when a branch's top endpoint is unmeasured
    min_generated_thickness: int = 3

    def validate(self) -> None:
        if not 0.0 <= self.max_reconstructed_fraction <= 1.0:
            raise ValueError("max_reconstructed_fraction must be in [0, 1]")
        if self.association_window < 0:
            raise ValueError("association_window must be non-negative")
        if self.tip_thickness < 1 or self.min_generated_thickness < 1:
            raise ValueError("thickness floors must be >= 1")


@dataclass
class CurveProfile:
    """Per-row thickness of one curve: value plus state (unset / measured / generated)."""

    ys: np.ndarray
    thickness: np.ndarray
    state: np.ndarray

    @staticmethod
    def unset(ys: np.ndarray) -> "CurveProfile":
        return CurveProfile(
            ys=ys,
            thickness=np.zeros(len(ys), dtype=np.float64),
            state=np.full(len(ys), UNSET, dtype=np.uint8),
        )


@dataclass
class ThicknessProfile:
    curves: dict[str, CurveProfile]

    def total_entries(self) -> int:
        return sum(len(p.ys) for p in self.curves.values())

    def generated_entries(self) -> int:
        return sum(int((p.state == GENERATED).sum()) for p in self.curves.values())


@dataclass(frozen=True)
class RepairOutcome:
    accepted: bool
    mask: np.ndarray
    reconstructed_fraction: float
    reasons: tuple[str, ...]


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def _run_distance(run: RowRun, rx: int) -> float:
    return 0.0 if run.contains(rx) else abs(run.center - rx)


def _pick_run(
    runs: list[RowRun], rx: int, window: float, exclude: RowRun | None = None
) -> RowRun | None:
    best: RowRun | None = None
    best_d = None
    for run in runs:
        if exclude is not None and run is exclude:
            continue
        d = _run_distance(run, rx)
        if d > 0.0 and d > window:
            continue
        if best_d is None or d < best_d:
            best, best_d = run, d
    return best


def measure_thickness(
    filtered: np.ndarray, curves: TemplateCurves, cfg: RepairConfig | None = None
) -> ThicknessProfile:
    """Thickness of the filtered mask along each curve, row by row.

    A row's run is claimed for a curve when it contains the rounded template
    x, or when its center lies within the association window.  The two
    branches may share a run in a row only when it spans both rounded
    template positions; otherwise the closer branch wins and the other takes
    the next-best run or stays unset.
    """
    cfg = cfg or RepairConfig()
    m = as_mask(filtered)
    runs_map = runs_by_row(m)
    domains = curve_row_domains(curves)
    profile = ThicknessProfile(
        curves={cid: CurveProfile.unset(rows) for cid, rows in domains.items()}
    )

    trunk = profile.curves[TRUNK]
    for i, y in enumerate(trunk.ys):
        runs = runs_map.get(int(y), [])
        if not runs:
            continue
        rx = _round_half_up(float(evaluate_curve(curves, TRUNK, float(y))))
        run = _pick_run(runs, rx, cfg.association_window)
        if run is not None:
            trunk.thickness[i] = run.thickness
            trunk.state[i] = MEASURED

    b1 = profile.curves[BRANCH1]
    b2 = profile.curves[BRANCH2]
    for i, y in enumerate(b1.ys):  # both branches share the row domain
        runs = runs_map.get(int(y), [])
        if not runs:
            continue
        rx1 = _round_half_up(float(evaluate_curve(curves, BRANCH1, float(y))))
        rx2 = _round_half_up(float(evaluate_curve(curves, BRANCH2, float(y))))
        pick1 = _pick_run(runs, rx1, cfg.association_window)
        pick2 = _pick_run(runs, rx2, cfg.association_window)
        if pick1 is not None and pick1 is pick2:
            shared_ok = pick1.contains(rx1) and pick1.contains(rx2)
            if not shared_ok:
                if _run_distance(pick1, rx1) <= _run_distance(pick2, rx2):
                    pick2 = _pick_run(runs, rx2, cfg.association_window, exclude=pick1)
                else:
                    pick1 = _pick_run(runs, rx1, cfg.association_window, exclude=pick2)
        if pick1 is not None:
            b1.thickness[i] = pick1.thickness
            b1.state[i] = MEASURED
        if pick2 is not None:
            b2.thickness[i] = pick2.thickness
            b2.state[i] = MEASURED
    return profile


def _fill_curve(p: CurveProfile, is_branch: bool, cfg: RepairConfig) -> CurveProfile:
    measured = p.state == MEASURED
    n = len(p.ys)
    if n == 0:
        return CurveProfile(p.ys.copy(), p.thickness.copy(), p.state.copy())
    if not measured.any():
        return CurveProfile(
            ys=p.ys.copy(),
            thickness=np.full(
                n, float(max(cfg.tip_thickness, cfg.min_generated_thickness))
            ),
            state=np.full(n, GENERATED, dtype=np.uint8),
        )
    anchor_ys = p.ys[measured].astype(np.float64)
    anchor_vals = p.thickness[measured].copy()
    if is_branch and not measured[-1]:
        # missing branch tip: assume the default tip thickness, then interpolate
        anchor_ys = np.append(anchor_ys, float(p.ys[-1]))
        anchor_vals = np.append(anchor_vals, float(cfg.tip_thickness))
    # linear inside, constant extension outside the anchored range
    filled = np.interp(p.ys.astype(np.float64), anchor_ys, anchor_vals)
    generated = np.floor(filled + 0.5)  # round half away from zero (all positive)
    generated = np.maximum(generated, cfg.min_generated_thickness)
    thickness = np.where(measured, p.thickness, generated)
    state = np.where(measured, MEASURED, GENERATED).astype(np.uint8)
    return CurveProfile(ys=p.ys.copy(), thickness=thickness, state=state)


def fill_thickness(
    profile: ThicknessProfile, cfg: RepairConfig | None = None
) -> ThicknessProfile:
    """Fill every unset row: linear interpolation between measured anchors.

    Branch tips default to the tip thickness when unmeasured; spans with no
    measured neighbor on one side extend the nearest value constantly; every
    generated value is floored at the minimum generated thickness.  Measured
    entries are never touched, so the operation is idempotent; a curve with
    no measurements at all becomes wholly generated at the tip default.
    """
    cfg = cfg or RepairConfig()
    cfg.validate()
    return ThicknessProfile(
        curves={
            cid: _fill_curve(p, cid != TRUNK, cfg)
            for cid, p in profile.curves.items()
        }
    )


def repair(
    filtered: np.ndarray,
    fit: FitResult,
    filter_cfg: FilterConfig,
    repair_cfg: RepairConfig | None = None,
) -> RepairOutcome:
    """Measure, fill, rasterize generated rows, merge, and gate the result.

    The candidate is the union of the filtered prediction with the generated
    rows rasterized along the fitted template, reduced to its largest blob.
    Acceptance requires the reconstructed row fraction to stay at or below
    the configured maximum and the candidate to pass the Y filter.
    """
    cfg = repair_cfg or RepairConfig()
    cfg.validate()
    m = as_mask(filtered)
    size = m.shape
    try:
        curves = build_curves(fit.params, size[0])
    except DegenerateGeometryError as exc:
        return RepairOutcome(
            accepted=False,
            mask=empty_mask(*size),
            reconstructed_fraction=1.0,
            reasons=(f"degenerate-geometry: {exc}",),
        )

    profile = fill_thickness(measure_thickness(m, curves, cfg), cfg)
    generated_map = {
        (cid, int(y)): int(t)
        for cid, p in profile.curves.items()
        for y, t, s in zip(p.ys, p.thickness, p.state)
        if s == GENERATED
    }
    candidate = keep_largest_blob(m | rasterize(curves, generated_map, size))

    total = profile.total_entries()
    fraction = (profile.generated_entries() / total) if total else 1.0
    reasons: list[str] = []
    if fraction > cfg.max_reconstructed_fraction:
        reasons.append("over-reconstructed")
    if not y_shaped_tree_filter(candidate, filter_cfg).passes:
        reasons.append("y-filter")
    accepted = not reasons
    return RepairOutcome(
        accepted=accepted,
        mask=candidate if accepted else empty_mask(*size),
        reconstructed_fraction=float(fraction),
        reasons=tuple(reasons),
    )
