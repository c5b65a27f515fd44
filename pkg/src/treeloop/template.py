"""The 14-parameter Y tree template: a quadratic trunk and two branches.

The template is a function x(y) in tree coordinates.  The trunk is a
quadratic on [0, junction_y]; each branch is a pair of connected cubics on
[junction_y, via_y] and [via_y, height], joined C1/C2 at the via point.  The
paper-style boundary conditions (start/end points, start/end gradients, via
point) give 6 constraints per branch; the C1 and C2 continuity conditions at
the via point close the 8-coefficient system uniquely.

Branch coefficients are computed in closed form (local coordinates per
piece), which is exact, cheap, and vectorizes over whole GA populations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .mask import empty_mask

__all__ = [
    "TRUNK",
    "BRANCH1",
    "BRANCH2",
    "CURVE_IDS",
    "DegenerateGeometryError",
    "YTreeParams",
    "CubicPiece",
    "BranchCurve",
    "TemplateCurves",
    "trunk_coeffs",
    "branch_coeffs",
    "build_curves",
    "evaluate",
    "evaluate_curve",
    "curve_row_domains",
    "rasterize",
]

TRUNK = "trunk"
BRANCH1 = "branch1"
BRANCH2 = "branch2"
CURVE_IDS = (TRUNK, BRANCH1, BRANCH2)

# Canonical gene order used by the GA and by JSON round-trips.
GENE_NAMES = (
    "t_px",
    "t_pv",
    "c_p0x",
    "c_p0y",
    "b1_v",
    "b1_p1x",
    "b1_p1y",
    "b1_p2x",
    "b1_vf",
    "b2_v",
    "b2_p1x",
    "b2_p1y",
    "b2_p2x",
    "b2_vf",
)

# JSON field names follow the template's symbol names.
_JSON_FIELDS = (
    "T_px",
    "T_pv",
    "C_p0x",
    "C_p0y",
    "C_pb1v",
    "b1_p1x",
    "b1_p1y",
    "b1_p2x",
    "b1_vf",
    "C_pb2v",
    "b2_p1x",
    "b2_p1y",
    "b2_p2x",
    "b2_vf",
)


class DegenerateGeometryError(ValueError):
    """Raised when template ordinates coincide and the curve system is singular."""


@dataclass(frozen=True)
class YTreeParams:
    """The 14 scalars defining a Y tree template.

    Trunk: base (t_px, 0), base gradient t_pv (dx/dy), junction (c_p0x,
    c_p0y).  Per branch i: junction gradient bi_v, via point (bi_p1x,
    bi_p1y), endpoint x bi_p2x at y = image height, endpoint gradient bi_vf.
    Branch 1 is the canonical left branch (b1_p2x <= b2_p2x).
    """

    t_px: float
    t_pv: float
    c_p0x: float
    c_p0y: float
    b1_v: float
    b1_p1x: float
    b1_p1y: float
    b1_p2x: float
    b1_vf: float
    b2_v: float
    b2_p1x: float
    b2_p1y: float
    b2_p2x: float
    b2_vf: float

    def to_genes(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in GENE_NAMES], dtype=np.float64)

    @staticmethod
    def from_genes(genes: Iterable[float]) -> "YTreeParams":
        vals = [float(v) for v in genes]
        if len(vals) != 14:
            raise ValueError(f"expected 14 genes, got {len(vals)}")
        return YTreeParams(**dict(zip(GENE_NAMES, vals)))

    def to_json_dict(self) -> dict[str, float]:
        return dict(zip(_JSON_FIELDS, (float(v) for v in self.to_genes())))

    @staticmethod
    def from_json_dict(d: Mapping[str, float]) -> "YTreeParams":
        return YTreeParams.from_genes([d[k] for k in _JSON_FIELDS])

    def validate(self, height: int, width: int) -> None:
        if not 0 < self.c_p0y < height:
            raise ValueError(f"junction y {self.c_p0y} outside (0, {height})")
        for i, (p1y,) in enumerate(((self.b1_p1y,), (self.b2_p1y,)), start=1):
            if not self.c_p0y < p1y < height:
                raise ValueError(f"branch {i} via y {p1y} outside ({self.c_p0y}, {height})")
        for name in ("t_px", "c_p0x", "b1_p1x", "b1_p2x", "b2_p1x", "b2_p2x"):
            v = getattr(self, name)
            if not 0 <= v < width:
                raise ValueError(f"{name}={v} outside [0, {width})")
        if self.b1_p2x > self.b2_p2x:
            raise ValueError("branch endpoints not in canonical order (b1_p2x > b2_p2x)")


@dataclass(frozen=True)
class CubicPiece:
    """x(y) = a*t^3 + b*t^2 + c*t + d with t = y - y_start, on [y_start, y_end]."""

    y_start: float
    y_end: float
    a: float
    b: float
    c: float
    d: float

    def __call__(self, y: float | np.ndarray) -> float | np.ndarray:
        t = np.asarray(y, dtype=np.float64) - self.y_start
        val = ((self.a * t + self.b) * t + self.c) * t + self.d
        return float(val) if np.isscalar(y) else val

    def derivative(self, y: float) -> float:
        t = y - self.y_start
        return (3.0 * self.a * t + 2.0 * self.b) * t + self.c


@dataclass(frozen=True)
class BranchCurve:
    lower: CubicPiece
    upper: CubicPiece

    def __call__(self, y: float | np.ndarray) -> float | np.ndarray:
        y_arr = np.asarray(y, dtype=np.float64)
        val = np.where(y_arr < self.upper.y_start, self.lower(y_arr), self.upper(y_arr))
        return float(val) if np.isscalar(y) else val


@dataclass(frozen=True)
class TemplateCurves:
    """Evaluated form of a Y template for a given image height."""

    height: int
    junction_y: float
    trunk: tuple[float, float, float]  # x(y) = a*y^2 + b*y + c
    branch1: BranchCurve
    branch2: BranchCurve

    def trunk_x(self, y: float | np.ndarray) -> float | np.ndarray:
        a, b, c = self.trunk
        y_arr = np.asarray(y, dtype=np.float64)
        val = (a * y_arr + b) * y_arr + c
        return float(val) if np.isscalar(y) else val

    def branch(self, i: int) -> BranchCurve:
        return self.branch1 if i == 1 else self.branch2


def trunk_coeffs(t_px, t_pv, c_p0x, c_p0y):
    """Quadratic trunk coefficients (a, b, c) from the three base constraints.

    Broadcasts over numpy arrays.
    """
    a = (c_p0x - t_px - t_pv * c_p0y) / (c_p0y * c_p0y)
    return a, t_pv, t_px


def branch_coeffs(p0, v0, p1, p2, v2, y0, y1, y2):
    """Closed-form coefficients of the two connected branch cubics.

    Piece 1 runs on [y0, y1] with local t = y - y0; piece 2 on [y1, y2] with
    local u = y - y1.  Constraints: piece 1 interpolates (y0, p0) with slope
    v0 and (y1, p1); piece 2 interpolates (y1, p1) and (y2, p2) with end
    slope v2; C1 and C2 continuity hold at y1.  Broadcasts over arrays.

    The C2 condition pins the single free quantity, the slope s at the via
    point; each piece is then an ordinary cubic Hermite segment.  This form
    stays well conditioned even when one span is a single row.

    Returns (a1, b1, c1, d1, a2, b2, c2, d2).
    """
    h1 = y1 - y0
    h2 = y2 - y1
    d1h = (p1 - p0) / h1
    d2h = (p2 - p1) / h2
    s = (3.0 * d1h * h2 + 3.0 * d2h * h1 - v0 * h2 - v2 * h1) / (2.0 * (h1 + h2))
    b1 = (3.0 * d1h - 2.0 * v0 - s) / h1
    a1 = (v0 + s - 2.0 * d1h) / (h1 * h1)
    b2 = (3.0 * d2h - 2.0 * s - v2) / h2
    a2 = (s + v2 - 2.0 * d2h) / (h2 * h2)
    return a1, b1, v0 + 0.0 * s, p0 + 0.0 * s, a2, b2, s, p1 + 0.0 * s


def build_curves(params: YTreeParams, height: int) -> TemplateCurves:
    """Solve the trunk quadratic and both branch cubic pairs.

    Raises :class:`DegenerateGeometryError` when a branch's ordinates
    coincide (junction == via, or via == height) or the junction sits at the
    base, which makes the constraint system singular.
    """
    y0 = params.c_p0y
    if y0 <= 0:
        raise DegenerateGeometryError(f"junction y {y0} must be positive")
    ta, tb, tc = trunk_coeffs(params.t_px, params.t_pv, params.c_p0x, y0)
    branches = []
    for i, (v0, p1x, p1y, p2x, vf) in enumerate(
        (
            (params.b1_v, params.b1_p1x, params.b1_p1y, params.b1_p2x, params.b1_vf),
            (params.b2_v, params.b2_p1x, params.b2_p1y, params.b2_p2x, params.b2_vf),
        ),
        start=1,
    ):
        if not y0 < p1y < height:
            raise DegenerateGeometryError(
                f"branch {i}: via y {p1y} must lie strictly between junction {y0} and height {height}"
            )
        a1, b1, c1, d1, a2, b2, c2, d2 = branch_coeffs(
            params.c_p0x, v0, p1x, p2x, vf, y0, p1y, float(height)
        )
        branches.append(
            BranchCurve(
                lower=CubicPiece(y0, p1y, float(a1), float(b1), float(c1), float(d1)),
                upper=CubicPiece(p1y, float(height), float(a2), float(b2), float(c2), float(d2)),
            )
        )
    return TemplateCurves(
        height=height,
        junction_y=y0,
        trunk=(float(ta), float(tb), float(tc)),
        branch1=branches[0],
        branch2=branches[1],
    )


def evaluate(curves: TemplateCurves, y: float) -> list[tuple[str, float]]:
    """Template x-values at a row: trunk below the junction, both branches above."""
    if not 0 <= y <= curves.height:
        raise ValueError(f"y={y} outside [0, {curves.height}]")
    if y < curves.junction_y:
        return [(TRUNK, curves.trunk_x(y))]
    return [(BRANCH1, curves.branch1(y)), (BRANCH2, curves.branch2(y))]


def evaluate_curve(curves: TemplateCurves, curve_id: str, y):
    """x(y) for one named curve, on that curve's own domain."""
    if curve_id == TRUNK:
        return curves.trunk_x(y)
    if curve_id == BRANCH1:
        return curves.branch1(y)
    if curve_id == BRANCH2:
        return curves.branch2(y)
    raise ValueError(f"unknown curve id {curve_id!r}")


def curve_row_domains(curves: TemplateCurves) -> dict[str, np.ndarray]:
    """Integer rows covered by each curve, matching :func:`evaluate` routing.

    Trunk rows satisfy y < junction_y; branch rows run from the junction up
    to the top raster row (height - 1).
    """
    h = curves.height
    junction = curves.junction_y
    trunk_top = min(int(np.ceil(junction)) - 1, h - 1)
    trunk_rows = np.arange(0, trunk_top + 1, dtype=np.int64)
    branch_lo = int(np.ceil(junction))
    branch_rows = np.arange(branch_lo, h, dtype=np.int64)
    return {TRUNK: trunk_rows, BRANCH1: branch_rows, BRANCH2: branch_rows}


def _run_start(center: float, thickness: int) -> int:
    # centered run with left bias on half-pixel centers
    return int(np.floor(center - (thickness - 1) / 2.0))


def rasterize(
    curves: TemplateCurves,
    thickness: Mapping[tuple[str, int], int],
    size: tuple[int, int],
) -> np.ndarray:
    """Paint horizontal runs of the given thicknesses along the curves.

    ``thickness`` maps (curve_id, tree row) to a run width in pixels; rows
    outside the raster are skipped and runs are clamped to the image.
    Overlapping runs union.
    """
    h, w = size
    m = empty_mask(h, w)
    for (curve_id, y), t in thickness.items():
        if t < 1:
            raise ValueError(f"thickness must be >= 1, got {t} at ({curve_id}, {y})")
        if not 0 <= y < h:
            continue
        x = float(evaluate_curve(curves, curve_id, float(y)))
        cx = float(np.floor(x + 0.5))  # round half up
        start = _run_start(cx, int(t))
        lo = max(0, start)
        hi = min(w - 1, start + int(t) - 1)
        if hi < lo:
            continue
        m[(h - 1) - y, lo : hi + 1] = True
    return m
