from __future__ import annotations

import numpy as np
import pytest

from treeloop.filters import FilterConfig, scaled_config
from treeloop.gafit import default_gene_bounds, repair_genes
from treeloop.template import YTreeParams, build_curves, curve_row_domains, rasterize


def draw_y_tree(
    height: int = 256,
    width: int = 256,
    trunk_x: int = 128,
    junction_row_frac: float = 0.38,
    spread_frac: float = 0.38,
    thickness: int = 5,
) -> np.ndarray:
    """Hand-drawn connected Y mask: vertical trunk, two straight diagonal branches.

    Geometry is chosen so the default Y-filter bands see two sections at the
    top and the trunk at the bottom.
    """
    m = np.zeros((height, width), dtype=bool)
    half = thickness // 2
    junction_row = int(height * junction_row_frac)  # storage row of the junction
    m[junction_row:, trunk_x - half : trunk_x + half + 1] = True
    spread = int(width * spread_frac)
    for r in range(junction_row + 1):
        f = (junction_row - r) / junction_row
        for sgn in (-1, 1):
            x = trunk_x + sgn * int(round(f * spread))
            lo = max(0, x - half)
            hi = min(width - 1, x + half)
            m[r, lo : hi + 1] = True
    return m


def sample_valid_params(rng: np.random.Generator, height: int, width: int) -> YTreeParams:
    """Random YTreeParams inside the default gene bounds, repaired to validity."""
    bounds = default_gene_bounds(height, width)
    genes = bounds[:, 0] + rng.random(14) * (bounds[:, 1] - bounds[:, 0])
    genes = repair_genes(genes, bounds, height)
    return YTreeParams.from_genes(genes)


def rasterize_params(
    params: YTreeParams, height: int, width: int, thickness: int = 1
) -> np.ndarray:
    curves = build_curves(params, height)
    domains = curve_row_domains(curves)
    tmap = {
        (cid, int(y)): thickness for cid, rows in domains.items() for y in rows
    }
    return rasterize(curves, tmap, (height, width))


def constraint_residuals(params: YTreeParams, height: int) -> list[float]:
    """Boundary/continuity conditions checked directly on the built curves.

    Derivatives are evaluated analytically per piece; this is the oracle for
    curve construction, independent of the constructor's algebra.
    """
    cv = build_curves(params, height)
    res = []
    a, b, c = cv.trunk
    res.append(abs(c - params.t_px))
    res.append(abs(b - params.t_pv))
    res.append(abs(cv.trunk_x(params.c_p0y) - params.c_p0x))
    for branch, v0, p1x, p1y, p2x, vf in (
        (cv.branch1, params.b1_v, params.b1_p1x, params.b1_p1y, params.b1_p2x, params.b1_vf),
        (cv.branch2, params.b2_v, params.b2_p1x, params.b2_p1y, params.b2_p2x, params.b2_vf),
    ):
        lo, up = branch.lower, branch.upper
        res.append(abs(lo(params.c_p0y) - params.c_p0x))
        res.append(abs(lo.derivative(params.c_p0y) - v0))
        res.append(abs(lo(p1y) - p1x))
        res.append(abs(up(p1y) - p1x))
        res.append(abs(up(float(height)) - p2x))
        res.append(abs(up.derivative(float(height)) - vf))
        res.append(abs(lo.derivative(p1y) - up.derivative(p1y)))  # C1
        t1 = p1y - lo.y_start
        res.append(abs((6 * lo.a * t1 + 2 * lo.b) - 2 * up.b))  # C2
    return res


def curve_mae_between(fit_params: YTreeParams, truth: YTreeParams, height: int) -> float:
    """Mean |truth curve x - nearest fitted curve x| over the truth row domains."""
    from treeloop.template import evaluate_curve

    fit_cv = build_curves(fit_params, height)
    truth_cv = build_curves(truth, height)
    errs = []
    for cid, rows in curve_row_domains(truth_cv).items():
        for y in rows:
            xt = float(evaluate_curve(truth_cv, cid, float(y)))
            if y < fit_cv.junction_y:
                cands = [float(evaluate_curve(fit_cv, "trunk", float(y)))]
            else:
                cands = [
                    float(evaluate_curve(fit_cv, "branch1", float(y))),
                    float(evaluate_curve(fit_cv, "branch2", float(y))),
                ]
            errs.append(min(abs(xt - c) for c in cands))
    return float(np.mean(errs))


@pytest.fixture
def default_cfg() -> FilterConfig:
    return FilterConfig()


@pytest.fixture
def small_cfg() -> FilterConfig:
    return scaled_config(96, 96)
