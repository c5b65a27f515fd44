"""Genetic-algorithm fitting of the Y tree template to a partial skeleton.

Fitness is the mean absolute error between skeleton point centers and the
nearest template curve in each row.  The GA is generational: tournament
selection, single-point crossover, per-individual Gaussian mutation over all
genes, and elitism.  Everything is vectorized over the population, and all
random draws come from one seeded generator in a fixed order, so a given
(skeleton, config) pair always produces the identical result.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .mask import PartialSkeleton
from .template import YTreeParams, branch_coeffs, build_curves, trunk_coeffs

__all__ = [
    "GaConfig",
    "FitResult",
    "default_gene_bounds",
    "repair_genes",
    "fitness_mae",
    "fit_tree",
]

N_GENES = 14
# gene indices (see template.GENE_NAMES)
_IDX_CP0Y = 3
_IDX_B1 = slice(4, 9)
_IDX_B2 = slice(9, 14)
_IDX_B1_P1Y = 6
_IDX_B2_P1Y = 11
_IDX_B1_P2X = 7
_IDX_B2_P2X = 12


@dataclass(frozen=True)
class GaConfig:
    """GA hyperparameters.  Defaults follow the reference setup
    (population 2000, 800 generations, crossover 0.8, mutation 0.5,
    two elites); ``mutation_sigma`` is a fraction of each gene's range.
    ``gene_bounds`` of None means bounds derived from the image size.
    """

    population_size: int = 2000
    generations: int = 800
    crossover_prob: float = 0.8
    mutation_prob: float = 0.5
    elite_count: int = 2
    tournament_size: int = 3
    mutation_sigma: float = 0.05
    rng_seed: int = 0
    gene_bounds: tuple[tuple[float, float], ...] | None = None

    def validate(self) -> None:
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        for name in ("crossover_prob", "mutation_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        # elite_count == population_size is the degenerate no-children GA
        if not 0 <= self.elite_count <= self.population_size:
            raise ValueError("elite_count must be in [0, population_size]")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be >= 1")
        if self.mutation_sigma <= 0:
            raise ValueError("mutation_sigma must be positive")
        if self.gene_bounds is not None and len(self.gene_bounds) != N_GENES:
            raise ValueError(f"gene_bounds must have {N_GENES} entries")


@dataclass(frozen=True)
class FitResult:
    params: YTreeParams
    fitness: float
    generations_run: int
    evaluations: int
    best_history: tuple[float, ...] | None = field(default=None, compare=False)

    def to_json_dict(self) -> dict:
        return {
            "params": self.params.to_json_dict(),
            "fitness": self.fitness,
            "generations_run": self.generations_run,
            "evaluations": self.evaluations,
        }

    @staticmethod
    def from_json_dict(d: Mapping) -> "FitResult":
        return FitResult(
            params=YTreeParams.from_json_dict(d["params"]),
            fitness=float(d["fitness"]),
            generations_run=int(d["generations_run"]),
            evaluations=int(d["evaluations"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2, sort_keys=True))

    @staticmethod
    def load(path: str | Path) -> "FitResult":
        return FitResult.from_json_dict(json.loads(Path(path).read_text()))


def default_gene_bounds(height: int, width: int) -> np.ndarray:
    """Per-gene (lo, hi) search bounds for an image of the given size.

    x genes span the image width, gradients are capped at ±2, the junction
    sits in [0.1h, 0.6h] and via points in [0.3h, 0.95h].  Custom bounds
    must keep the junction at least two rows below the image top so that
    ordering repair can always produce valid geometry.
    """
    x_lo, x_hi = 0.0, float(width - 1)
    grad = (-2.0, 2.0)
    junction = (0.1 * height, 0.6 * height)
    via = (0.3 * height, 0.95 * height)
    branch = [grad, (x_lo, x_hi), via, (x_lo, x_hi), grad]
    bounds = [(x_lo, x_hi), grad, (x_lo, x_hi), junction, *branch, *branch]
    return np.array(bounds, dtype=np.float64)


def repair_genes(genes: np.ndarray, bounds: np.ndarray, height: int) -> np.ndarray:
    """Project gene vectors onto the valid region.

    Clamps to bounds, swaps whole branch gene groups when the endpoints are
    out of canonical order, and pushes via ordinates at least one row above
    the junction (and below the image top).
    """
    g = np.atleast_2d(np.asarray(genes, dtype=np.float64)).copy()
    np.clip(g, bounds[:, 0], bounds[:, 1], out=g)
    swap = g[:, _IDX_B1_P2X] > g[:, _IDX_B2_P2X]
    if swap.any():
        b1 = g[swap, _IDX_B1].copy()
        g[swap, _IDX_B1] = g[swap, _IDX_B2]
        g[swap, _IDX_B2] = b1
    for idx in (_IDX_B1_P1Y, _IDX_B2_P1Y):
        g[:, idx] = np.minimum(
            np.maximum(g[:, idx], g[:, _IDX_CP0Y] + 1.0), float(height - 1)
        )
    return g.reshape(np.shape(genes))


def _population_errors(
    genes: np.ndarray, ys: np.ndarray, centers: np.ndarray, height: int, width: int
) -> np.ndarray:
    """Per-individual MAE against the skeleton, vectorized over (N, 14) genes.

    Curves are evaluated per unique row and gathered back per point; the
    wide broadcasts run in float32 (the Horner forms keep magnitudes at
    image scale, so the precision loss is ~1e-4 px, far below fitness
    resolution) while coefficients and the final mean stay float64.
    """
    g = genes
    h = float(height)
    ys_u, inv = np.unique(ys, return_inverse=True)
    yu = ys_u.astype(np.float32)[None, :]  # (1, n_unique)
    yf = ys.astype(np.float32)[None, :]  # (1, n)
    c = centers.astype(np.float32)[None, :]

    def f32(*arrays):
        return tuple(a.astype(np.float32) for a in arrays)

    t_px, t_pv, c_p0x, c_p0y = (g[:, i : i + 1] for i in range(4))
    ta, tb, tc = f32(*trunk_coeffs(t_px, t_pv, c_p0x, c_p0y))
    trunk_u = (ta * yu + tb) * yu + tc
    err = np.abs(c - trunk_u[:, inv])

    branch_err = None
    for sl in (_IDX_B1, _IDX_B2):
        v0, p1x, p1y, p2x, vf = (
            g[:, i : i + 1] for i in range(sl.start, sl.start + 5)
        )
        a1, b1, c1, d1, a2, b2, c2, d2 = f32(
            *branch_coeffs(c_p0x, v0, p1x, p2x, vf, c_p0y, p1y, h)
        )
        y0, y1 = f32(c_p0y, p1y)
        t = yu - y0
        u = yu - y1
        lower = ((a1 * t + b1) * t + c1) * t + d1
        upper = ((a2 * u + b2) * u + c2) * u + d2
        bx = np.where(yu < y1, lower, upper)
        e = np.abs(c - bx[:, inv])
        branch_err = e if branch_err is None else np.minimum(branch_err, e)

    err = np.where(yf < c_p0y.astype(np.float32), err, branch_err)
    # rows not covered by any curve are maximally penalized
    err = np.where((yf < 0.0) | (yf > np.float32(h)), np.float32(width), err)
    mae = err.mean(axis=1, dtype=np.float64)
    return np.where(np.isfinite(mae), mae, np.inf)


def fitness_mae(
    params: YTreeParams, skeleton: PartialSkeleton, size: tuple[int, int]
) -> float:
    """Mean absolute error of a template against a partial skeleton.

    Each skeleton point contributes its distance to the nearest curve
    available in its row (trunk below the junction, nearer branch above).
    Raises on an empty skeleton; degenerate geometry raises from curve
    construction.
    """
    if skeleton.is_empty:
        raise ValueError("cannot score an empty skeleton: nothing to fit")
    h, w = size
    build_curves(params, h)  # surfaces DegenerateGeometryError
    genes = params.to_genes()[None, :]
    return float(_population_errors(genes, skeleton.ys, skeleton.centers, h, w)[0])


def fit_tree(
    skeleton: PartialSkeleton,
    cfg: GaConfig,
    size: tuple[int, int],
    track_history: bool = False,
) -> FitResult:
    """Run the GA and return the best-ever individual.

    Deterministic for a given (skeleton, cfg): one seeded generator drives
    initialization, selection, crossover, and mutation in a fixed order.
    """
    cfg.validate()
    if skeleton.is_empty:
        raise ValueError("cannot fit an empty skeleton")
    h, w = size
    bounds = (
        np.array(cfg.gene_bounds, dtype=np.float64)
        if cfg.gene_bounds is not None
        else default_gene_bounds(h, w)
    )
    lo, hi = bounds[:, 0], bounds[:, 1]
    n_pop = cfg.population_size
    rng = np.random.default_rng(cfg.rng_seed)

    pop = repair_genes(lo + rng.random((n_pop, N_GENES)) * (hi - lo), bounds, h)
    fit = _population_errors(pop, skeleton.ys, skeleton.centers, h, w)
    evaluations = n_pop

    best_idx = int(np.argmin(fit))
    best_genes = pop[best_idx].copy()
    best_fit = float(fit[best_idx])
    history = [best_fit]

    sigma = cfg.mutation_sigma * (hi - lo)
    n_children = n_pop - cfg.elite_count
    n_pairs = (n_children + 1) // 2

    for _ in range(cfg.generations):
        elite_idx = np.argsort(fit, kind="stable")[: cfg.elite_count]
        elites = pop[elite_idx]

        if n_children > 0:
            entrants = rng.integers(0, n_pop, size=(n_pairs, 2, cfg.tournament_size))
            winners = np.take_along_axis(
                entrants, np.argmin(fit[entrants], axis=2)[..., None], axis=2
            )[..., 0]
            pa = pop[winners[:, 0]]
            pb = pop[winners[:, 1]]
            cross = rng.random(n_pairs) < cfg.crossover_prob
            point = rng.integers(1, N_GENES, size=n_pairs)
            tail = np.arange(N_GENES)[None, :] >= point[:, None]
            mix = cross[:, None] & tail
            ca = np.where(mix, pb, pa)
            cb = np.where(mix, pa, pb)
            children = np.concatenate([ca, cb], axis=0)[:n_children]

            mutate = rng.random(n_children) < cfg.mutation_prob
            noise = rng.normal(size=(n_children, N_GENES)) * sigma
            children = np.where(mutate[:, None], children + noise, children)
            children = repair_genes(children, bounds, h)
            pop = np.concatenate([elites, children], axis=0)
        else:
            pop = elites

        fit = _population_errors(pop, skeleton.ys, skeleton.centers, h, w)
        evaluations += n_pop
        gen_best = int(np.argmin(fit))
        if fit[gen_best] < best_fit:
            best_fit = float(fit[gen_best])
            best_genes = pop[gen_best].copy()
        history.append(best_fit)

    return FitResult(
        params=YTreeParams.from_genes(best_genes),
        fitness=best_fit,
        generations_run=cfg.generations,
        evaluations=evaluations,
        best_history=tuple(history) if track_history else None,
    )
