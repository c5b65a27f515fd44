from __future__ import annotations

import numpy as np
import pytest

from treeloop.gafit import (
    GaConfig,
    FitResult,
    default_gene_bounds,
    fit_tree,
    fitness_mae,
    repair_genes,
)
from treeloop.mask import PartialSkeleton, to_partial_skeleton
from treeloop.synthetic import generate_tree_params
from treeloop.template import YTreeParams

from conftest import curve_mae_between, rasterize_params

H = W = 96

SMOKE = GaConfig(population_size=200, generations=80, rng_seed=1)


def skeleton_of(params: YTreeParams, thickness: int = 1) -> PartialSkeleton:
    return to_partial_skeleton(rasterize_params(params, H, W, thickness=thickness))


class TestFitnessMae:
    def test_self_fit_within_rounding(self):
        rng = np.random.default_rng(0)
        p = generate_tree_params(rng, H, W)
        mae = fitness_mae(p, skeleton_of(p), (H, W))
        assert mae <= 0.5

    def test_single_point_at_base(self):
        rng = np.random.default_rng(1)
        p = generate_tree_params(rng, H, W)
        sk = PartialSkeleton(
            ys=np.array([0]), centers=np.array([p.t_px + 3.0])
        )
        assert fitness_mae(p, sk, (H, W)) == pytest.approx(3.0)

    def test_uniform_shift_oracle(self):
        rng = np.random.default_rng(2)
        p = generate_tree_params(rng, H, W)
        sk = skeleton_of(p)
        genes = p.to_genes()
        for idx in (0, 2, 5, 7, 10, 12):  # every x gene
            genes[idx] += 5.0
        shifted = YTreeParams.from_genes(genes)
        assert fitness_mae(shifted, sk, (H, W)) == pytest.approx(5.0, abs=0.5)

    def test_empty_skeleton_rejected(self):
        rng = np.random.default_rng(3)
        p = generate_tree_params(rng, H, W)
        empty = PartialSkeleton(ys=np.zeros(0, dtype=int), centers=np.zeros(0))
        with pytest.raises(ValueError):
            fitness_mae(p, empty, (H, W))


class TestRepairGenes:
    def test_clamps_to_bounds(self):
        bounds = default_gene_bounds(H, W)
        genes = np.full(14, 1e6)
        out = repair_genes(genes, bounds, H)
        assert (out <= bounds[:, 1]).all()

    def test_swaps_branches_for_canonical_order(self):
        rng = np.random.default_rng(4)
        p = generate_tree_params(rng, H, W)
        genes = p.to_genes()
        swapped = genes.copy()
        swapped[4:9], swapped[9:14] = genes[9:14].copy(), genes[4:9].copy()
        out = repair_genes(swapped, default_gene_bounds(H, W), H)
        assert np.allclose(out, genes)

    def test_via_pushed_above_junction(self):
        bounds = default_gene_bounds(H, W)
        genes = np.array([48, 0, 48, 0.6 * H, 0, 30, 0.3 * H, 20, 0, 0, 60, 0.3 * H, 70, 0], float)
        out = repair_genes(genes, bounds, H)
        assert out[6] >= out[3] + 1.0
        assert out[11] >= out[3] + 1.0
        YTreeParams.from_genes(out).validate(H, W)


class TestFitTree:
    def test_degenerate_ga_returns_best_initial(self):
        rng = np.random.default_rng(5)
        p = generate_tree_params(rng, H, W)
        sk = skeleton_of(p, thickness=3)
        cfg = GaConfig(population_size=2, generations=1, elite_count=2, rng_seed=9)
        res = fit_tree(sk, cfg, (H, W))
        # reproduce the initial population draw by hand
        bounds = default_gene_bounds(H, W)
        rng2 = np.random.default_rng(9)
        pop = repair_genes(
            bounds[:, 0] + rng2.random((2, 14)) * (bounds[:, 1] - bounds[:, 0]), bounds, H
        )
        fits = [fitness_mae(YTreeParams.from_genes(g), sk, (H, W)) for g in pop]
        best = int(np.argmin(fits))
        assert res.params == YTreeParams.from_genes(pop[best])
        assert res.fitness == pytest.approx(min(fits))
        assert res.evaluations == 2 + 2

    def test_determinism_same_seed(self):
        rng = np.random.default_rng(6)
        p = generate_tree_params(rng, H, W)
        sk = skeleton_of(p, thickness=3)
        a = fit_tree(sk, SMOKE, (H, W))
        b = fit_tree(sk, SMOKE, (H, W))
        assert a == b

    def test_best_history_monotone(self):
        rng = np.random.default_rng(7)
        p = generate_tree_params(rng, H, W)
        sk = skeleton_of(p, thickness=3)
        res = fit_tree(sk, SMOKE, (H, W), track_history=True)
        hist = np.array(res.best_history)
        assert (np.diff(hist) <= 0).all()

    def test_result_within_bounds_and_valid(self):
        rng = np.random.default_rng(8)
        p = generate_tree_params(rng, H, W)
        sk = skeleton_of(p, thickness=3)
        res = fit_tree(sk, SMOKE, (H, W))
        bounds = default_gene_bounds(H, W)
        genes = res.params.to_genes()
        assert (genes >= bounds[:, 0]).all() and (genes <= bounds[:, 1]).all()
        res.params.validate(H, W)
        assert res.evaluations == SMOKE.population_size * (SMOKE.generations + 1)

    def test_smoke_recovery(self):
        rng = np.random.default_rng(12)
        p = generate_tree_params(rng, H, W)
        res = fit_tree(skeleton_of(p, thickness=3), SMOKE, (H, W))
        assert curve_mae_between(res.params, p, H) < 2.0

    def test_config_validation(self):
        sk = PartialSkeleton(ys=np.array([0]), centers=np.array([1.0]))
        with pytest.raises(ValueError):
            fit_tree(sk, GaConfig(population_size=1), (H, W))
        with pytest.raises(ValueError):
            fit_tree(sk, GaConfig(elite_count=3, population_size=2), (H, W))
        with pytest.raises(ValueError):
            fit_tree(
                PartialSkeleton(ys=np.zeros(0, dtype=int), centers=np.zeros(0)),
                SMOKE,
                (H, W),
            )


class TestFitResultJson:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(10)
        p = generate_tree_params(rng, H, W)
        res = FitResult(params=p, fitness=1.25, generations_run=80, evaluations=16200)
        path = tmp_path / "fit.json"
        res.save(path)
        assert FitResult.load(path) == res
