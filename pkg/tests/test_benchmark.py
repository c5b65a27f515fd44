from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from treeloop.benchmark import init_benchmark, is_successful_label, run_benchmark
from treeloop.filters import scaled_config
from treeloop.mask import empty_mask, load_mask
from treeloop.synthetic import generate_ground_truth

H = W = 96
CFG = scaled_config(H, W)


class TestIsSuccessfulLabel:
    def test_truth_is_successful(self):
        mask = generate_ground_truth(1, seed=1, size=(H, W))[0][0]
        assert is_successful_label(mask, CFG)

    def test_empty_is_not(self):
        assert not is_successful_label(empty_mask(H, W), CFG)

    def test_two_blobs_are_not(self):
        mask = generate_ground_truth(1, seed=1, size=(H, W))[0][0].copy()
        mask[0:3, 0:3] = True  # disjoint speck
        assert not is_successful_label(mask, CFG)


class TestInit:
    def test_artifacts_and_determinism(self, tmp_path):
        meta1 = init_benchmark(
            tmp_path / "a", pool_size=6, seed_count=2, val_count=2,
            size=(H, W), master_seed=9,
        )
        init_benchmark(
            tmp_path / "b", pool_size=6, seed_count=2, val_count=2,
            size=(H, W), master_seed=9,
        )
        for sub in ("truth", "images", "val_images", "seed_labels"):
            names_a = sorted(p.name for p in (tmp_path / "a" / sub).glob("*.png"))
            names_b = sorted(p.name for p in (tmp_path / "b" / sub).glob("*.png"))
            assert names_a == names_b
            for name in names_a:
                assert (tmp_path / "a" / sub / name).read_bytes() == (
                    tmp_path / "b" / sub / name
                ).read_bytes()
        assert len(meta1["pool_ids"]) == 6
        assert len(meta1["seed_ids"]) == 2
        assert (tmp_path / "a" / "pipeline.json").is_file()
        assert (tmp_path / "a" / "mock_predictor.json").is_file()

    def test_seed_count_validated(self, tmp_path):
        with pytest.raises(ValueError):
            init_benchmark(tmp_path / "x", pool_size=5, seed_count=5)


@pytest.fixture(scope="module")
def results(tmp_path_factory):
    root = tmp_path_factory.mktemp("micro_bench")
    init_benchmark(
        root, pool_size=9, seed_count=3, val_count=2,
        size=(H, W), batch_size=3, max_iterations=4, master_seed=11,
    )
    # lighten the GA for this micro run
    cfg = json.loads((root / "pipeline.json").read_text())
    cfg["ga"] = {"population_size": 100, "generations": 30}
    (root / "pipeline.json").write_text(json.dumps(cfg))
    result = run_benchmark(root, modes=("cst", "fbst"), rng_seeds=(1,), jobs=1)
    return root, result


class TestRunBenchmark:
    def test_summary_rows(self, results):
        root, result = results
        modes = [row["mode"] for row in result["summary"]]
        assert modes == ["cst", "cst_filtered", "fbst"]
        for row in result["summary"]:
            assert 0.0 <= row["successful_fraction"] <= 1.0
            assert row["initial_unlabeled"] == 6

    def test_cst_labels_everything(self, results):
        root, result = results
        cst = result["summary"][0]
        assert cst["labeled"] == 6

    def test_reports_written(self, results):
        root, result = results
        assert (root / "reports" / "summary.json").is_file()
        with (root / "reports" / "iterations.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert rows
        assert {r["mode"] for r in rows} == {"cst", "fbst"}
        assert all(r["val_CGS"] for r in rows)

    def test_labels_exist_for_accepted(self, results):
        root, result = results
        labels = sorted((root / "runs" / "cst_s1" / "labels").glob("*.png"))
        assert len(labels) == 6
        for p in labels:
            load_mask(p)
