from __future__ import annotations

import csv
import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from treeloop.cli import main
from treeloop.filters import scaled_config, y_shaped_tree_filter
from treeloop.gafit import FitResult, GaConfig, fit_tree
from treeloop.loop import ATL, custom_process
from treeloop.mask import load_mask, save_mask, to_partial_skeleton
from treeloop.repair import RepairConfig
from treeloop.synthetic import DegradationConfig, degrade, generate_ground_truth

H = W = 96


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    """A few truth masks and degraded predictions plus a 96-scale config."""
    root = tmp_path_factory.mktemp("cli_corpus")
    truth_dir = root / "truth"
    pred_dir = root / "pred"
    truth_dir.mkdir()
    pred_dir.mkdir()
    pairs = generate_ground_truth(3, seed=21, size=(H, W))
    for k, (mask, _) in enumerate(pairs):
        save_mask(truth_dir / f"img_{k:03d}.png", mask)
        broken = degrade(mask, DegradationConfig(gap_count=1.5, gap_length=(3, 6), rng_seed=k))
        save_mask(pred_dir / f"img_{k:03d}.png", broken)
    config = {
        "filter": {
            "min_blob_area": 7,
            "trunk_scan_rows": 15,
            "other_tree_tol": 38,
            "false_branch_y_min": 90,
            "false_branch_min_height": 2,
            "false_trunk_x_tol": 11,
            "false_trunk_min_height": 30,
            "false_trunk_max_width": 6,
            "y_filter_top_rows": 8,
            "y_filter_bottom_rows": 15,
        },
        "ga": {"population_size": 150, "generations": 60, "rng_seed": 0},
    }
    cfg_path = root / "config.json"
    cfg_path.write_text(json.dumps(config))
    return root, truth_dir, pred_dir, cfg_path


class TestScore:
    def test_identical_dirs_all_ones(self, corpus, tmp_path):
        root, truth_dir, _, _ = corpus
        rc = main(
            [
                "score",
                "--pred-dir", str(truth_dir),
                "--truth-dir", str(truth_dir),
                "--out-csv", str(tmp_path / "scores.csv"),
                "--out-json", str(tmp_path / "agg.json"),
            ]
        )
        assert rc == 0
        agg = json.loads((tmp_path / "agg.json").read_text())["aggregate"]
        assert agg["mIOU"] == 1.0 and agg["BF1"] == 1.0 and agg["CGS"] == 1.0
        with (tmp_path / "scores.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 3
        assert all(float(r["CGS"]) == 1.0 for r in rows)

    def test_missing_prediction_exits_4(self, corpus, tmp_path):
        root, truth_dir, pred_dir, _ = corpus
        partial = tmp_path / "partial"
        partial.mkdir()
        name = sorted(truth_dir.glob("*.png"))[0].name
        save_mask(partial / name, load_mask(pred_dir / name))
        rc = main(
            [
                "score",
                "--pred-dir", str(partial),
                "--truth-dir", str(truth_dir),
                "--out-csv", str(tmp_path / "s.csv"),
                "--out-json", str(tmp_path / "a.json"),
            ]
        )
        assert rc == 4
        missing = json.loads((tmp_path / "a.json").read_text())["missing_predictions"]
        assert len(missing) == 2


class TestFilterCommand:
    def test_y_filter_mode(self, corpus, tmp_path):
        root, truth_dir, pred_dir, cfg = corpus
        out = tmp_path / "filtered"
        rc = main(
            [
                "filter",
                "--input-dir", str(truth_dir),
                "--output-dir", str(out),
                "--mode", "y",
                "--config", str(cfg),
            ]
        )
        assert rc == 0
        report = json.loads((out / "filter_report.json").read_text())
        assert all(v["passes"] for v in report["images"].values())

    def test_atl_mode_matches_library(self, corpus, tmp_path):
        from treeloop.filters import atl_pre_filter

        root, truth_dir, pred_dir, cfg = corpus
        out = tmp_path / "pre"
        rc = main(
            [
                "filter",
                "--input-dir", str(pred_dir),
                "--output-dir", str(out),
                "--mode", "atl",
                "--config", str(cfg),
            ]
        )
        assert rc == 0
        fcfg = scaled_config(H, W)
        for path in pred_dir.glob("*.png"):
            lib = atl_pre_filter(load_mask(path), fcfg).mask
            assert np.array_equal(load_mask(out / path.name), lib)


class TestFitRepairCommands:
    def test_fit_then_repair(self, corpus, tmp_path):
        root, truth_dir, pred_dir, cfg = corpus
        mask_path = sorted(truth_dir.glob("*.png"))[0]
        fit_path = tmp_path / "fit.json"
        rc = main(
            [
                "fit",
                "--mask", str(mask_path),
                "--out", str(fit_path),
                "--config", str(cfg),
                "--seed", "5",
            ]
        )
        assert rc == 0
        lib = fit_tree(
            to_partial_skeleton(load_mask(mask_path)),
            GaConfig(population_size=150, generations=60, rng_seed=5),
            (H, W),
        )
        assert FitResult.load(fit_path) == replace(lib, best_history=None)

        out_mask = tmp_path / "repaired.png"
        out_report = tmp_path / "repair.json"
        rc = main(
            [
                "repair",
                "--filtered", str(mask_path),
                "--fit", str(fit_path),
                "--out-mask", str(out_mask),
                "--out-report", str(out_report),
                "--config", str(cfg),
            ]
        )
        assert rc == 0
        report = json.loads(out_report.read_text())
        assert report["accepted"] is True
        assert out_mask.is_file()


class TestAtlProcessCommand:
    def test_matches_library_chain(self, corpus, tmp_path):
        root, truth_dir, pred_dir, cfg = corpus
        acc = tmp_path / "accepted"
        rej = tmp_path / "rejected"
        rc = main(
            [
                "atl-process",
                "--input-dir", str(pred_dir),
                "--accepted-dir", str(acc),
                "--rejected-dir", str(rej),
                "--config", str(cfg),
                "--seed", "9",
                "--jobs", "1",
            ]
        )
        assert rc == 0
        report = json.loads((acc / "process_report.json").read_text())
        fcfg = scaled_config(H, W)
        ga = GaConfig(population_size=150, generations=60, rng_seed=0)
        for path in sorted(pred_dir.glob("*.png")):
            res = custom_process(
                ATL, load_mask(path), fcfg, ga, RepairConfig(),
                image_key=path.stem, iteration=0, rng_seed=9,
            )
            if res.accepted:
                assert path.stem in report["accepted"]
                assert np.array_equal(load_mask(acc / path.name), res.mask)
            else:
                assert path.stem in report["rejected"]


class TestExitCodes:
    def test_config_error_is_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"unknown_section": {}}')
        rc = main(
            [
                "filter",
                "--input-dir", str(tmp_path),
                "--output-dir", str(tmp_path / "out"),
                "--config", str(bad),
            ]
        )
        assert rc == 2

    def test_missing_dir_is_4(self, tmp_path):
        rc = main(
            [
                "score",
                "--pred-dir", str(tmp_path / "nope"),
                "--truth-dir", str(tmp_path / "nope"),
                "--out-csv", str(tmp_path / "s.csv"),
                "--out-json", str(tmp_path / "a.json"),
            ]
        )
        assert rc == 4


class TestBenchmarkAndLoopCommands:
    def test_init_loop_run_and_status(self, tmp_path, capsys):
        root = tmp_path / "bench"
        rc = main(
            [
                "benchmark", "init",
                "--root", str(root),
                "--pool", "8",
                "--seed-size", "3",
                "--val", "2",
                "--batch", "3",
                "--max-iterations", "3",
                "--master-seed", "4",
            ]
        )
        assert rc == 0
        assert (root / "benchmark.json").is_file()
        # point the pipeline config at this root and run a short CST loop
        cfg = json.loads((root / "pipeline.json").read_text())
        cfg["root"] = str(root)
        cfg["loop"]["mode"] = "cst"
        cfg["ga"] = {"population_size": 100, "generations": 30}
        cfg_path = root / "cst.json"
        cfg_path.write_text(json.dumps(cfg))
        rc = main(["loop", "run", "--config", str(cfg_path), "--max-iterations", "2"])
        assert rc == 0
        rc = main(["loop", "status", "--config", str(cfg_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "mode: cst" in out
        assert "iteration: 2" in out
