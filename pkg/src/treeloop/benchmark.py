"""The desk-scale synthetic benchmark: init a workspace, compare the modes.

``init_benchmark`` generates a pool of ground-truth Y-tree masks (plus a
held-out validation set), seeds the first few as "manual" labels, and
writes the mock predictor and pipeline configs.  ``run_benchmark`` runs the
CST, FBST, and ATL loops over the same pool for each sampling seed and
emits a per-iteration metric table plus a successful-label summary (with a
Y-filtered CST row, since raw CST labels are never gated).
"""

from __future__ import annotations

import csv
import dataclasses
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import PipelineConfig, config_to_json_dict, load_pipeline_config
from .filters import FilterConfig, scaled_config, y_shaped_tree_filter
from .gafit import GaConfig
from .loop import ATL, CST, FBST, LoopConfig, LoopRunner
from .manifest import DatasetManifest, SEED, PSEUDO_LABELED, dump_json
from .mask import connected_components, load_mask, save_mask
from .metrics import aggregate_reports, score_pair
from .repair import RepairConfig
from .synthetic import DEFAULT_DEGRADATION, generate_ground_truth

__all__ = [
    "BENCHMARK_META_NAME",
    "init_benchmark",
    "run_benchmark",
    "is_successful_label",
    "summarize_run",
]

BENCHMARK_META_NAME = "benchmark.json"
PIPELINE_CONFIG_NAME = "pipeline.json"

# Benchmark GA profile: the smoke settings keep a full three-mode,
# five-seed comparison within minutes; fits stay accurate enough for the
# 10-px measurement window used by the repair stage.
BENCHMARK_GA = GaConfig(population_size=200, generations=80)


def default_predictor_command() -> tuple[str, ...]:
    return (sys.executable, "-m", "treeloop.mock_predictor")


def init_benchmark(
    root: str | Path,
    pool_size: int = 120,
    seed_count: int = 12,
    val_count: int = 24,
    size: tuple[int, int] = (96, 96),
    batch_size: int = 12,
    max_iterations: int = 15,
    master_seed: int = 7,
) -> dict:
    """Create the benchmark workspace: truth/, images/, seed_labels/, configs."""
    if seed_count >= pool_size:
        raise ValueError("seed_count must be smaller than pool_size")
    root = Path(root)
    (root / "truth").mkdir(parents=True, exist_ok=True)
    (root / "images").mkdir(exist_ok=True)
    (root / "val_images").mkdir(exist_ok=True)
    (root / "seed_labels").mkdir(exist_ok=True)

    h, w = size
    pairs = generate_ground_truth(pool_size + val_count, seed=master_seed, size=(h, w))
    pool_ids = [f"img_{k:03d}" for k in range(pool_size)]
    val_ids = [f"val_{k:03d}" for k in range(val_count)]
    for iid, (mask, _) in zip(pool_ids, pairs[:pool_size]):
        save_mask(root / "truth" / f"{iid}.png", mask)
        save_mask(root / "images" / f"{iid}.png", mask)
    for iid, (mask, _) in zip(val_ids, pairs[pool_size:]):
        save_mask(root / "truth" / f"{iid}.png", mask)
        save_mask(root / "val_images" / f"{iid}.png", mask)
    seed_ids = pool_ids[:seed_count]
    for iid in seed_ids:
        save_mask(root / "seed_labels" / f"{iid}.png", load_mask(root / "truth" / f"{iid}.png"))

    dump_json(
        {
            "truth_dir": "truth",
            "rng_seed": master_seed + 1,
            "quality_curve": [[seed_count, 0.9], [pool_size, 0.15]],
            "degradation": {
                k: v
                for k, v in dataclasses.asdict(DEFAULT_DEGRADATION).items()
                if k != "rng_seed"
            },
        },
        root / "mock_predictor.json",
    )

    pipeline = PipelineConfig(
        root=".",
        filter=scaled_config(h, w),
        ga=BENCHMARK_GA,
        repair=RepairConfig(),
        loop=LoopConfig(
            mode=ATL,
            images_dir="images",
            seed_labels_dir="seed_labels",
            workspace_dir="runs/manual",
            predictor_command=default_predictor_command(),
            seed_size=seed_count,
            batch_size=batch_size,
            max_iterations=max_iterations,
            val_images_dir="val_images",
            truth_dir="truth",
        ),
    )
    dump_json(config_to_json_dict(pipeline), root / PIPELINE_CONFIG_NAME)

    meta = {
        "size": [h, w],
        "pool_size": pool_size,
        "seed_count": seed_count,
        "val_count": val_count,
        "batch_size": batch_size,
        "max_iterations": max_iterations,
        "master_seed": master_seed,
        "pool_ids": pool_ids,
        "seed_ids": seed_ids,
        "val_ids": val_ids,
    }
    dump_json(meta, root / BENCHMARK_META_NAME)
    return meta


def is_successful_label(mask: np.ndarray, filter_cfg: FilterConfig) -> bool:
    """The usable-label bar: non-empty, one connected blob, Y-filter pass."""
    if not mask.any():
        return False
    if len(connected_components(mask)) != 1:
        return False
    return y_shaped_tree_filter(mask, filter_cfg).passes


def summarize_run(
    root: Path,
    manifest: DatasetManifest,
    filter_cfg: FilterConfig,
    bf1_tol: float,
    truth_dir: str = "truth",
) -> list[dict]:
    """Successful-label accounting for one finished run.

    Returns one row for the mode itself and, for CST, an extra
    "cst_filtered" row where the Y filter is applied to the raw labels.
    """
    initial_unlabeled = [e for e in manifest.entries if e.status != SEED]
    labeled = [e for e in initial_unlabeled if e.status == PSEUDO_LABELED]
    denominator = len(initial_unlabeled)

    rows: list[dict] = []
    reports = []
    successful = 0
    for e in labeled:
        label = load_mask(root / e.label_path)
        truth = load_mask(root / truth_dir / f"{e.image_id}.png")
        if is_successful_label(label, filter_cfg):
            successful += 1
            reports.append(score_pair(label, truth, bf1_tol=bf1_tol))
    rows.append(
        {
            "mode": manifest.mode,
            "initial_unlabeled": denominator,
            "labeled": len(labeled),
            "successful": successful,
            "successful_fraction": successful / denominator if denominator else 0.0,
            "metrics": aggregate_reports(reports),
        }
    )

    if manifest.mode == CST:
        filtered_reports = []
        passing = 0
        for e in labeled:
            label = load_mask(root / e.label_path)
            res = y_shaped_tree_filter(label, filter_cfg)
            if res.passes:
                passing += 1
                truth = load_mask(root / truth_dir / f"{e.image_id}.png")
                filtered_reports.append(score_pair(res.mask, truth, bf1_tol=bf1_tol))
        rows.append(
            {
                "mode": "cst_filtered",
                "initial_unlabeled": denominator,
                "labeled": len(labeled),
                "successful": passing,
                "successful_fraction": passing / denominator if denominator else 0.0,
                "metrics": aggregate_reports(filtered_reports),
            }
        )
    return rows


def run_benchmark(
    root: str | Path,
    modes: tuple[str, ...] = (CST, FBST, ATL),
    rng_seeds: tuple[int, ...] = (1, 2, 3, 4, 5),
    jobs: int = 1,
    max_iterations: int | None = None,
    runs_subdir: str = "runs",
    reports_subdir: str = "reports",
) -> dict:
    """Run every (mode, seed) loop over the shared pool and write reports."""
    root = Path(root)
    pipeline = load_pipeline_config(root / PIPELINE_CONFIG_NAME)
    meta = json.loads((root / BENCHMARK_META_NAME).read_text())
    base_loop = pipeline.loop
    if base_loop is None:
        raise ValueError("benchmark pipeline config lacks a loop section")

    iteration_rows: list[dict] = []
    summary_rows: list[dict] = []
    for mode in modes:
        for seed in rng_seeds:
            loop_cfg = replace(
                base_loop,
                mode=mode,
                workspace_dir=f"{runs_subdir}/{mode}_s{seed}",
                rng_seed=seed,
                jobs=jobs,
                max_iterations=max_iterations or base_loop.max_iterations,
            )
            runner = LoopRunner(
                root,
                loop_cfg,
                pipeline.filter,
                pipeline.ga,
                pipeline.repair,
                bf1_tol=pipeline.metrics.bf1_tolerance,
            )
            manifest, reports = runner.run_loop()
            for rep in reports:
                val = rep.get("validation") or {}
                iteration_rows.append(
                    {
                        "mode": mode,
                        "rng_seed": seed,
                        "iteration": rep["iteration"],
                        "train_size": rep.get("train_size"),
                        "pseudo_labeled_total": rep["counts"][PSEUDO_LABELED],
                        "pool_remaining": rep["pool_remaining"],
                        "accepted_new": rep.get("accepted_new_count", 0),
                        "val_mIOU": val.get("mIOU"),
                        "val_BF1": val.get("BF1"),
                        "val_CGS": val.get("CGS"),
                    }
                )
            for row in summarize_run(
                root, manifest, pipeline.filter, pipeline.metrics.bf1_tolerance
            ):
                summary_rows.append({"rng_seed": seed, **row})

    reports_dir = root / reports_subdir
    reports_dir.mkdir(parents=True, exist_ok=True)
    iter_csv = reports_dir / "iterations.csv"
    with iter_csv.open("w", newline="") as fh:
        writer = csv.DictWriter(
            fh,
            fieldnames=[
                "mode",
                "rng_seed",
                "iteration",
                "train_size",
                "pseudo_labeled_total",
                "pool_remaining",
                "accepted_new",
                "val_mIOU",
                "val_BF1",
                "val_CGS",
            ],
        )
        writer.writeheader()
        writer.writerows(iteration_rows)
    result = {
        "meta": meta,
        "modes": list(modes),
        "rng_seeds": list(rng_seeds),
        "summary": summary_rows,
    }
    dump_json(result, reports_dir / "summary.json")
    return result
