"""Command-line front end: every pipeline stage, batch-friendly.

Every subcommand is a thin shell over the library; with the same inputs and
seeds the CLI and direct library calls produce byte-identical outputs.

Exit codes: 0 success, 2 configuration error, 3 predictor protocol failure,
4 I/O error (including partial batch failures, which are also listed in the
emitted report).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import benchmark as bench
from .config import ConfigError, PipelineConfig, load_pipeline_config
from .filters import atl_pre_filter, y_shaped_tree_filter
from .gafit import FitResult, fit_tree
from .loop import ATL, LoopError, LoopRunner, custom_process
from .manifest import DatasetManifest, dump_json
from .mask import load_mask, save_mask, to_partial_skeleton
from .metrics import aggregate_reports, score_pair
from .predictor import PredictorError

log = logging.getLogger("treeloop")


def _load_config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        return load_pipeline_config(args.config)
    return PipelineConfig()


def _pngs(directory: str | Path) -> list[Path]:
    files = sorted(Path(directory).glob("*.png"))
    if not files:
        raise FileNotFoundError(f"no PNG masks in {directory}")
    return files


# --- filter -----------------------------------------------------------------

def cmd_filter(args) -> int:
    cfg = _load_config(args)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = {"mode": args.mode, "images": {}, "failures": {}}
    for path in _pngs(args.input_dir):
        try:
            mask = load_mask(path)
            if args.mode == "atl":
                res = atl_pre_filter(mask, cfg.filter)
                save_mask(out_dir / path.name, res.mask)
                report["images"][path.stem] = {"warnings": list(res.warnings)}
            else:
                res = y_shaped_tree_filter(mask, cfg.filter)
                save_mask(out_dir / path.name, res.mask)
                report["images"][path.stem] = {"passes": res.passes}
        except Exception as exc:
            report["failures"][path.stem] = str(exc)
    dump_json(report, out_dir / "filter_report.json")
    if report["failures"]:
        log.error("%d image(s) failed; see filter_report.json", len(report["failures"]))
        return 4
    return 0


# --- fit ----------------------------------------------------------------------

def cmd_fit(args) -> int:
    cfg = _load_config(args)
    ga = cfg.ga
    if args.generations:
        ga = dataclasses.replace(ga, generations=args.generations)
    if args.population:
        ga = dataclasses.replace(ga, population_size=args.population)
    if args.seed is not None:
        ga = dataclasses.replace(ga, rng_seed=args.seed)
    mask = load_mask(args.mask)
    skeleton = to_partial_skeleton(mask)
    result = fit_tree(skeleton, ga, mask.shape)
    result.save(args.out)
    log.info("fit %s: MAE %.3f px", args.mask, result.fitness)
    return 0


# --- repair -------------------------------------------------------------------

def cmd_repair(args) -> int:
    from .repair import repair as repair_op

    cfg = _load_config(args)
    filtered = load_mask(args.filtered)
    fit = FitResult.load(args.fit)
    out = repair_op(filtered, fit, cfg.filter, cfg.repair)
    if out.accepted:
        save_mask(args.out_mask, out.mask)
    dump_json(
        {
            "accepted": out.accepted,
            "reconstructed_fraction": out.reconstructed_fraction,
            "fitness": fit.fitness,
            "reasons": list(out.reasons),
        },
        args.out_report,
    )
    return 0


# --- atl-process ----------------------------------------------------------------

def _atl_one(payload):
    name, path_str, filter_cfg, ga_cfg, repair_cfg, seed = payload
    mask = load_mask(path_str)
    res = custom_process(
        ATL, mask, filter_cfg, ga_cfg, repair_cfg, image_key=name, iteration=0, rng_seed=seed
    )
    return name, res


def cmd_atl_process(args) -> int:
    cfg = _load_config(args)
    ga = cfg.ga
    if args.generations:
        ga = dataclasses.replace(ga, generations=args.generations)
    seed = args.seed if args.seed is not None else ga.rng_seed
    accepted_dir = Path(args.accepted_dir)
    rejected_dir = Path(args.rejected_dir)
    accepted_dir.mkdir(parents=True, exist_ok=True)
    rejected_dir.mkdir(parents=True, exist_ok=True)

    files = _pngs(args.input_dir)
    payloads = [(p.stem, str(p), cfg.filter, ga, cfg.repair, seed) for p in files]
    report = {"accepted": [], "rejected": {}, "failures": {}}
    jobs = args.jobs or os.cpu_count() or 1
    try:
        if jobs > 1 and len(payloads) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_atl_one, payloads, chunksize=1))
        else:
            results = [_atl_one(p) for p in payloads]
    except Exception as exc:
        log.error("batch processing failed: %s", exc)
        return 4
    for (name, res), path in zip(results, files):
        if res.accepted:
            save_mask(accepted_dir / path.name, res.mask)
            if res.fit is not None:
                res.fit.save(accepted_dir / f"{name}.fit.json")
            report["accepted"].append(name)
        else:
            save_mask(rejected_dir / path.name, load_mask(path))
            report["rejected"][name] = list(res.reasons)
    report["accepted_fraction"] = len(report["accepted"]) / len(files)
    dump_json(report, Path(args.accepted_dir) / "process_report.json")
    return 0


# --- score ----------------------------------------------------------------------

def cmd_score(args) -> int:
    cfg = _load_config(args)
    tol = args.bf1_tol if args.bf1_tol is not None else cfg.metrics.bf1_tolerance
    truth_files = _pngs(args.truth_dir)
    rows = []
    reports = []
    missing = []
    for tf in truth_files:
        pf = Path(args.pred_dir) / tf.name
        if not pf.is_file():
            missing.append(tf.name)
            continue
        rep = score_pair(load_mask(pf), load_mask(tf), bf1_tol=tol)
        reports.append(rep)
        rows.append({"image": tf.stem, **rep.to_json_dict()})

    out_csv = Path(args.out_csv)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    fieldnames = ["image", "mIOU", "BF1", "CGS", "CGS_h", "CGS_v", "alpha_h", "alpha_v", "ne_h", "ne_v"]
    with out_csv.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    aggregate = aggregate_reports(reports)
    dump_json({"aggregate": aggregate, "missing_predictions": missing}, args.out_json)
    if missing:
        log.error("%d truth image(s) had no prediction", len(missing))
        return 4
    return 0


# --- loop ------------------------------------------------------------------------

def _runner_from_config(cfg: PipelineConfig, args) -> LoopRunner:
    if cfg.loop is None:
        raise ConfigError("this command needs a 'loop' section in the config")
    loop_cfg = cfg.loop
    if args.max_iterations:
        loop_cfg = dataclasses.replace(loop_cfg, max_iterations=args.max_iterations)
    if args.jobs:
        loop_cfg = dataclasses.replace(loop_cfg, jobs=args.jobs)
    if args.seed is not None:
        loop_cfg = dataclasses.replace(loop_cfg, rng_seed=args.seed)
    return LoopRunner(
        Path(cfg.root),
        loop_cfg,
        cfg.filter,
        cfg.ga,
        cfg.repair,
        bf1_tol=cfg.metrics.bf1_tolerance,
    )


def cmd_loop_run(args) -> int:
    cfg = load_pipeline_config(args.config)
    runner = _runner_from_config(cfg, args)
    manifest, reports = runner.run_loop()
    counts = manifest.counts()
    log.info(
        "loop finished after iteration %d: %d pseudo-labeled, %d still unlabeled",
        manifest.iteration,
        counts["pseudo_labeled"],
        manifest.unlabeled_pool_size(),
    )
    return 0


def cmd_loop_status(args) -> int:
    cfg = load_pipeline_config(args.config)
    if cfg.loop is None:
        raise ConfigError("this command needs a 'loop' section in the config")
    manifest_path = Path(cfg.root) / cfg.loop.workspace_dir / "manifest.json"
    if not manifest_path.is_file():
        print("no manifest yet: the loop has not been initialized")
        return 0
    manifest = DatasetManifest.load(manifest_path)
    counts = manifest.counts()
    print(f"mode: {manifest.mode}")
    print(f"iteration: {manifest.iteration}")
    for status, count in counts.items():
        print(f"  {status}: {count}")
    print(f"unlabeled pool: {manifest.unlabeled_pool_size()}")
    report_path = (
        Path(cfg.root)
        / cfg.loop.workspace_dir
        / "iterations"
        / f"iter_{manifest.iteration:03d}"
        / "report.json"
    )
    if report_path.is_file():
        rep = json.loads(report_path.read_text())
        val = rep.get("validation")
        if val:
            print(f"last validation: mIOU {val['mIOU']:.4f}  BF1 {val['BF1']:.4f}  CGS {val['CGS']:.4f}")
    return 0


# --- benchmark ---------------------------------------------------------------------

def cmd_benchmark_init(args) -> int:
    meta = bench.init_benchmark(
        args.root,
        pool_size=args.pool,
        seed_count=args.seed_size,
        val_count=args.val,
        size=(args.image_size, args.image_size),
        batch_size=args.batch,
        max_iterations=args.max_iterations,
        master_seed=args.master_seed,
    )
    log.info(
        "benchmark initialized at %s: pool %d, seeds %d, val %d",
        args.root,
        meta["pool_size"],
        meta["seed_count"],
        meta["val_count"],
    )
    return 0


def cmd_benchmark_compare(args) -> int:
    result = bench.run_benchmark(
        args.root,
        modes=tuple(args.modes.split(",")),
        rng_seeds=tuple(int(s) for s in args.seeds.split(",")),
        jobs=args.jobs or 1,
        max_iterations=args.max_iterations,
    )
    for row in result["summary"]:
        metrics = row["metrics"]
        cgs = f"{metrics['CGS']:.4f}" if metrics["CGS"] is not None else "-"
        print(
            f"{row['mode']:>12} seed {row['rng_seed']}: "
            f"successful {row['successful']:>3}/{row['initial_unlabeled']} "
            f"({row['successful_fraction']:.1%})  CGS {cgs}"
        )
    return 0


# --- parser --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treeloop",
        description="Y-tree mask pipeline: filters, template fitting, repair, metrics, loop",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", help="batch-filter masks (ATL pre-filter or Y filter)")
    p.add_argument("--input-dir", required=True)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--mode", choices=("atl", "y"), default="atl")
    p.add_argument("--config")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("fit", help="fit the Y template to one mask")
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--generations", type=int, help="cap the GA generations (smoke runs)")
    p.add_argument("--population", type=int)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("repair", help="repair a filtered mask along a fitted template")
    p.add_argument("--filtered", required=True)
    p.add_argument("--fit", required=True)
    p.add_argument("--out-mask", required=True)
    p.add_argument("--out-report", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("atl-process", help="full filter-fit-repair chain over a mask dir")
    p.add_argument("--input-dir", required=True)
    p.add_argument("--accepted-dir", required=True)
    p.add_argument("--rejected-dir", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--generations", type=int)
    p.add_argument("--jobs", type=int, default=0, help="parallel workers (default: cores)")
    p.set_defaults(func=cmd_atl_process)

    p = sub.add_parser("score", help="score predictions against ground truth")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--truth-dir", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-json", required=True)
    p.add_argument("--bf1-tol", type=float)
    p.add_argument("--config")
    p.set_defaults(func=cmd_score)

    loop = sub.add_parser("loop", help="the iterative training loop")
    loop_sub = loop.add_subparsers(dest="loop_command", required=True)
    p = loop_sub.add_parser("run")
    p.add_argument("--config", required=True)
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_loop_run)
    p = loop_sub.add_parser("status")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_loop_status)

    b = sub.add_parser("benchmark", help="the synthetic benchmark")
    b_sub = b.add_subparsers(dest="benchmark_command", required=True)
    p = b_sub.add_parser("init")
    p.add_argument("--root", required=True)
    p.add_argument("--pool", type=int, default=120)
    p.add_argument("--seed-size", type=int, default=12)
    p.add_argument("--val", type=int, default=24)
    p.add_argument("--image-size", type=int, default=96)
    p.add_argument("--batch", type=int, default=12)
    p.add_argument("--max-iterations", type=int, default=15)
    p.add_argument("--master-seed", type=int, default=7)
    p.set_defaults(func=cmd_benchmark_init)
    p = b_sub.add_parser("compare")
    p.add_argument("--root", required=True)
    p.add_argument("--modes", default="cst,fbst,atl")
    p.add_argument("--seeds", default="1,2,3,4,5")
    p.add_argument("--jobs", type=int, default=0)
    p.add_argument("--max-iterations", type=int)
    p.set_defaults(func=cmd_benchmark_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return 2
    except PredictorError as exc:
        log.error("%s", exc)
        return 3
    except LoopError as exc:
        log.error("%s", exc)
        return 4
    except (OSError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return 4


if __name__ == "__main__":
    sys.exit(main())
