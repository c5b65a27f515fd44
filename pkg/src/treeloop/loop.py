"""The iterative self-training orchestrator.

Drives the loop: train the predictor on the seed labels, then per iteration
draw a batch of unlabeled images, predict them together with the previous
iteration's acceptances, run the mode's custom process (identity for CST,
the Y filter for FBST, filter+fit+repair for ATL, or an external-labels
lookup standing in for a human annotator), fold the acceptances into the
training set, and retrain.  Rejected images return to the unlabeled pool
for later chances.  The loop stops when the pool empties, an iteration
accepts nothing (optional), or the iteration cap is reached.

Everything on disk lives under a declared root: the manifest (atomic
writes), per-iteration train manifests, input lists, predictions, reports,
and the accepted pseudo-labels.  A lock file keeps a workspace single-owner.
If an iteration aborts (predictor failure), the manifest on disk is
untouched; freshly written label files may remain but are unreferenced.
"""

from __future__ import annotations

import copy
import hashlib
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .filters import FilterConfig, atl_pre_filter, y_shaped_tree_filter
from .gafit import FitResult, GaConfig, fit_tree
from .manifest import (
    PENDING,
    PSEUDO_LABELED,
    REJECTED,
    SEED,
    UNLABELED,
    DatasetManifest,
    ManifestEntry,
    dump_json,
)
from .mask import as_mask, load_mask, save_mask, to_partial_skeleton
from .metrics import aggregate_reports, score_pair
from .predictor import run_predict, run_train, write_input_list, write_train_manifest
from .repair import RepairConfig, repair

__all__ = [
    "CST",
    "FBST",
    "ATL",
    "EXTERNAL",
    "MODES",
    "LoopConfig",
    "LoopError",
    "WorkspaceLockedError",
    "ProcessResult",
    "custom_process",
    "LoopRunner",
    "workspace_lock",
]

log = logging.getLogger(__name__)

CST = "cst"
FBST = "fbst"
ATL = "atl"
EXTERNAL = "external"
MODES = (CST, FBST, ATL, EXTERNAL)


class LoopError(RuntimeError):
    pass


class WorkspaceLockedError(LoopError):
    pass


@dataclass(frozen=True)
class LoopConfig:
    """Loop behavior and dataset locations (paths relative to the root)."""

    mode: str
    images_dir: str
    seed_labels_dir: str
    workspace_dir: str
    predictor_command: tuple[str, ...]
    seed_size: int | None = None  # verified against the seed labels found
    batch_size: int = 12
    max_iterations: int = 20
    stop_when_no_progress: bool = True
    repredict_all_accepted: bool = False
    rng_seed: int = 0
    external_labels_dir: str | None = None
    val_images_dir: str | None = None
    truth_dir: str | None = None
    jobs: int = 1

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        if not self.predictor_command:
            raise ValueError("predictor_command must not be empty")
        if self.mode == EXTERNAL and not self.external_labels_dir:
            raise ValueError("external mode needs external_labels_dir")


@dataclass(frozen=True)
class ProcessResult:
    accepted: bool
    mask: np.ndarray | None
    reasons: tuple[str, ...] = ()
    fit: FitResult | None = None
    reconstructed_fraction: float | None = None


def _stable_seed(base: int, image_key: str, iteration: int) -> int:
    digest = hashlib.sha256(f"{base}:{image_key}:{iteration}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def custom_process(
    mode: str,
    prediction: np.ndarray,
    filter_cfg: FilterConfig,
    ga_cfg: GaConfig,
    repair_cfg: RepairConfig,
    *,
    image_key: str = "",
    iteration: int = 0,
    rng_seed: int = 0,
    external_labels_dir: str | Path | None = None,
) -> ProcessResult:
    """Apply one mode's accept/adjust/reject step to a single prediction."""
    m = as_mask(prediction)
    if mode == CST:
        return ProcessResult(accepted=True, mask=m.copy())
    if mode == FBST:
        res = y_shaped_tree_filter(m, filter_cfg)
        if res.passes:
            return ProcessResult(accepted=True, mask=res.mask)
        return ProcessResult(accepted=False, mask=None, reasons=("y-filter",))
    if mode == ATL:
        pre = atl_pre_filter(m, filter_cfg)
        skeleton = to_partial_skeleton(pre.mask)
        if skeleton.is_empty:
            return ProcessResult(
                accepted=False, mask=None, reasons=("empty-after-filter",) + pre.warnings
            )
        seeded = replace(ga_cfg, rng_seed=_stable_seed(rng_seed, image_key, iteration))
        fit = fit_tree(skeleton, seeded, pre.mask.shape)
        out = repair(pre.mask, fit, filter_cfg, repair_cfg)
        return ProcessResult(
            accepted=out.accepted,
            mask=out.mask if out.accepted else None,
            reasons=out.reasons,
            fit=fit,
            reconstructed_fraction=out.reconstructed_fraction,
        )
    if mode == EXTERNAL:
        if external_labels_dir is None:
            return ProcessResult(accepted=False, mask=None, reasons=("no-external-label",))
        path = Path(external_labels_dir) / f"{image_key}.png"
        if not path.is_file():
            return ProcessResult(accepted=False, mask=None, reasons=("no-external-label",))
        return ProcessResult(accepted=True, mask=load_mask(path))
    raise ValueError(f"unknown mode {mode!r}")


def _process_payload(args) -> ProcessResult:
    (mode, prediction, filter_cfg, ga_cfg, repair_cfg, image_key, iteration, rng_seed, ext) = args
    return custom_process(
        mode,
        prediction,
        filter_cfg,
        ga_cfg,
        repair_cfg,
        image_key=image_key,
        iteration=iteration,
        rng_seed=rng_seed,
        external_labels_dir=ext,
    )


@contextmanager
def workspace_lock(workspace: Path):
    """Exclusive ownership of a loop workspace via a lock file."""
    workspace.mkdir(parents=True, exist_ok=True)
    lock = workspace / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise WorkspaceLockedError(
            f"workspace {workspace} is owned by another loop (remove {lock} if stale)"
        ) from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


class LoopRunner:
    """Runs the iterative loop inside a declared root directory."""

    def __init__(
        self,
        root: str | Path,
        cfg: LoopConfig,
        filter_cfg: FilterConfig,
        ga_cfg: GaConfig,
        repair_cfg: RepairConfig | None = None,
        bf1_tol: float = 2.0,
    ):
        cfg.validate()
        self.root = Path(root).resolve()
        self.cfg = cfg
        self.filter_cfg = filter_cfg
        self.ga_cfg = ga_cfg
        self.repair_cfg = repair_cfg or RepairConfig()
        self.bf1_tol = bf1_tol
        self.workspace = self.root / cfg.workspace_dir

    # --- path helpers -----------------------------------------------------
    def _rel(self, path: Path) -> str:
        return path.relative_to(self.root).as_posix()

    def manifest_path(self) -> Path:
        return self.workspace / "manifest.json"

    def labels_dir(self) -> Path:
        return self.workspace / "labels"

    def iter_dir(self, i: int) -> Path:
        return self.workspace / "iterations" / f"iter_{i:03d}"

    def model_dir(self, i: int) -> Path:
        return self.workspace / "models" / f"iter_{i:03d}"

    # --- manifest ---------------------------------------------------------
    def init_manifest(self) -> DatasetManifest:
        """Fresh manifest: seeds are the images that have a seed label."""
        images = sorted((self.root / self.cfg.images_dir).glob("*.png"))
        if not images:
            raise LoopError(f"no PNG images in {self.root / self.cfg.images_dir}")
        entries = []
        for img in images:
            image_id = img.stem
            seed_label = self.root / self.cfg.seed_labels_dir / img.name
            if seed_label.is_file():
                entries.append(
                    ManifestEntry(
                        image_id=image_id,
                        image_path=self._rel(img),
                        label_path=self._rel(seed_label),
                        status=SEED,
                    )
                )
            else:
                entries.append(
                    ManifestEntry(image_id=image_id, image_path=self._rel(img))
                )
        seeds = [e for e in entries if e.status == SEED]
        if not seeds:
            raise LoopError("no seed labels found: the loop needs an initial training set")
        if self.cfg.seed_size is not None and len(seeds) != self.cfg.seed_size:
            raise LoopError(
                f"expected {self.cfg.seed_size} seed labels, found {len(seeds)}"
            )
        unlabeled_ids = [e.image_id for e in entries if e.status == UNLABELED]
        order = np.random.default_rng(self.cfg.rng_seed).permutation(len(unlabeled_ids))
        manifest = DatasetManifest(
            mode=self.cfg.mode,
            entries=entries,
            iteration=0,
            draw_order=[unlabeled_ids[int(k)] for k in order],
        )
        manifest.validate()
        return manifest

    # --- predictor interaction --------------------------------------------
    def _train(self, i: int, manifest: DatasetManifest) -> int:
        pairs = [
            (e.image_path, e.label_path)
            for e in manifest.entries
            if e.status in (SEED, PSEUDO_LABELED)
        ]
        it_dir = self.iter_dir(i)
        it_dir.mkdir(parents=True, exist_ok=True)
        train_manifest = it_dir / "train_manifest.json"
        write_train_manifest(train_manifest, pairs)
        run_train(
            list(self.cfg.predictor_command),
            self._rel(train_manifest),
            self._rel(self.model_dir(i)),
            self.root,
        )
        return len(pairs)

    def _predict(self, model_iteration: int, image_paths: list[str], out_dir: Path) -> None:
        list_path = out_dir.parent / f"{out_dir.name}_input_list.txt"
        write_input_list(list_path, image_paths)
        run_predict(
            list(self.cfg.predictor_command),
            self._rel(self.model_dir(model_iteration)),
            self._rel(list_path),
            self._rel(out_dir),
            self.root,
            expected=[Path(p).name for p in image_paths],
        )

    def _score_validation(self, i: int) -> dict | None:
        if not self.cfg.val_images_dir or not self.cfg.truth_dir:
            return None
        val_images = sorted((self.root / self.cfg.val_images_dir).glob("*.png"))
        if not val_images:
            return None
        out_dir = self.iter_dir(i) / "val_predictions"
        self._predict(i, [self._rel(p) for p in val_images], out_dir)
        reports = []
        for img in val_images:
            pred = load_mask(out_dir / img.name)
            truth = load_mask(self.root / self.cfg.truth_dir / img.name)
            reports.append(score_pair(pred, truth, bf1_tol=self.bf1_tol))
        return aggregate_reports(reports)

    # --- the iteration ----------------------------------------------------
    def _process_batch(self, payloads: list) -> list[ProcessResult]:
        if self.cfg.jobs > 1 and len(payloads) > 1:
            with ProcessPoolExecutor(max_workers=self.cfg.jobs) as pool:
                return list(pool.map(_process_payload, payloads, chunksize=1))
        return [_process_payload(p) for p in payloads]

    def run_iteration(self, manifest: DatasetManifest) -> tuple[DatasetManifest, dict]:
        """One Algorithm-1 iteration; returns the updated manifest and report.

        The input manifest is not mutated; nothing is persisted until the
        predictor has trained successfully.
        """
        m = copy.deepcopy(manifest)
        i = m.iteration + 1
        by_id = {e.image_id: e for e in m.entries}
        it_dir = self.iter_dir(i)
        it_dir.mkdir(parents=True, exist_ok=True)

        unlabeled_in_order = [
            iid for iid in m.draw_order if by_id[iid].status == UNLABELED
        ]
        if self.cfg.mode == FBST:
            drawn = unlabeled_in_order  # the whole remaining pool, every time
        else:
            drawn = unlabeled_in_order[: self.cfg.batch_size]
        for iid in drawn:
            by_id[iid].status = PENDING

        repredicted = [
            e.image_id
            for e in m.entries
            if e.status == PSEUDO_LABELED
            and (self.cfg.repredict_all_accepted or e.accepted_at_iteration == i - 1)
        ]
        predict_ids = drawn + repredicted

        accepted_new: list[str] = []
        reaccepted: list[str] = []
        rejected: dict[str, list[str]] = {}
        refresh_rejected: dict[str, list[str]] = {}

        if predict_ids:
            pred_dir = it_dir / "predictions"
            self._predict(i - 1, [by_id[iid].image_path for iid in predict_ids], pred_dir)

            ext_dir = (
                self.root / self.cfg.external_labels_dir
                if self.cfg.external_labels_dir
                else None
            )
            payloads = [
                (
                    self.cfg.mode,
                    load_mask(pred_dir / Path(by_id[iid].image_path).name),
                    self.filter_cfg,
                    self.ga_cfg,
                    self.repair_cfg,
                    iid,
                    i,
                    self.cfg.rng_seed,
                    ext_dir,
                )
                for iid in predict_ids
            ]
            results = self._process_batch(payloads)

            labels = self.labels_dir()
            labels.mkdir(parents=True, exist_ok=True)
            process_dir = it_dir / "process"
            process_dir.mkdir(exist_ok=True)
            for iid, res in zip(predict_ids, results):
                entry = by_id[iid]
                entry.last_predicted_at_iteration = i
                record = {
                    "image_id": iid,
                    "accepted": res.accepted,
                    "reasons": list(res.reasons),
                    "reconstructed_fraction": res.reconstructed_fraction,
                    "fitness": res.fit.fitness if res.fit else None,
                }
                dump_json(record, process_dir / f"{iid}.json")
                if res.accepted:
                    label_path = labels / f"{iid}.png"
                    save_mask(label_path, res.mask)
                    if res.fit is not None:
                        res.fit.save(labels / f"{iid}.fit.json")
                    was_pseudo = entry.status == PSEUDO_LABELED
                    entry.status = PSEUDO_LABELED
                    entry.label_path = self._rel(label_path)
                    entry.accepted_at_iteration = i
                    (reaccepted if was_pseudo else accepted_new).append(iid)
                else:
                    if entry.status == PENDING:
                        entry.status = REJECTED
                        rejected[iid] = list(res.reasons)
                    else:  # a previously accepted label failed its refresh
                        refresh_rejected[iid] = list(res.reasons)

        train_size = self._train(i, m)

        # rejected images return to the unlabeled pool for future iterations
        for e in m.entries:
            if e.status in (REJECTED, PENDING):
                e.status = UNLABELED
        m.iteration = i

        report = {
            "iteration": i,
            "mode": self.cfg.mode,
            "drawn": drawn,
            "repredicted": repredicted,
            "accepted_new": accepted_new,
            "accepted_new_count": len(accepted_new),
            "reaccepted": reaccepted,
            "rejected": rejected,
            "refresh_rejected": refresh_rejected,
            "train_size": train_size,
            "counts": m.counts(),
            "pool_remaining": m.unlabeled_pool_size(),
            "validation": self._score_validation(i),
        }
        m.save(self.manifest_path())
        dump_json(report, it_dir / "report.json")
        return m, report

    # --- the loop -----------------------------------------------------------
    def run_loop(self) -> tuple[DatasetManifest, list[dict]]:
        """Algorithm-1 end to end, resuming from an existing manifest if present."""
        with workspace_lock(self.workspace):
            if self.manifest_path().is_file():
                manifest = DatasetManifest.load(self.manifest_path())
                if manifest.mode != self.cfg.mode:
                    raise LoopError(
                        f"workspace manifest is mode {manifest.mode!r}, config says {self.cfg.mode!r}"
                    )
            else:
                manifest = self.init_manifest()
                manifest.save(self.manifest_path())

            reports: list[dict] = []
            if manifest.iteration == 0 and not self.model_dir(0).is_dir():
                train_size = self._train(0, manifest)
                baseline = {
                    "iteration": 0,
                    "mode": self.cfg.mode,
                    "train_size": train_size,
                    "counts": manifest.counts(),
                    "pool_remaining": manifest.unlabeled_pool_size(),
                    "validation": self._score_validation(0),
                }
                dump_json(baseline, self.iter_dir(0) / "report.json")
                reports.append(baseline)

            stop_reason = None
            while True:
                if manifest.unlabeled_pool_size() == 0:
                    stop_reason = "pool-exhausted"
                    break
                if manifest.iteration >= self.cfg.max_iterations:
                    stop_reason = "max-iterations"
                    break
                manifest, report = self.run_iteration(manifest)
                reports.append(report)
                log.info(
                    "iteration %d: accepted %d, pool %d",
                    report["iteration"],
                    report["accepted_new_count"],
                    report["pool_remaining"],
                )
                if self.cfg.stop_when_no_progress and report["accepted_new_count"] == 0:
                    stop_reason = "no-progress"
                    break

            summary = {
                "mode": self.cfg.mode,
                "stop_reason": stop_reason,
                "iterations_run": manifest.iteration,
                "counts": manifest.counts(),
                "pool_remaining": manifest.unlabeled_pool_size(),
            }
            dump_json(summary, self.workspace / "loop_report.json")
            return manifest, reports
