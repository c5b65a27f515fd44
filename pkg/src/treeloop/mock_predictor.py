"""Mock predictor speaking the train/predict subprocess protocol.

Stands in for the segmentation network in the synthetic benchmark: ``train``
just records the training-set size; ``predict`` reads the hidden ground
truth and emits a degraded copy whose severity comes from the quality curve
at the recorded size.  Configuration is read from ``mock_predictor.json`` in
the working directory (the declared workspace root), or from the path in
``$TREELOOP_MOCK_CONFIG``.

Config schema::

    {
      "truth_dir": "truth",
      "rng_seed": 8,
      "quality_curve": [[12, 0.9], [120, 0.15]],
      "degradation": { ... DegradationConfig fields ... }   # optional
    }
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields
from pathlib import Path

from .manifest import dump_json
from .mask import load_mask, save_mask
from .synthetic import DEFAULT_DEGRADATION, DegradationConfig, MockPredictorState, mock_predict

CONFIG_ENV = "TREELOOP_MOCK_CONFIG"
CONFIG_NAME = "mock_predictor.json"


def _load_config(cwd: Path) -> tuple[MockPredictorState, Path]:
    path = Path(os.environ.get(CONFIG_ENV, cwd / CONFIG_NAME))
    if not path.is_file():
        raise FileNotFoundError(f"mock predictor config not found at {path}")
    raw = json.loads(path.read_text())
    degradation = DEFAULT_DEGRADATION
    if "degradation" in raw:
        allowed = {f.name for f in fields(DegradationConfig)}
        unknown = set(raw["degradation"]) - allowed
        if unknown:
            raise ValueError(f"unknown degradation keys: {sorted(unknown)}")
        merged = {f.name: getattr(DEFAULT_DEGRADATION, f.name) for f in fields(DegradationConfig)}
        merged.update(raw["degradation"])
        if "gap_length" in merged:
            merged["gap_length"] = tuple(merged["gap_length"])
        if "noise_blob_side" in merged:
            merged["noise_blob_side"] = tuple(merged["noise_blob_side"])
        degradation = DegradationConfig(**merged)
    state = MockPredictorState(
        quality_curve=tuple((float(a), float(b)) for a, b in raw["quality_curve"]),
        rng_seed=int(raw["rng_seed"]),
        degradation=degradation,
    )
    state.validate()
    return state, Path(raw["truth_dir"])


def cmd_train(args: argparse.Namespace) -> int:
    manifest = json.loads(Path(args.train_manifest).read_text())
    if not isinstance(manifest, list):
        raise ValueError("train manifest must be a JSON array")
    for item in manifest:
        if "imagePath" not in item or "labelPath" not in item:
            raise ValueError("train manifest entries need imagePath and labelPath")
    model_dir = Path(args.model_dir)
    model_dir.mkdir(parents=True, exist_ok=True)
    dump_json({"training_set_size": len(manifest)}, model_dir / "state.json")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    cwd = Path.cwd()
    state, truth_dir = _load_config(cwd)
    model_state = json.loads((Path(args.model_dir) / "state.json").read_text())
    training_size = int(model_state["training_set_size"])
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = [line for line in Path(args.input_list).read_text().splitlines() if line.strip()]
    for rel in inputs:
        name = Path(rel).name
        truth_path = truth_dir / name
        if not truth_path.is_file():
            raise FileNotFoundError(f"no ground truth for {rel} at {truth_path}")
        truth = load_mask(truth_path)
        pred = mock_predict(truth, Path(rel).stem, training_size, state)
        save_mask(out_dir / name, pred)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="treeloop-mock-predictor",
        description="mock segmentation model for the synthetic benchmark",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    train = sub.add_parser("train")
    train.add_argument("--train-manifest", required=True)
    train.add_argument("--model-dir", required=True)
    train.set_defaults(func=cmd_train)
    predict = sub.add_parser("predict")
    predict.add_argument("--model-dir", required=True)
    predict.add_argument("--input-list", required=True)
    predict.add_argument("--output-dir", required=True)
    predict.set_defaults(func=cmd_predict)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # protocol: any failure is a nonzero exit
        print(f"mock predictor error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
