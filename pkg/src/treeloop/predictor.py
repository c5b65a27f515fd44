"""Subprocess protocol for the segmentation model.

The orchestrator talks to any predictor through two fixed invocations, run
with the declared workspace root as working directory and all paths
relative to it:

    <cmd> train   --train-manifest <path.json> --model-dir <dir>
    <cmd> predict --model-dir <dir> --input-list <path.txt> --output-dir <dir>

The train manifest is a JSON array of {"imagePath", "labelPath"}; the input
list is newline-separated image paths; predictions are one PNG mask per
input with the same basename.  Exit code 0 means success; anything else
(or missing outputs) aborts the iteration.
"""

from __future__ import annotations

import subprocess
from pathlib import Path

from .manifest import dump_json

__all__ = ["PredictorError", "write_train_manifest", "write_input_list", "run_train", "run_predict"]


class PredictorError(RuntimeError):
    """The external predictor violated the protocol (exit code or outputs)."""


def write_train_manifest(path: Path, pairs: list[tuple[str, str]]) -> None:
    dump_json([{"imagePath": img, "labelPath": lab} for img, lab in pairs], path)


def write_input_list(path: Path, image_paths: list[str]) -> None:
    path.write_text("".join(p + "\n" for p in image_paths))


def _run(argv: list[str], cwd: Path) -> None:
    try:
        proc = subprocess.run(argv, cwd=cwd, capture_output=True, text=True)
    except OSError as exc:
        raise PredictorError(f"could not invoke predictor {argv[0]!r}: {exc}") from exc
    if proc.returncode != 0:
        tail = (proc.stderr or proc.stdout or "").strip().splitlines()[-5:]
        raise PredictorError(
            f"predictor exited with {proc.returncode}: {' '.join(argv)}\n" + "\n".join(tail)
        )


def run_train(command: list[str], train_manifest: str, model_dir: str, cwd: Path) -> None:
    (cwd / model_dir).mkdir(parents=True, exist_ok=True)
    _run(
        list(command) + ["train", "--train-manifest", train_manifest, "--model-dir", model_dir],
        cwd,
    )


def run_predict(
    command: list[str],
    model_dir: str,
    input_list: str,
    output_dir: str,
    cwd: Path,
    expected: list[str],
) -> None:
    """Invoke predict and verify one output PNG per expected basename."""
    (cwd / output_dir).mkdir(parents=True, exist_ok=True)
    _run(
        list(command)
        + ["predict", "--model-dir", model_dir, "--input-list", input_list, "--output-dir", output_dir],
        cwd,
    )
    missing = [name for name in expected if not (cwd / output_dir / name).is_file()]
    if missing:
        raise PredictorError(
            f"predictor produced no output for {len(missing)} input(s): {missing[:5]}"
        )
