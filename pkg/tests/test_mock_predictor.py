from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from treeloop import mock_predictor
from treeloop.manifest import dump_json
from treeloop.mask import load_mask, save_mask
from treeloop.synthetic import MockPredictorState, generate_ground_truth, mock_predict

H = W = 96


@pytest.fixture
def root(tmp_path, monkeypatch) -> Path:
    (tmp_path / "truth").mkdir()
    pairs = generate_ground_truth(3, seed=2, size=(H, W))
    for k, (mask, _) in enumerate(pairs):
        save_mask(tmp_path / "truth" / f"img_{k:03d}.png", mask)
        (tmp_path / "images").mkdir(exist_ok=True)
        save_mask(tmp_path / "images" / f"img_{k:03d}.png", mask)
    dump_json(
        {
            "truth_dir": "truth",
            "rng_seed": 5,
            "quality_curve": [[3, 0.8], [10, 0.1]],
        },
        tmp_path / "mock_predictor.json",
    )
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_train_records_size(root):
    dump_json(
        [{"imagePath": f"images/img_{k:03d}.png", "labelPath": f"truth/img_{k:03d}.png"} for k in range(3)],
        root / "train.json",
    )
    rc = mock_predictor.main(["train", "--train-manifest", "train.json", "--model-dir", "model"])
    assert rc == 0
    state = json.loads((root / "model" / "state.json").read_text())
    assert state == {"training_set_size": 3}


def test_predict_matches_library(root):
    dump_json([{"imagePath": "x", "labelPath": "y"}] * 5, root / "train.json")
    assert mock_predictor.main(["train", "--train-manifest", "train.json", "--model-dir", "model"]) == 0
    (root / "inputs.txt").write_text("images/img_000.png\nimages/img_002.png\n")
    rc = mock_predictor.main(
        ["predict", "--model-dir", "model", "--input-list", "inputs.txt", "--output-dir", "preds"]
    )
    assert rc == 0
    state = MockPredictorState(quality_curve=((3.0, 0.8), (10.0, 0.1)), rng_seed=5)
    for name in ("img_000", "img_002"):
        truth = load_mask(root / "truth" / f"{name}.png")
        expected = mock_predict(truth, name, 5, state)
        got = load_mask(root / "preds" / f"{name}.png")
        assert np.array_equal(got, expected)


def test_bad_manifest_fails(root):
    (root / "bad.json").write_text("{}")
    assert mock_predictor.main(["train", "--train-manifest", "bad.json", "--model-dir", "m"]) != 0


def test_missing_truth_fails(root):
    dump_json([], root / "train.json")
    mock_predictor.main(["train", "--train-manifest", "train.json", "--model-dir", "model"])
    (root / "inputs.txt").write_text("images/nonexistent.png\n")
    rc = mock_predictor.main(
        ["predict", "--model-dir", "model", "--input-list", "inputs.txt", "--output-dir", "preds"]
    )
    assert rc != 0


def test_missing_config_fails(root, monkeypatch):
    (root / "mock_predictor.json").unlink()
    dump_json([], root / "train.json")
    mock_predictor.main(["train", "--train-manifest", "train.json", "--model-dir", "model"])
    (root / "inputs.txt").write_text("images/img_000.png\n")
    rc = mock_predictor.main(
        ["predict", "--model-dir", "model", "--input-list", "inputs.txt", "--output-dir", "preds"]
    )
    assert rc != 0


def test_config_env_override(root, tmp_path_factory, monkeypatch):
    other = tmp_path_factory.mktemp("cfg")
    (root / "mock_predictor.json").rename(other / "mock.json")
    monkeypatch.setenv(mock_predictor.CONFIG_ENV, str(other / "mock.json"))
    dump_json([], root / "train.json")
    mock_predictor.main(["train", "--train-manifest", "train.json", "--model-dir", "model"])
    (root / "inputs.txt").write_text("images/img_001.png\n")
    rc = mock_predictor.main(
        ["predict", "--model-dir", "model", "--input-list", "inputs.txt", "--output-dir", "preds"]
    )
    assert rc == 0
    assert (root / "preds" / "img_001.png").is_file()
