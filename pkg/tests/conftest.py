"""Shared fixtures: synthetic two-blob samples and on-disk dataset dirs."""

from __future__ import annotations

import numpy as np
import pytest

from oodseg.tensor_io import (
    FeatureMap,
    GroundTruthMask,
    LogitMap,
    save_mask,
    save_tensor,
)

N_CLASSES = 19


def make_two_blob_sample(
    h_lr: int = 16,
    w_lr: int = 16,
    dim: int = 8,
    scale: int = 4,
    low_conf: float = 0.5,
    high_conf: float = 5.0,
    noise: float = 0.05,
    seed: int = 123,
):
    """Left half: tight feature blob with confident logits. Right half: a
    second far-away blob whose logits all sit below tau. The correct OoD
    region is the right half, exactly, at both resolutions."""
    rng = np.random.default_rng(seed)
    feats = rng.normal(scale=noise, size=(h_lr, w_lr, dim))
    feats[:, w_lr // 2 :, :] += 10.0
    h, w = h_lr * scale, w_lr * scale
    logits = np.full((h, w, N_CLASSES), -1.0, dtype=np.float32)
    logits[:, : w // 2, 0] = high_conf
    logits[:, w // 2 :, 0] = low_conf
    ood_region = np.zeros((h, w), dtype=bool)
    ood_region[:, w // 2 :] = True
    return (
        FeatureMap(feats.astype(np.float32)),
        LogitMap(logits),
        GroundTruthMask(ood_region.astype(np.uint8)),
        ood_region,
    )


@pytest.fixture
def two_blob_sample():
    return make_two_blob_sample()


def write_sample(dataset_dir, name, features, logits, gt=None):
    dataset_dir.mkdir(parents=True, exist_ok=True)
    save_tensor(features, dataset_dir / f"{name}.features.npy")
    save_tensor(logits, dataset_dir / f"{name}.logits.npy")
    if gt is not None:
        save_mask(gt, dataset_dir / f"{name}.gt.pgm")


@pytest.fixture
def blob_dataset(tmp_path):
    """Two-sample dataset directory built from two-blob fixtures."""
    dataset_dir = tmp_path / "dataset"
    for i, name in enumerate(["xa", "xb"]):
        features, logits, gt, _ = make_two_blob_sample(seed=100 + i)
        write_sample(dataset_dir, name, features, logits, gt)
    return dataset_dir
