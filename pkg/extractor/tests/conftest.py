"""Shared extractor test fixtures: tiny checkpoint and synthetic images."""

import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

# The CLI scripts (extract.py, convert_gt.py) live at the project root.
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from oodseg_extractor import make_checkpoint


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "tiny.pt"
    make_checkpoint(path, "tiny", num_classes=19, seed=0)
    return path


def make_image(path, height=70, width=90, seed=0):
    rng = np.random.default_rng(seed)
    pixels = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    # A bright square so the image has structure.
    pixels[10:30, 10:30] = (250, 40, 40)
    Image.fromarray(pixels).save(path)
    return path


@pytest.fixture
def image_dir(tmp_path):
    img_dir = tmp_path / "images"
    img_dir.mkdir()
    for i in range(2):
        make_image(img_dir / f"img{i}.png", seed=i)
    return img_dir
