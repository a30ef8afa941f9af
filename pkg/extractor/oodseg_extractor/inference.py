"""Checkpoint handling, image preprocessing, and the extraction loop."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image, UnidentifiedImageError

from .model import PAD_MULTIPLE, SegModel, build_model

CHECKPOINT_FORMAT = "oodseg-extractor/v1"

# ImageNet statistics, matching the backbones' pretraining convention.
_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)


class CheckpointLoadError(Exception):
    pass


class UnreadableImage(Exception):
    pass


@dataclass
class ExtractorConfig:
    checkpoint: Path
    variant: str
    images: list = field(default_factory=list)
    out_dir: Path = Path(".")
    device: str = "cpu"


def make_checkpoint(path, variant: str, num_classes: int = 19, seed: int = 0) -> None:
    """Write a freshly initialized checkpoint (integration runs and tests)."""
    torch.manual_seed(seed)
    model = build_model(variant, num_classes)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "variant": variant,
        "num_classes": num_classes,
        "state_dict": model.state_dict(),
    }
    torch.save(payload, path)


def load_model(checkpoint, variant: str, device: str = "cpu") -> SegModel:
    """Build the model and load weights; everything wrong raises CheckpointLoadError."""
    checkpoint = Path(checkpoint)
    if not checkpoint.exists():
        raise CheckpointLoadError(f"checkpoint {checkpoint} does not exist")
    try:
        payload = torch.load(checkpoint, map_location=device, weights_only=True)
    except Exception as exc:
        raise CheckpointLoadError(f"{checkpoint}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointLoadError(f"{checkpoint}: not an extractor checkpoint")
    if payload["variant"] != variant:
        raise CheckpointLoadError(
            f"{checkpoint} holds variant {payload['variant']!r}, requested {variant!r}"
        )
    try:
        model = build_model(variant, int(payload["num_classes"]))
        model.load_state_dict(payload["state_dict"])
    except (ValueError, RuntimeError, KeyError) as exc:
        raise CheckpointLoadError(f"{checkpoint}: {exc}") from exc
    torch.use_deterministic_algorithms(True)
    model.to(device)
    model.eval()
    return model


def _load_image(image_path) -> np.ndarray:
    try:
        with Image.open(image_path) as img:
            rgb = img.convert("RGB")
            return np.asarray(rgb, dtype=np.float32) / 255.0
    except (FileNotFoundError, UnidentifiedImageError, OSError) as exc:
        raise UnreadableImage(f"{image_path}: {exc}") from exc


def _preprocess(image: np.ndarray, device: str) -> torch.Tensor:
    image = (image - _MEAN) / _STD
    tensor = torch.from_numpy(image.transpose(2, 0, 1)).unsqueeze(0).to(device)
    h, w = tensor.shape[-2:]
    pad_h = -h % PAD_MULTIPLE
    pad_w = -w % PAD_MULTIPLE
    if pad_h or pad_w:
        tensor = F.pad(tensor, (0, pad_w, 0, pad_h))
    return tensor


def _to_channel_last_f32(tensor: torch.Tensor) -> np.ndarray:
    # (1, C, H, W) -> contiguous (H, W, C) float32, no matter the source layout.
    array = tensor.squeeze(0).permute(1, 2, 0).contiguous().cpu().numpy()
    return np.ascontiguousarray(array, dtype=np.float32)


def extract(image_path, config: ExtractorConfig, model: SegModel) -> dict:
    """Run one image; write `<name>.features.npy`, `<name>.logits.npy`, and a
    `.meta.json` sidecar documenting the hook point. Returns the metadata."""
    image = _load_image(image_path)
    orig_h, orig_w = image.shape[:2]
    tensor = _preprocess(image, config.device)
    padded_h, padded_w = tensor.shape[-2:]

    captured = {}

    def hook(_module, _inputs, output):
        captured["features"] = output.detach()

    handle = model.feature_stage_module.register_forward_hook(hook)
    try:
        with torch.no_grad():
            logits = model(tensor)
    finally:
        handle.remove()

    features = _to_channel_last_f32(captured["features"])
    stride = model.feature_stride
    expected = (padded_h // stride, padded_w // stride)
    assert features.shape[:2] == expected, (
        f"stage-3 grid {features.shape[:2]} vs input/{stride} = {expected}"
    )
    # Crop the padding back off; the ground truth pairs with the raw image.
    logits_np = _to_channel_last_f32(logits)[:orig_h, :orig_w, :]

    if not np.all(np.isfinite(features)) or not np.all(np.isfinite(logits_np)):
        raise RuntimeError(f"{image_path}: non-finite activations")

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = Path(image_path).stem
    np.save(out_dir / f"{name}.features.npy", features)
    np.save(out_dir / f"{name}.logits.npy", logits_np)

    meta = {
        "image": str(image_path),
        "variant": model.variant,
        "num_classes": model.num_classes,
        "feature_hook": "backbone stage-3 output, after the stage's final norm layer",
        "feature_stride": stride,
        "original_size": [orig_h, orig_w],
        "padded_size": [padded_h, padded_w],
        "feature_shape": list(features.shape),
        "logits_shape": list(logits_np.shape),
    }
    (out_dir / f"{name}.meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return meta
