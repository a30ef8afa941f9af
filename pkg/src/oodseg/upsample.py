"""Lifts low-resolution cluster labels to logit resolution.

Both modes use the half-pixel-center mapping (no corner alignment): output
pixel i samples source coordinate (i + 0.5) * src / dst - 0.5. ``nearest``
picks the covering source cell, which is floor((i + 0.5) * src / dst);
``onehot-bilinear`` one-hot encodes the labels, bilinearly interpolates each
channel with clamp-to-edge, and takes the per-pixel argmax with lowest-index
tie-break.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadTarget
from .kmeans import ClusterAssignment

MODES = ("nearest", "onehot-bilinear")


@dataclass
class UpsampledAssignment:
    """Cluster ids at logit resolution."""

    labels: np.ndarray  # int32 [H, W]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


def _nearest_index(dst: int, src: int) -> np.ndarray:
    idx = np.floor((np.arange(dst) + 0.5) * src / dst).astype(np.int64)
    return np.clip(idx, 0, src - 1)


def _bilinear_coords(dst: int, src: int):
    coords = (np.arange(dst) + 0.5) * src / dst - 0.5
    coords = np.clip(coords, 0.0, src - 1.0)
    lo = np.floor(coords).astype(np.int64)
    hi = np.minimum(lo + 1, src - 1)
    frac = coords - lo
    return lo, hi, frac


def upsample_labels(
    assignment: ClusterAssignment, target_h: int, target_w: int, mode: str = "nearest"
) -> UpsampledAssignment:
    """Resample the label grid to (target_h, target_w)."""
    src = assignment.labels
    src_h, src_w = src.shape
    if target_h < src_h or target_w < src_w:
        raise BadTarget(
            f"target {target_h}x{target_w} smaller than source {src_h}x{src_w}"
        )
    if mode == "nearest":
        rows = _nearest_index(target_h, src_h)
        cols = _nearest_index(target_w, src_w)
        out = src[rows[:, None], cols[None, :]]
        return UpsampledAssignment(np.ascontiguousarray(out, dtype=np.int32))
    if mode == "onehot-bilinear":
        n_channels = int(src.max()) + 1
        onehot = (src[:, :, None] == np.arange(n_channels)).astype(np.float64)
        r0, r1, fr = _bilinear_coords(target_h, src_h)
        c0, c1, fc = _bilinear_coords(target_w, src_w)
        w00 = ((1.0 - fr)[:, None] * (1.0 - fc)[None, :])[:, :, None]
        w01 = ((1.0 - fr)[:, None] * fc[None, :])[:, :, None]
        w10 = (fr[:, None] * (1.0 - fc)[None, :])[:, :, None]
        w11 = (fr[:, None] * fc[None, :])[:, :, None]
        acc = (
            w00 * onehot[r0[:, None], c0[None, :]]
            + w01 * onehot[r0[:, None], c1[None, :]]
            + w10 * onehot[r1[:, None], c0[None, :]]
            + w11 * onehot[r1[:, None], c1[None, :]]
        )
        out = acc.argmax(axis=2)  # ties break to the lowest cluster id
        return UpsampledAssignment(out.astype(np.int32))
    raise ValueError(f"unknown upsample mode {mode!r}; choose from {MODES}")
