"""Cluster-level OoD decision: low-confidence ratios, mask, and score map.

A cluster whose fraction of uncertain pixels exceeds the ratio threshold
(strictly) is declared OoD; every pixel of such a cluster is masked. The
continuous score is the cluster ratio broadcast per pixel, optionally
refined within each cluster by the confidence deficit so PR curves get
finer resolution without ever reordering pixels across clusters with
different ratios.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .confidence import ConfidenceMap, Tau
from .errors import DimensionMismatch
from .upsample import UpsampledAssignment

SCORE_MODES = ("ratio", "ratio-logit-blend")


@dataclass
class RatioThreshold:
    """Fraction of uncertain pixels above which a whole cluster is OoD."""

    value: float

    def __post_init__(self):
        self.value = float(self.value)
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"ratio threshold must be in [0, 1], got {self.value}")


@dataclass
class ClusterStats:
    cluster: int
    pixel_count: int
    below_count: int
    ratio: float
    is_ood: bool


@dataclass
class OodResult:
    score_map: np.ndarray  # float32 [H, W], higher = more anomalous
    mask: np.ndarray  # uint8 [H, W]
    stats: list
    config_echo: dict = field(default_factory=dict)


def cluster_stats(
    upsampled: UpsampledAssignment,
    uncertain: np.ndarray,
    k: int,
    ratio_threshold: RatioThreshold,
) -> list:
    """Exact integer counts of uncertain pixels per cluster.

    Clusters absent from the map get pixel_count 0, ratio 0, is_ood False.
    """
    labels = upsampled.labels
    uncertain = np.asarray(uncertain)
    if labels.shape != uncertain.shape:
        raise DimensionMismatch(
            f"labels {labels.shape} vs uncertain map {uncertain.shape}"
        )
    flat = labels.ravel()
    if flat.max() >= k:
        raise ValueError(f"label {int(flat.max())} out of range for k={k}")
    threshold = (
        ratio_threshold.value
        if isinstance(ratio_threshold, RatioThreshold)
        else RatioThreshold(ratio_threshold).value
    )
    counts = np.bincount(flat, minlength=k)
    below = np.bincount(flat[uncertain.ravel() != 0], minlength=k)
    stats = []
    for j in range(k):
        pixel_count = int(counts[j])
        below_count = int(below[j])
        ratio = below_count / pixel_count if pixel_count else 0.0
        stats.append(
            ClusterStats(
                cluster=j,
                pixel_count=pixel_count,
                below_count=below_count,
                ratio=ratio,
                is_ood=bool(pixel_count and ratio > threshold),
            )
        )
    return stats


def apply_ratio_threshold(stats: list, ratio_threshold: RatioThreshold) -> list:
    """Re-derive is_ood flags for a different T; counts and ratios are untouched."""
    threshold = (
        ratio_threshold.value
        if isinstance(ratio_threshold, RatioThreshold)
        else RatioThreshold(ratio_threshold).value
    )
    return [
        replace(s, is_ood=bool(s.pixel_count and s.ratio > threshold)) for s in stats
    ]


def score_and_mask(
    upsampled: UpsampledAssignment,
    stats: list,
    mode: str = "ratio",
    conf: ConfidenceMap | None = None,
    tau: Tau | None = None,
    blend_lambda: float = 1.0,
    config_echo: dict | None = None,
) -> OodResult:
    """Build the per-pixel score map and binary mask from cluster stats."""
    labels = upsampled.labels
    ratios = np.array([s.ratio for s in stats], dtype=np.float64)
    flags = np.array([s.is_ood for s in stats], dtype=bool)
    mask = flags[labels].astype(np.uint8)

    if mode == "ratio":
        score = ratios[labels].astype(np.float32)
    elif mode == "ratio-logit-blend":
        if conf is None or tau is None:
            raise ValueError("ratio-logit-blend needs the confidence map and tau")
        if conf.values.shape != labels.shape:
            raise DimensionMismatch(
                f"confidence {conf.values.shape} vs labels {labels.shape}"
            )
        k = len(stats)
        band = 1.0 / (10.0 * k)
        # Shrink the within-cluster band below the smallest gap between
        # distinct ratios so cross-cluster score ordering is never inverted.
        present = np.unique(ratios[[s.cluster for s in stats if s.pixel_count]])
        if present.size > 1:
            band = min(band, float(np.diff(present).min()))
        deficit = np.maximum(0.0, tau.value - conf.values.astype(np.float64))
        blend = (blend_lambda * deficit) / (1.0 + blend_lambda * deficit)  # in [0, 1)
        score = (ratios[labels] + band * blend).astype(np.float32)
    else:
        raise ValueError(f"unknown score mode {mode!r}; choose from {SCORE_MODES}")

    return OodResult(
        score_map=score, mask=mask, stats=list(stats), config_echo=dict(config_echo or {})
    )
