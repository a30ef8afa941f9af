"""Pixel-level evaluation: Average Precision and FPR at 95% TPR.

Positives are OoD pixels (label 1); ignore pixels (label 255) are dropped
before anything is counted. AP is the step-wise area under the
precision-recall curve: distinct descending score thresholds, rectangular
(right-continuous) precision, tied scores collapsed into one threshold.
Pixels pool across the whole dataset rather than averaging per image.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyDataset, NoNegatives, NoPositives
from .tensor_io import IGNORE_LABEL, GroundTruthMask


@dataclass
class EvalReport:
    ap: float
    fpr_at_95_tpr: float
    n_pos: int
    n_neg: int


class EvalAccumulator:
    """Pools (score, label) pixels across images; merge order is immaterial
    because tied scores collapse into a single threshold."""

    def __init__(self):
        self._scores = []
        self._labels = []

    def add(self, scores: np.ndarray, labels: np.ndarray) -> None:
        scores = np.asarray(scores, dtype=np.float64).ravel()
        labels = np.asarray(labels).ravel()
        if scores.shape != labels.shape:
            raise DimensionMismatch(f"{scores.shape} scores vs {labels.shape} labels")
        self._scores.append(scores)
        self._labels.append(labels.astype(np.int64))

    def merge(self, other: "EvalAccumulator") -> None:
        self._scores.extend(other._scores)
        self._labels.extend(other._labels)

    @property
    def n_pos(self) -> int:
        return int(sum(int(l.sum()) for l in self._labels))

    @property
    def n_neg(self) -> int:
        return int(sum(l.size - int(l.sum()) for l in self._labels))

    def pooled(self):
        if not self._scores:
            raise EmptyDataset("no pixels accumulated")
        return np.concatenate(self._scores), np.concatenate(self._labels)

    def report(self) -> EvalReport:
        scores, labels = self.pooled()
        return EvalReport(
            ap=average_precision(scores, labels),
            fpr_at_95_tpr=fpr_at_tpr(scores, labels),
            n_pos=int(labels.sum()),
            n_neg=int(labels.size - labels.sum()),
        )


def _sorted_counts(scores, labels):
    """Descending-score cumulative TP/FP at the end of each tied block."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise DimensionMismatch(f"{scores.shape} scores vs {labels.shape} labels")
    y = labels.astype(np.int64)
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be binary 0/1")
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0:
        raise NoPositives("no positive (OoD) pixels")
    if n_neg == 0:
        raise NoNegatives("no negative (ID) pixels")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = y[order]
    tp = np.cumsum(y)
    fp = np.cumsum(1 - y)
    # Last position of each distinct-score block: thresholds collapse ties.
    block_end = np.append(np.flatnonzero(np.diff(s) != 0.0), s.size - 1)
    return tp[block_end], fp[block_end], n_pos, n_neg


def average_precision(scores, labels) -> float:
    """Step-wise AP: sum over thresholds of (R_n - R_{n-1}) * P_n."""
    tp, fp, n_pos, _ = _sorted_counts(scores, labels)
    precision = tp / (tp + fp)
    recall = tp / n_pos
    return float(np.sum(np.diff(np.concatenate(([0.0], recall))) * precision))


def fpr_at_tpr(scores, labels, tpr_target: float = 0.95) -> float:
    """FPR at the largest threshold whose TPR reaches the target.

    The last block always has TPR 1, so a qualifying threshold exists.
    """
    tp, fp, n_pos, n_neg = _sorted_counts(scores, labels)
    tpr = tp / n_pos
    first = int(np.flatnonzero(tpr >= tpr_target)[0])
    return float(fp[first] / n_neg)


def evaluate_dataset(pairs) -> EvalReport:
    """Pool every non-ignored pixel of (score_map, GroundTruthMask) pairs."""
    pairs = list(pairs)
    if not pairs:
        raise EmptyDataset("no (score, mask) pairs")
    acc = EvalAccumulator()
    for score_map, gt in pairs:
        score_map = np.asarray(score_map)
        if score_map.ndim == 3 and score_map.shape[2] == 1:
            score_map = score_map[:, :, 0]
        gt_labels = gt.labels if isinstance(gt, GroundTruthMask) else np.asarray(gt)
        if score_map.shape != gt_labels.shape:
            raise DimensionMismatch(
                f"score {score_map.shape} vs ground truth {gt_labels.shape}"
            )
        keep = gt_labels != IGNORE_LABEL
        acc.add(score_map[keep], (gt_labels[keep] == 1).astype(np.int64))
    return acc.report()


METRICS_COLUMNS = ("dataset", "n_images", "n_pos", "n_neg", "ap", "fpr95")


def write_metrics_csv(path, dataset: str, n_images: int, report: EvalReport, config_echo: dict) -> None:
    """One-row metrics.csv: the report plus the full config echo."""
    echo_keys = list(config_echo)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(METRICS_COLUMNS) + echo_keys)
        writer.writerow(
            [dataset, n_images, report.n_pos, report.n_neg, repr(report.ap), repr(report.fpr_at_95_tpr)]
            + [config_echo[k] for k in echo_keys]
        )
