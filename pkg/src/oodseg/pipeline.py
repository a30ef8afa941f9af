"""End-to-end wiring: tensors in, scores/masks/metrics out.

A fresh clustering runs per image. Dataset runs process samples
independently (optionally in parallel) and pool pixels for one
dataset-level metric computation; outputs are byte-identical however the
samples are scheduled.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import confidence, kmeans, ood_classifier, upsample
from .confidence import Tau
from .errors import EmptyDataset, IncompleteSample, MissingFile, OodsegError
from .metrics import EvalAccumulator, EvalReport, write_metrics_csv
from .ood_classifier import OodResult, RatioThreshold
from .tensor_io import (
    FEATURES_SUFFIX,
    GT_SUFFIX,
    IGNORE_LABEL,
    LOGITS_SUFFIX,
    MASK_SUFFIX,
    SCORE_SUFFIX,
    FeatureMap,
    GroundTruthMask,
    LogitMap,
    load_features,
    load_logits,
    load_mask,
    save_mask,
    save_tensor,
)

logger = logging.getLogger(__name__)

# Benchmark hyperparameter triples (K, tau, T).
PROFILES = {
    "cityscapes": {"k": 5, "tau": 1.5, "ratio_threshold": 0.30},
    "ade-ood": {"k": 6, "tau": 1.1, "ratio_threshold": 0.40},
}


@dataclass
class PipelineConfig:
    """Hyperparameters for one pipeline run; defaults are the Cityscapes profile."""

    k: int = 5
    tau: float = 1.5
    ratio_threshold: float = 0.30
    seed: int = 0
    upsample_mode: str = "nearest"
    score_mode: str = "ratio"
    kmeans_max_iter: int = 100
    kmeans_tol: float = 1e-4

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.ratio_threshold <= 1.0:
            raise ValueError(f"ratio threshold must be in [0, 1], got {self.ratio_threshold}")
        if self.upsample_mode not in upsample.MODES:
            raise ValueError(f"unknown upsample mode {self.upsample_mode!r}")
        if self.score_mode not in ood_classifier.SCORE_MODES:
            raise ValueError(f"unknown score mode {self.score_mode!r}")

    def echo(self) -> dict:
        return {
            "k": self.k,
            "tau": repr(float(self.tau)),
            "ratio_threshold": repr(float(self.ratio_threshold)),
            "seed": self.seed,
            "upsample_mode": self.upsample_mode,
            "score_mode": self.score_mode,
            "kmeans_max_iter": self.kmeans_max_iter,
            "kmeans_tol": repr(float(self.kmeans_tol)),
        }


@dataclass
class SweepGrid:
    """Cartesian product of candidate K, tau, and T values."""

    k_values: list
    tau_values: list
    ratio_values: list

    def __post_init__(self):
        if not (self.k_values and self.tau_values and self.ratio_values):
            raise ValueError("sweep grid lists must be non-empty")


def run_sample(features: FeatureMap, logits: LogitMap, config: PipelineConfig) -> OodResult:
    """Pure single-sample pipeline: cluster, threshold, upsample, classify."""
    _, assignment = kmeans.fit(
        features,
        config.k,
        config.seed,
        max_iter=config.kmeans_max_iter,
        tol=config.kmeans_tol,
    )
    conf = confidence.max_logits(logits)
    up = upsample.upsample_labels(assignment, logits.height, logits.width, config.upsample_mode)
    uncertain = confidence.below_threshold(conf, Tau(config.tau))
    stats = ood_classifier.cluster_stats(
        up, uncertain, config.k, RatioThreshold(config.ratio_threshold)
    )
    return ood_classifier.score_and_mask(
        up,
        stats,
        config.score_mode,
        conf=conf,
        tau=Tau(config.tau),
        config_echo=config.echo(),
    )


@dataclass
class SamplePaths:
    name: str
    features: Path
    logits: Path
    gt: Path | None


def discover_samples(dataset_dir, require_gt: bool = True) -> list:
    """List complete samples by the `<name>.features.npy` convention, sorted."""
    dataset_dir = Path(dataset_dir)
    if not dataset_dir.is_dir():
        raise MissingFile(f"dataset directory {dataset_dir} does not exist")
    names = sorted(
        p.name[: -len(FEATURES_SUFFIX)]
        for p in dataset_dir.iterdir()
        if p.name.endswith(FEATURES_SUFFIX)
    )
    if not names:
        raise EmptyDataset(f"no *{FEATURES_SUFFIX} files in {dataset_dir}")
    samples = []
    for name in names:
        logits_path = dataset_dir / f"{name}{LOGITS_SUFFIX}"
        gt_path = dataset_dir / f"{name}{GT_SUFFIX}"
        if not logits_path.exists():
            raise IncompleteSample(f"{name}: missing {logits_path.name}")
        if require_gt and not gt_path.exists():
            raise IncompleteSample(f"{name}: missing {gt_path.name}")
        samples.append(
            SamplePaths(name, dataset_dir / f"{name}{FEATURES_SUFFIX}", logits_path,
                        gt_path if gt_path.exists() else None)
        )
    return samples


def _load_sample(sample: SamplePaths):
    features = load_features(sample.features)
    logits = load_logits(sample.logits)
    gt = load_mask(sample.gt) if sample.gt is not None else None
    if gt is not None and (gt.height, gt.width) != (logits.height, logits.width):
        raise IncompleteSample(
            f"{sample.name}: ground truth {gt.height}x{gt.width} "
            f"vs logits {logits.height}x{logits.width}"
        )
    return features, logits, gt


def write_outputs(out_dir: Path, name: str, result: OodResult) -> None:
    save_tensor(result.score_map[:, :, None], out_dir / f"{name}{SCORE_SUFFIX}")
    save_mask(result.mask, out_dir / f"{name}{MASK_SUFFIX}")


def _kept_pixels(score_map: np.ndarray, gt: GroundTruthMask):
    keep = gt.labels != IGNORE_LABEL
    return score_map[keep], (gt.labels[keep] == 1).astype(np.int64)


def run_dataset(
    dataset_dir,
    config: PipelineConfig,
    out_dir,
    jobs: int = 1,
    skip_bad: bool = False,
    dataset_name: str | None = None,
) -> EvalReport:
    """Score every sample, write per-sample outputs and metrics.csv."""
    dataset_dir = Path(dataset_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    samples = discover_samples(dataset_dir, require_gt=True)

    def process(sample: SamplePaths):
        try:
            features, logits, gt = _load_sample(sample)
            result = run_sample(features, logits, config)
            write_outputs(out_dir, sample.name, result)
            return sample.name, _kept_pixels(result.score_map, gt)
        except OodsegError as exc:
            if skip_bad:
                logger.warning("skipping %s: %s", sample.name, exc)
                return sample.name, None
            raise type(exc)(f"{sample.name}: {exc}") from exc

    results = _run_jobs(process, samples, jobs)

    acc = EvalAccumulator()
    n_images = 0
    for name in sorted(results):
        if results[name] is None:
            continue
        scores, labels = results[name]
        acc.add(scores, labels)
        n_images += 1
    if n_images == 0:
        raise EmptyDataset(f"no usable samples in {dataset_dir}")
    report = acc.report()
    write_metrics_csv(
        out_dir / "metrics.csv",
        dataset_name or dataset_dir.name,
        n_images,
        report,
        config.echo(),
    )
    return report


def _run_jobs(fn, samples, jobs):
    if jobs <= 1:
        pairs = [fn(s) for s in samples]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            pairs = list(pool.map(fn, samples))
    return dict(pairs)


def sweep(dataset_dir, grid: SweepGrid, base_config: PipelineConfig, out_dir) -> list:
    """Evaluate every (k, tau, T) grid point; one CSV row each, best AP first.

    Tensors are loaded once; clusterings are reused across tau/T points and
    confidence maps across all points.
    """
    dataset_dir = Path(dataset_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    samples = discover_samples(dataset_dir, require_gt=True)
    loaded = []
    for sample in samples:
        try:
            loaded.append((sample.name, *_load_sample(sample)))
        except OodsegError as exc:
            raise type(exc)(f"{sample.name}: {exc}") from exc

    conf_maps = {name: confidence.max_logits(logits) for name, _, logits, _ in loaded}

    rows = []
    for k in grid.k_values:
        upsampled = {}
        for name, features, logits, _ in loaded:
            _, assignment = kmeans.fit(
                features, k, base_config.seed,
                max_iter=base_config.kmeans_max_iter, tol=base_config.kmeans_tol,
            )
            upsampled[name] = upsample.upsample_labels(
                assignment, logits.height, logits.width, base_config.upsample_mode
            )
        for tau in grid.tau_values:
            counted = {
                name: ood_classifier.cluster_stats(
                    upsampled[name],
                    confidence.below_threshold(conf_maps[name], Tau(tau)),
                    k,
                    RatioThreshold(0.0),
                )
                for name, *_ in loaded
            }
            for ratio_threshold in grid.ratio_values:
                config = replace(
                    base_config, k=k, tau=tau, ratio_threshold=ratio_threshold
                )
                acc = EvalAccumulator()
                for name, _, _, gt in loaded:
                    stats = ood_classifier.apply_ratio_threshold(
                        counted[name], RatioThreshold(ratio_threshold)
                    )
                    result = ood_classifier.score_and_mask(
                        upsampled[name],
                        stats,
                        config.score_mode,
                        conf=conf_maps[name],
                        tau=Tau(tau),
                    )
                    acc.add(*_kept_pixels(result.score_map, gt))
                rows.append((config, acc.report()))

    rows.sort(key=lambda row: (-row[1].ap, row[0].k, row[0].tau, row[0].ratio_threshold))
    _write_sweep_csv(out_dir / "sweep.csv", dataset_dir.name, len(loaded), rows)
    return rows


def _write_sweep_csv(path, dataset, n_images, rows):
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["dataset", "n_images", "k", "tau", "ratio_threshold",
             "ap", "fpr95", "n_pos", "n_neg", "seed", "upsample_mode", "score_mode"]
        )
        for config, report in rows:
            writer.writerow(
                [dataset, n_images, config.k, repr(float(config.tau)),
                 repr(float(config.ratio_threshold)), repr(report.ap),
                 repr(report.fpr_at_95_tpr), report.n_pos, report.n_neg,
                 config.seed, config.upsample_mode, config.score_mode]
            )


def run_baseline(dataset_dir, out_dir, jobs: int = 1, dataset_name: str | None = None) -> EvalReport:
    """No-clustering sanity reference: score = -max_logit, tau-independent."""
    dataset_dir = Path(dataset_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    samples = discover_samples(dataset_dir, require_gt=True)

    def process(sample: SamplePaths):
        try:
            _, logits, gt = _load_sample(sample)
            score = -confidence.max_logits(logits).values
            save_tensor(score[:, :, None], out_dir / f"{sample.name}{SCORE_SUFFIX}")
            return sample.name, _kept_pixels(score, gt)
        except OodsegError as exc:
            raise type(exc)(f"{sample.name}: {exc}") from exc

    results = _run_jobs(process, samples, jobs)
    acc = EvalAccumulator()
    for name in sorted(results):
        acc.add(*results[name])
    report = acc.report()
    write_metrics_csv(
        out_dir / "metrics.csv",
        dataset_name or dataset_dir.name,
        len(results),
        report,
        {"score_mode": "neg-max-logit"},
    )
    return report
