"""End-to-end pipeline: fixtures, dataset runs, sweeps, determinism."""

import numpy as np
import pytest

from conftest import make_two_blob_sample, write_sample
from oodseg.errors import EmptyDataset, IncompleteSample
from oodseg.metrics import evaluate_dataset
from oodseg.pipeline import (
    PROFILES,
    PipelineConfig,
    SweepGrid,
    discover_samples,
    run_baseline,
    run_dataset,
    run_sample,
    sweep,
)
from oodseg.tensor_io import load_mask, load_tensor


def test_profiles_pin_benchmark_triples():
    assert PROFILES["cityscapes"] == {"k": 5, "tau": 1.5, "ratio_threshold": 0.30}
    assert PROFILES["ade-ood"] == {"k": 6, "tau": 1.1, "ratio_threshold": 0.40}


def test_defaults_are_cityscapes():
    config = PipelineConfig()
    assert (config.k, config.tau, config.ratio_threshold) == (5, 1.5, 0.30)
    assert config.upsample_mode == "nearest"
    assert config.score_mode == "ratio"
    assert (config.kmeans_max_iter, config.kmeans_tol) == (100, 1e-4)


def test_two_blob_mask_exact(two_blob_sample):
    features, logits, _, ood_region = two_blob_sample
    config = PipelineConfig(k=2, tau=1.5, ratio_threshold=0.3, seed=7)
    result = run_sample(features, logits, config)
    assert np.array_equal(result.mask.astype(bool), ood_region)
    flagged = [s for s in result.stats if s.is_ood]
    assert len(flagged) == 1
    assert flagged[0].ratio == 1.0


def test_two_blob_bilinear_mode(two_blob_sample):
    features, logits, _, ood_region = two_blob_sample
    config = PipelineConfig(k=2, seed=7, upsample_mode="onehot-bilinear")
    result = run_sample(features, logits, config)
    assert np.array_equal(result.mask.astype(bool), ood_region)


def test_tau_below_all_logits_gives_empty_mask(two_blob_sample):
    features, logits, _, _ = two_blob_sample
    for k in (2, 3, 5):
        config = PipelineConfig(k=k, tau=-100.0, seed=7)
        result = run_sample(features, logits, config)
        assert result.mask.sum() == 0


def test_run_sample_deterministic(two_blob_sample):
    features, logits, _, _ = two_blob_sample
    config = PipelineConfig(k=3, seed=11)
    a = run_sample(features, logits, config)
    b = run_sample(features, logits, config)
    assert a.score_map.tobytes() == b.score_map.tobytes()
    assert a.mask.tobytes() == b.mask.tobytes()


def test_mask_monotone_in_tau_and_t(two_blob_sample):
    features, logits, _, _ = two_blob_sample
    config = PipelineConfig(k=4, seed=7)
    # Rising tau: uncertain set grows, mask can only grow.
    prev = None
    for tau in (-1.0, 0.6, 1.5, 5.5):
        mask = run_sample(features, logits,
                          PipelineConfig(k=4, seed=7, tau=tau)).mask.astype(bool)
        if prev is not None:
            assert np.all(prev <= mask)
        prev = mask
    # Rising T: flagged clusters shrink, mask can only shrink.
    prev = None
    for t in (0.2, 0.3, 0.4, 0.9):
        mask = run_sample(features, logits,
                          PipelineConfig(k=4, seed=7, ratio_threshold=t)).mask.astype(bool)
        if prev is not None:
            assert np.all(mask <= prev)
        prev = mask


def test_run_dataset_writes_outputs_and_pools(blob_dataset, tmp_path):
    out = tmp_path / "out"
    config = PipelineConfig(k=2, seed=7)
    report = run_dataset(blob_dataset, config, out)
    assert (out / "metrics.csv").exists()
    pairs = []
    for name in ("xa", "xb"):
        score = load_tensor(out / f"{name}.score.npy")
        assert score.shape == (64, 64, 1)
        mask = load_mask(out / f"{name}.mask.pgm")
        assert mask.labels.shape == (64, 64)
        gt = load_mask(blob_dataset / f"{name}.gt.pgm")
        pairs.append((score, gt))
    direct = evaluate_dataset(pairs)
    assert report.ap == direct.ap
    assert report.fpr_at_95_tpr == direct.fpr_at_95_tpr
    assert (report.n_pos, report.n_neg) == (direct.n_pos, direct.n_neg)
    # The fixture is perfectly separable.
    assert report.ap == 1.0
    assert report.fpr_at_95_tpr == 0.0


def test_empty_directory(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(EmptyDataset):
        run_dataset(empty, PipelineConfig(), tmp_path / "out")


def test_incomplete_sample_aborts(tmp_path):
    dataset = tmp_path / "dataset"
    features, logits, gt, _ = make_two_blob_sample()
    write_sample(dataset, "ok", features, logits, gt)
    write_sample(dataset, "broken", features, logits, gt=None)
    with pytest.raises(IncompleteSample):
        discover_samples(dataset)


def test_skip_bad_continues(tmp_path, caplog):
    dataset = tmp_path / "dataset"
    features, logits, gt, _ = make_two_blob_sample()
    write_sample(dataset, "ok", features, logits, gt)
    write_sample(dataset, "bad", features, logits, gt)
    # Corrupt one features file after writing.
    (dataset / "bad.features.npy").write_bytes(b"\x93NUMPYgarbage")
    out = tmp_path / "out"
    report = run_dataset(dataset, PipelineConfig(k=2, seed=7), out, skip_bad=True)
    assert report.ap == 1.0
    assert not (out / "bad.score.npy").exists()


def test_error_carries_sample_name(tmp_path):
    dataset = tmp_path / "dataset"
    features, logits, gt, _ = make_two_blob_sample()
    write_sample(dataset, "bad", features, logits, gt)
    (dataset / "bad.features.npy").write_bytes(b"\x93NUMPYgarbage")
    with pytest.raises(Exception, match="bad"):
        run_dataset(dataset, PipelineConfig(k=2, seed=7), tmp_path / "out")


def test_serial_parallel_identical(blob_dataset, tmp_path):
    config = PipelineConfig(k=3, seed=5)
    out1 = tmp_path / "serial"
    out2 = tmp_path / "parallel"
    run_dataset(blob_dataset, config, out1, jobs=1)
    run_dataset(blob_dataset, config, out2, jobs=4)
    files1 = sorted(p.name for p in out1.iterdir())
    files2 = sorted(p.name for p in out2.iterdir())
    assert files1 == files2
    for name in files1:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_sweep_single_point_equals_run_dataset(blob_dataset, tmp_path):
    base = PipelineConfig(seed=7)
    grid = SweepGrid(k_values=[2], tau_values=[1.5], ratio_values=[0.3])
    rows = sweep(blob_dataset, grid, base, tmp_path / "sweep")
    assert len(rows) == 1
    config, report = rows[0]
    assert (config.k, config.tau, config.ratio_threshold) == (2, 1.5, 0.3)
    direct = run_dataset(blob_dataset, PipelineConfig(k=2, tau=1.5, ratio_threshold=0.3, seed=7),
                         tmp_path / "direct")
    assert report.ap == direct.ap
    assert report.fpr_at_95_tpr == direct.fpr_at_95_tpr


def test_sweep_large_blob_stable_across_k(blob_dataset, tmp_path):
    grid = SweepGrid(k_values=[4, 5, 6], tau_values=[1.5], ratio_values=[0.3])
    rows = sweep(blob_dataset, grid, PipelineConfig(seed=7), tmp_path / "sweep")
    assert len(rows) == 3
    for _, report in rows:
        assert report.ap == 1.0  # the big OoD block stays fully detected
    csv_text = (tmp_path / "sweep" / "sweep.csv").read_text().splitlines()
    assert len(csv_text) == 4  # header + 3 rows
    # Sorted by AP descending (all equal here), deterministic tie order by k.
    ks = [line.split(",")[2] for line in csv_text[1:]]
    assert ks == ["4", "5", "6"]


def test_sweep_grid_validation():
    with pytest.raises(ValueError):
        SweepGrid(k_values=[], tau_values=[1.5], ratio_values=[0.3])


def test_baseline(blob_dataset, tmp_path):
    out = tmp_path / "base"
    report = run_baseline(blob_dataset, out)
    # -max_logit separates the fixture perfectly too (0.5 vs 5.0).
    assert report.ap == 1.0
    assert report.fpr_at_95_tpr == 0.0
    score = load_tensor(out / "xa.score.npy")
    assert score.shape == (64, 64, 1)
    assert (out / "metrics.csv").exists()


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(k=0)
    with pytest.raises(ValueError):
        PipelineConfig(ratio_threshold=1.2)
    with pytest.raises(ValueError):
        PipelineConfig(upsample_mode="bicubic")
    with pytest.raises(ValueError):
        PipelineConfig(score_mode="softmax")
