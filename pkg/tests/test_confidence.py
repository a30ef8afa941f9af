"""Max-logit confidence map and the strict uncertainty indicator."""

import numpy as np
import pytest

from oodseg.confidence import Tau, below_threshold, max_logits
from oodseg.tensor_io import LogitMap


def _lm(pixel_logits):
    return LogitMap(np.asarray(pixel_logits, dtype=np.float32).reshape(1, 1, -1))


def test_simple_max():
    conf = max_logits(_lm([0.2, 1.7, -0.5]))
    assert conf.values[0, 0] == np.float32(1.7)
    assert conf.argmax_class[0, 0] == 1


def test_tie_takes_lowest_class():
    conf = max_logits(_lm([3.0, 3.0]))
    assert conf.values[0, 0] == 3.0
    assert conf.argmax_class[0, 0] == 0


def test_matches_per_pixel_scan():
    rng = np.random.default_rng(17)
    data = rng.normal(size=(4, 4, 19)).astype(np.float32)
    conf = max_logits(LogitMap(data))
    for i in range(4):
        for j in range(4):
            best, best_val = 0, data[i, j, 0]
            for c in range(1, 19):
                if data[i, j, c] > best_val:
                    best, best_val = c, data[i, j, c]
            assert conf.values[i, j] == best_val
            assert conf.argmax_class[i, j] == best


def test_threshold_boundaries():
    tau = Tau(1.5)
    assert below_threshold(max_logits(_lm([1.49, 0.0])), tau)[0, 0] == 1
    assert below_threshold(max_logits(_lm([1.5, 0.0])), tau)[0, 0] == 0
    assert below_threshold(max_logits(_lm([1.7, 0.0])), tau)[0, 0] == 0


def test_class_permutation_leaves_max():
    rng = np.random.default_rng(18)
    data = rng.normal(size=(3, 5, 7)).astype(np.float32)
    perm = rng.permutation(7)
    base = max_logits(LogitMap(data))
    permuted = max_logits(LogitMap(data[:, :, perm]))
    assert np.array_equal(base.values, permuted.values)
    # Argmax relabels through the permutation.
    assert np.array_equal(perm[permuted.argmax_class], base.argmax_class)


def test_constant_shift_moves_max_keeps_argmax():
    rng = np.random.default_rng(19)
    data = rng.normal(size=(2, 3, 5)).astype(np.float32)
    base = max_logits(LogitMap(data))
    shifted = max_logits(LogitMap(data + np.float32(2.0)))
    assert np.array_equal(shifted.argmax_class, base.argmax_class)
    assert np.allclose(shifted.values, base.values + 2.0, atol=1e-6)


def test_tau_must_be_finite():
    with pytest.raises(ValueError):
        Tau(float("nan"))
