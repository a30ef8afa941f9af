"""Per-pixel max-logit confidence and the uncertainty indicator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor_io import LogitMap


@dataclass
class ConfidenceMap:
    """Per-pixel maximum logit and the class attaining it."""

    values: np.ndarray  # float32 [H, W]
    argmax_class: np.ndarray  # int32 [H, W]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass
class Tau:
    """Confidence threshold: pixels with max logit strictly below are uncertain."""

    value: float

    def __post_init__(self):
        self.value = float(self.value)
        if not math.isfinite(self.value):
            raise ValueError(f"tau must be finite, got {self.value}")


def max_logits(logits: LogitMap) -> ConfidenceMap:
    """Maximum logit across the class dimension, per pixel.

    The argmax is kept alongside; ties break to the lowest class index.
    """
    values = logits.data.max(axis=2)
    argmax = logits.data.argmax(axis=2).astype(np.int32)
    return ConfidenceMap(values=values, argmax_class=argmax)


def below_threshold(conf: ConfidenceMap, tau: Tau) -> np.ndarray:
    """Binary [H, W] map of uncertain pixels: 1 where max logit < tau.

    The inequality is strict; a pixel exactly at tau is not uncertain.
    """
    t = tau.value if isinstance(tau, Tau) else float(tau)
    return (conf.values < t).astype(np.uint8)
