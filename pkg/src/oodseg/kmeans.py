"""Feature-space K-Means: k-means++ seeding plus Lloyd iterations.

The whole procedure is deterministic for a fixed (features, k, seed,
max_iter, tol). The exact recipe, which an independent step-by-step
re-implementation can reproduce bit-for-bit:

1. RNG: a numpy ``Generator`` over the counter-based ``Philox`` bit
   generator, keyed with the seed masked to 64 bits.
2. Seeding (k-means++): the first centroid is ``points[rng.integers(n)]``.
   For each further centroid, let d2 be every point's squared Euclidean
   distance to its nearest already-chosen centroid; draw
   ``target = rng.random() * d2.sum()`` and take the first index whose
   running cumulative sum of d2 exceeds ``target`` (falling back to the
   last index if rounding leaves none, and to ``rng.integers(n)`` when
   d2 sums to zero).
3. Lloyd step: assign each point to the nearest centroid (squared
   Euclidean, ties to the lowest centroid index). While any cluster is
   empty, move the lowest-indexed empty centroid onto the point farthest
   from its assigned centroid (ties to the lowest point index) and
   recompute the assignment. Then move every centroid to the mean of its
   points.
4. Stop once the Frobenius norm of the centroid shift drops below ``tol``
   or after ``max_iter`` update steps; the returned assignment is always
   recomputed against the final centroids.

Distances and means accumulate in float64 even though inputs are float32.
The per-iteration inertia monotonicity check is unreliable in float32 once
the feature dimension reaches the hundreds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, TooFewPoints
from .tensor_io import FeatureMap

_CHUNK = 8192  # points per distance block; keeps the (chunk, k, d) temp small


@dataclass
class ClusterModel:
    """Fitted centroids plus fit diagnostics."""

    k: int
    dim: int
    centroids: np.ndarray  # float64 [K, D]
    inertia: float
    iterations_run: int
    degenerate: bool = False
    # Inertia after every assignment phase, including the initial one.
    inertia_history: list = field(default_factory=list)


@dataclass
class ClusterAssignment:
    """Per-pixel cluster id on the low-resolution feature grid."""

    labels: np.ndarray  # int32 [H', W']

    @property
    def height_lr(self) -> int:
        return self.labels.shape[0]

    @property
    def width_lr(self) -> int:
        return self.labels.shape[1]


def _pairwise_d2(block: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # Broadcast difference, not the ||x||^2 - 2x.c + ||c||^2 expansion: the
    # latter loses the exact-arithmetic match with a per-pair reference.
    return ((block[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _nearest(points: np.ndarray, centroids: np.ndarray):
    """Nearest centroid per point; ties break to the lowest centroid index."""
    n = points.shape[0]
    labels = np.empty(n, dtype=np.int64)
    d2min = np.empty(n, dtype=np.float64)
    for start in range(0, n, _CHUNK):
        d2 = _pairwise_d2(points[start : start + _CHUNK], centroids)
        lab = d2.argmin(axis=1)
        labels[start : start + _CHUNK] = lab
        d2min[start : start + _CHUNK] = np.take_along_axis(d2, lab[:, None], axis=1)[:, 0]
    return labels, d2min


def _plusplus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    centroids[0] = points[int(rng.integers(n))]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = float(d2.sum())
        if total == 0.0:
            idx = int(rng.integers(n))
        else:
            target = float(rng.random()) * total
            idx = int(np.searchsorted(np.cumsum(d2), target, side="right"))
            idx = min(idx, n - 1)
        centroids[i] = points[idx]
        if i < k - 1:
            d2 = np.minimum(d2, ((points - centroids[i]) ** 2).sum(axis=1))
    return centroids


def _fix_empty(points, centroids, labels, d2min):
    """Relocate empty clusters onto far points. Returns updated labels/d2min
    plus a flag set when duplicate geometry makes separation impossible."""
    k = centroids.shape[0]
    for _ in range(4 * k):
        counts = np.bincount(labels, minlength=k)
        empties = np.flatnonzero(counts == 0)
        if empties.size == 0:
            return labels, d2min, False
        farthest = int(np.argmax(d2min))
        if d2min[farthest] == 0.0:
            # Every point already sits on a centroid; nothing left to split.
            return labels, d2min, True
        centroids[int(empties[0])] = points[farthest]
        labels, d2min = _nearest(points, centroids)
    return labels, d2min, True


def fit(
    features: FeatureMap,
    k: int,
    seed: int,
    max_iter: int = 100,
    tol: float = 1e-4,
    init_centroids: np.ndarray | None = None,
):
    """Cluster the feature map into k groups.

    Returns (ClusterModel, ClusterAssignment). ``init_centroids`` bypasses
    the k-means++ seeding with explicit starting centroids; the Lloyd loop
    is unchanged.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    if tol < 0:
        raise ValueError(f"tol must be >= 0, got {tol}")
    height, width, dim = features.data.shape
    points = features.data.reshape(-1, dim).astype(np.float64)
    n = points.shape[0]
    if k > n:
        raise TooFewPoints(f"k={k} exceeds the {n} available points")

    degenerate = bool(k > 1 and np.all(points == points[0]))
    if init_centroids is not None:
        centroids = np.array(init_centroids, dtype=np.float64)
        if centroids.shape != (k, dim):
            raise DimensionMismatch(
                f"init centroids shape {centroids.shape}, expected {(k, dim)}"
            )
    else:
        rng = np.random.Generator(np.random.Philox(key=int(seed) & 0xFFFFFFFFFFFFFFFF))
        centroids = _plusplus_init(points, k, rng)

    labels, d2min = _nearest(points, centroids)
    labels, d2min, stuck = _fix_empty(points, centroids, labels, d2min)
    degenerate |= stuck
    inertia = float(d2min.sum())
    history = [inertia]

    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        new_centroids = np.empty_like(centroids)
        for j in range(k):
            members = points[labels == j]
            new_centroids[j] = members.mean(axis=0) if members.size else centroids[j]
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum()))
        centroids = new_centroids
        labels, d2min = _nearest(points, centroids)
        labels, d2min, stuck = _fix_empty(points, centroids, labels, d2min)
        degenerate |= stuck
        inertia = float(d2min.sum())
        assert inertia <= history[-1] * (1.0 + 1e-9) + 1e-300, (
            f"inertia rose {history[-1]} -> {inertia} at iteration {iterations}"
        )
        history.append(inertia)
        if shift < tol:
            break

    model = ClusterModel(
        k=k,
        dim=dim,
        centroids=centroids,
        inertia=inertia,
        iterations_run=iterations,
        degenerate=degenerate,
        inertia_history=history,
    )
    assignment = ClusterAssignment(labels.reshape(height, width).astype(np.int32))
    return model, assignment


def assign(model: ClusterModel, features: FeatureMap) -> ClusterAssignment:
    """Map each pixel to its nearest centroid (ties to the lowest index)."""
    if model.dim != features.dim:
        raise DimensionMismatch(
            f"model dim {model.dim} vs feature dim {features.dim}"
        )
    height, width, dim = features.data.shape
    points = features.data.reshape(-1, dim).astype(np.float64)
    labels, _ = _nearest(points, model.centroids)
    return ClusterAssignment(labels.reshape(height, width).astype(np.int32))
