"""Window-based anomaly scorers applied to one part of the variables.

A part's columns are standardized, cut into stride-1 sliding windows and
flattened; each window is a vector for a tabular detector. Window scores are
then mapped back onto instants.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .partitioner import _sq_distances, kmeans

logger = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329
DETECTORS = ("iforest", "lof", "kmeans")
# point-wise IForest/LOF and windowed k-means, as in common benchmark setups
DEFAULT_WINDOWS = {"iforest": 1, "lof": 1, "kmeans": 20}


@dataclass(frozen=True)
class WindowConfig:
    window: int = 10
    assignment: str = "last-point"  # or "center"

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        if self.assignment not in ("last-point", "center"):
            raise ValueError(f"unknown window assignment {self.assignment!r}")


@dataclass(frozen=True)
class DetectorConfig:
    kind: str = "kmeans"
    trees: int = 100
    subsample: int = 256
    neighbors: int = 20
    centroids: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in DETECTORS:
            raise ValueError(f"unknown detector {self.kind!r}; expected one of {DETECTORS}")
        for name in ("trees", "subsample", "neighbors", "centroids"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


def windows(part_data, config: WindowConfig) -> tuple[np.ndarray, np.ndarray]:
    """Flattened stride-1 windows and, per instant, the index of its window.

    Window ``s`` covers instants ``s .. s+window-1`` and is flattened
    time-major. With ``last-point`` it is assigned to its last instant, with
    ``center`` to its middle one; instants before the first assigned instant
    take window 0 and instants after the last take the final window.
    """
    data = np.asarray(part_data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    n, width = data.shape
    w = config.window
    if w > n:
        raise ValueError(f"window {w} is longer than the series (n={n})")
    count = n - w + 1
    view = np.lib.stride_tricks.sliding_window_view(data, w, axis=0)  # (count, width, w)
    vectors = np.ascontiguousarray(view.transpose(0, 2, 1)).reshape(count, w * width)
    offset = w - 1 if config.assignment == "last-point" else (w - 1) // 2
    mapping = np.clip(np.arange(n) - offset, 0, count - 1)
    return vectors, mapping


def _average_path(size) -> np.ndarray:
    """Expected unsuccessful-search path length in a BST of ``size`` nodes."""
    size = np.asarray(size, dtype=float)
    out = np.zeros_like(size)
    out[size == 2] = 1.0
    big = size > 2
    s = size[big]
    out[big] = 2.0 * (np.log(s - 1.0) + EULER_GAMMA) - 2.0 * (s - 1.0) / s
    return out


class IsolationForest:
    """Random isolation trees; scores in (0, 1), higher is more anomalous."""

    def __init__(self, trees: int = 100, subsample: int = 256, seed=0):
        self.trees = trees
        self.subsample = subsample
        self.seed = seed
        self._forest: list[tuple[np.ndarray, ...]] = []
        self.sample_size = 0

    def fit(self, X) -> "IsolationForest":
        X = np.asarray(X, dtype=float)
        if X.shape[0] < 2:
            raise ValueError("isolation forest needs at least 2 vectors")
        rng = np.random.default_rng(self.seed)
        self.sample_size = min(self.subsample, X.shape[0])
        limit = math.ceil(math.log2(max(self.sample_size, 2)))
        self._forest = []
        for _ in range(self.trees):
            rows = rng.choice(X.shape[0], self.sample_size, replace=False)
            self._forest.append(self._grow(X[rows], limit, rng))
        return self

    @staticmethod
    def _grow(sample: np.ndarray, limit: int, rng: np.random.Generator):
        feature, threshold, left, right, size = [], [], [], [], []

        def node(rows: np.ndarray, depth: int) -> int:
            idx = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            size.append(len(rows))
            if depth >= limit or len(rows) <= 1:
                return idx
            data = sample[rows]
            low, high = data.min(axis=0), data.max(axis=0)
            splittable = np.flatnonzero(high > low)
            if splittable.size == 0:
                return idx
            f = int(splittable[rng.integers(splittable.size)])
            t = float(rng.uniform(low[f], high[f]))
            goes_left = data[:, f] < t
            feature[idx] = f
            threshold[idx] = t
            left[idx] = node(rows[goes_left], depth + 1)
            right[idx] = node(rows[~goes_left], depth + 1)
            return idx

        node(np.arange(sample.shape[0]), 0)
        return (np.array(feature), np.array(threshold), np.array(left),
                np.array(right), np.array(size))

    def path_lengths(self, X) -> np.ndarray:
        """Mean path length over the forest, leaf-size corrected."""
        X = np.asarray(X, dtype=float)
        total = np.zeros(X.shape[0])
        rows = np.arange(X.shape[0])
        for feature, threshold, left, right, size in self._forest:
            at = np.zeros(X.shape[0], dtype=int)
            depth = np.zeros(X.shape[0])
            active = feature[at] >= 0
            while active.any():
                idx = rows[active]
                nodes = at[idx]
                go_left = X[idx, feature[nodes]] < threshold[nodes]
                at[idx] = np.where(go_left, left[nodes], right[nodes])
                depth[idx] += 1.0
                active = feature[at] >= 0
            total += depth + _average_path(size[at])
        return total / len(self._forest)

    def score(self, X) -> np.ndarray:
        norm = _average_path(np.array([self.sample_size]))[0]
        if norm == 0.0:
            return np.full(np.asarray(X).shape[0], 0.5)
        return 2.0 ** (-self.path_lengths(X) / norm)


def _knn(query: np.ndarray, reference: np.ndarray, k: int, exclude_self: bool,
         chunk: int = 512) -> tuple[np.ndarray, np.ndarray]:
    """Exact k nearest neighbours by brute force; distances recomputed directly."""
    m = query.shape[0]
    take = k + 1 if exclude_self else k
    index = np.empty((m, k), dtype=int)
    dist = np.empty((m, k))
    for start in range(0, m, chunk):
        stop = min(start + chunk, m)
        d2 = _sq_distances(query[start:stop], reference)
        if exclude_self:
            d2[np.arange(stop - start), np.arange(start, stop)] = -1.0
        part = np.argpartition(d2, take - 1, axis=1)[:, :take]
        part_d2 = np.take_along_axis(d2, part, axis=1)
        order = np.lexsort((part, part_d2), axis=1)
        part = np.take_along_axis(part, order, axis=1)
        part = part[:, 1:] if exclude_self else part
        diff = query[start:stop, None, :] - reference[part]
        exact = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        # keep neighbours sorted by exact distance
        order = np.argsort(exact, axis=1, kind="stable")
        dist[start:stop] = np.take_along_axis(exact, order, axis=1)
        index[start:stop] = np.take_along_axis(part, order, axis=1)
    return dist, index


class LocalOutlierFactor:
    """Classical LOF. Scoring the fitted set excludes each point from its own
    neighbourhood; scoring new vectors queries the fitted set."""

    def __init__(self, neighbors: int = 20):
        self.neighbors = neighbors

    def fit(self, X) -> "LocalOutlierFactor":
        X = np.asarray(X, dtype=float)
        if X.shape[0] <= self.neighbors:
            raise ValueError(
                f"LOF needs more vectors ({X.shape[0]}) than neighbors ({self.neighbors})"
            )
        self._X = X
        dist, idx = _knn(X, X, self.neighbors, exclude_self=True)
        self._k_distance = dist[:, -1]
        self._lrd = self._local_density(dist, idx)
        self._train_lof = self._lrd[idx].mean(axis=1) / self._lrd
        return self

    def _local_density(self, dist: np.ndarray, idx: np.ndarray) -> np.ndarray:
        reach = np.maximum(dist, self._k_distance[idx])
        # duplicates give zero reach distances; the offset keeps densities finite
        return 1.0 / (reach.mean(axis=1) + 1e-10)

    def score(self, X=None) -> np.ndarray:
        if X is None:
            return self._train_lof.copy()
        X = np.asarray(X, dtype=float)
        dist, idx = _knn(X, self._X, self.neighbors, exclude_self=False)
        return self._lrd[idx].mean(axis=1) / self._local_density(dist, idx)


class KMeansDetector:
    """Distance to the nearest k-means centroid."""

    def __init__(self, centroids: int = 10, seed=0):
        self.centroids = centroids
        self.seed = seed

    def fit(self, X) -> "KMeansDetector":
        X = np.asarray(X, dtype=float)
        k = self.centroids
        if X.shape[0] < k:
            warnings.warn(f"only {X.shape[0]} vectors; reducing centroids from {k}", stacklevel=2)
            k = X.shape[0]
        self.centers_ = kmeans(X, k, seed=self.seed).centers
        return self

    def score(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        nearest = _sq_distances(X, self.centers_).argmin(axis=1)
        diff = X - self.centers_[nearest]
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def make_detector(config: DetectorConfig, seed=None):
    seed = config.seed if seed is None else seed
    if config.kind == "iforest":
        return IsolationForest(config.trees, config.subsample, seed)
    if config.kind == "lof":
        return LocalOutlierFactor(config.neighbors)
    return KMeansDetector(config.centroids, seed)


def iforest_score(vectors, config: DetectorConfig) -> np.ndarray:
    return IsolationForest(config.trees, config.subsample, config.seed).fit(vectors).score(vectors)


def lof_score(vectors, config: DetectorConfig) -> np.ndarray:
    return LocalOutlierFactor(config.neighbors).fit(vectors).score()


def kmeans_score(vectors, config: DetectorConfig) -> np.ndarray:
    return KMeansDetector(config.centroids, config.seed).fit(vectors).score(vectors)


def standardize(data: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Zero-mean unit-variance per column using ``reference`` statistics."""
    mean = reference.mean(axis=0)
    std = reference.std(axis=0)
    std[std == 0] = 1.0
    return (data - mean) / std


def detect_part(part_data, window_config: WindowConfig, detector_config: DetectorConfig,
                train=None, seed=None) -> np.ndarray:
    """Local score of every instant of one part.

    ``train`` (optional) is the training split of the same columns; the
    detector is fitted on it and standardization uses its statistics.
    Without it the detector is fitted on ``part_data`` itself.
    """
    data = np.asarray(part_data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    reference = data if train is None else np.asarray(train, dtype=float).reshape(-1, data.shape[1])
    scaled = standardize(data, reference)
    vectors, mapping = windows(scaled, window_config)
    detector = make_detector(detector_config, seed)
    if train is None:
        detector.fit(vectors)
        scores = detector.score() if isinstance(detector, LocalOutlierFactor) else detector.score(vectors)
    else:
        train_vectors, _ = windows(standardize(reference, reference), window_config)
        scores = detector.fit(train_vectors).score(vectors)
    return scores[mapping]
