"""Local detection per part, min-max normalization, max fusion and attribution."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from .data import Partition, ScoreBundle, TimeSeries, is_valid_partition
from .detectors import DetectorConfig, WindowConfig, detect_part


class PartFailure(RuntimeError):
    def __init__(self, index: int, part: Sequence[int], cause: Exception):
        super().__init__(f"detection failed on part {index + 1} (variables {list(part)}): {cause}")
        self.index = index
        self.part = tuple(part)


def normalize_minmax(scores) -> np.ndarray:
    """Rescale to [0, 1]; a constant vector maps to zeros."""
    scores = np.asarray(scores, dtype=float)
    low, high = scores.min(), scores.max()
    if high == low:
        return np.zeros_like(scores)
    return np.clip((scores - low) / (high - low), 0.0, 1.0)


def fuse(local) -> tuple[np.ndarray, np.ndarray]:
    """Per-instant max over parts and the first part reaching it (0-based)."""
    local = np.asarray(local, dtype=float)
    if local.ndim != 2 or local.shape[0] == 0:
        raise ValueError("fuse needs at least one part of scores")
    origin = local.argmax(axis=0)  # argmax returns the first maximum
    return local[origin, np.arange(local.shape[1])], origin


def part_seed(seed: int, part: Sequence[int]) -> np.random.SeedSequence:
    """Detector seed of a part, derived from its variables so part order is irrelevant."""
    return np.random.SeedSequence([int(seed), 1, *(int(j) for j in part)])


def bundle_from_local(local, partition: Partition) -> ScoreBundle:
    local = np.asarray(local, dtype=float)
    if local.shape[0] != len(partition):
        raise ValueError(f"got {local.shape[0]} score vectors for {len(partition)} parts")
    normalized = np.vstack([normalize_minmax(row) for row in local])
    global_score, origin = fuse(normalized)
    return ScoreBundle(local, normalized, global_score, origin, partition)


def local_scores(series: TimeSeries, partition: Partition, window_config: WindowConfig,
                 detector_config: DetectorConfig, train: TimeSeries | None = None,
                 threads: int = 1) -> np.ndarray:
    if not is_valid_partition(partition, series.d):
        raise ValueError(f"partition is not valid for d={series.d}")

    def work(k: int) -> np.ndarray:
        part = partition.parts[k]
        try:
            return detect_part(
                series.select(part), window_config, detector_config,
                train=None if train is None else train.select(part),
                seed=part_seed(detector_config.seed, part),
            )
        except Exception as exc:
            raise PartFailure(k, part, exc) from exc

    indices = range(len(partition))
    if threads > 1 and len(partition) > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(work, indices))
    else:
        rows = [work(k) for k in indices]
    return np.vstack(rows)


def run_paradise(series: TimeSeries, partition: Partition, window_config: WindowConfig,
                 detector_config: DetectorConfig, train: TimeSeries | None = None,
                 threads: int = 1) -> ScoreBundle:
    local = local_scores(series, partition, window_config, detector_config, train, threads)
    return bundle_from_local(local, partition)


def run_classic(series: TimeSeries, window_config: WindowConfig,
                detector_config: DetectorConfig, train: TimeSeries | None = None) -> ScoreBundle:
    """The baseline: one detector over all variables."""
    return run_paradise(series, Partition.single(series.d), window_config, detector_config, train)
