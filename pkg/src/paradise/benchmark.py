"""Classic / PARADISE / ideal-partition comparison over a grid of synthetic datasets.

Rows are ordered by (dataset, detector, mode) whatever the thread count.
Aggregates are means over datasets.
"""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .correlation import CorrelationConfig, combined_matrix
from .data import Partition
from .detectors import DEFAULT_WINDOWS, DetectorConfig, WindowConfig
from .evaluation import adjusted_rand_index, metrics, roc_auc
from .generator import GeneratorSpec, SyntheticDataset, generate, random_spec
from .partitioner import PartitionerConfig, partition_variables
from .pipeline import bundle_from_local, run_paradise

logger = logging.getLogger(__name__)

MODES = ("classic", "paradise", "ideal")
FIELDS = ("dataset", "detector", "mode", "d", "parts", "ari", "f1", "precision", "recall", "roc")

# maps (dataset name, mode, partition) to a parts x n matrix of local scores
ExternalScorer = Callable[[str, str, Partition], np.ndarray]


@dataclass(frozen=True)
class GridDataset:
    name: str
    spec: GeneratorSpec


def random_grid(count: int, n: int, d: tuple[int, int], parts: tuple[int, int],
                contamination: tuple[float, float], shape_seed: int = 0,
                first_seed: int = 0) -> list[GridDataset]:
    """``count`` random specs; shapes drawn from ``shape_seed``, dataset ``i`` seeded ``first_seed + i``."""
    rng = np.random.default_rng(shape_seed)
    grid = []
    for i in range(count):
        di = int(rng.integers(d[0], d[1] + 1))
        pi = int(rng.integers(parts[0], parts[1] + 1))
        ci = float(rng.uniform(contamination[0], contamination[1]))
        spec = random_spec(n, di, min(pi, di), ci, seed=first_seed + i)
        grid.append(GridDataset(f"synthetic-{first_seed + i:03d}", spec))
    return grid


@dataclass(frozen=True)
class BenchmarkConfig:
    datasets: tuple[GridDataset, ...]
    detectors: tuple[str, ...] = ("kmeans", "iforest", "lof")
    modes: tuple[str, ...] = MODES
    windows: Mapping[str, int] = field(default_factory=lambda: dict(DEFAULT_WINDOWS))
    detector_params: Mapping[str, Mapping[str, int]] = field(default_factory=dict)
    partitioner: PartitionerConfig = PartitionerConfig()
    correlation: CorrelationConfig = CorrelationConfig()
    seed: int = 0
    threads: int = 1

    def window_for(self, detector: str) -> WindowConfig:
        return WindowConfig(int(self.windows.get(detector, 10)))

    def detector_config(self, detector: str) -> DetectorConfig:
        return DetectorConfig(kind=detector, seed=self.seed, **self.detector_params.get(detector, {}))


def _paradise_partition(data: SyntheticDataset, config: BenchmarkConfig, detector: str,
                        cache: dict) -> Partition:
    if "matrix" not in cache:
        cache["matrix"] = combined_matrix(data.series, config.correlation)
    if config.partitioner.selection == "supervised-roc":
        window, det = config.window_for(detector), config.detector_config(detector)

        def scorer(partition: Partition) -> float:
            bundle = run_paradise(data.series, partition, window, det)
            return roc_auc(bundle.global_score, data.labels)

        return partition_variables(cache["matrix"], config.partitioner, scorer)
    if "partition" not in cache:
        cache["partition"] = partition_variables(cache["matrix"], config.partitioner)
    return cache["partition"]


def _dataset_rows(entry: GridDataset, config: BenchmarkConfig,
                  external: Mapping[str, ExternalScorer]) -> list[dict]:
    data = generate(entry.spec)
    cache: dict = {}
    rows = []
    for detector in (*config.detectors, *external):
        for mode in config.modes:
            if mode == "classic":
                partition = Partition.single(data.series.d)
            elif mode == "ideal":
                partition = data.ground_truth
            else:
                partition = _paradise_partition(data, config, detector, cache)
            if detector in external:
                bundle = bundle_from_local(external[detector](entry.name, mode, partition), partition)
            else:
                bundle = run_paradise(data.series, partition, config.window_for(detector),
                                      config.detector_config(detector))
            scores = metrics(bundle.global_score, data.labels)
            rows.append({
                "dataset": entry.name,
                "detector": detector,
                "mode": mode,
                "d": data.series.d,
                "parts": len(partition),
                "ari": adjusted_rand_index(partition, data.ground_truth),
                "f1": scores["f1"],
                "precision": scores["precision"],
                "recall": scores["recall"],
                "roc": scores["roc"],
            })
    logger.info("benchmarked %s", entry.name)
    return rows


def benchmark(config: BenchmarkConfig, external: Mapping[str, ExternalScorer] | None = None,
              out_csv: str | Path | None = None) -> list[dict]:
    """Run every (dataset, detector, mode) cell.

    With ``out_csv``, rows are appended as each dataset finishes in order, so a
    failure leaves the completed prefix on disk.
    """
    external = dict(external or {})
    handle = None
    writer = None
    if out_csv is not None:
        handle = open(out_csv, "w", newline="", encoding="utf-8")
        writer = csv.DictWriter(handle, fieldnames=FIELDS)
        writer.writeheader()
    rows: list[dict] = []
    try:
        def work(entry: GridDataset) -> list[dict]:
            return _dataset_rows(entry, config, external)

        if config.threads > 1 and len(config.datasets) > 1:
            with ThreadPoolExecutor(config.threads) as pool:
                for chunk in pool.map(work, config.datasets):
                    rows.extend(chunk)
                    if writer:
                        writer.writerows(_formatted(chunk))
                        handle.flush()
        else:
            for entry in config.datasets:
                chunk = work(entry)
                rows.extend(chunk)
                if writer:
                    writer.writerows(_formatted(chunk))
                    handle.flush()
    finally:
        if handle:
            handle.close()
    return rows


def _formatted(rows: Sequence[dict]) -> list[dict]:
    return [{k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()} for row in rows]


def summarize(rows: Sequence[dict]) -> dict[tuple[str, str], dict[str, float]]:
    """Mean metrics per (detector, mode), in first-seen order."""
    groups: dict[tuple[str, str], list[dict]] = {}
    for row in rows:
        groups.setdefault((row["detector"], row["mode"]), []).append(row)
    return {
        key: {m: float(np.mean([r[m] for r in group])) for m in ("f1", "precision", "recall", "roc", "ari")}
        | {"datasets": len(group)}
        for key, group in groups.items()
    }


def format_table(summary: Mapping[tuple[str, str], Mapping[str, float]]) -> str:
    """Text table with one line per detector and F1/Pr/Ra/ROC per mode (means over datasets)."""
    detectors = list(dict.fromkeys(det for det, _ in summary))
    modes = list(dict.fromkeys(mode for _, mode in summary))
    out = io.StringIO()
    out.write("# aggregation: mean over datasets\n")
    header = f"{'detector':<12}" + "".join(f"| {mode:^27}" for mode in modes)
    out.write(header + "\n")
    out.write(f"{'':<12}" + "".join(f"| {'F1':>6}{'Pr':>7}{'Ra':>7}{'ROC':>7}" for _ in modes) + "\n")
    for det in detectors:
        cells = []
        for mode in modes:
            s = summary.get((det, mode))
            if s is None:
                cells.append(f"| {'-':>27}")
            else:
                cells.append(f"| {s['f1']:6.3f}{s['precision']:7.3f}{s['recall']:7.3f}{s['roc']:7.3f}")
        out.write(f"{det:<12}" + "".join(cells) + "\n")
    return out.getvalue()
