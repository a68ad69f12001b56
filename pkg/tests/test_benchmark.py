import csv

import numpy as np
import pytest

from paradise.benchmark import BenchmarkConfig, GridDataset, benchmark, format_table, random_grid, summarize
from paradise.generator import random_spec
from paradise.partitioner import PartitionerConfig


def _one(n=400, d=4, parts=2, seed=0):
    return (GridDataset("one", random_spec(n, d, parts, 0.05, seed)),)


def test_single_part_partitioner_makes_paradise_classic():
    config = BenchmarkConfig(_one(), detectors=("kmeans",),
                             partitioner=PartitionerConfig(k_range=(1, 1)))
    rows = benchmark(config)
    assert [r["mode"] for r in rows] == ["classic", "paradise", "ideal"]
    assert rows[0]["parts"] == rows[1]["parts"] == 1
    assert rows[0]["roc"] == rows[1]["roc"] and rows[0]["f1"] == rows[1]["f1"]
    assert rows[2]["ari"] == 1.0


def test_rows_are_ordered_and_thread_independent(tmp_path):
    grid = random_grid(3, 400, (3, 5), (1, 2), (0.02, 0.04), shape_seed=1)
    base = dict(datasets=tuple(grid), detectors=("iforest", "kmeans"),
                detector_params={"iforest": {"trees": 20}})
    one = benchmark(BenchmarkConfig(**base, threads=1), out_csv=tmp_path / "a.csv")
    three = benchmark(BenchmarkConfig(**base, threads=3), out_csv=tmp_path / "b.csv")
    assert one == three
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    keys = [(r["dataset"], r["detector"], r["mode"]) for r in one]
    assert keys[:3] == [("synthetic-000", "iforest", m) for m in ("classic", "paradise", "ideal")]


def test_partial_results_survive_a_failure(tmp_path):
    grid = random_grid(2, 400, (4, 4), (2, 2), (0.03, 0.03))
    calls = []

    def external(name, mode, partition):
        calls.append(name)
        if name == "synthetic-001":
            raise RuntimeError("scorer died")
        return np.random.default_rng(0).random((len(partition), 400))

    out = tmp_path / "r.csv"
    with pytest.raises(RuntimeError):
        benchmark(BenchmarkConfig(tuple(grid), detectors=()), {"ext": external}, out)
    with open(out, newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert {r["dataset"] for r in rows} == {"synthetic-000"} and len(rows) == 3


def test_grid_is_reproducible():
    a = random_grid(5, 500, (6, 20), (2, 6), (0.01, 0.05), shape_seed=7)
    b = random_grid(5, 500, (6, 20), (2, 6), (0.01, 0.05), shape_seed=7)
    assert a == b
    for entry in a:
        assert 6 <= entry.spec.d <= 20 and 0.01 <= entry.spec.contamination <= 0.05


def test_summary_table():
    rows = [
        {"dataset": "a", "detector": "kmeans", "mode": "classic", "f1": 0.2, "precision": 0.1,
         "recall": 0.5, "roc": 0.6, "ari": 0.0},
        {"dataset": "b", "detector": "kmeans", "mode": "classic", "f1": 0.4, "precision": 0.3,
         "recall": 0.7, "roc": 0.8, "ari": 0.0},
    ]
    summary = summarize(rows)
    assert summary[("kmeans", "classic")]["roc"] == pytest.approx(0.7)
    assert summary[("kmeans", "classic")]["datasets"] == 2
    table = format_table(summary)
    assert "0.700" in table and "kmeans" in table
