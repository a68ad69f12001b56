"""Acceptance gate: one test, and one PASS/FAIL line, per criterion."""

import json
import subprocess
import sys
import time

import numpy as np
import pytest

import oracles
from builders import block_matrix, origin_fixture, write_smd_fixture
from paradise.benchmark import BenchmarkConfig, benchmark, random_grid, summarize
from paradise.correlation import distance_correlation, kendall, pearson, spearman, xi_coefficient
from paradise.data import Partition, TimeSeries
from paradise.detectors import DEFAULT_WINDOWS, DetectorConfig, WindowConfig
from paradise.evaluation import adjusted_rand_index, best_f1, roc_auc
from paradise.generator import generate, random_spec
from paradise.partitioner import PartitionerConfig, partition_variables
from paradise.pipeline import fuse, normalize_minmax, run_classic, run_paradise

GRID = dict(count=20, n=5000, d=(6, 20), parts=(2, 6), contamination=(0.01, 0.05),
            shape_seed=123, first_seed=0)


def test_criterion_1_coefficient_oracles(record):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    xi_exact = True
    for _ in range(200):
        n = int(rng.integers(3, 65))
        x = rng.normal(size=n)
        y = rng.uniform(-1, 1) * x + rng.normal(size=n)
        if rng.random() < 0.3:
            x, y = np.round(x * 2), np.round(y * 2)
        for fn, oracle in ((pearson, oracles.pearson), (spearman, oracles.spearman),
                           (kendall, oracles.kendall_tau_b),
                           (distance_correlation, oracles.distance_correlation)):
            worst = max(worst, abs(fn(x, y) - oracle(x.tolist(), y.tolist())))
        xs, ys = rng.permutation(n) + rng.random(), rng.permutation(n) * 0.5
        xi_exact &= xi_coefficient(xs, ys) == float(oracles.xi_no_ties(xs.tolist(), ys.tolist()))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and xi_exact and elapsed < 10
    assert record(1, ok, f"max |err| {worst:.2e} (<= 1e-9), xi exact={xi_exact}, {elapsed:.1f}s (< 10s)")


def test_criterion_2_block_recovery(record):
    start = time.perf_counter()
    rates = {}
    for backend in ("kmeans-sweep", "density"):
        hits = 0
        for seed in range(50):
            matrix, truth = block_matrix(seed)
            found = partition_variables(matrix, PartitionerConfig(backend=backend))
            hits += adjusted_rand_index(found, truth) == 1.0
        rates[backend] = hits / 50
    elapsed = time.perf_counter() - start
    ok = min(rates.values()) >= 0.95 and elapsed < 30
    assert record(2, ok, f"ARI=1 rate {rates} (>= 0.95 each), {elapsed:.1f}s (< 30s)")


@pytest.fixture(scope="module")
def grid_summary():
    start = time.perf_counter()
    config = BenchmarkConfig(tuple(random_grid(**GRID)), detectors=("kmeans", "iforest", "lof"))
    summary = summarize(benchmark(config))
    return summary, time.perf_counter() - start


def test_criterion_3_kmeans_direction(record, grid_summary):
    summary, elapsed = grid_summary
    roc = {mode: summary[("kmeans", mode)]["roc"] for mode in ("classic", "paradise", "ideal")}
    ordered = roc["ideal"] >= roc["paradise"] >= roc["classic"] - 0.01
    gain = roc["ideal"] - roc["classic"]
    ok = ordered and gain >= 0.02 and elapsed < 600
    detail = (f"kmeans ROC classic {roc['classic']:.4f} paradise {roc['paradise']:.4f} "
              f"ideal {roc['ideal']:.4f}; ideal-classic {gain:+.4f} (>= +0.02); grid {elapsed:.0f}s (< 600s)")
    assert record(3, ok, detail)


def test_criterion_4_iforest_lof_neutral(record, grid_summary):
    summary, _ = grid_summary
    gaps = {det: summary[(det, "ideal")]["roc"] - summary[(det, "classic")]["roc"]
            for det in ("iforest", "lof")}
    ok = all(abs(g) <= 0.05 for g in gaps.values())
    detail = ", ".join(f"{det} ideal-classic {g:+.4f}" for det, g in gaps.items()) + " (|gap| <= 0.05)"
    assert record(4, ok, detail)


def test_criterion_5_metric_fixtures(record):
    auc_ok = roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    f1_err = 0.0
    for p in (0.01, 0.1, 0.2):
        labels = np.zeros(1000, dtype=int)
        labels[: int(round(p * 1000))] = 1
        f1_err = max(f1_err, abs(best_f1(np.ones(1000), labels).f1 - 2 * p / (1 + p)))
    p = Partition(((0, 3), (1, 2, 4)))
    identical_ok = adjusted_rand_index(p, p) == 1.0
    values = []
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        a = Partition.from_assignment(rng.integers(0, rng.integers(1, 11), 10))
        b = Partition.from_assignment(rng.integers(0, rng.integers(1, 11), 10))
        values.append(adjusted_rand_index(a, b))
    random_mean = float(np.mean(values))
    ok = auc_ok and f1_err <= 1e-12 and identical_ok and abs(random_mean) <= 0.02
    detail = (f"AUC fixture exact={auc_ok}, predict-all F1 err {f1_err:.1e} (<= 1e-12), "
              f"ARI identical=1 {identical_ok}, random ARI mean {random_mean:+.4f} (|.| <= 0.02)")
    assert record(5, ok, detail)


def test_criterion_6_generator_contract(record):
    rates_ok = untouched_ok = repeat_ok = True
    worst_rel = 0.0
    for seed in range(30):
        rng = np.random.default_rng(1000 + seed)
        d = int(rng.integers(4, 16))
        spec = random_spec(3000, d, int(rng.integers(1, min(5, d) + 1)),
                           float(rng.uniform(0.01, 0.08)), seed)
        data = generate(spec)
        rel = abs(data.labels.contamination - spec.contamination) / spec.contamination
        worst_rel = max(worst_rel, rel)
        rates_ok &= rel <= 0.2
        touched = {a.target for a in data.injected}
        untouched_ok &= all(np.array_equal(data.series.column(j), data.clean[:, j])
                            for j in range(d) if j not in touched)
        again = generate(spec)
        repeat_ok &= (np.array_equal(again.series.values, data.series.values)
                      and np.array_equal(again.labels.labels, data.labels.labels))
    min_r = 1.0
    for seed in range(30):
        data = generate(random_spec(20000, 6, 2, 0.0, seed, modes=("linear",)))
        for part in data.ground_truth:
            for j in part[1:]:
                min_r = min(min_r, abs(pearson(data.clean[:, part[0]], data.clean[:, j])))
    ok = rates_ok and untouched_ok and repeat_ok and min_r >= 0.7
    detail = (f"contamination worst rel err {worst_rel:.3f} (<= 0.2), non-target untouched {untouched_ok}, "
              f"same-seed identical {repeat_ok}, min clean |pearson| {min_r:.3f} (>= 0.7)")
    assert record(6, ok, detail)


def test_criterion_7_pipeline_identities(record):
    rng = np.random.default_rng(7)
    series = TimeSeries.from_array(rng.normal(size=(300, 5)))
    identical = True
    for kind in ("iforest", "lof", "kmeans"):
        wc, dc = WindowConfig(4), DetectorConfig(kind=kind, trees=30, neighbors=10, seed=3)
        a = run_classic(series, wc, dc)
        b = run_paradise(series, Partition.single(5), wc, dc)
        identical &= all(np.array_equal(x, y) for x, y in
                         ((a.local, b.local), (a.global_score, b.global_score), (a.origin, b.origin)))
    g, o = fuse([[0.2, 0.9], [0.7, 0.1]])
    fixtures = (normalize_minmax([2, 4, 6]).tolist() == [0, 0.5, 1]
                and normalize_minmax([5, 5, 5]).tolist() == [0, 0, 0]
                and normalize_minmax([-1, 0, 3]).tolist() == [0, 0.25, 1]
                and g.tolist() == [0.7, 0.9] and (o + 1).tolist() == [2, 1]
                and (fuse([[0.3, 0.6]])[1] + 1).tolist() == [1, 1]
                and (fuse([[0.5], [0.5]])[1] + 1).tolist() == [1])
    hits = total = 0
    for seed in range(8):
        data = origin_fixture(seed)
        bundle = run_paradise(data.series, data.ground_truth, WindowConfig(DEFAULT_WINDOWS["kmeans"]),
                              DetectorConfig(kind="kmeans"))
        anomalous = data.labels.labels == 1
        hits += int((bundle.origin[anomalous] == 1).sum())
        total += int(anomalous.sum())
    share = hits / total
    ok = identical and fixtures and share > 0.8
    detail = (f"classic == single-part {identical}, fuse/normalize fixtures {fixtures}, "
              f"origin on injected part {share:.3f} (> 0.8)")
    assert record(7, ok, detail)


def _cli(*args):
    return subprocess.run([sys.executable, "-m", "paradise.cli", *args], capture_output=True, text=True)


def test_criterion_8_thread_determinism(record, tmp_path):
    same = True
    for k, detector in enumerate(("kmeans", "iforest", "lof")):
        spec = tmp_path / f"gen{k}.yaml"
        spec.write_text(f"n: 1500\nseed: {k}\ncontamination: 0.03\nrandom: {{d: {6 + 2 * k}, parts: {2 + k}}}\n")
        assert _cli("generate", "--config", str(spec), "--out", str(tmp_path / f"ds{k}")).returncode == 0
        outputs = []
        for threads in ("1", "8"):
            out = tmp_path / f"run{k}_{threads}"
            result = _cli("--threads", threads, "--seed", "5", "run",
                          "--data", str(tmp_path / f"ds{k}" / "series.csv"),
                          "--labels", str(tmp_path / f"ds{k}" / "labels.csv"),
                          "--detector", detector, "--out", str(out))
            assert result.returncode == 0, result.stderr
            outputs.append(((out / "scores.csv").read_bytes(), (out / "manifest.json").read_bytes()))
        same &= outputs[0] == outputs[1]
    assert record(8, same, f"scores.csv and manifest.json byte-identical for --threads 1 vs 8 on 3 fixtures: {same}")


def test_criterion_9_smd_smoke(record, tmp_path):
    constructed = write_smd_fixture(tmp_path / "smd", n_train=1000, n_test=2000, anomalies=84)
    result = _cli("run", "--data", str(tmp_path / "smd"), "--format", "smd", "--out", str(tmp_path / "out"))
    assert result.returncode == 0, result.stderr
    summary = json.loads(result.stdout)
    scores = (tmp_path / "out" / "scores.csv").read_text().splitlines()
    flowed = summary["d"] == 30 and len(scores) == 2001
    gap = abs(summary["contamination"] - constructed)
    ok = flowed and gap <= 0.001
    detail = (f"d={summary['d']}, {len(scores) - 1} scored instants, contamination "
              f"{summary['contamination']:.4%} vs constructed {constructed:.4%} (within 0.1%)")
    assert record(9, ok, detail)
