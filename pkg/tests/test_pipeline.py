import csv
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from builders import golden_series, origin_fixture
from paradise.data import Partition, TimeSeries
from paradise.detectors import DetectorConfig, WindowConfig
from paradise.pipeline import PartFailure, fuse, normalize_minmax, run_classic, run_paradise

GOLDEN = Path(__file__).parent / "fixtures" / "golden_classic.csv"


@pytest.mark.parametrize("scores, expected", [
    ([2, 4, 6], [0, 0.5, 1]),
    ([5, 5, 5], [0, 0, 0]),
    ([-1, 0, 3], [0, 0.25, 1]),
])
def test_normalize_fixtures(scores, expected):
    assert normalize_minmax(scores).tolist() == expected


def test_fuse_fixtures():
    # origins are 0-based here; the scores file writes them 1-based
    global_score, origin = fuse([[0.2, 0.9], [0.7, 0.1]])
    assert global_score.tolist() == [0.7, 0.9] and origin.tolist() == [1, 0]
    global_score, origin = fuse([[0.3, 0.6]])
    assert global_score.tolist() == [0.3, 0.6] and origin.tolist() == [0, 0]
    assert fuse([[0.5], [0.5]])[1].tolist() == [0]


def test_fuse_needs_a_part():
    with pytest.raises(ValueError):
        fuse(np.zeros((0, 3)))


unit = st.floats(0, 1, allow_nan=False)


@settings(max_examples=100)
@given(arrays(float, st.tuples(st.integers(1, 5), st.integers(1, 20)), elements=unit), st.randoms())
def test_fuse_invariants(local, rnd):
    global_score, origin = fuse(local)
    assert np.array_equal(global_score, local.max(axis=0))
    assert np.array_equal(local[origin, np.arange(local.shape[1])], global_score)
    # reordering parts leaves the global score unchanged and moves origins along
    perm = list(range(local.shape[0]))
    rnd.shuffle(perm)
    g2, o2 = fuse(local[perm])
    assert np.array_equal(g2, global_score)
    assert np.array_equal(local[perm][o2, np.arange(local.shape[1])], global_score)


@settings(max_examples=100)
@given(arrays(float, st.tuples(st.integers(2, 4), st.integers(3, 15)), elements=unit),
       st.data())
def test_monotone_in_one_local_score(local, data):
    k = data.draw(st.integers(0, local.shape[0] - 1))
    i = data.draw(st.integers(0, local.shape[1] - 1))
    raised = local.copy()
    raised[k, i] = data.draw(st.floats(local[k, i], 1.0))
    before, _ = fuse(local)
    after, _ = fuse(raised)
    assert after[i] >= before[i]


def _series(seed=0, n=200, d=4):
    rng = np.random.default_rng(seed)
    return TimeSeries.from_array(rng.normal(size=(n, d)))


@pytest.mark.parametrize("kind", ["iforest", "lof", "kmeans"])
def test_classic_equals_single_part(kind):
    series = _series()
    wc, dc = WindowConfig(3), DetectorConfig(kind=kind, trees=20, neighbors=10, seed=4)
    a = run_classic(series, wc, dc)
    b = run_paradise(series, Partition.single(series.d), wc, dc)
    assert np.array_equal(a.local, b.local)
    assert np.array_equal(a.global_score, b.global_score)
    assert np.array_equal(a.origin, b.origin)


def test_single_variable_all_partitions_agree():
    series = _series(d=1)
    wc, dc = WindowConfig(2), DetectorConfig(seed=1)
    assert np.array_equal(run_classic(series, wc, dc).global_score,
                          run_paradise(series, Partition.singletons(1), wc, dc).global_score)


def test_bundle_invariants_and_rerun():
    series = _series(1)
    partition = Partition(((0, 2), (1,), (3,)))
    wc, dc = WindowConfig(4), DetectorConfig(kind="iforest", trees=20, seed=9)
    a = run_paradise(series, partition, wc, dc)
    b = run_paradise(series, partition, wc, dc, threads=3)
    assert a.check() == []
    assert np.array_equal(a.local, b.local) and np.array_equal(a.origin, b.origin)


def test_part_order_does_not_change_local_scores():
    series = _series(2)
    wc, dc = WindowConfig(2), DetectorConfig(kind="iforest", trees=20, seed=5)
    a = run_paradise(series, Partition(((0, 1), (2, 3))), wc, dc)
    b = run_paradise(series, Partition(((2, 3), (0, 1))), wc, dc)
    assert np.array_equal(a.local, b.local[::-1])
    assert np.array_equal(a.global_score, b.global_score)


def test_invalid_partition_rejected():
    with pytest.raises(ValueError, match="not valid"):
        run_paradise(_series(), Partition(((0, 1),)), WindowConfig(1), DetectorConfig())


def test_part_failure_names_the_part(monkeypatch):
    from paradise import pipeline

    series = _series(n=30)
    real = pipeline.detect_part

    def flaky(data, *args, **kwargs):
        if np.array_equal(data, series.select([2, 3])):
            raise RuntimeError("boom")
        return real(data, *args, **kwargs)

    monkeypatch.setattr(pipeline, "detect_part", flaky)
    with pytest.raises(PartFailure, match=r"part 2 \(variables \[2, 3\]\): boom"):
        run_paradise(series, Partition(((0, 1), (2, 3))), WindowConfig(2), DetectorConfig())


def test_golden_classic_scores():
    with open(GOLDEN, newline="") as handle:
        rows = list(csv.DictReader(handle))
    series = golden_series()
    for kind in ("kmeans", "iforest", "lof"):
        stored = np.array([float(r["local"]) for r in rows if r["detector"] == kind])
        bundle = run_classic(series, WindowConfig(5), DetectorConfig(kind=kind, trees=50, neighbors=10, seed=7))
        np.testing.assert_allclose(bundle.local[0], stored, rtol=1e-12, atol=0)


def test_origin_points_at_the_anomalous_group():
    data = origin_fixture(0)
    bundle = run_paradise(data.series, data.ground_truth, WindowConfig(20), DetectorConfig(kind="kmeans"))
    anomalous = data.labels.labels == 1
    assert (bundle.origin[anomalous] == 1).mean() > 0.8
