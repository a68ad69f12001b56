import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from paradise.data import LabelVector, Partition
from paradise.evaluation import adjusted_rand_index, auc, best_f1, metrics, roc_auc, roc_curve


def test_four_point_fixture():
    scores, labels = [0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]
    assert roc_auc(scores, labels) == 0.75
    assert oracles.pairwise_auc(scores, labels) == 0.75
    best = best_f1(scores, labels)
    assert best.f1 == oracles.exhaustive_best_f1(scores, labels) == pytest.approx(0.8)


def test_curve_shape():
    curve = roc_curve([0.1, 0.9, 0.8, 0.2], [0, 1, 1, 0])
    points = curve.points()
    assert points[0][:2] == (0.0, 0.0) and points[-1][:2] == (1.0, 1.0)
    assert (0.0, 1.0) in [p[:2] for p in points]
    assert auc(curve) == 1.0
    assert np.all(np.diff(curve.thresholds) < 0)


def test_constant_scores():
    assert roc_auc(np.zeros(10), [0] * 5 + [1] * 5) == 0.5


@pytest.mark.parametrize("p", [0.01, 0.1, 0.2])
def test_predict_all_f1(p):
    n = 1000
    labels = np.zeros(n, dtype=int)
    labels[: int(round(p * n))] = 1
    best = best_f1(np.ones(n), labels)
    assert best.f1 == pytest.approx(2 * p / (1 + p), abs=1e-12)


def test_perfect_scores():
    labels = [0, 1, 0, 1, 1]
    best = best_f1(labels, labels)
    assert (best.f1, best.precision, best.recall) == (1.0, 1.0, 1.0)


def test_errors():
    with pytest.raises(ValueError, match="both"):
        roc_curve([1, 2], [1, 1])
    with pytest.raises(ValueError, match="anomalous"):
        best_f1([1, 2], [0, 0])
    with pytest.raises(ValueError):
        roc_auc([1, 2, 3], [0, 1])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 20), st.booleans()), min_size=2, max_size=40))
def test_auc_equals_pairwise_and_f1_is_consistent(rows):
    scores = [float(s) for s, _ in rows]
    labels = [int(l) for _, l in rows]
    if len(set(labels)) < 2:
        return
    assert roc_auc(scores, labels) == pytest.approx(oracles.pairwise_auc(scores, labels), abs=1e-12)
    best = best_f1(scores, labels)
    assert best.f1 == pytest.approx(oracles.exhaustive_best_f1(scores, labels), abs=1e-12)
    if best.f1:
        assert best.f1 == 2 * best.precision * best.recall / (best.precision + best.recall)


def test_monotone_transform_invariance():
    rng = np.random.default_rng(0)
    scores = rng.normal(size=300)
    labels = (rng.random(300) < 0.2).astype(int)
    a, b = metrics(scores, labels), metrics(np.exp(3 * scores), labels)
    assert a["roc"] == b["roc"] and a["f1"] == b["f1"]


def test_shuffled_labels_near_half():
    rng = np.random.default_rng(1)
    scores = rng.random(20000)
    labels = rng.permutation(np.r_[np.ones(2000), np.zeros(18000)]).astype(int)
    assert abs(roc_auc(scores, LabelVector(labels)) - 0.5) < 0.05


def _random_partition(rng, d):
    return Partition.from_assignment(rng.integers(0, rng.integers(1, d + 1), d))


def test_ari_fixtures():
    p = Partition(((0, 1), (2, 3)))
    assert adjusted_rand_index(p, p) == 1.0
    assert adjusted_rand_index(Partition.singletons(4), Partition.single(4)) == 0.0
    with pytest.raises(ValueError):
        adjusted_rand_index(p, Partition.single(5))


def test_ari_against_pair_counting():
    rng = np.random.default_rng(2)
    for _ in range(200):
        a, b = _random_partition(rng, 9), _random_partition(rng, 9)
        expected = oracles.ari_pair_counting(a.assignment().tolist(), b.assignment().tolist())
        assert adjusted_rand_index(a, b) == pytest.approx(expected, abs=1e-12)
        assert adjusted_rand_index(a, b) == adjusted_rand_index(b, a)
        reordered = Partition(a.parts[::-1])
        assert adjusted_rand_index(reordered, b) == pytest.approx(adjusted_rand_index(a, b), abs=1e-15)
