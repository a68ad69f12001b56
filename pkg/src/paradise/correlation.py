"""Pairwise dependence coefficients and the combined absolute-dependence matrix.

Five coefficients are computed for every pair of variables: Pearson,
Spearman, Kendall tau-b, distance correlation and Chatterjee's xi. The
combined matrix keeps, per pair, the largest absolute value.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import TimeSeries

METHODS = ("pearson", "spearman", "kendall", "dcor", "xi")


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValueError(f"need at least 2 observations, got {x.size}")
    return x, y


def pearson(x, y) -> float:
    """Sample Pearson correlation; 0 when either variable is constant."""
    x, y = _pair(x, y)
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(np.dot(xc, xc))
    syy = float(np.dot(yc, yc))
    if sxx == 0.0 or syy == 0.0:
        return 0.0
    r = float(np.dot(xc, yc)) / np.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, r)))


def average_ranks(x) -> np.ndarray:
    """1-based ranks; tied values get the mean of the ranks they span."""
    x = np.asarray(x, dtype=float).ravel()
    order = np.argsort(x, kind="mergesort")
    sorted_x = x[order]
    # boundaries of runs of equal values
    starts = np.r_[0, np.flatnonzero(sorted_x[1:] != sorted_x[:-1]) + 1]
    ends = np.r_[starts[1:], x.size]
    mean_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(x.size)
    ranks[order] = np.repeat(mean_rank, ends - starts)
    return ranks


def spearman(x, y) -> float:
    """Pearson correlation of average ranks."""
    x, y = _pair(x, y)
    return pearson(average_ranks(x), average_ranks(y))


def _dense_ranks(x: np.ndarray) -> np.ndarray:
    return np.unique(x, return_inverse=True)[1].ravel()


def _tie_pairs(codes: np.ndarray) -> int:
    counts = np.bincount(codes)
    return int((counts * (counts - 1) // 2).sum())


def count_inversions(seq) -> int:
    """Number of pairs ``i < j`` with ``seq[i] > seq[j]`` (ties are not inversions).

    Bottom-up merge sort; each level merges all block pairs at once by
    offsetting values with their block-pair id so a single ``searchsorted``
    counts, for every right-block element, the larger left-block elements.
    """
    seq = _dense_ranks(np.asarray(seq))
    n = seq.size
    if n < 2:
        return 0
    span = np.int64(seq.max() + 1)
    values = seq.astype(np.int64)
    positions = np.arange(n)
    inversions = 0
    width = 1
    while width < n:
        pair_id = positions // (2 * width)
        in_right = (positions // width) % 2 == 1
        keys = pair_id * span + values
        left_keys = keys[~in_right]  # sorted: blocks are sorted and pair ids increase
        right_keys = keys[in_right]
        right_pair = pair_id[in_right]
        # left elements of the same pair that are > the right element
        left_end = np.searchsorted(left_keys, (right_pair + 1) * span, side="left")
        not_greater = np.searchsorted(left_keys, right_keys, side="right")
        inversions += int((left_end - not_greater).sum())
        values = np.sort(keys) - pair_id * span
        width *= 2
    return inversions


def kendall(x, y) -> float:
    """Kendall tau-b, O(n log n): sort by (x, y) and count inversions in y."""
    x, y = _pair(x, y)
    n = x.size
    xr = _dense_ranks(x)
    yr = _dense_ranks(y)
    n0 = n * (n - 1) // 2
    n1 = _tie_pairs(xr)
    n2 = _tie_pairs(yr)
    if n0 == n1 or n0 == n2:
        return 0.0
    order = np.lexsort((yr, xr))
    joint = xr[order] * (yr.max() + 1) + yr[order]
    n3 = _tie_pairs(_dense_ranks(joint))
    discordant = count_inversions(yr[order])
    concordant_minus_discordant = n0 - n1 - n2 + n3 - 2 * discordant
    tau = concordant_minus_discordant / np.sqrt(float(n0 - n1) * float(n0 - n2))
    return float(min(1.0, max(-1.0, tau)))


def _double_centered(x: np.ndarray) -> np.ndarray:
    a = np.abs(x[:, None] - x[None, :])
    row = a.mean(axis=1)
    return a - row[:, None] - row[None, :] + a.mean()


def _dcor_from_centered(a: np.ndarray, b: np.ndarray) -> float:
    dcov2 = max(float(np.mean(a * b)), 0.0)
    dvar_x = float(np.mean(a * a))
    dvar_y = float(np.mean(b * b))
    if dvar_x <= 0.0 or dvar_y <= 0.0:
        return 0.0
    return float(min(1.0, np.sqrt(dcov2 / np.sqrt(dvar_x * dvar_y))))


def distance_correlation(x, y) -> float:
    """Sample distance correlation (V-statistic), in [0, 1]."""
    x, y = _pair(x, y)
    return _dcor_from_centered(_double_centered(x), _double_centered(y))


def xi_coefficient(x, y, rng_seed=0) -> float:
    """Chatterjee's xi of ``y`` on ``x``; ties in ``x`` broken at random.

    Asymmetric: measures how well ``y`` is a function of ``x``.
    """
    x, y = _pair(x, y)
    n = x.size
    rng = np.random.default_rng(rng_seed)
    order = np.lexsort((rng.random(n), x))
    y_sorted = y[order]
    y_all = np.sort(y)
    r = np.searchsorted(y_all, y_sorted, side="right")
    l = n - np.searchsorted(y_all, y_sorted, side="left")
    # one integer ratio, so the result is the correctly rounded value
    denominator = 2 * int(np.sum(l * (n - l)))
    if denominator == 0:
        return 0.0
    return (denominator - n * int(np.abs(np.diff(r)).sum())) / denominator


@dataclass(frozen=True)
class CorrelationConfig:
    subsample: int = 2000  # cap for distance correlation and xi
    seed: int = 0
    threads: int = 1


@dataclass(frozen=True)
class CorrelationMatrix:
    values: np.ndarray
    method_argmax: np.ndarray
    names: tuple[str, ...]

    @property
    def d(self) -> int:
        return self.values.shape[0]


def _stride(n: int, cap: int) -> slice:
    step = max(1, -(-n // cap))
    return slice(None, None, step)


def _dcor_block_pass(sub: np.ndarray, active: list[int], budget: int,
                     threads: int) -> dict[tuple[int, int], float]:
    """Distance correlation of every active pair, caching centered matrices in blocks."""
    m = sub.shape[0]
    block = max(1, budget // max(1, m * m * 8))
    out: dict[tuple[int, int], float] = {}
    dvar: dict[int, float] = {}

    def dcor(a: np.ndarray, b: np.ndarray, i: int, j: int) -> float:
        if dvar[i] <= 0.0 or dvar[j] <= 0.0:
            return 0.0
        dcov2 = max(float(np.vdot(a, b)) / (m * m), 0.0)
        return float(min(1.0, np.sqrt(dcov2 / np.sqrt(dvar[i] * dvar[j]))))

    def centered(j: int) -> np.ndarray:
        a = _double_centered(sub[:, j])
        dvar.setdefault(j, float(np.vdot(a, a)) / (m * m))
        return a

    def map_(fn, items):
        if threads > 1 and len(items) > 1:
            with ThreadPoolExecutor(threads) as pool:
                return list(pool.map(fn, items))
        return [fn(item) for item in items]

    for lo in range(0, len(active), block):
        members = active[lo:lo + block]
        cache = dict(zip(members, map_(centered, members)))
        for a_pos, i in enumerate(members):
            for j in members[a_pos + 1:]:
                out[i, j] = dcor(cache[i], cache[j], i, j)

        def against(j: int) -> list[tuple[int, float]]:
            b = centered(j)
            return [(i, dcor(cache[i], b, i, j)) for i in members]

        later = active[lo + block:]
        for j, row in zip(later, map_(against, later)):
            for i, value in row:
                out[i, j] = value
    return out


def combined_matrix(series: TimeSeries, config: CorrelationConfig | None = None) -> CorrelationMatrix:
    """Cellwise max of the five absolute coefficients, symmetrized, diagonal 1."""
    config = config or CorrelationConfig()
    d = series.d
    values = series.values
    sub = values[_stride(series.n, config.subsample)]
    constant = np.ptp(values, axis=0) == 0
    active = [j for j in range(d) if not constant[j]]
    pairs = [(i, j) for a, i in enumerate(active) for j in active[a + 1:]]

    def work(pair: tuple[int, int]) -> tuple[float, ...]:
        i, j = pair
        x, y = values[:, i], values[:, j]
        return (
            abs(pearson(x, y)),
            abs(spearman(x, y)),
            abs(kendall(x, y)),
            abs(xi_coefficient(sub[:, i], sub[:, j], (config.seed, 3, i, j))),
            abs(xi_coefficient(sub[:, j], sub[:, i], (config.seed, 3, j, i))),
        )

    if config.threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            results = list(pool.map(work, pairs))
    else:
        results = [work(pair) for pair in pairs]
    dcors = _dcor_block_pass(sub, active, 256 * 2**20, config.threads)

    coef = np.zeros((len(METHODS), d, d))
    for (i, j), (p, s, k, xi_ij, xi_ji) in zip(pairs, results):
        for slot, value in enumerate((p, s, k, dcors[i, j])):
            coef[slot, i, j] = coef[slot, j, i] = value
        coef[4, i, j] = xi_ij
        coef[4, j, i] = xi_ji

    # ties resolve to the earliest method in METHODS
    directed = coef.max(axis=0)
    winner = coef.argmax(axis=0)
    use_transpose = directed.T > directed
    matrix = np.where(use_transpose, directed.T, directed)
    winner = np.where(use_transpose, winner.T, winner)
    np.fill_diagonal(matrix, 1.0)
    method = np.array(METHODS, dtype=object)[winner]
    method[matrix == 0.0] = "none"
    np.fill_diagonal(method, "self")
    return CorrelationMatrix(np.clip(matrix, 0.0, 1.0), method, series.names)
