"""Group variables by clustering the rows of the combined correlation matrix.

Each row of the matrix is a point in R^d; variables with similar dependence
profiles land close together. Two backends are available: a k-means sweep
with model selection, and an HDBSCAN-style density clustering.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .correlation import CorrelationMatrix
from .data import Partition

logger = logging.getLogger(__name__)

NOISE = -1


def _sq_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = (
        np.einsum("ij,ij->i", points, points)[:, None]
        - 2.0 * points @ centers.T
        + np.einsum("ij,ij->i", centers, centers)[None, :]
    )
    return np.maximum(d2, 0.0)


def _kmeans_pp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    closest = _sq_distances(points, points[chosen])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            # every point coincides with a chosen center
            remaining = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(remaining))
        chosen.append(idx)
        closest = np.minimum(closest, _sq_distances(points, points[[idx]])[:, 0])
    return points[chosen].copy()


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    iterations: int


def kmeans(points, k: int, seed=0, max_iter: int = 300, tol: float = 1e-6,
           n_init: int = 1) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding.

    Stops when no centroid moves by more than ``tol``. An emptied cluster is
    re-seeded with the point farthest from its current centroid. With
    ``n_init > 1`` the lowest-inertia run is kept.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    best: KMeansResult | None = None
    for _ in range(n_init):
        centers = _kmeans_pp(points, k, rng)
        iterations = 0
        for iterations in range(1, max_iter + 1):
            d2 = _sq_distances(points, centers)
            labels = d2.argmin(axis=1)
            new_centers = np.empty_like(centers)
            point_d2 = d2[np.arange(n), labels]
            taken: set[int] = set()
            for c in range(k):
                members = labels == c
                if members.any():
                    new_centers[c] = points[members].mean(axis=0)
                else:
                    order = np.argsort(-point_d2, kind="stable")
                    far = next(int(i) for i in order if int(i) not in taken)
                    taken.add(far)
                    new_centers[c] = points[far]
                    labels[far] = c
                    point_d2[far] = 0.0
            shift = np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max()
            centers = new_centers
            if shift < tol:
                break
        d2 = _sq_distances(points, centers)
        labels = d2.argmin(axis=1)
        inertia = float(d2[np.arange(n), labels].sum())
        if best is None or inertia < best.inertia:
            best = KMeansResult(labels, centers, inertia, iterations)
    assert best is not None
    return best


def kmeans_cluster(points, k: int, seed=0, n_init: int = 1) -> np.ndarray:
    return kmeans(points, k, seed=seed, n_init=n_init).labels


def _pairwise(points: np.ndarray) -> np.ndarray:
    return np.sqrt(_sq_distances(points, points))


def _mst_prim(weights: np.ndarray) -> list[tuple[int, int, float]]:
    n = weights.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = weights[0].copy()
    parent = np.zeros(n, dtype=int)
    edges = []
    for _ in range(n - 1):
        candidates = np.where(in_tree, np.inf, best)
        v = int(np.argmin(candidates))
        edges.append((int(parent[v]), v, float(best[v])))
        in_tree[v] = True
        closer = weights[v] < best
        parent[closer] = v
        best = np.minimum(best, weights[v])
    return edges


def _components(nodes: Sequence[int], edges: list[tuple[int, int, float]]) -> list[list[int]]:
    parent = {v: v for v in nodes}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for a, b, _ in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for v in nodes:
        groups.setdefault(find(v), []).append(v)
    return sorted(groups.values(), key=lambda g: g[0])


@dataclass
class _Cluster:
    points: list[int]
    birth: float
    stability: float = 0.0
    children: list["_Cluster"] | None = None


def density_cluster(points, min_cluster_size: int = 2, seed=0) -> np.ndarray:
    """HDBSCAN-style labels; ``-1`` marks noise.

    Core distance is the distance to the ``min_cluster_size``-th nearest point
    counting the point itself. The condensed tree is built top-down from the
    mutual-reachability MST: all edges of the current largest weight are cut
    at once, so equal-height merges form a single level. Clusters are chosen by
    excess of mass; the root is only eligible when every point coincides.
    ``seed`` is accepted for interface symmetry; the procedure is deterministic.
    """
    if min_cluster_size < 2:
        raise ValueError(f"min_cluster_size must be >= 2, got {min_cluster_size}")
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    labels = np.full(n, NOISE, dtype=int)
    if n < min_cluster_size:
        return labels
    dist = _pairwise(points)
    if dist.max() == 0.0:
        labels[:] = 0
        return labels
    core = np.sort(dist, axis=1)[:, min_cluster_size - 1]
    reach = np.maximum(np.maximum(core[:, None], core[None, :]), dist)
    np.fill_diagonal(reach, np.inf)
    mst = _mst_prim(reach)
    floor = 1e-12 * dist.max()

    def lam(weight: float) -> float:
        return 1.0 / max(weight, floor)

    def grow(cluster: _Cluster) -> None:
        members = set(cluster.points)
        edges = [e for e in mst if e[0] in members and e[1] in members]
        nodes = list(cluster.points)
        while edges:
            top = max(w for _, _, w in edges)
            level = lam(top)
            edges = [e for e in edges if e[2] < top * (1 - 1e-12)]
            parts = _components(nodes, edges)
            big = [p for p in parts if len(p) >= min_cluster_size]
            small = [p for p in parts if len(p) < min_cluster_size]
            cluster.stability += sum(len(p) for p in small) * (level - cluster.birth)
            if len(big) >= 2:
                cluster.stability += sum(len(p) for p in big) * (level - cluster.birth)
                cluster.children = [_Cluster(p, level) for p in big]
                for child in cluster.children:
                    grow(child)
                return
            if not big:
                return
            nodes = big[0]
            keep = set(nodes)
            edges = [e for e in edges if e[0] in keep and e[1] in keep]

    root = _Cluster(list(range(n)), 0.0)
    grow(root)

    def select(cluster: _Cluster) -> tuple[float, list[_Cluster]]:
        if not cluster.children:
            return cluster.stability, [cluster]
        total, chosen = 0.0, []
        for child in cluster.children:
            s, c = select(child)
            total += s
            chosen.extend(c)
        if total > cluster.stability:
            return total, chosen
        return cluster.stability, [cluster]

    selected: list[_Cluster] = []
    for child in root.children or []:
        selected.extend(select(child)[1])
    for label, cluster in enumerate(sorted(selected, key=lambda c: min(c.points))):
        labels[cluster.points] = label
    return labels


def silhouette_score(points, assignment) -> float | None:
    """Mean silhouette (Euclidean). ``None`` when fewer than 2 clusters.

    Points alone in their cluster score 0.
    """
    points = np.asarray(points, dtype=float)
    assignment = np.asarray(assignment)
    clusters = np.unique(assignment)
    if clusters.size < 2:
        return None
    dist = _pairwise(points)
    n = points.shape[0]
    scores = np.zeros(n)
    members = {c: assignment == c for c in clusters}
    sizes = {c: int(m.sum()) for c, m in members.items()}
    for i in range(n):
        own = assignment[i]
        if sizes[own] == 1:
            continue
        a = dist[i, members[own]].sum() / (sizes[own] - 1)
        b = min(dist[i, members[c]].mean() for c in clusters if c != own)
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())


@dataclass(frozen=True)
class PartitionerConfig:
    backend: str = "kmeans-sweep"  # or "density"
    k_range: tuple[int, int] | None = None  # inclusive; default (2, min(20, d))
    min_cluster_size: int = 2
    selection: str = "silhouette"  # or "supervised-roc"
    seed: int = 0
    n_init: int = 10

    def __post_init__(self) -> None:
        if self.backend not in ("kmeans-sweep", "density"):
            raise ValueError(f"unknown partitioner backend {self.backend!r}")
        if self.selection not in ("silhouette", "supervised-roc"):
            raise ValueError(f"unknown selection mode {self.selection!r}")
        if self.min_cluster_size < 2:
            raise ValueError("min_cluster_size must be >= 2")
        if self.k_range is not None and self.k_range[0] > self.k_range[1]:
            raise ValueError(f"empty k_range {self.k_range}")

    def resolved_k_range(self, d: int) -> tuple[int, int]:
        low, high = self.k_range if self.k_range is not None else (2, min(20, d))
        low, high = max(1, min(low, d)), max(1, min(high, d))
        return low, high


def _from_labels(labels: np.ndarray) -> Partition:
    """Noise points become singleton parts."""
    labels = np.asarray(labels).copy()
    next_label = labels.max() + 1 if labels.size else 0
    for j in np.flatnonzero(labels == NOISE):
        labels[j] = next_label
        next_label += 1
    return Partition.from_assignment(labels)


def candidate_partitions(matrix: CorrelationMatrix, config: PartitionerConfig) -> list[Partition]:
    """Every partition the configured backend would consider, deduplicated in order."""
    points = np.asarray(matrix.values, dtype=float)
    d = points.shape[0]
    if d < 2:
        return [Partition.single(d)]
    low, high = config.resolved_k_range(d)
    found: list[Partition] = []
    if config.backend == "kmeans-sweep":
        for k in range(low, high + 1):
            labels = kmeans_cluster(points, k, seed=(config.seed, 2, k), n_init=config.n_init)
            found.append(Partition.from_assignment(labels))
    else:
        sizes = [config.min_cluster_size]
        if config.selection == "supervised-roc":
            sizes = list(range(max(2, low), max(2, high) + 1))
        for size in sizes:
            found.append(_from_labels(density_cluster(points, size, config.seed)))
    unique: list[Partition] = []
    for partition in found:
        if partition not in unique:
            unique.append(partition)
    return unique


def partition_variables(
    matrix: CorrelationMatrix,
    config: PartitionerConfig | None = None,
    scorer: Callable[[Partition], float] | None = None,
) -> Partition:
    """Estimate the variable partition from a combined correlation matrix.

    ``scorer`` is required for ``supervised-roc`` selection: it maps a
    candidate partition to the ROC-AUC of the full pipeline on labelled data.
    """
    config = config or PartitionerConfig()
    points = np.asarray(matrix.values, dtype=float)
    d = points.shape[0]
    if d < 2:
        logger.warning("only %d variable(s); returning a single part", d)
        return Partition.single(d)
    candidates = candidate_partitions(matrix, config)
    if config.selection == "supervised-roc":
        if scorer is None:
            raise ValueError("supervised-roc selection needs a scorer (labels are required)")
        scores = [scorer(p) for p in candidates]
        return candidates[int(np.argmax(scores))]
    if config.backend == "density":
        return candidates[0]
    best, best_score = candidates[0], -np.inf
    for partition in candidates:
        score = silhouette_score(points, partition.assignment())
        if score is not None and score > best_score:
            best, best_score = partition, score
    return best
