"""Core types: multivariate series, label vectors, variable partitions, score bundles.

Variable indices are 0-based in code. On disk, partitions are stored by
variable name so they survive column reordering.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class DataError(ValueError):
    """Input data violates a structural contract (shape, finiteness, layout)."""


@dataclass(frozen=True)
class TimeSeries:
    """An ``n x d`` matrix of observations with one name per column."""

    values: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", tuple(str(name) for name in self.names))
        problems = validate(self)
        if problems:
            raise DataError("; ".join(problems))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_array(cls, values, names: Sequence[str] | None = None) -> "TimeSeries":
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if names is None:
            names = [f"x{j}" for j in range(values.shape[1])]
        return cls(values, tuple(names))

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j]

    def select(self, columns: Sequence[int]) -> np.ndarray:
        return self.values[:, list(columns)]


def validate(series: TimeSeries) -> list[str]:
    """Return a list of invariant violations; empty when the series is valid.

    Works on partially-built objects so that ``TimeSeries.__post_init__`` can
    report every problem at once.
    """
    problems: list[str] = []
    values = np.asarray(series.values)
    if values.ndim != 2:
        return [f"values must be 2-dimensional, got shape {values.shape}"]
    n, d = values.shape
    if n < 2:
        problems.append(f"need at least 2 observations, got n={n}")
    if d < 1:
        problems.append(f"need at least 1 variable, got d={d}")
    bad_rows, bad_cols = np.nonzero(~np.isfinite(values))
    for i, j in zip(bad_rows[:20], bad_cols[:20]):
        problems.append(f"non-finite value {values[i, j]} at row {i + 1}, column {j + 1}")
    if len(bad_rows) > 20:
        problems.append(f"... {len(bad_rows) - 20} more non-finite values")
    names = list(series.names)
    if len(names) != d:
        problems.append(f"expected {d} names, got {len(names)}")
    seen: set[str] = set()
    for name in names:
        if name in seen:
            problems.append(f"duplicate variable name {name!r}")
        seen.add(name)
    return problems


@dataclass(frozen=True)
class LabelVector:
    """Per-instant ground truth: 1 marks an anomalous observation."""

    labels: np.ndarray

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise DataError(f"labels must be 1-dimensional, got shape {labels.shape}")
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise DataError("labels must only contain 0 and 1")
        labels = labels.astype(np.int8)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def contamination(self) -> float:
        return float(self.labels.mean()) if len(self.labels) else 0.0

    def check_against(self, series: TimeSeries) -> None:
        if len(self) != series.n:
            raise DataError(
                f"label vector has length {len(self)} but the series has n={series.n} observations"
            )


@dataclass(frozen=True)
class Partition:
    """A disjoint, covering grouping of variable indices.

    Parts keep the order they were given in; indices inside a part are sorted.
    Construction does not check coverage because ``d`` is not known here; use
    :func:`is_valid_partition` for that.
    """

    parts: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        parts = tuple(tuple(sorted(int(j) for j in part)) for part in self.parts)
        object.__setattr__(self, "parts", parts)

    def __len__(self) -> int:
        return len(self.parts)

    def __iter__(self):
        return iter(self.parts)

    @property
    def d(self) -> int:
        return sum(len(part) for part in self.parts)

    @classmethod
    def single(cls, d: int) -> "Partition":
        return cls((tuple(range(d)),))

    @classmethod
    def singletons(cls, d: int) -> "Partition":
        return cls(tuple((j,) for j in range(d)))

    @classmethod
    def from_assignment(cls, assignment: Iterable[int]) -> "Partition":
        """Group indices by cluster label, parts ordered by smallest member."""
        groups: dict[int, list[int]] = {}
        for j, label in enumerate(assignment):
            groups.setdefault(int(label), []).append(j)
        return cls(tuple(sorted((tuple(g) for g in groups.values()), key=lambda g: g[0])))

    def assignment(self) -> np.ndarray:
        """Part index of every variable (0-based)."""
        out = np.full(self.d, -1, dtype=int)
        for k, part in enumerate(self.parts):
            out[list(part)] = k
        return out

    def canonical(self) -> "Partition":
        return Partition(tuple(sorted(self.parts, key=lambda part: part[0])))

    def to_names(self, names: Sequence[str]) -> list[list[str]]:
        return [[names[j] for j in part] for part in self.parts]

    @classmethod
    def from_names(cls, parts: Sequence[Sequence[str]], names: Sequence[str]) -> "Partition":
        index = {name: j for j, name in enumerate(names)}
        missing = [name for part in parts for name in part if name not in index]
        if missing:
            raise DataError(f"partition refers to unknown variables: {missing}")
        return cls(tuple(tuple(index[name] for name in part) for part in parts))


def is_valid_partition(partition: Partition, d: int) -> bool:
    """True iff the parts are non-empty, pairwise disjoint and cover ``0..d-1``."""
    if d < 1 or len(partition.parts) == 0:
        return False
    seen: set[int] = set()
    for part in partition.parts:
        if not part:
            return False
        for j in part:
            if j in seen or not 0 <= j < d:
                return False
            seen.add(j)
    return len(seen) == d


def save_partition(partition: Partition, names: Sequence[str], path: str | Path) -> None:
    payload = {"parts": partition.to_names(names)}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_partition(path: str | Path, names: Sequence[str]) -> Partition:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(payload, dict) or "parts" not in payload:
        raise DataError(f"{path}: expected a JSON object with a 'parts' key")
    partition = Partition.from_names(payload["parts"], names)
    if not is_valid_partition(partition, len(names)):
        raise DataError(f"{path}: parts do not form a partition of the {len(names)} variables")
    return partition


@dataclass(frozen=True)
class ScoreBundle:
    """Local scores per part, the fused global score and its origin.

    ``origin`` holds 0-based part indices; the CLI writes them 1-based.
    """

    local: np.ndarray
    normalized: np.ndarray
    global_score: np.ndarray
    origin: np.ndarray
    partition: Partition = field(compare=False)

    @property
    def n(self) -> int:
        return self.global_score.shape[0]

    def check(self) -> list[str]:
        """Recompute the fusion and report any mismatch."""
        problems = []
        if self.normalized.shape != self.local.shape:
            problems.append("normalized and local score shapes differ")
        recomputed = self.normalized.max(axis=0)
        if not np.array_equal(recomputed, self.global_score):
            problems.append("global score is not the per-instant max of normalized scores")
        picked = self.normalized[self.origin, np.arange(self.n)]
        if not np.array_equal(picked, self.global_score):
            problems.append("origin does not attain the global score")
        if self.global_score.size and (self.global_score.min() < 0 or self.global_score.max() > 1):
            problems.append("global score leaves [0, 1]")
        return problems
