"""Reading and writing series, labels and score files.

Supported layouts
-----------------
plain-csv
    Header row of variable names, one row per instant. ``timestamp=True``
    drops the first column; ``label_column`` names a 0/1 label column to split
    off; a separate labels file (one value per line, optional header) also works.
smd
    Server Machine Dataset layout: ``<root>/train/<machine>.txt``,
    ``<root>/test/<machine>.txt`` and ``<root>/test_label/<machine>.txt``,
    headerless comma-separated numbers. ``path`` is the root directory or the
    test file itself.
swat
    Community CSV export: header row, a timestamp column (``Timestamp``) and a
    ``Normal/Attack`` label column. A directory is searched for ``*Normal*.csv``
    (train) and ``*Attack*.csv`` (test).
wadi
    Community CSV export: header row, ``Row``/``Date``/``Time`` columns and a
    label column whose name contains ``attack``; a column in {-1, 1} marks
    attacks with -1 (2019 release), a 0/1 column marks them with 1. A
    directory is searched for ``*14days*.csv`` (train) and ``*attack*.csv``
    (test).

Missing values are rejected unless ``fill_nan`` is set, which linearly
interpolates interior gaps, copies the nearest value into edge gaps and
drops columns that are entirely empty.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import DataError, LabelVector, TimeSeries

logger = logging.getLogger(__name__)

FORMATS = ("plain-csv", "smd", "wadi", "swat")
_MISSING = {"", "nan", "NaN", "NA", "null"}


@dataclass(frozen=True)
class LoadedDataset:
    series: TimeSeries  # the scored split
    labels: LabelVector | None = None
    train: TimeSeries | None = None

    @property
    def contamination(self) -> float | None:
        return None if self.labels is None else self.labels.contamination


def file_digest(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _parse_rows(path: Path, rows: Sequence[Sequence[str]], first_line: int) -> np.ndarray:
    width = len(rows[0]) if rows else 0
    out = np.empty((len(rows), width))
    for r, row in enumerate(rows):
        line = first_line + r
        if len(row) != width:
            raise DataError(f"{path}:{line}: expected {width} fields, found {len(row)}")
        for c, cell in enumerate(row):
            cell = cell.strip()
            if cell in _MISSING:
                out[r, c] = math.nan
                continue
            try:
                out[r, c] = float(cell)
            except ValueError:
                raise DataError(f"{path}:{line}: cannot parse {cell!r} as a number "
                                f"(column {c + 1})") from None
    return out


def _read_table(path: Path, header: bool = True) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8-sig") as handle:
        rows = [row for row in csv.reader(handle) if row and any(cell.strip() for cell in row)]
    if not rows:
        raise DataError(f"{path}: file is empty")
    if header:
        return [name.strip() for name in rows[0]], rows[1:]
    return [f"dim_{j}" for j in range(len(rows[0]))], rows


def fill_missing(values: np.ndarray, names: Sequence[str]) -> tuple[np.ndarray, list[str]]:
    """Interpolate interior gaps, edge-fill, drop all-empty columns."""
    keep = ~np.isnan(values).all(axis=0)
    dropped = [name for name, k in zip(names, keep) if not k]
    if dropped:
        logger.warning("dropping %d empty column(s): %s", len(dropped), dropped)
    values = values[:, keep].copy()
    index = np.arange(values.shape[0])
    for j in range(values.shape[1]):
        column = values[:, j]
        missing = np.isnan(column)
        if missing.any():
            column[missing] = np.interp(index[missing], index[~missing], column[~missing])
    return values, [name for name, k in zip(names, keep) if k]


def _to_series(path: Path, values: np.ndarray, names: Sequence[str], fill_nan: bool) -> TimeSeries:
    if fill_nan:
        values, names = fill_missing(values, names)
    else:
        bad = np.argwhere(np.isnan(values))
        if bad.size:
            i, j = bad[0]
            raise DataError(
                f"{path}: {len(bad)} missing value(s), first at data row {i + 1}, column "
                f"{names[j]!r}; pass fill_nan to interpolate"
            )
    return TimeSeries(values, tuple(names))


def read_series_csv(path: str | Path, timestamp: bool = False, label_column: str | None = None,
                    fill_nan: bool = False) -> tuple[TimeSeries, LabelVector | None]:
    path = Path(path)
    names, rows = _read_table(path)
    values = _parse_rows(path, rows, first_line=2)
    if values.shape[1] != len(names):
        raise DataError(f"{path}: header has {len(names)} names but rows have {values.shape[1]} fields")
    labels = None
    if label_column is not None:
        if label_column not in names:
            raise DataError(f"{path}: no label column {label_column!r}")
        j = names.index(label_column)
        labels = _labels(path, values[:, j])
        values = np.delete(values, j, axis=1)
        names = names[:j] + names[j + 1:]
    if timestamp:
        values, names = values[:, 1:], names[1:]
    return _to_series(path, values, names, fill_nan), labels


def _labels(path: Path, raw: np.ndarray) -> LabelVector:
    if np.isnan(raw).any() or not np.isin(raw, (0, 1)).all():
        raise DataError(f"{path}: labels must be 0 or 1")
    return LabelVector(raw.astype(np.int8))


def read_labels(path: str | Path, n: int | None = None) -> LabelVector:
    """One 0/1 value per line; a non-numeric first line is treated as a header."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8-sig") as handle:
        rows = [row for row in csv.reader(handle) if row]
    if rows and not _is_number(rows[0][-1]):
        rows = rows[1:]
        first = 2
    else:
        first = 1
    raw = _parse_rows(path, [[row[-1]] for row in rows], first)[:, 0]
    labels = _labels(path, raw)
    if n is not None and len(labels) != n:
        raise DataError(f"{path}: {len(labels)} labels but the series has {n} observations")
    return labels


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def write_series_csv(series: TimeSeries, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(series.names)
        writer.writerows([[repr(float(v)) for v in row] for row in series.values])


def write_labels(labels: LabelVector, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("label\n")
        handle.writelines(f"{int(v)}\n" for v in labels.labels)


def _load_smd(path: Path, machine: str | None, fill_nan: bool) -> LoadedDataset:
    if path.is_file():
        root, machine = path.parent.parent, path.stem
    else:
        root = path
        if machine is None:
            candidates = sorted((root / "test").glob("*.txt"))
            if not candidates:
                raise DataError(f"{root}: no test/*.txt files")
            machine = candidates[0].stem
    test_path = root / "test" / f"{machine}.txt"
    names, rows = _read_table(test_path, header=False)
    test = _to_series(test_path, _parse_rows(test_path, rows, 1), names, fill_nan)
    train = None
    train_path = root / "train" / f"{machine}.txt"
    if train_path.exists():
        _, rows = _read_table(train_path, header=False)
        train = _to_series(train_path, _parse_rows(train_path, rows, 1), names, fill_nan)
        if train.d != test.d:
            raise DataError(f"{train_path}: {train.d} columns, test split has {test.d}")
    label_path = root / "test_label" / f"{machine}.txt"
    labels = read_labels(label_path, test.n) if label_path.exists() else None
    return LoadedDataset(test, labels, train)


def _find(directory: Path, patterns: Sequence[str]) -> Path | None:
    for pattern in patterns:
        found = sorted(p for p in directory.iterdir() if p.is_file() and p.match(pattern))
        if found:
            return found[0]
    return None


def _load_labelled_csv(path: Path, drop: Sequence[str], label_of, is_label, fill_nan: bool,
                       require_labels: bool) -> tuple[TimeSeries, LabelVector | None]:
    names, rows = _read_table(path)
    for r, row in enumerate(rows):
        if len(row) != len(names):
            raise DataError(f"{path}:{r + 2}: expected {len(names)} fields, found {len(row)}")
    label_idx = [j for j, name in enumerate(names) if is_label(name)]
    drop_idx = {j for j, name in enumerate(names) if name.lower() in drop}
    labels = None
    if label_idx:
        j = label_idx[0]
        try:
            labels = LabelVector(label_of([row[j] for row in rows]))
        except (ValueError, IndexError) as exc:
            raise DataError(f"{path}: unreadable label column {names[j]!r}: {exc}") from None
        drop_idx.add(j)
    elif require_labels:
        raise DataError(f"{path}: no label column found")
    keep = [j for j in range(len(names)) if j not in drop_idx]
    trimmed = [[row[j] for j in keep] for row in rows]
    values = _parse_rows(path, trimmed, 2)
    return _to_series(path, values, [names[j] for j in keep], fill_nan), labels


def _swat_labels(cells: Sequence[str]) -> np.ndarray:
    values = [cell.strip().replace(" ", "").lower() for cell in cells]
    unknown = set(values) - {"normal", "attack"}
    if unknown:
        raise ValueError(f"unexpected labels {sorted(unknown)}")
    return np.array([value == "attack" for value in values], dtype=np.int8)


def _wadi_labels(cells: Sequence[str]) -> np.ndarray:
    """-1 marks an attack when the column uses {-1, 1}; otherwise 1 does.

    An all-ones column is read as the {-1, 1} convention with no attacks.
    """
    values = np.array([float(cell) for cell in cells])
    if np.isin(values, (-1, 1)).all() and ((values == -1).any() or (values == 1).all()):
        return (values == -1).astype(np.int8)
    if np.isin(values, (0, 1)).all():
        return values.astype(np.int8)
    raise ValueError("labels must be in {-1, 1} or {0, 1}")


def _load_pair(path: Path, train_patterns, test_patterns, drop, label_of, is_label,
               fill_nan: bool) -> LoadedDataset:
    train_path = None
    if path.is_dir():
        train_path = _find(path, train_patterns)
        test_path = _find(path, test_patterns)
        if test_path is None:
            raise DataError(f"{path}: no test file matching {list(test_patterns)}")
    else:
        test_path = path
    test, labels = _load_labelled_csv(test_path, drop, label_of, is_label, fill_nan, True)
    train = None
    if train_path is not None and train_path != test_path:
        train, _ = _load_labelled_csv(train_path, drop, label_of, is_label, fill_nan, False)
        if train.names != test.names:
            raise DataError(f"{train_path}: columns differ from {test_path}")
    return LoadedDataset(test, labels, train)


def load_dataset(path: str | Path, format: str = "plain-csv", labels_path: str | Path | None = None,
                 timestamp: bool = False, label_column: str | None = None,
                 fill_nan: bool = False, machine: str | None = None) -> LoadedDataset:
    path = Path(path)
    if format not in FORMATS:
        raise DataError(f"unknown format {format!r}; expected one of {FORMATS}")
    if not path.exists():
        raise DataError(f"{path}: no such file or directory")
    if format == "plain-csv":
        series, labels = read_series_csv(path, timestamp, label_column, fill_nan)
        if labels_path is not None:
            labels = read_labels(labels_path, series.n)
        loaded = LoadedDataset(series, labels)
    elif format == "smd":
        loaded = _load_smd(path, machine, fill_nan)
    elif format == "swat":
        loaded = _load_pair(path, ("*Normal*.csv", "*normal*.csv"), ("*Attack*.csv", "*attack*.csv"),
                            {"timestamp"}, _swat_labels,
                            lambda name: name.replace(" ", "").lower() == "normal/attack", fill_nan)
    else:
        loaded = _load_pair(path, ("*14days*.csv", "*14_days*.csv"), ("*attack*.csv", "*Attack*.csv"),
                            {"row", "date", "time"}, _wadi_labels,
                            lambda name: "attack" in name.lower(), fill_nan)
    if loaded.labels is not None:
        loaded.labels.check_against(loaded.series)
        logger.info("%s: n=%d d=%d contamination=%.4f%%", path, loaded.series.n, loaded.series.d,
                    100 * loaded.contamination)
    return loaded
