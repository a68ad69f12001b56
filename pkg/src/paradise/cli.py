"""Command line interface.

Every subcommand takes the global ``--seed``, ``--threads`` and
``--log-level`` flags, which must come before the subcommand name. The one
seed is handed unchanged to every module, and each module derives its own
streams from it with a distinct tag (see the README). ``--threads`` only
caps parallelism and never changes an output byte.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

from . import __version__
from .benchmark import MODES, BenchmarkConfig, GridDataset, benchmark, format_table, random_grid, summarize
from .correlation import CorrelationConfig, CorrelationMatrix, combined_matrix
from .data import DataError, Partition, ScoreBundle, TimeSeries, load_partition, save_partition
from .datasets import FORMATS, LoadedDataset, file_digest, load_dataset, read_labels, write_labels, write_series_csv
from .detectors import DEFAULT_WINDOWS, DETECTORS, DetectorConfig, WindowConfig
from .evaluation import metrics, roc_auc
from .generator import generate, spec_from_dict, spec_to_dict, with_seed
from .partitioner import PartitionerConfig, partition_variables
from .pipeline import bundle_from_local, run_paradise

logger = logging.getLogger("paradise")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- manifests

def _digests(path: str | Path) -> dict[str, str]:
    path = Path(path)
    if path.is_file():
        return {path.name: file_digest(path)}
    return {str(p.relative_to(path)): file_digest(p) for p in sorted(path.rglob("*")) if p.is_file()}


def _config_echo(config: Any) -> dict:
    # the seed lives once at the top level of a manifest
    echo = asdict(config)
    echo.pop("seed", None)
    echo.pop("threads", None)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in echo.items()}


def run_manifest(command: str, seed: int, configs: dict[str, Any],
                 inputs: dict[str, str | Path | None]) -> dict:
    """Everything needed to rerun ``command`` bit-exactly.

    Configs are echoed with every default filled in. The thread count is left
    out on purpose since it cannot change any output.
    """
    return {
        "artifact": "paradise",
        "version": __version__,
        "command": command,
        "seed": seed,
        "config": {name: _config_echo(c) if hasattr(c, "__dataclass_fields__") else c
                   for name, c in configs.items()},
        "inputs": {role: _digests(p) for role, p in inputs.items() if p is not None},
    }


def _write_json(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- file formats

def matrix_text(matrix: CorrelationMatrix) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["variable", *matrix.names])
    for name, row in zip(matrix.names, matrix.values):
        writer.writerow([name, *(repr(float(v)) for v in row)])
    return out.getvalue()


def write_matrix(matrix: CorrelationMatrix, path: Path, methods_path: Path | None = None) -> None:
    Path(path).write_text(matrix_text(matrix), encoding="utf-8")
    if methods_path is not None:
        with open(methods_path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["variable", *matrix.names])
            for name, row in zip(matrix.names, matrix.method_argmax):
                writer.writerow([name, *row])


def read_matrix_text(text: str, source: str = "<matrix>") -> CorrelationMatrix:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise DataError(f"{source}: empty matrix file")
    names = tuple(rows[0][1:])
    body = rows[1:]
    if len(body) != len(names):
        raise DataError(f"{source}: {len(body)} rows for {len(names)} variables")
    values = np.empty((len(names), len(names)))
    for i, row in enumerate(body):
        if len(row) != len(names) + 1:
            raise DataError(f"{source}:{i + 2}: expected {len(names) + 1} fields, found {len(row)}")
        try:
            values[i] = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise DataError(f"{source}:{i + 2}: {exc}") from None
    method = np.full(values.shape, "unknown", dtype=object)
    return CorrelationMatrix(values, method, names)


def read_matrix(path: str | Path) -> CorrelationMatrix:
    return read_matrix_text(Path(path).read_text(encoding="utf-8"), str(path))


def write_scores(bundle: ScoreBundle, path: Path) -> None:
    """Columns: instant, global, origin (1-based part), then each part's raw local score."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["instant", "global", "origin", *(f"part_{k + 1}" for k in range(len(bundle.partition)))])
        for i in range(bundle.n):
            writer.writerow([i, repr(float(bundle.global_score[i])), int(bundle.origin[i]) + 1,
                             *(repr(float(v)) for v in bundle.local[:, i])])


def read_global_scores(path: str | Path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if not header or "global" not in header:
            raise DataError(f"{path}: expected a scores file with a 'global' column")
        col = header.index("global")
        out = []
        for line, row in enumerate(reader, start=2):
            try:
                out.append(float(row[col]))
            except (ValueError, IndexError):
                raise DataError(f"{path}:{line}: unreadable global score") from None
    return np.asarray(out)


def read_local_scores(path: str | Path, parts: int, n: int) -> np.ndarray:
    """A parts x n matrix from a CSV with one column per part (header row, any names)."""
    with open(path, newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))[1:]
    if len(rows) != n:
        raise DataError(f"{path}: {len(rows)} score rows, series has {n} instants")
    try:
        local = np.array([[float(v) for v in row] for row in rows]).T
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    if local.shape[0] != parts:
        raise DataError(f"{path}: {local.shape[0]} score columns for {parts} parts")
    return local


# ---------------------------------------------------------------- shared flags

def _add_data_flags(p: argparse.ArgumentParser, labels: bool = True) -> None:
    p.add_argument("--data", required=True, help="series file or dataset directory")
    p.add_argument("--format", choices=FORMATS, default="plain-csv")
    if labels:
        p.add_argument("--labels", help="labels file for plain-csv data")
    p.add_argument("--timestamp", action="store_true", help="drop the first column of a plain CSV")
    p.add_argument("--label-column", help="name of a 0/1 label column inside a plain CSV")
    p.add_argument("--fill-nan", action="store_true", help="interpolate missing values")
    p.add_argument("--machine", help="SMD machine id, e.g. machine-1-1")


def _add_correlation_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--subsample", type=int, default=CorrelationConfig.subsample,
                   help="row cap for distance correlation and xi")


def _add_partition_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=("kmeans-sweep", "density"), default="kmeans-sweep")
    p.add_argument("--k-range", type=int, nargs=2, metavar=("LOW", "HIGH"),
                   help="inclusive k sweep (default 2 to min(20, d))")
    p.add_argument("--min-cluster-size", type=int, default=2)
    p.add_argument("--selection", choices=("silhouette", "supervised-roc"), default="silhouette")
    p.add_argument("--n-init", type=int, default=10)


def _add_detector_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--detector", choices=DETECTORS, default="kmeans")
    p.add_argument("--window", type=int, help="window length (default depends on the detector)")
    p.add_argument("--assignment", choices=("last-point", "center"), default="last-point")
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--max-samples", type=int, default=256, help="iforest subsample size")
    p.add_argument("--neighbors", type=int, default=20)
    p.add_argument("--centroids", type=int, default=10)


def _load(args) -> LoadedDataset:
    return load_dataset(args.data, args.format, getattr(args, "labels", None), args.timestamp,
                        args.label_column, args.fill_nan, args.machine)


def _data_inputs(args) -> dict[str, str | None]:
    return {"data": args.data, "labels": getattr(args, "labels", None)}


def _correlation_config(args) -> CorrelationConfig:
    return CorrelationConfig(subsample=args.subsample, seed=args.seed, threads=args.threads)


def _partitioner_config(args) -> PartitionerConfig:
    k_range = tuple(args.k_range) if args.k_range else None
    return PartitionerConfig(backend=args.backend, k_range=k_range, min_cluster_size=args.min_cluster_size,
                             selection=args.selection, seed=args.seed, n_init=args.n_init)


def _detector_configs(args) -> tuple[WindowConfig, DetectorConfig]:
    window = args.window if args.window is not None else DEFAULT_WINDOWS[args.detector]
    return (WindowConfig(window, args.assignment),
            DetectorConfig(kind=args.detector, trees=args.trees, subsample=args.max_samples,
                           neighbors=args.neighbors, centroids=args.centroids, seed=args.seed))


def _fit_split(loaded: LoadedDataset) -> TimeSeries:
    return loaded.train if loaded.train is not None else loaded.series


def _partition(matrix: CorrelationMatrix, loaded: LoadedDataset, config: PartitionerConfig,
               window: WindowConfig, detector: DetectorConfig, threads: int) -> Partition:
    scorer = None
    if config.selection == "supervised-roc":
        if loaded.labels is None:
            raise UsageError("supervised-roc selection needs labels")

        def scorer(candidate: Partition) -> float:
            bundle = run_paradise(loaded.series, candidate, window, detector, loaded.train, threads)
            return roc_auc(bundle.global_score, loaded.labels)

    return partition_variables(matrix, config, scorer)


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- subcommands

def cmd_generate(args) -> int:
    try:
        config = yaml.safe_load(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise DataError(f"{args.config}: {exc}") from None
    if not isinstance(config, dict):
        raise DataError(f"{args.config}: expected a mapping")
    spec = spec_from_dict(config)
    if args.seed_given:
        spec = with_seed(spec, args.seed)
    data = generate(spec)
    out = _out_dir(args.out)
    write_series_csv(data.series, out / "series.csv")
    write_labels(data.labels, out / "labels.csv")
    save_partition(data.ground_truth, data.series.names, out / "partition.json")
    _write_json({"anomalies": [
        {"kind": a.kind, "target": data.series.names[a.target], "start": a.start, "end": a.end,
         "magnitude": a.magnitude} for a in data.injected
    ]}, out / "anomalies.json")
    resolved = spec_to_dict(spec)
    resolved.pop("seed")
    _write_json(run_manifest("generate", spec.seed, {"generator": resolved}, {"config": args.config}),
                out / "manifest.json")
    print(f"wrote n={data.series.n} d={data.series.d} contamination={data.labels.contamination:.4f} to {out}")
    return EXIT_OK


def cmd_correlate(args) -> int:
    loaded = _load(args)
    config = _correlation_config(args)
    matrix = combined_matrix(_fit_split(loaded), config)
    out = _out_dir(args.out)
    write_matrix(matrix, out / "matrix.csv", out / "methods.csv")
    _write_json(run_manifest("correlate", args.seed, {"correlation": config}, _data_inputs(args)),
                out / "manifest.json")
    return EXIT_OK


def cmd_partition(args) -> int:
    if args.matrix is None and args.data is None:
        raise UsageError("partition needs --matrix or --data")
    config = _partitioner_config(args)
    loaded = _load(args) if args.data is not None else None
    if args.matrix is not None:
        matrix = read_matrix(args.matrix)
        if loaded is not None and loaded.series.names != matrix.names:
            raise DataError(f"{args.matrix}: variables do not match {args.data}")
    else:
        # recompute exactly as correlate would
        matrix = read_matrix_text(matrix_text(combined_matrix(_fit_split(loaded), _correlation_config(args))))
    if config.selection == "supervised-roc" and loaded is None:
        raise UsageError("supervised-roc selection needs --data with labels")
    window, detector = _detector_configs(args)
    partition = _partition(matrix, loaded, config, window, detector, args.threads)
    save_partition(partition, matrix.names, Path(args.out))
    print(f"{len(partition)} parts")
    return EXIT_OK


def cmd_detect(args) -> int:
    loaded = _load(args)
    window, detector = _detector_configs(args)
    series = loaded.series
    partition = (load_partition(args.partition, series.names) if args.partition
                 else Partition.single(series.d))
    if args.external_scores:
        bundle = bundle_from_local(read_local_scores(args.external_scores, len(partition), series.n), partition)
    else:
        bundle = run_paradise(series, partition, window, detector, loaded.train, args.threads)
    write_scores(bundle, Path(args.out))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    scores = read_global_scores(args.scores)
    labels = read_labels(args.labels, scores.size)
    result = metrics(scores, labels)
    text = json.dumps(result, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_run(args) -> int:
    loaded = _load(args)
    corr_config = _correlation_config(args)
    part_config = _partitioner_config(args)
    window, detector = _detector_configs(args)
    out = _out_dir(args.out)
    fit = _fit_split(loaded)

    if args.classic:
        partition = Partition.single(loaded.series.d)
    else:
        matrix = combined_matrix(fit, corr_config)
        write_matrix(matrix, out / "matrix.csv", out / "methods.csv")
        # the partitioner sees the matrix as written, so run equals the composed subcommands
        partition = _partition(read_matrix_text(matrix_text(matrix)), loaded, part_config, window, detector,
                               args.threads)
    save_partition(partition, loaded.series.names, out / "partition.json")
    bundle = run_paradise(loaded.series, partition, window, detector, loaded.train, args.threads)
    write_scores(bundle, out / "scores.csv")

    configs: dict[str, Any] = {"mode": "classic" if args.classic else "paradise",
                               "dataset": {"format": args.format, "timestamp": args.timestamp,
                                           "label_column": args.label_column, "fill_nan": args.fill_nan,
                                           "machine": args.machine},
                               "window": window, "detector": detector}
    if not args.classic:
        configs["correlation"] = corr_config
        configs["partitioner"] = part_config
    _write_json(run_manifest("run", args.seed, configs, _data_inputs(args)), out / "manifest.json")

    summary = {"n": loaded.series.n, "d": loaded.series.d, "parts": len(partition)}
    if loaded.labels is not None:
        result = metrics(bundle.global_score, loaded.labels)
        _write_json(result, out / "metrics.json")
        summary |= {"contamination": loaded.labels.contamination, **result}
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _benchmark_config(raw: dict, seed: int, threads: int) -> BenchmarkConfig:
    raw = dict(raw)
    if "grid" in raw:
        g = dict(raw.pop("grid"))
        datasets = random_grid(int(g.get("count", 20)), int(g.get("n", 5000)), tuple(g.get("d", (6, 20))),
                               tuple(g.get("parts", (2, 6))), tuple(g.get("contamination", (0.01, 0.05))),
                               int(g.get("shape_seed", 0)), int(g.get("first_seed", 0)))
    elif "datasets" in raw:
        datasets = [GridDataset(str(e["name"]), spec_from_dict(e["spec"])) for e in raw.pop("datasets")]
    else:
        raise DataError("benchmark config needs 'grid' or 'datasets'")
    part = dict(raw.pop("partitioner", {}))
    if "k_range" in part:
        part["k_range"] = tuple(part["k_range"])
    windows = dict(DEFAULT_WINDOWS) | dict(raw.pop("windows", {}))
    config = BenchmarkConfig(
        datasets=tuple(datasets),
        detectors=tuple(raw.pop("detectors", ("kmeans", "iforest", "lof"))),
        modes=tuple(raw.pop("modes", MODES)),
        windows=windows,
        detector_params=dict(raw.pop("detector_params", {})),
        partitioner=PartitionerConfig(seed=seed, **part),
        correlation=CorrelationConfig(seed=seed, threads=1, **raw.pop("correlation", {})),
        seed=seed,
        threads=threads,
    )
    raw.pop("external", None)
    if raw:
        raise DataError(f"unknown benchmark config keys: {sorted(raw)}")
    unknown = set(config.modes) - set(MODES)
    if unknown:
        raise DataError(f"unknown modes {sorted(unknown)}")
    return config


def _external_scorers(raw: dict, datasets: Sequence[GridDataset]) -> dict:
    """``external: {name: directory}``; scores are read from ``<dir>/<dataset>__<mode>.csv``."""
    scorers = {}
    lengths = {entry.name: entry.spec.n for entry in datasets}
    for name, directory in (raw.get("external") or {}).items():
        def scorer(dataset: str, mode: str, partition: Partition, directory=Path(directory)) -> np.ndarray:
            return read_local_scores(directory / f"{dataset}__{mode}.csv", len(partition), lengths[dataset])
        scorers[str(name)] = scorer
    return scorers


def cmd_benchmark(args) -> int:
    try:
        raw = yaml.safe_load(Path(args.config).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise DataError(f"{args.config}: {exc}") from None
    seed = args.seed if args.seed_given else int(raw.pop("seed", 0))
    raw.pop("seed", None)
    config = _benchmark_config(raw, seed, args.threads)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = benchmark(config, _external_scorers(raw, config.datasets), out)
    sys.stdout.write(format_table(summarize(rows)))
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="paradise", description=__doc__.split("\n\n")[0])
    parser.add_argument("--seed", type=int, default=None, help="global seed (default 0)")
    parser.add_argument("--threads", type=int, default=1, help="worker cap; never changes outputs")
    parser.add_argument("--log-level", default="WARNING",
                        choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    parser.add_argument("--version", action="version", version=f"paradise {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a synthetic dataset from a generator config")
    p.add_argument("--config", required=True, help="YAML or JSON generator config")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("correlate", help="combined correlation matrix of a dataset")
    _add_data_flags(p)
    _add_correlation_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("partition", help="cluster variables from a matrix CSV")
    p.add_argument("--matrix", help="matrix CSV from correlate")
    p.add_argument("--out", required=True, help="partition JSON path")
    p.add_argument("--data", help="data to correlate when no matrix is given; labelled data for supervised-roc")
    p.add_argument("--format", choices=FORMATS, default="plain-csv")
    p.add_argument("--labels")
    p.add_argument("--timestamp", action="store_true")
    p.add_argument("--label-column")
    p.add_argument("--fill-nan", action="store_true")
    p.add_argument("--machine")
    _add_correlation_flags(p)
    _add_partition_flags(p)
    _add_detector_flags(p)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("detect", help="local detection and fusion over a partition")
    _add_data_flags(p)
    _add_detector_flags(p)
    p.add_argument("--partition", help="partition JSON (default: one part)")
    p.add_argument("--external-scores", help="CSV of precomputed local scores, one column per part")
    p.add_argument("--out", required=True, help="scores CSV path")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", help="metrics of a scores CSV against labels")
    p.add_argument("--scores", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", help="metrics JSON path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="correlate, partition, detect and evaluate in one go")
    _add_data_flags(p)
    _add_correlation_flags(p)
    _add_partition_flags(p)
    _add_detector_flags(p)
    p.add_argument("--classic", action="store_true", help="one detector over all variables")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("benchmark", help="classic / paradise / ideal comparison over a dataset grid")
    p.add_argument("--config", required=True, help="YAML or JSON benchmark config")
    p.add_argument("--out", required=True, help="results CSV path")
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = 0
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DataError as exc:
        print(f"paradise: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (UsageError, ValueError) as exc:
        print(f"paradise: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"paradise: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        logger.debug("internal error", exc_info=True)
        print(f"paradise: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
