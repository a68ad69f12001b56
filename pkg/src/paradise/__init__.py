"""Partition-based anomaly detection for multivariate time series."""

from .correlation import CorrelationConfig, CorrelationMatrix, combined_matrix
from .data import LabelVector, Partition, ScoreBundle, TimeSeries, is_valid_partition, validate
from .detectors import DetectorConfig, WindowConfig, detect_part
from .partitioner import PartitionerConfig, partition_variables
from .pipeline import fuse, normalize_minmax, run_classic, run_paradise

__version__ = "0.1.0"

__all__ = [
    "CorrelationConfig",
    "CorrelationMatrix",
    "DetectorConfig",
    "LabelVector",
    "Partition",
    "PartitionerConfig",
    "ScoreBundle",
    "TimeSeries",
    "WindowConfig",
    "combined_matrix",
    "detect_part",
    "fuse",
    "is_valid_partition",
    "normalize_minmax",
    "partition_variables",
    "run_classic",
    "run_paradise",
    "validate",
]
