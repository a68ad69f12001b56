"""Synthetic multivariate series with known variable groups and injected anomalies.

Every group has one *support* variable, a sum of sinusoids, and any number
of *tracking* variables that follow the direction of the support through a
step recurrence. Anomalies touch a single column over an interval and the
groups themselves are the ground-truth partition.

Tracking recurrences, with ``s = sign(f[m+1] - f[m])`` and ``sign(0) = 0``:

* linear:       ``u[m+1] = u[m] + s * r``
* exponential:  ``u[m+1] = u[m] * (1 + r) ** s``  (requires ``u[0] > 0``)
* logarithmic:  ``u[m+1] = u[m] + s * r / (1 + m * r)``

The exponential and logarithmic forms are this package's choice; any
recurrence that moves with the support's direction fits the construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .data import DataError, LabelVector, Partition, TimeSeries

TRACKING_MODES = ("linear", "exponential", "logarithmic")
ANOMALY_KINDS = ("noise", "frequency", "correlation")


@dataclass(frozen=True)
class SineTerm:
    amplitude: float
    frequency: float  # angular, radians per observation
    phase: float = 0.0
    variable_frequency: bool = False


@dataclass(frozen=True)
class SupportSpec:
    terms: tuple[SineTerm, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ValueError("a support needs at least one sine term")
        if any(term.amplitude == 0 for term in self.terms):
            raise ValueError("sine amplitudes must be nonzero")


@dataclass(frozen=True)
class TrackingSpec:
    mode: str = "linear"
    step: float = 0.05
    u0: float | None = None
    support_index: int = 0

    def __post_init__(self) -> None:
        if self.mode not in TRACKING_MODES:
            raise ValueError(f"unknown tracking mode {self.mode!r}")
        if self.step <= 0:
            raise ValueError(f"tracking step must be positive, got {self.step}")
        if self.support_index != 0:
            raise ValueError("each group has a single support; support_index must be 0")
        if self.mode == "exponential" and self.start <= 0:
            raise ValueError("exponential tracking needs a positive initial value")

    @property
    def start(self) -> float:
        if self.u0 is not None:
            return float(self.u0)
        return 1.0 if self.mode == "exponential" else 0.0


@dataclass(frozen=True)
class SubsetSpec:
    support: SupportSpec
    tracking: tuple[TrackingSpec, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "tracking", tuple(self.tracking))

    @property
    def size(self) -> int:
        return 1 + len(self.tracking)


@dataclass(frozen=True)
class AnomalySpec:
    """One anomaly on column ``target`` over ``[start, end)``.

    ``magnitude`` is the noise standard deviation relative to the clean
    column's standard deviation (noise), the frequency scale factor
    (frequency), and unused for correlation anomalies.
    """

    kind: str
    target: int
    start: int
    end: int
    magnitude: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ANOMALY_KINDS:
            raise ValueError(f"unknown anomaly kind {self.kind!r}")
        if not 0 <= self.start < self.end:
            raise ValueError(f"invalid anomaly interval [{self.start}, {self.end})")


@dataclass(frozen=True)
class GeneratorSpec:
    n: int
    subsets: tuple[SubsetSpec, ...]
    contamination: float = 0.0
    seed: int = 0
    kinds: tuple[str, ...] = ANOMALY_KINDS
    interval_fraction: tuple[float, float] = (0.005, 0.02)
    noise_range: tuple[float, float] = (0.3, 1.0)
    frequency_range: tuple[float, float] = (2.0, 4.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "subsets", tuple(self.subsets))
        object.__setattr__(self, "kinds", tuple(self.kinds))
        if self.n < 100:
            raise ValueError(f"n must be >= 100, got {self.n}")
        if not self.subsets:
            raise ValueError("at least one variable group is required")
        if not 0 <= self.contamination < 0.5:
            raise ValueError(f"contamination must lie in [0, 0.5), got {self.contamination}")
        unknown = set(self.kinds) - set(ANOMALY_KINDS)
        if unknown or not self.kinds:
            raise ValueError(f"invalid anomaly kinds {self.kinds}")

    @property
    def d(self) -> int:
        return sum(subset.size for subset in self.subsets)


@dataclass(frozen=True)
class Role:
    """What a column is: a group's support, or a tracker of column ``support_column``."""

    group: int
    support: SupportSpec
    tracking: TrackingSpec | None = None
    support_column: int | None = None

    @property
    def is_support(self) -> bool:
        return self.tracking is None


@dataclass(frozen=True)
class SyntheticDataset:
    series: TimeSeries
    labels: LabelVector
    ground_truth: Partition
    injected: tuple[AnomalySpec, ...]
    clean: np.ndarray = field(repr=False, compare=False)
    roles: tuple[Role, ...] = field(repr=False, compare=False)


def _phase(term: SineTerm, x: np.ndarray) -> np.ndarray:
    """Sine argument at ``x``.

    A variable-frequency term runs at instantaneous frequency
    ``a * (1 + 0.5 * sin(a * x / 50))``; its phase is the integral of that rate.
    """
    a = term.frequency
    if term.variable_frequency:
        return a * x + 25.0 * (1.0 - np.cos(a * x / 50.0)) + term.phase
    return a * x + term.phase


def gen_support(spec: SupportSpec, n: int, seed=None) -> np.ndarray:
    """Sum of sines sampled at ``x = 0 .. n-1``. ``seed`` is unused; terms are explicit."""
    x = np.arange(n, dtype=float)
    out = np.zeros(n)
    for term in spec.terms:
        out += term.amplitude * np.sin(_phase(term, x))
    return out


def _track(spec: TrackingSpec, support: np.ndarray, start: int, end: int, u_start: float,
           flip: bool = False) -> np.ndarray:
    """Values ``u[start+1 .. end-1]`` given ``u[start]``."""
    direction = np.sign(np.diff(support[start:end]))
    if flip:
        direction = -direction
    r = spec.step
    m = np.arange(start, end - 1)
    if spec.mode == "linear":
        return u_start + np.cumsum(direction * r)
    if spec.mode == "exponential":
        return u_start * np.exp(np.cumsum(direction) * math.log1p(r))
    return u_start + np.cumsum(direction * r / (1.0 + m * r))


def gen_tracking(spec: TrackingSpec, support) -> np.ndarray:
    support = np.asarray(support, dtype=float)
    out = np.empty(support.size)
    out[0] = spec.start
    out[1:] = _track(spec, support, 0, support.size, spec.start)
    return out


def inject_anomaly(values: np.ndarray, labels: np.ndarray, spec: AnomalySpec,
                   roles: Sequence[Role], clean: np.ndarray, seed=0) -> np.ndarray:
    """Modify column ``spec.target`` of ``values`` in place and label the interval.

    ``clean`` holds the anomaly-free data, used for noise scale and for the
    support a tracking column follows.
    """
    n, d = values.shape
    if not 0 <= spec.target < d:
        raise ValueError(f"anomaly target {spec.target} outside 0..{d - 1}")
    if spec.end > n:
        raise ValueError(f"anomaly interval [{spec.start}, {spec.end}) exceeds n={n}")
    role = roles[spec.target]
    s, e, j = spec.start, spec.end, spec.target
    if spec.kind == "noise":
        rng = np.random.default_rng(seed)
        sigma = spec.magnitude * float(clean[:, j].std())
        values[s:e, j] += rng.normal(0.0, 1.0, e - s) * sigma
    elif spec.kind == "frequency":
        if not role.is_support:
            raise ValueError("frequency anomalies apply to support variables")
        x = np.arange(s, e, dtype=float)
        segment = np.zeros(e - s)
        for term in role.support.terms:
            theta = _phase(term, x)
            # speed up the phase from the interval start so the value stays continuous there
            segment += term.amplitude * np.sin(theta[0] + spec.magnitude * (theta - theta[0]))
        values[s:e, j] = segment
    else:
        if role.is_support:
            raise ValueError("correlation anomalies apply to tracking variables")
        support = clean[:, role.support_column]
        values[s + 1:e, j] = _track(role.tracking, support, s, e, values[s, j], flip=True)
    labels[s:e] = 1
    return labels


def _derived(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *keys]))


def random_support(rng: np.random.Generator, variable_probability: float = 0.25) -> SupportSpec:
    """One dominant sine plus up to two weaker odd harmonics of it.

    Odd harmonics keep the support half-wave symmetric, so it spends as long
    rising as falling and linear trackers do not drift. Their slope budget
    stays below the dominant term's. Variable-frequency supports are a single
    modulated sine.
    """
    period = rng.uniform(100.0, 1000.0)
    main = SineTerm(
        amplitude=float(rng.uniform(0.5, 2.0)),
        frequency=2 * math.pi / period,
        phase=float(rng.uniform(0, 2 * math.pi)),
        variable_frequency=bool(rng.random() < variable_probability),
    )
    terms = [main]
    # a modulated main term would fall out of step with fixed harmonics
    extra = 0 if main.variable_frequency else int(rng.integers(0, 3))
    for ratio in rng.choice([3, 5], size=extra, replace=False):
        terms.append(SineTerm(
            amplitude=float(main.amplitude / ratio * rng.uniform(0.1, 0.4) / extra),
            frequency=float(main.frequency * ratio),
            phase=float(rng.uniform(0, 2 * math.pi)),
        ))
    return SupportSpec(tuple(terms))


def random_tracking(rng: np.random.Generator, modes: Sequence[str] = TRACKING_MODES) -> TrackingSpec:
    mode = str(rng.choice(list(modes)))
    if mode == "exponential":
        return TrackingSpec(mode, float(rng.uniform(0.001, 0.005)))
    return TrackingSpec(mode, float(rng.uniform(0.01, 0.1)))


def random_spec(n: int, d: int, parts: int, contamination: float, seed: int,
                modes: Sequence[str] = TRACKING_MODES, **options) -> GeneratorSpec:
    """A spec with ``d`` variables split into ``parts`` groups of random sizes."""
    if not 1 <= parts <= d:
        raise ValueError(f"need 1 <= parts <= d, got parts={parts}, d={d}")
    rng = _derived(seed, 0)
    sizes = np.ones(parts, dtype=int)
    if d >= 2 * parts:
        sizes += 1
    extra = d - sizes.sum()
    if extra:
        sizes += rng.multinomial(extra, np.full(parts, 1.0 / parts))
    subsets = []
    for k, size in enumerate(sizes):
        group_rng = _derived(seed, 1, k)
        support = random_support(group_rng)
        tracking = tuple(random_tracking(group_rng, modes) for _ in range(size - 1))
        subsets.append(SubsetSpec(support, tracking))
    return GeneratorSpec(n=n, subsets=tuple(subsets), contamination=contamination, seed=seed,
                         **options)


def _layout(spec: GeneratorSpec) -> tuple[list[Role], list[str], Partition]:
    roles, names, parts = [], [], []
    column = 0
    for k, subset in enumerate(spec.subsets):
        support_column = column
        roles.append(Role(k, subset.support))
        names.append(f"g{k + 1}_support")
        members = [column]
        column += 1
        for t, tracking in enumerate(subset.tracking):
            roles.append(Role(k, subset.support, tracking, support_column))
            names.append(f"g{k + 1}_track{t + 1}")
            members.append(column)
            column += 1
        parts.append(tuple(members))
    return roles, names, Partition(tuple(parts))


def _intervals(spec: GeneratorSpec, rng: np.random.Generator) -> list[tuple[int, int]]:
    n = spec.n
    total = int(round(spec.contamination * n))
    if spec.contamination > 0 and total < 1:
        raise ValueError(
            f"contamination {spec.contamination} is below one labelled observation at n={n}"
        )
    if total == 0:
        return []
    low = max(1, int(math.ceil(spec.interval_fraction[0] * n)))
    high = max(low, int(math.floor(spec.interval_fraction[1] * n)))
    lengths = []
    remaining = total
    while remaining > 0:
        length = min(int(rng.integers(low, high + 1)), remaining)
        lengths.append(length)
        remaining -= length
    count = len(lengths)
    free = n - total - (count - 1)  # one normal instant between consecutive intervals
    if free < 0:
        raise ValueError(f"cannot place {count} separate intervals totalling {total} in n={n}")
    cuts = np.sort(rng.integers(0, free + 1, count))
    gaps = np.diff(np.r_[0, cuts])
    out, position = [], 0
    for i, (gap, length) in enumerate(zip(gaps, lengths)):
        position += int(gap) + (1 if i else 0)
        out.append((position, position + length))
        position += length
    return out


def generate(spec: GeneratorSpec) -> SyntheticDataset:
    """Build the clean groups, then inject anomalies spread over the groups."""
    roles, names, truth = _layout(spec)
    n = spec.n
    columns = []
    for k, subset in enumerate(spec.subsets):
        support = gen_support(subset.support, n)
        columns.append(support)
        columns.extend(gen_tracking(tracking, support) for tracking in subset.tracking)
    clean = np.column_stack(columns)
    values = clean.copy()
    labels = np.zeros(n, dtype=np.int8)

    rng = _derived(spec.seed, 2)
    injected = []
    groups = len(spec.subsets)
    order = rng.permutation(groups)
    for i, (start, end) in enumerate(_intervals(spec, rng)):
        group = int(order[i % groups])
        options = [
            (j, kind) for j in truth.parts[group] for kind in spec.kinds
            if kind == "noise"
            or (kind == "frequency" and roles[j].is_support)
            or (kind == "correlation" and not roles[j].is_support)
        ]
        if not options:
            raise ValueError(f"no anomaly kind in {spec.kinds} fits group {group + 1}")
        target, kind = options[int(rng.integers(len(options)))]
        if kind == "noise":
            magnitude = float(rng.uniform(*spec.noise_range))
        elif kind == "frequency":
            magnitude = float(rng.uniform(*spec.frequency_range))
        else:
            magnitude = 1.0
        anomaly = AnomalySpec(kind, int(target), start, end, magnitude)
        inject_anomaly(values, labels, anomaly, roles, clean, seed=(spec.seed, 3, i))
        injected.append(anomaly)

    return SyntheticDataset(
        series=TimeSeries(values, tuple(names)),
        labels=LabelVector(labels),
        ground_truth=truth,
        injected=tuple(injected),
        clean=clean,
        roles=tuple(roles),
    )


def spec_to_dict(spec: GeneratorSpec) -> dict:
    return {
        "n": spec.n,
        "seed": spec.seed,
        "contamination": spec.contamination,
        "kinds": list(spec.kinds),
        "interval_fraction": list(spec.interval_fraction),
        "noise_range": list(spec.noise_range),
        "frequency_range": list(spec.frequency_range),
        "subsets": [
            {
                "support": {"terms": [
                    {"amplitude": t.amplitude, "frequency": t.frequency, "phase": t.phase,
                     "variable_frequency": t.variable_frequency}
                    for t in subset.support.terms
                ]},
                "tracking": [
                    {"mode": t.mode, "step": t.step, "u0": t.start} for t in subset.tracking
                ],
            }
            for subset in spec.subsets
        ],
    }


def spec_from_dict(config: dict) -> GeneratorSpec:
    """Build a spec from a parsed config file.

    Either ``subsets`` lists every group explicitly, or ``random`` gives
    ``d`` and ``parts`` for :func:`random_spec`.
    """
    config = dict(config)
    try:
        n = int(config.pop("n"))
    except KeyError:
        raise DataError("generator config needs 'n'") from None
    seed = int(config.pop("seed", 0))
    contamination = float(config.pop("contamination", 0.0))
    options = {}
    for key in ("kinds", "interval_fraction", "noise_range", "frequency_range"):
        if key in config:
            options[key] = tuple(config.pop(key))
    if "random" in config:
        shape = config.pop("random")
        modes = tuple(shape.get("modes", TRACKING_MODES))
        spec = random_spec(n, int(shape["d"]), int(shape["parts"]), contamination, seed,
                           modes=modes, **options)
    elif "subsets" in config:
        subsets = []
        for group in config.pop("subsets"):
            terms = tuple(SineTerm(**term) for term in group["support"]["terms"])
            tracking = tuple(TrackingSpec(**t) for t in group.get("tracking", []))
            subsets.append(SubsetSpec(SupportSpec(terms), tracking))
        spec = GeneratorSpec(n, tuple(subsets), contamination, seed, **options)
    else:
        raise DataError("generator config needs either 'subsets' or 'random'")
    if config:
        raise DataError(f"unknown generator config keys: {sorted(config)}")
    return spec


def with_seed(spec: GeneratorSpec, seed: int) -> GeneratorSpec:
    return replace(spec, seed=seed)
