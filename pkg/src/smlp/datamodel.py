"""Core domain types and the on-disk dataset format."""

from __future__ import annotations

import enum
import math
import re
import tempfile
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

FEATURE_NAMES: tuple[str, ...] = (
    "long_span_acf", "short_span_acf",
    "long_span_seasonal", "short_span_seasonal",
    "long_span_kurtosis", "short_span_kurtosis",
    "long_span_KL_PT", "prediction_sse",
    "burstLength", "t_scope",
    "burstWeight", "t_level",
    "noOfBursts", "avgFreq",
    "isPer", "maxFreq",
    "isLoc", "CElong",
    "isOrg", "CEshort",
    "isTempEx", "CEper",
    "noOfQueries", "sumCFreq",
    "burstDistM", "avgCFreq",
    "burstDistL", "maxCFreq",
)
N_FEATURES = len(FEATURE_NAMES)
FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}

FLAG_FEATURES = ("isPer", "isLoc", "isOrg", "isTempEx")
NONNEGATIVE_FEATURES = (
    "CElong", "CEshort", "noOfBursts", "avgFreq", "maxFreq", "noOfQueries",
    "sumCFreq", "avgCFreq", "maxCFreq", "burstLength", "burstWeight",
)

DATASET_HEADER = f"#smlp-dataset v1 d={N_FEATURES}"


class DataFormatError(ValueError):
    """Raised when a dataset or instance file cannot be parsed."""


class EventClass(enum.IntEnum):
    ANTICIPATED = 0
    BREAKING = 1
    COMMEMORATIVE = 2
    MEME = 3
    ONGOING = 4
    ATEMPORAL = 5

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def from_name(cls, name: str) -> "EventClass":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown event class {name!r}") from None


N_CLASSES = len(EventClass)


class Granularity(enum.Enum):
    DAILY = "daily"
    MONTHLY = "monthly"


def add_months(d: date, months: int) -> date:
    """Shift a month-anchored date (day 1) by a number of months."""
    idx = d.year * 12 + (d.month - 1) + months
    return date(idx // 12, idx % 12 + 1, 1)


def month_index(epoch: date, d: date) -> int:
    return (d.year - epoch.year) * 12 + (d.month - epoch.month)


@dataclass(frozen=True)
class TimeSeries:
    epoch: date
    granularity: Granularity
    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.counts) < 1:
            raise ValueError("time series needs at least one bucket")
        if any(c < 0 for c in self.counts):
            raise ValueError("time series counts must be non-negative")
        if self.granularity is Granularity.MONTHLY and self.epoch.day != 1:
            raise ValueError("monthly series must be anchored to the 1st")

    def __len__(self) -> int:
        return len(self.counts)

    def values(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=np.float64)

    def index_of(self, d: date) -> int:
        """Bucket index of a date; may fall outside ``[0, len)``."""
        if self.granularity is Granularity.DAILY:
            return (d - self.epoch).days
        return month_index(self.epoch, d)

    def date_at(self, i: int) -> date:
        if self.granularity is Granularity.DAILY:
            return date.fromordinal(self.epoch.toordinal() + i)
        return add_months(self.epoch, i)

    def covers(self, d: date) -> bool:
        return 0 <= self.index_of(d) < len(self.counts)

    def prefix(self, end_index: int) -> "TimeSeries":
        """Buckets ``0..end_index`` inclusive."""
        return TimeSeries(self.epoch, self.granularity, self.counts[: end_index + 1])


_WS = re.compile(r"\s+")


def normalize_query(text: str) -> str:
    return _WS.sub(" ", text.strip().lower())


def normalize_url(url: str) -> str:
    u = url.strip().lower()
    u = re.sub(r"^[a-z][a-z0-9+.\-]*://", "", u)
    return u.rstrip("/")


@dataclass(frozen=True)
class ClickRecord:
    timestamp: date
    url: str
    query: str

    def __post_init__(self):
        object.__setattr__(self, "url", normalize_url(self.url))
        object.__setattr__(self, "query", normalize_query(self.query))
        if not self.url:
            raise ValueError("click url is empty after normalization")


@dataclass(frozen=True)
class QueryInstance:
    query: str
    event_date: date
    hitting_time: date
    short_series: TimeSeries
    long_series: TimeSeries
    background_long_series: TimeSeries
    clicks: tuple[ClickRecord, ...] = ()
    cluster: tuple[tuple[str, int], ...] = ()

    @property
    def hit_index(self) -> int:
        return self.short_series.index_of(self.hitting_time)


def validate_instance(inst: QueryInstance) -> list[str]:
    """Check every QueryInstance invariant; an empty list means valid."""
    problems = []
    if not inst.query or inst.query != normalize_query(inst.query):
        problems.append("query not normalized")
    if inst.short_series.granularity is not Granularity.DAILY:
        problems.append("short_series not daily")
    if inst.long_series.granularity is not Granularity.MONTHLY:
        problems.append("long_series not monthly")
    if inst.background_long_series.granularity is not Granularity.MONTHLY:
        problems.append("background_long_series not monthly")
    if len(inst.long_series) != len(inst.background_long_series):
        problems.append("long_series and background_long_series lengths differ")
    if not inst.short_series.covers(inst.hitting_time):
        problems.append("hitting_time outside short_series")
    if not any(q == inst.query for q, _ in inst.cluster):
        problems.append("cluster missing self")
    if any(f < 0 for _, f in inst.cluster):
        problems.append("cluster frequency negative")
    return problems


@dataclass(frozen=True)
class FeatureStats:
    mean: np.ndarray
    std: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, FeatureStats):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(self.std, other.std)


@dataclass
class LabeledDataset:
    """Feature matrix ``X`` (n x 28) with integer class codes ``y``."""

    X: np.ndarray
    y: np.ndarray
    feature_stats: FeatureStats | None = None
    provenance: str = ""

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64).reshape(-1, N_FEATURES)
        self.y = np.asarray(self.y, dtype=np.int64).reshape(-1)
        if len(self.X) != len(self.y):
            raise ValueError("X and y lengths differ")
        if self.y.size and (self.y.min() < 0 or self.y.max() >= N_CLASSES):
            raise ValueError("labels must be class codes 0..5")
        if self.feature_stats is not None and np.any(self.feature_stats.std <= 0):
            raise ValueError("stored feature stddevs must be positive")

    def __len__(self) -> int:
        return len(self.y)

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (
            np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
            and self.feature_stats == other.feature_stats
            and self.provenance == other.provenance
        )

    def subset(self, idx: Sequence[int]) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(self.X[idx], self.y[idx], self.feature_stats, self.provenance)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=N_CLASSES)


def check_feature_vector(vec: Sequence[float]) -> list[str]:
    """Violations of the FeatureVector invariants, by feature name."""
    v = np.asarray(vec, dtype=np.float64)
    if v.shape != (N_FEATURES,):
        return [f"expected {N_FEATURES} features, got {v.size}"]
    problems = [f"{n} not finite" for n, x in zip(FEATURE_NAMES, v) if not math.isfinite(x)]
    for name in FLAG_FEATURES:
        if v[FEATURE_INDEX[name]] not in (0.0, 1.0):
            problems.append(f"{name} not in {{0,1}}")
    for name in NONNEGATIVE_FEATURES:
        if v[FEATURE_INDEX[name]] < 0:
            problems.append(f"{name} negative")
    return problems


def _fmt(values: Iterable[float]) -> str:
    # repr gives the shortest string that round-trips a double exactly
    return " ".join(repr(float(x)) for x in values)


def write_dataset(ds: LabeledDataset, path: str | Path) -> None:
    lines = [DATASET_HEADER]
    if ds.provenance:
        lines.append("#provenance " + ds.provenance.replace("\n", " "))
    if ds.feature_stats is not None:
        lines.append("#mean " + _fmt(ds.feature_stats.mean))
        lines.append("#std " + _fmt(ds.feature_stats.std))
    for row, label in zip(ds.X, ds.y):
        lines.append(f"{int(label)}\t{_fmt(row)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_reals(text: str, where: str) -> list[float]:
    parts = text.split(" ")
    if len(parts) != N_FEATURES:
        raise DataFormatError(f"{where}: expected {N_FEATURES} values, got {len(parts)}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise DataFormatError(f"{where}: {exc}") from None


def read_dataset(path: str | Path) -> LabeledDataset:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != DATASET_HEADER:
        raise DataFormatError(f"{path}: missing header {DATASET_HEADER!r}")
    mean = std = None
    provenance = ""
    rows, labels = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        where = f"{path}:{lineno}"
        if not line.strip():
            continue
        if line.startswith("#mean "):
            mean = _parse_reals(line[6:], where)
        elif line.startswith("#std "):
            std = _parse_reals(line[5:], where)
        elif line.startswith("#provenance "):
            provenance = line[len("#provenance "):]
        elif line.startswith("#"):
            continue
        else:
            label, sep, rest = line.partition("\t")
            if not sep or label not in {"0", "1", "2", "3", "4", "5"}:
                raise DataFormatError(f"{where}: bad label field")
            labels.append(int(label))
            rows.append(_parse_reals(rest, where))
    if (mean is None) != (std is None):
        raise DataFormatError(f"{path}: #mean and #std must appear together")
    stats = None if mean is None else FeatureStats(np.array(mean), np.array(std))
    X = np.array(rows, dtype=np.float64).reshape(-1, N_FEATURES)
    return LabeledDataset(X, np.array(labels, dtype=np.int64), stats, provenance)


def roundtrip_dataset(ds: LabeledDataset, path: str | Path | None = None) -> LabeledDataset:
    """Write ``ds`` in the dataset format and read it back."""
    if path is not None:
        write_dataset(ds, path)
        return read_dataset(path)
    with tempfile.TemporaryDirectory() as tmp:
        return roundtrip_dataset(ds, Path(tmp) / "dataset.txt")
