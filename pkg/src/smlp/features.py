"""The 28 temporal, burst, entity, click and cluster features of a query instance."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from datetime import date, timedelta
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .bursts import BurstSet, burst_summary, detect_bursts
from .datamodel import (
    FEATURE_NAMES,
    N_FEATURES,
    ClickRecord,
    FeatureStats,
    LabeledDataset,
    QueryInstance,
    TimeSeries,
)


class FeatureError(ValueError):
    """A sub-operation failed while extracting a named feature."""

    def __init__(self, feature: str, reason: str):
        super().__init__(f"{feature}: {reason}")
        self.feature = feature


@dataclass(frozen=True)
class FeatureConfig:
    short_acf_max_lag: int = 30
    long_acf_max_lag: int = 24
    short_period: int = 7
    long_period: int = 12
    kl_smoothing: float = 0.5
    holt_alpha: float = 0.3
    holt_beta: float = 0.3
    sse_span: str = "short"  # or "long"
    burst_s: float = 2.0
    burst_gamma: float = 1.0
    trend_window: int = 14
    ce_long_days: int = 14
    ce_short_days: int = 3


def _values(ts) -> np.ndarray:
    if isinstance(ts, TimeSeries):
        return ts.values()
    return np.asarray(ts, dtype=np.float64)


def autocorrelation(ts, max_lag: int) -> float:
    """Largest sample autocorrelation over lags ``1..max_lag``."""
    x = _values(ts)
    n = len(x)
    if n < 2:
        raise ValueError("autocorrelation needs at least 2 points")
    if not 1 <= max_lag < n:
        raise ValueError(f"max_lag must be in [1, {n - 1}]")
    d = x - x.mean()
    denom = float(d @ d)
    if denom == 0:
        return 0.0
    best = max(float(d[:-k] @ d[k:]) for k in range(1, max_lag + 1)) / denom
    return min(1.0, max(-1.0, best))


def _centered_moving_average(x: np.ndarray, period: int) -> np.ndarray:
    """Classical decomposition trend; NaN where the window runs off the ends."""
    n = len(x)
    if period % 2:
        kernel = np.full(period, 1.0 / period)
    else:
        # 2 x period MA so the window stays centred
        kernel = np.full(period + 1, 1.0 / period)
        kernel[0] = kernel[-1] = 0.5 / period
    half = len(kernel) // 2
    trend = np.full(n, np.nan)
    trend[half:n - half] = np.convolve(x, kernel, mode="valid")
    return trend


def seasonal_strength(ts, period: int) -> float:
    """Strength of seasonality from a moving-average decomposition, in [0, 1]."""
    x = _values(ts)
    n = len(x)
    if period < 2 or n < 2 * period:
        raise ValueError(f"series of length {n} too short for period {period}")
    detrended = x - _centered_moving_average(x, period)
    ok = ~np.isnan(detrended)
    pos = np.arange(n) % period
    means = np.array([detrended[ok & (pos == k)].mean() for k in range(period)])
    means -= means.mean()
    remainder = detrended[ok] - means[pos[ok]]
    var_sr = float(np.var(detrended[ok]))
    if var_sr <= 1e-12 * max(1.0, float(np.mean(x * x))):
        return 0.0
    strength = 1.0 - float(np.var(remainder)) / var_sr
    return min(1.0, max(0.0, strength))


def kurtosis(ts) -> float:
    """Excess kurtosis from population central moments."""
    x = _values(ts)
    if len(x) < 4:
        raise ValueError("kurtosis needs at least 4 points")
    d = x - x.mean()
    m2 = float(np.mean(d ** 2))
    if m2 == 0:
        return 0.0
    m4 = float(np.mean(d ** 4))
    return m4 / (m2 * m2) - 3.0


def kl_divergence(p_series, q_series, smoothing: float = 0.5) -> float:
    p = _values(p_series)
    q = _values(q_series)
    if len(p) != len(q) or len(p) < 1:
        raise ValueError("KL divergence needs equal, non-empty series")
    p = p + smoothing
    q = q + smoothing
    p /= p.sum()
    q /= q.sum()
    mask = p > 0
    return max(0.0, float(np.sum(p[mask] * np.log(p[mask] / q[mask]))))


def prediction_sse(ts, alpha: float = 0.3, beta: float = 0.3) -> float:
    """Sum of squared one-step Holt linear forecast errors from the third point on."""
    x = _values(ts).tolist()
    if len(x) < 4:
        raise ValueError("prediction_sse needs at least 4 points")
    level, trend = x[0], x[1] - x[0]
    sse = 0.0
    for t in range(1, len(x)):
        forecast = level + trend
        if t >= 2:
            sse += (x[t] - forecast) ** 2
        new_level = alpha * x[t] + (1 - alpha) * forecast
        trend = beta * (new_level - level) + (1 - beta) * trend
        level = new_level
    return sse


def trend_features(ts, hit_index: int, window: int = 14) -> tuple[float, float]:
    """(t_scope, t_level) over the window ending at ``hit_index``."""
    x = _values(ts)
    if not 0 <= hit_index < len(x):
        raise ValueError("hit_index outside series")
    if window < 2:
        raise ValueError("trend window must be at least 2")
    w = x[max(0, hit_index - window + 1): hit_index + 1]
    if len(w) < 2:
        raise ValueError("trend window needs at least 2 buckets of history")
    if len(w) >= 3:
        ma = (w[:-2] + w[1:-1] + w[2:]) / 3.0
        extra = 2
    else:
        ma, extra = w, 0
    run = 1
    while run < len(ma) and ma[-run - 1] <= ma[-run] + 1e-12:
        run += 1
    t_scope = (run + extra) / len(w)
    overall = float(x.mean())
    t_level = float(w.mean()) / overall if overall > 0 else 0.0
    return t_scope, t_level


def frequency_stats(ts) -> tuple[float, float]:
    x = _values(ts)
    return float(x.mean()), float(x.max())


_MONTHS = (
    "january february march april may june july august september october "
    "november december jan feb mar apr jun jul aug sep sept oct nov dec"
).split()
_WEEKDAYS = (
    "monday tuesday wednesday thursday friday saturday sunday "
    "mon tue tues wed thu thurs fri sat sun"
).split()
_RELATIVE = ("today", "tomorrow", "yesterday", "anniversary")

DEFAULT_TEMPORAL_PATTERNS = (
    r"\b(?:%s)\b" % "|".join(_MONTHS),
    r"\b(?:19|20)\d\d\b",
    r"\b(?:%s)\b" % "|".join(_WEEKDAYS),
    r"\b(?:%s)\b" % "|".join(_RELATIVE),
)


def _phrase_pattern(phrases: Iterable[str]) -> re.Pattern | None:
    ordered = sorted({p for p in phrases if p}, key=len, reverse=True)
    if not ordered:
        return None
    return re.compile(r"(?<!\w)(?:%s)(?!\w)" % "|".join(map(re.escape, ordered)))


class Gazetteer:
    """Dictionary lookup for person, location, organization and temporal terms."""

    def __init__(self, persons: Iterable[str] = (), locations: Iterable[str] = (),
                 organizations: Iterable[str] = (),
                 temporal_patterns: Sequence[str] = DEFAULT_TEMPORAL_PATTERNS):
        norm = lambda xs: frozenset(" ".join(x.lower().split()) for x in xs if x.strip())
        self.persons = norm(persons)
        self.locations = norm(locations)
        self.organizations = norm(organizations)
        self.temporal_patterns = tuple(temporal_patterns)
        self._per = _phrase_pattern(self.persons)
        self._loc = _phrase_pattern(self.locations)
        self._org = _phrase_pattern(self.organizations)
        self._tmp = [re.compile(p, re.IGNORECASE) for p in self.temporal_patterns]

    @staticmethod
    def _read_terms(path: Path) -> list[str]:
        terms = []
        for line in path.read_text(encoding="utf-8").splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                terms.append(line)
        return terms

    @classmethod
    def from_dir(cls, directory: str | Path) -> "Gazetteer":
        d = Path(directory)
        files = {name: d / f"{name}.txt" for name in ("persons", "locations", "organizations")}
        missing = [str(p) for p in files.values() if not p.is_file()]
        if missing:
            raise FileNotFoundError(f"gazetteer files missing: {', '.join(missing)}")
        temporal = d / "temporal.txt"
        patterns = cls._read_terms(temporal) if temporal.is_file() else DEFAULT_TEMPORAL_PATTERNS
        return cls(*(cls._read_terms(p) for p in files.values()), temporal_patterns=patterns)

    @classmethod
    def default(cls) -> "Gazetteer":
        with resources.as_file(resources.files("smlp") / "gazetteers") as d:
            return cls.from_dir(d)

    @staticmethod
    def _hit(pattern: re.Pattern | None, text: str) -> int:
        return int(pattern is not None and pattern.search(text) is not None)

    def flags(self, query: str) -> tuple[int, int, int, int]:
        q = query.lower()
        return (
            self._hit(self._per, q),
            self._hit(self._loc, q),
            self._hit(self._org, q),
            int(any(p.search(q) for p in self._tmp)),
        )


def entity_flags(query: str, gz: Gazetteer | None) -> tuple[int, int, int, int]:
    """(isPer, isLoc, isOrg, isTempEx)."""
    if gz is None:
        raise ValueError("gazetteer not loaded")
    return gz.flags(query)


def click_entropy(clicks: Iterable[ClickRecord], hit: date, window_days: int) -> float:
    """Shannon entropy in bits of clicked URLs in the window ending on ``hit``."""
    if window_days < 1:
        raise ValueError("window_days must be at least 1")
    start = hit - timedelta(days=window_days - 1)
    counts = Counter(c.url for c in clicks if start <= c.timestamp <= hit)
    if len(counts) <= 1:
        return 0.0
    total = sum(counts.values())
    p = np.array(list(counts.values()), dtype=np.float64) / total
    return max(0.0, float(-np.sum(p * np.log2(p))))


def ce_ratio(ce_short: float, ce_long: float) -> float:
    return ce_short / ce_long if ce_long > 0 else 0.0


def cluster_features(cluster: Sequence[tuple[str, int]]) -> tuple[float, float, float, float]:
    """(noOfQueries, sumCFreq, avgCFreq, maxCFreq)."""
    if not cluster:
        raise ValueError("query cluster is empty")
    freqs = [f for _, f in cluster]
    total = float(sum(freqs))
    return float(len(freqs)), total, total / len(freqs), float(max(freqs))


def extract_features(inst: QueryInstance, gz: Gazetteer,
                     cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """Assemble the 28-feature vector of ``inst`` at its hitting time."""
    hit = inst.hit_index
    if not 0 <= hit < len(inst.short_series):
        raise FeatureError("short_span", "hitting_time outside short_series")
    short = inst.short_series.prefix(hit)
    long_ = inst.long_series
    f: dict[str, float] = {}

    def guarded(name, fn, *args):
        try:
            return fn(*args)
        except ValueError as exc:
            raise FeatureError(name, str(exc)) from exc

    f["long_span_acf"] = guarded("long_span_acf", autocorrelation, long_,
                                 min(cfg.long_acf_max_lag, len(long_) - 1))
    f["short_span_acf"] = guarded("short_span_acf", autocorrelation, short,
                                  min(cfg.short_acf_max_lag, len(short) - 1))
    f["long_span_seasonal"] = guarded("long_span_seasonal", seasonal_strength, long_, cfg.long_period)
    f["short_span_seasonal"] = guarded("short_span_seasonal", seasonal_strength, short, cfg.short_period)
    f["long_span_kurtosis"] = guarded("long_span_kurtosis", kurtosis, long_)
    f["short_span_kurtosis"] = guarded("short_span_kurtosis", kurtosis, short)
    f["long_span_KL_PT"] = guarded("long_span_KL_PT", kl_divergence, long_,
                                   inst.background_long_series, cfg.kl_smoothing)
    sse_series = short if cfg.sse_span == "short" else long_
    f["prediction_sse"] = guarded("prediction_sse", prediction_sse, sse_series,
                                  cfg.holt_alpha, cfg.holt_beta)

    bursts: BurstSet = guarded("burstLength", detect_bursts, short.counts,
                               cfg.burst_s, cfg.burst_gamma)
    (f["burstLength"], f["burstWeight"], f["noOfBursts"],
     f["burstDistM"], f["burstDistL"]) = burst_summary(bursts, hit)

    f["t_scope"], f["t_level"] = guarded("t_scope", trend_features, short, hit, cfg.trend_window)
    f["avgFreq"], f["maxFreq"] = frequency_stats(short)
    f["isPer"], f["isLoc"], f["isOrg"], f["isTempEx"] = guarded("isPer", entity_flags, inst.query, gz)

    f["CElong"] = click_entropy(inst.clicks, inst.hitting_time, cfg.ce_long_days)
    f["CEshort"] = click_entropy(inst.clicks, inst.hitting_time, cfg.ce_short_days)
    f["CEper"] = ce_ratio(f["CEshort"], f["CElong"])
    (f["noOfQueries"], f["sumCFreq"], f["avgCFreq"],
     f["maxCFreq"]) = guarded("noOfQueries", cluster_features, inst.cluster)

    vec = np.array([f[name] for name in FEATURE_NAMES], dtype=np.float64)
    bad = [n for n, v in zip(FEATURE_NAMES, vec) if not math.isfinite(v)]
    if bad:
        raise FeatureError(bad[0], "non-finite value")
    return vec


# z-score normalization

STD_FLOOR = 1e-12


def fit_normalizer(X: np.ndarray | LabeledDataset) -> FeatureStats:
    if isinstance(X, LabeledDataset):
        X = X.X
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("cannot fit a normalizer on an empty dataset")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std < STD_FLOOR, 1.0, std)
    return FeatureStats(mean, std)


def apply_normalizer(X: np.ndarray, stats: FeatureStats) -> np.ndarray:
    return (np.asarray(X, dtype=np.float64) - stats.mean) / stats.std


def invert_normalizer(Z: np.ndarray, stats: FeatureStats) -> np.ndarray:
    return np.asarray(Z, dtype=np.float64) * stats.std + stats.mean


__all__ = [
    "FeatureConfig", "FeatureError", "Gazetteer", "autocorrelation", "seasonal_strength",
    "kurtosis", "kl_divergence", "prediction_sse", "detect_bursts", "burst_summary",
    "trend_features", "frequency_stats", "entity_flags", "click_entropy", "ce_ratio",
    "cluster_features", "extract_features", "fit_normalizer", "apply_normalizer",
    "invert_normalizer", "N_FEATURES",
]
