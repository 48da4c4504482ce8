"""Seeded generator of labelled query instances with class-shaped series.

Shapes follow the qualitative picture of each dynamic class at hitting
time: a pre-event ramp (anticipated), a sharp spike (breaking), annual
peaks in the long series (commemorative), fast rise and slow decay
(meme), a sustained plateau (ongoing) or plain stationary noise
(atemporal).  Amplitudes, timing, entity mentions and click mixes are
random and overlap between classes.  Counts are Poisson draws around the
shaped mean plus Gaussian noise of width ``sigma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, timedelta
from importlib import resources

import numpy as np

from .datamodel import (
    ClickRecord,
    EventClass,
    Granularity,
    QueryInstance,
    TimeSeries,
    month_index,
)
from .ingest import COLLECTION_START, LOG_START, REFERENCE_CLASS_COUNTS, simulate_hitting_times

DEFAULT_COUNTS = tuple(REFERENCE_CLASS_COUNTS[c] for c in EventClass)

NEWS_SITES = (
    "www.cnn.com", "www.nytimes.com", "news.bbc.co.uk", "www.foxnews.com", "www.msnbc.msn.com",
    "www.usatoday.com", "www.washingtonpost.com", "news.yahoo.com", "www.reuters.com",
    "abcnews.go.com", "www.cbsnews.com", "www.latimes.com",
)

NOUNS = {
    EventClass.ANTICIPATED: ("tickets", "release date", "schedule", "preview", "premiere", "tour",
                             "finals", "draft", "opening", "launch", "festival", "cup"),
    EventClass.BREAKING: ("earthquake", "shooting", "crash", "explosion", "arrested", "dies",
                          "fire", "storm", "flood", "resigns", "scandal", "attack"),
    EventClass.COMMEMORATIVE: ("memorial", "remembrance", "tribute", "history", "massacre",
                               "disaster", "landing", "assassination", "independence", "liberation"),
    EventClass.MEME: ("video", "song", "dance", "viral clip", "parody", "photo", "rumor",
                      "blog", "quote", "hoax"),
    EventClass.ONGOING: ("war", "trial", "election", "campaign", "strike", "protests", "crisis",
                         "investigation", "playoffs", "season", "recall", "debate"),
    EventClass.ATEMPORAL: ("recipes", "lyrics", "weather", "maps", "jobs", "cheap flights",
                           "hotels", "games", "dictionary", "coupons", "horoscope", "used cars"),
}

TEMPORAL_TOKENS = {
    EventClass.ANTICIPATED: ("2006", "tomorrow", "june", "2007", "friday"),
    EventClass.BREAKING: ("today", "yesterday", "2006"),
    EventClass.COMMEMORATIVE: ("anniversary", "1989", "1995", "2001", "1991"),
    EventClass.MEME: ("2006", "today"),
    EventClass.ONGOING: ("2006", "april", "may"),
    EventClass.ATEMPORAL: ("2006", "today", "monday"),
}

# probability that a query mentions a person / location / organization / time
ENTITY_RATES = {
    EventClass.ANTICIPATED: (0.2, 0.3, 0.4, 0.5),
    EventClass.BREAKING: (0.4, 0.5, 0.2, 0.1),
    EventClass.COMMEMORATIVE: (0.4, 0.3, 0.2, 0.6),
    EventClass.MEME: (0.3, 0.1, 0.2, 0.15),
    EventClass.ONGOING: (0.3, 0.4, 0.3, 0.2),
    EventClass.ATEMPORAL: (0.1, 0.2, 0.3, 0.1),
}

# mean number of other queries sharing clicked URLs
CLUSTER_RATES = {
    EventClass.ANTICIPATED: 2.0, EventClass.BREAKING: 3.0, EventClass.COMMEMORATIVE: 2.0,
    EventClass.MEME: 2.5, EventClass.ONGOING: 2.5, EventClass.ATEMPORAL: 1.5,
}

@dataclass(frozen=True)
class SyntheticSpec:
    counts: tuple[int, ...] = DEFAULT_COUNTS
    short_len: int = 92
    long_len: int = 246
    sigma: float = 1.0
    seed: int = 7
    ramp_days: int = 14
    spike_width: tuple[int, int] = (1, 2)
    plateau_min_days: int = 21
    meme_half_life: float = 3.0
    clicks_per_day: int = 6

    def __post_init__(self):
        if len(self.counts) != len(EventClass):
            raise ValueError("counts needs one entry per event class")
        if any(c < 0 for c in self.counts):
            raise ValueError("class counts must be non-negative")
        if self.short_len < 8 or self.long_len < 8:
            raise ValueError("series lengths must be at least 8")
        if self.sigma < 0:
            raise ValueError("noise sigma must be non-negative")


def _slug(text: str) -> str:
    return "".join(ch for ch in text if ch.isalnum())


def _load_terms(name: str) -> list[str]:
    text = (resources.files("smlp") / "gazetteers" / f"{name}.txt").read_text(encoding="utf-8")
    terms = [line.split("#", 1)[0].strip() for line in text.splitlines()]
    return sorted({t for t in terms if t})


class _Generator:
    def __init__(self, spec: SyntheticSpec):
        self.spec = spec
        self.rng = np.random.default_rng(spec.seed)
        self.persons = _load_terms("persons")
        self.locations = _load_terms("locations")
        self.organizations = _load_terms("organizations")
        n = spec.short_len
        first_hit = min(14, n - 1)
        self.hits = [
            (d - LOG_START).days
            for d in simulate_hitting_times(LOG_START + timedelta(days=first_hit),
                                            LOG_START + timedelta(days=n - 1))
        ]
        self.days = np.arange(n, dtype=np.float64)
        self.months = np.arange(spec.long_len, dtype=np.float64)
        self.background = self._background()
        self.bg_scale = self.background / self.background.mean()
        # month index of the log start within the collection
        self.log_month = month_index(COLLECTION_START, LOG_START)

    # -- helpers -------------------------------------------------------
    def _noisy(self, mean: np.ndarray) -> tuple[int, ...]:
        x = self.rng.poisson(np.clip(mean, 0, None)).astype(np.float64)
        if self.spec.sigma > 0:
            x += self.rng.normal(0.0, self.spec.sigma, size=x.shape)
        return tuple(int(v) for v in np.rint(np.clip(x, 0, None)))

    def _background(self) -> np.ndarray:
        t = self.months
        seasonal = 1 + 0.05 * np.sin(2 * np.pi * t / 12)
        return 4000.0 * (1 + 0.8 * t / len(t)) * seasonal

    def _date(self, day_index: int) -> date:
        return LOG_START + timedelta(days=int(day_index))

    def _query(self, cls: EventClass) -> str:
        rng = self.rng
        p_per, p_loc, p_org, p_tmp = ENTITY_RATES[cls]
        parts = []
        if rng.random() < p_per:
            parts.append(self.persons[rng.integers(len(self.persons))])
        if rng.random() < p_loc:
            parts.append(self.locations[rng.integers(len(self.locations))])
        if rng.random() < p_org:
            parts.append(self.organizations[rng.integers(len(self.organizations))])
        nouns = NOUNS[cls]
        parts.append(nouns[rng.integers(len(nouns))])
        if rng.random() < p_tmp:
            toks = TEMPORAL_TOKENS[cls]
            parts.append(toks[rng.integers(len(toks))])
        return " ".join(" ".join(parts).split())

    # -- event shapes --------------------------------------------------
    # Each shape adds an event profile, scaled by ``ratio`` times the base
    # popularity, to the short/long means and returns the event date.
    # Amplitudes run from half to twenty times the base level, so faint
    # events blend into the noise of the stationary class.

    def _ramp(self, short, long_, base, level, ratio, e):
        rng, days, months, log_m = self.rng, self.days, self.months, self.log_month
        ramp = self.spec.ramp_days
        rise = np.clip((days - (e - ramp)) / ramp, 0, None)
        short = short + base * ratio * np.where(days <= e, rise, 0.5 ** ((days - e) / 2.0))
        lead = int(rng.integers(2, 8))
        coverage = np.clip((months - (log_m - lead)) / lead, 0, None)
        long_ = long_ + level * rng.uniform(0.5, 5) * np.minimum(coverage, 3.0) * (months <= log_m + 3)
        if rng.random() < 0.35:
            cycle = int(rng.choice([12, 24, 48]))
            start = log_m + 2 - cycle * int(rng.integers(1, 4))
            peaks = (months >= start) & (((months - start) % cycle) == 0)
            long_ = long_ + level * rng.uniform(1, 5) * peaks
        return short, long_, self._date(e)

    def _spike(self, short, long_, base, level, ratio, e):
        rng, days, months = self.rng, self.days, self.months
        lo, hi = self.spec.spike_width
        width = int(rng.integers(lo, hi + 1))
        after = days - (e + width - 1)
        spike = np.where((days >= e) & (after <= 0), 1.0, np.where(after > 0, 0.5 ** after, 0.0))
        short = short + base * ratio * spike
        long_ = long_ * rng.uniform(0.1, 0.8)
        em = self.log_month + (e // 30)
        long_ = long_ + level * rng.uniform(2, 15) * (months == em)
        return short, long_, self._date(e)

    def _anniversary(self, short, long_, base, level, ratio, a):
        rng, days, months = self.rng, self.days, self.months
        short = short + base * ratio * np.exp(-0.5 * ((days - a) / 2.0) ** 2)
        anniv = self._date(a)
        year = int(rng.integers(1987, 2004))
        first = month_index(COLLECTION_START, date(year, anniv.month, 1))
        peaks = (months >= first) & (((months - first) % 12) == 0)
        long_ = long_ + level * rng.uniform(1.5, 10) * peaks
        return short, long_, date(year, anniv.month, min(anniv.day, 28))

    def _meme(self, short, long_, base, level, ratio, e):
        rng, days = self.rng, self.days
        rise_days = int(rng.integers(1, 3))
        up = np.clip((days - (e - rise_days)) / rise_days, 0, 1)
        decay = 0.5 ** (np.clip(days - e, 0, None) / self.spec.meme_half_life)
        short = short + base * ratio * np.where(days <= e, up, decay)
        long_ = np.full_like(long_, level * rng.uniform(0.05, 0.5))
        return short, long_, self._date(e)

    def _plateau(self, short, long_, base, level, ratio, start, end):
        rng, days, months, log_m = self.rng, self.days, self.months, self.log_month
        edge = 2.0
        plateau = (1 / (1 + np.exp(-(days - start) / edge))) * (1 / (1 + np.exp((days - end) / edge)))
        short = short + base * ratio * plateau
        lead = int(rng.integers(1, 7))
        long_ = long_ + level * rng.uniform(0.5, 4) * ((months >= log_m - lead) & (months <= log_m + 3))
        return short, long_, self._date(start)

    def _timing(self, shape: EventClass, hit: int):
        """Event placement relative to the hit: the shape function's extra arguments."""
        rng, spec = self.rng, self.spec
        if shape is EventClass.ANTICIPATED:
            d = int(rng.integers(1, spec.ramp_days - 6))
            return (hit + d,)
        if shape is EventClass.BREAKING:
            d = int(rng.integers(0, 3))
            return (hit - d,)
        if shape is EventClass.COMMEMORATIVE:
            off = int(rng.integers(-5, 3))
            return (hit + off,)
        if shape is EventClass.MEME:
            d = int(rng.integers(1, 11))
            return (hit - d,)
        start = max(0, hit - int(rng.integers(10, 41)))
        end = max(start + spec.plateau_min_days, hit + int(rng.integers(3, 31)))
        return (start, end)

    def _shape_fn(self, shape: EventClass):
        return {
            EventClass.ANTICIPATED: self._ramp,
            EventClass.BREAKING: self._spike,
            EventClass.COMMEMORATIVE: self._anniversary,
            EventClass.MEME: self._meme,
            EventClass.ONGOING: self._plateau,
        }[shape]

    def _shapes(self, cls: EventClass, hit: int):
        """Mean short/long series, event date and news-click share."""
        rng = self.rng
        days, months = self.days, self.months
        base = float(np.clip(np.exp(rng.normal(4.0, 1.0)), 5.0, 3000.0))
        weekly_amp = rng.uniform(0.0, 0.4)
        phase = rng.uniform(0, 7)
        short = base * (1 + weekly_amp * np.sin(2 * np.pi * (days + phase) / 7))
        level = float(np.clip(np.exp(rng.normal(1.5, 1.5)), 0.1, 3000.0))
        long_ = level * self.bg_scale
        news = rng.uniform(0.05, 0.95)
        if cls is EventClass.ATEMPORAL:
            if rng.random() < 0.3:
                long_ = long_ * (1 + 0.3 * np.sin(2 * np.pi * months / 12 + rng.uniform(0, 6.3)))
            return short, long_, self._date(hit), news
        ratio = math.exp(rng.uniform(math.log(0.5), math.log(20.0)))
        timing = self._timing(cls, hit)
        return (*self._shape_fn(cls)(short, long_, base, level, ratio, *timing), news)

    def _clicks(self, query, short_counts, hit, event_index, news):
        rng, spec = self.rng, self.spec
        slug = _slug(query) or "q"
        own = (f"www.{slug}.com", f"en.wikipedia.org/wiki/{slug}")
        clicks = []
        for i in range(max(0, hit - 13), hit + 1):
            k = min(int(rng.binomial(short_counts[i], 0.5)), spec.clicks_per_day)
            if k == 0:
                continue
            # news outlets dominate around the event itself
            p_news = min(1.0, news * 1.5) if abs(i - event_index) <= 2 else news
            day = self._date(i)
            for _ in range(k):
                if rng.random() >= p_news:
                    url = own[0] if rng.random() < 0.8 else own[1]
                else:
                    url = NEWS_SITES[rng.integers(len(NEWS_SITES))]
                clicks.append(ClickRecord(day, url, query))
        return tuple(clicks)

    def _cluster(self, cls, query, self_freq):
        rng = self.rng
        k = int(rng.poisson(CLUSTER_RATES[cls]))
        suffixes = ("news", "pictures", "video", "wiki", "latest", "info", "photos", "update")
        members = {query: self_freq}
        for j in range(k):
            q = f"{query} {suffixes[j % len(suffixes)]}" + (f" {j}" if j >= len(suffixes) else "")
            members[q] = int(round(self_freq * rng.uniform(0.02, 0.8)))
        return tuple(sorted(members.items()))

    def instance(self, cls: EventClass) -> QueryInstance:
        hit = int(self.hits[self.rng.integers(len(self.hits))])
        query = self._query(cls)
        short_mean, long_mean, event, news = self._shapes(cls, hit)
        short = self._noisy(short_mean)
        long_ = self._noisy(long_mean)
        clicks = self._clicks(query, short, hit, (event - LOG_START).days, news)
        cluster = self._cluster(cls, query, int(sum(short)))
        return QueryInstance(
            query=query,
            event_date=event,
            hitting_time=self._date(hit),
            short_series=TimeSeries(LOG_START, Granularity.DAILY, short),
            long_series=TimeSeries(COLLECTION_START, Granularity.MONTHLY, long_),
            background_long_series=self.background_series,
            clicks=clicks,
            cluster=cluster,
        )

    @property
    def background_series(self) -> TimeSeries:
        if not hasattr(self, "_bg_series"):
            self._bg_series = TimeSeries(COLLECTION_START, Granularity.MONTHLY,
                                         tuple(int(v) for v in np.rint(self.background)))
        return self._bg_series


def generate_synthetic(spec: SyntheticSpec = SyntheticSpec()) -> list[tuple[QueryInstance, EventClass]]:
    """Labelled instances in a seeded random order, exactly ``spec.counts`` per class."""
    gen = _Generator(spec)
    labels = [cls for cls, n in zip(EventClass, spec.counts) for _ in range(n)]
    order = gen.rng.permutation(len(labels))
    return [(gen.instance(labels[i]), labels[i]) for i in order]
