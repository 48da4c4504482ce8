"""Query-log parsing, series building and synthetic data generation."""

from __future__ import annotations

import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

from .datamodel import (
    ClickRecord,
    DataFormatError,
    EventClass,
    Granularity,
    QueryInstance,
    TimeSeries,
    month_index,
    normalize_query,
    normalize_url,
)

log = logging.getLogger(__name__)

AOL_COLUMNS = ("AnonID", "Query", "QueryTime", "ItemRank", "ClickURL")
AOL_TIME_FORMAT = "%Y-%m-%d %H:%M:%S"

# The AOL log window and the news collection span.
LOG_START = date(2006, 3, 1)
COLLECTION_START = date(1987, 1, 1)

REFERENCE_CLASS_COUNTS = {
    EventClass.ANTICIPATED: 988,
    EventClass.BREAKING: 531,
    EventClass.COMMEMORATIVE: 304,
    EventClass.MEME: 315,
    EventClass.ONGOING: 2520,
    EventClass.ATEMPORAL: 5712,
}


@dataclass(frozen=True)
class LogRecord:
    anon_id: str
    query: str
    query_time: datetime
    item_rank: int | None = None
    click_url: str | None = None

    def __post_init__(self):
        if not self.query:
            raise ValueError("empty query")
        if self.click_url is not None and self.item_rank is None:
            raise ValueError("click without item rank")


class QueryLog:
    """Iterate an AOL-format TSV log; malformed lines are skipped and counted.

    The header is checked on construction, so a missing file or wrong
    columns fail before any iteration.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        if not self.path.is_file():
            raise FileNotFoundError(f"query log not found: {self.path}")
        with open(self.path, encoding="utf-8", errors="replace") as fh:
            header = fh.readline().rstrip("\r\n").split("\t")
        if tuple(h.strip() for h in header) != AOL_COLUMNS:
            raise DataFormatError(
                f"{self.path}: header must be {' '.join(AOL_COLUMNS)} (tab-separated), got {header}"
            )
        self.skipped = 0

    @staticmethod
    def parse_line(line: str) -> LogRecord | None:
        parts = line.rstrip("\r\n").split("\t")
        if len(parts) == 3:
            parts += ["", ""]
        if len(parts) != 5:
            return None
        anon, query, qtime, rank, url = parts
        try:
            when = datetime.strptime(qtime.strip(), AOL_TIME_FORMAT)
            item_rank = int(rank) if rank.strip() else None
            click = normalize_url(url) if url.strip() else None
            return LogRecord(anon.strip(), normalize_query(query), when, item_rank, click or None)
        except ValueError:
            return None

    def __iter__(self) -> Iterator[LogRecord]:
        self.skipped = 0
        with open(self.path, encoding="utf-8", errors="replace") as fh:
            fh.readline()
            for line in fh:
                if not line.strip():
                    continue
                rec = self.parse_line(line)
                if rec is None:
                    self.skipped += 1
                    continue
                yield rec
        if self.skipped:
            log.warning("%s: skipped %d malformed lines", self.path, self.skipped)


def parse_query_log(path: str | Path) -> QueryLog:
    return QueryLog(path)


def build_short_series(records: Iterable[LogRecord], query: str,
                       span_start: date, span_end: date) -> TimeSeries:
    """Daily counts of records for ``query`` between two dates inclusive."""
    if span_end < span_start:
        raise ValueError("empty span")
    query = normalize_query(query)
    n = (span_end - span_start).days + 1
    counts = [0] * n
    for rec in records:
        if rec.query == query:
            i = (rec.query_time.date() - span_start).days
            if 0 <= i < n:
                counts[i] += 1
    return TimeSeries(span_start, Granularity.DAILY, tuple(counts))


def default_matcher(query: str) -> Callable[[str], bool]:
    """Document matches when every query token appears in its text."""
    tokens = normalize_query(query).split()

    def match(text: str) -> bool:
        words = set(normalize_query(text).split())
        return all(t in words for t in tokens)

    return match


def build_long_series(doc_dates: Sequence[tuple[date, bool]],
                      span: tuple[date, date] | None = None) -> TimeSeries:
    """Monthly counts of matched documents over the collection span."""
    if not doc_dates:
        raise ValueError("empty collection")
    if span is None:
        first = min(d for d, _ in doc_dates)
        last = max(d for d, _ in doc_dates)
    else:
        first, last = span
    epoch = date(first.year, first.month, 1)
    counts = [0] * (month_index(epoch, last) + 1)
    for d, matched in doc_dates:
        if matched:
            i = month_index(epoch, d)
            if 0 <= i < len(counts):
                counts[i] += 1
    return TimeSeries(epoch, Granularity.MONTHLY, tuple(counts))


def simulate_hitting_times(range_start: date, range_end: date, step_days: int = 14) -> list[date]:
    if range_end < range_start:
        raise ValueError("range_end before range_start")
    out, d = [], range_start
    while d <= range_end:
        out.append(d)
        d += timedelta(days=step_days)
    return out


# --- real-log assembly -----------------------------------------------------

def read_documents(path: str | Path) -> list[tuple[date, str]]:
    """Document index: one ``YYYY-MM-DD<TAB>text`` line per article."""
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            day, sep, text = line.rstrip("\n").partition("\t")
            try:
                docs.append((date.fromisoformat(day.strip()), text))
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: bad date {day!r}") from None
    return docs


@dataclass(frozen=True)
class MappingRow:
    query: str
    event_date: date
    hitting_time: date
    label: EventClass


def read_mapping(path: str | Path) -> list[MappingRow]:
    """Ground-truth triples: ``query<TAB>event_date<TAB>hitting_time<TAB>label``."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 4:
                raise DataFormatError(f"{path}:{lineno}: expected 4 tab-separated fields")
            try:
                label = EventClass(int(parts[3])) if parts[3].strip().isdigit() else EventClass.from_name(parts[3])
                rows.append(MappingRow(normalize_query(parts[0]), date.fromisoformat(parts[1].strip()),
                                       date.fromisoformat(parts[2].strip()), label))
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from None
    return rows


def build_instances(records: Sequence[LogRecord], mapping: Sequence[MappingRow],
                    documents: Sequence[tuple[date, str]],
                    matcher_factory: Callable[[str], Callable[[str], bool]] = default_matcher,
                    ) -> list[tuple[QueryInstance, EventClass]]:
    """Assemble labelled instances from a parsed log and a document index.

    Clusters group queries that share at least one clicked URL.
    """
    if not records:
        raise ValueError("no log records")
    span_start = min(r.query_time.date() for r in records)
    span_end = max(r.query_time.date() for r in records)
    doc_span = (min(d for d, _ in documents), max(d for d, _ in documents))
    background = build_long_series([(d, True) for d, _ in documents], doc_span)

    freq = Counter(r.query for r in records)
    urls_of = defaultdict(set)
    queries_of = defaultdict(set)
    clicks_of = defaultdict(list)
    for r in records:
        if r.click_url:
            urls_of[r.query].add(r.click_url)
            queries_of[r.click_url].add(r.query)
            clicks_of[r.query].append(ClickRecord(r.query_time.date(), r.click_url, r.query))

    out = []
    series_cache: dict[str, tuple[TimeSeries, TimeSeries]] = {}
    for row in mapping:
        if row.query not in series_cache:
            short = build_short_series(records, row.query, span_start, span_end)
            match = matcher_factory(row.query)
            long_ = build_long_series([(d, match(text)) for d, text in documents], doc_span)
            series_cache[row.query] = (short, long_)
        short, long_ = series_cache[row.query]
        members = {row.query} | {q for u in urls_of[row.query] for q in queries_of[u]}
        cluster = tuple(sorted((q, freq[q]) for q in members))
        inst = QueryInstance(row.query, row.event_date, row.hitting_time, short, long_, background,
                             tuple(clicks_of[row.query]), cluster)
        out.append((inst, row.label))
    return out


# --- raw instance file -----------------------------------------------------

RAW_HEADER = "#smlp-instances v1"


def _instance_to_json(inst: QueryInstance, label: EventClass | None) -> dict:
    return {
        "label": None if label is None else int(label),
        "query": inst.query,
        "event_date": inst.event_date.isoformat(),
        "hitting_time": inst.hitting_time.isoformat(),
        "short": [inst.short_series.epoch.isoformat(), list(inst.short_series.counts)],
        "long": [inst.long_series.epoch.isoformat(), list(inst.long_series.counts)],
        "background": [inst.background_long_series.epoch.isoformat(),
                       list(inst.background_long_series.counts)],
        "clicks": [[c.timestamp.isoformat(), c.url] for c in inst.clicks],
        "cluster": [[q, f] for q, f in inst.cluster],
    }


def _instance_from_json(obj: dict) -> tuple[QueryInstance, EventClass | None]:
    def series(pair, gran):
        return TimeSeries(date.fromisoformat(pair[0]), gran, tuple(int(c) for c in pair[1]))

    query = obj["query"]
    inst = QueryInstance(
        query=query,
        event_date=date.fromisoformat(obj["event_date"]),
        hitting_time=date.fromisoformat(obj["hitting_time"]),
        short_series=series(obj["short"], Granularity.DAILY),
        long_series=series(obj["long"], Granularity.MONTHLY),
        background_long_series=series(obj["background"], Granularity.MONTHLY),
        clicks=tuple(ClickRecord(date.fromisoformat(d), u, query) for d, u in obj["clicks"]),
        cluster=tuple((q, int(f)) for q, f in obj["cluster"]),
    )
    label = obj.get("label")
    return inst, None if label is None else EventClass(label)


def write_instances(items: Iterable[tuple[QueryInstance, EventClass | None]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(RAW_HEADER + "\n")
        for inst, label in items:
            fh.write(json.dumps(_instance_to_json(inst, label), separators=(",", ":")) + "\n")


def read_instances(path: str | Path) -> list[tuple[QueryInstance, EventClass | None]]:
    with open(path, encoding="utf-8") as fh:
        if fh.readline().strip() != RAW_HEADER:
            raise DataFormatError(f"{path}: missing header {RAW_HEADER!r}")
        out = []
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            try:
                out.append(_instance_from_json(json.loads(line)))
            except (ValueError, KeyError, TypeError, IndexError) as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from None
    return out


def generate_synthetic(spec=None):
    """Labelled synthetic instances; see :mod:`smlp.synthetic`."""
    from .synthetic import SyntheticSpec, generate_synthetic as _generate

    return _generate(spec if spec is not None else SyntheticSpec())
