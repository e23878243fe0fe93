"""Ingest, filter and index daily trading records.

Trading days are mapped to a contiguous 0-based index built from the sorted
set of distinct dates present in the trades file, so weekends and holidays
never leave gaps. Records are kept columnar (numpy arrays sorted by investor
index, then day); the investor axis follows the canonical id order returned
by :func:`id_sort_key`.
"""

from __future__ import annotations

import bisect
import csv
import datetime as dt
import logging
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np

from .errors import EmptyInputError, MissingWindowError, ParseError, RangeError

logger = logging.getLogger(__name__)

CATEGORIES = ("C", "FI", "G", "NP", "H", "FO", "OTHER")
WINDOW_POLICIES = ("full_calendar", "trade_span", "provided")

TRADES_HEADER = ["investor_id", "date", "volume_bought", "volume_sold"]
META_HEADER = ["investor_id", "category"]
WINDOWS_HEADER = ["investor_id", "first_date", "last_date"]


def id_sort_key(investor_id: str):
    """Canonical ordering: all-digit ids numerically, then others lexically."""
    s = str(investor_id)
    if s.isdigit():
        return (0, int(s), s)
    return (1, 0, s)


@dataclass(frozen=True)
class TradingRecord:
    investor_id: str
    day: int
    volume_bought: int
    volume_sold: int


@dataclass(frozen=True)
class InvestorMeta:
    investor_id: str
    category: str = "OTHER"


@dataclass(frozen=True)
class ActivityWindow:
    investor_id: str
    first_day: int
    last_day: int

    def __len__(self):
        return self.last_day - self.first_day + 1

    def contains(self, day: int) -> bool:
        return self.first_day <= day <= self.last_day


@dataclass(frozen=True)
class IngestReport:
    rows_read: int = 0
    dropped_zero: int = 0
    aggregated: int = 0


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable columnar trading dataset.

    ``inv`` indexes into ``investors``; ``windows[k]`` holds the inclusive
    ``(first_day, last_day)`` of investor ``k`` under ``window_policy``.
    """

    investors: tuple
    inv: np.ndarray
    day: np.ndarray
    bought: np.ndarray
    sold: np.ndarray
    calendar_length: int
    windows: np.ndarray
    categories: Mapping[str, str]
    window_policy: str = "full_calendar"
    dates: Optional[tuple] = None
    provided_windows: Mapping[str, tuple] = field(default_factory=dict)
    report: IngestReport = field(default_factory=IngestReport)

    def __post_init__(self):
        for arr in (self.inv, self.day, self.bought, self.sold, self.windows):
            arr.setflags(write=False)

    @property
    def n_investors(self) -> int:
        return len(self.investors)

    @property
    def n_records(self) -> int:
        return int(self.inv.size)

    def index_of(self, investor_id) -> int:
        try:
            return self._index[str(investor_id)]
        except KeyError:
            raise KeyError(f"unknown investor {investor_id!r}") from None

    @property
    def _index(self):
        cache = self.__dict__.get("_index_cache")
        if cache is None:
            cache = {inv: k for k, inv in enumerate(self.investors)}
            object.__setattr__(self, "_index_cache", cache)
        return cache

    def records(self) -> Iterator[TradingRecord]:
        for k, d, b, s in zip(self.inv.tolist(), self.day.tolist(),
                              self.bought.tolist(), self.sold.tolist()):
            yield TradingRecord(self.investors[k], d, b, s)

    def meta(self) -> list:
        return [InvestorMeta(i, self.categories.get(i, "OTHER")) for i in self.investors]

    def window(self, investor_id) -> ActivityWindow:
        k = self.index_of(investor_id)
        first, last = self.windows[k]
        return ActivityWindow(self.investors[k], int(first), int(last))

    def active_days(self) -> np.ndarray:
        """Distinct trading days per investor (records are unique per day)."""
        return np.bincount(self.inv, minlength=self.n_investors)

    def date_of(self, day: int) -> str:
        if self.dates is not None:
            return self.dates[day]
        return str(day)

    def equals(self, other: "Dataset") -> bool:
        return (
            self.investors == other.investors
            and self.calendar_length == other.calendar_length
            and self.window_policy == other.window_policy
            and dict(self.categories) == dict(other.categories)
            and all(np.array_equal(a, b) for a, b in (
                (self.inv, other.inv), (self.day, other.day),
                (self.bought, other.bought), (self.sold, other.sold),
                (self.windows, other.windows)))
        )

    # construction -----------------------------------------------------

    @classmethod
    def from_records(
        cls,
        records: Iterable,
        calendar_length: int,
        categories: Optional[Mapping[str, str]] = None,
        windows: Optional[Mapping[str, tuple]] = None,
        policy: Optional[str] = None,
        dates: Optional[Sequence[str]] = None,
    ) -> "Dataset":
        """Build a dataset from ``(investor_id, day, bought, sold)`` tuples.

        Duplicate ``(investor, day)`` rows are summed and zero-zero rows
        dropped. ``windows`` maps investor id to an inclusive day range and
        makes ``policy`` default to ``"provided"``.
        """
        rows = [tuple(r) if not isinstance(r, TradingRecord) else
                (r.investor_id, r.day, r.volume_bought, r.volume_sold) for r in records]
        if calendar_length < 1:
            raise RangeError("calendar_length must be >= 1")
        n_rows = len(rows)
        agg: dict = {}
        dropped = 0
        for inv_id, day, b, s in rows:
            day, b, s = int(day), int(b), int(s)
            if b < 0 or s < 0:
                raise ValueError(f"negative volume for investor {inv_id} on day {day}")
            if not 0 <= day < calendar_length:
                raise RangeError(
                    f"day {day} of investor {inv_id} outside calendar [0, {calendar_length - 1}]")
            if b == 0 and s == 0:
                dropped += 1
                continue
            key = (str(inv_id), day)
            prev = agg.get(key)
            agg[key] = (b, s) if prev is None else (prev[0] + b, prev[1] + s)
        kept = n_rows - dropped
        report = IngestReport(rows_read=n_rows, dropped_zero=dropped, aggregated=kept - len(agg))
        return cls._assemble(agg, calendar_length, categories, windows, policy, dates, report)

    @classmethod
    def _assemble(cls, agg, calendar_length, categories, windows, policy, dates, report):
        if policy is None:
            policy = "provided" if windows is not None else "full_calendar"
        if policy not in WINDOW_POLICIES:
            raise ValueError(f"unknown window policy {policy!r}")
        investors = tuple(sorted({k[0] for k in agg}, key=id_sort_key))
        index = {inv: k for k, inv in enumerate(investors)}
        n = len(agg)
        inv = np.empty(n, dtype=np.int32)
        day = np.empty(n, dtype=np.int32)
        bought = np.empty(n, dtype=np.int64)
        sold = np.empty(n, dtype=np.int64)
        for pos, ((inv_id, d), (b, s)) in enumerate(agg.items()):
            inv[pos] = index[inv_id]
            day[pos] = d
            bought[pos] = b
            sold[pos] = s
        order = np.lexsort((day, inv))
        inv, day, bought, sold = inv[order], day[order], bought[order], sold[order]

        cats = {}
        categories = categories or {}
        for inv_id in investors:
            cat = categories.get(inv_id, "OTHER")
            if cat not in CATEGORIES:
                raise ValueError(f"unknown category {cat!r} for investor {inv_id}")
            cats[inv_id] = cat

        provided = {}
        if windows is not None:
            for inv_id, (first, last) in windows.items():
                first, last = int(first), int(last)
                if not (0 <= first <= last < calendar_length):
                    raise RangeError(
                        f"window [{first}, {last}] of investor {inv_id} outside calendar")
                provided[str(inv_id)] = (first, last)

        win = _compute_windows(investors, inv, day, calendar_length, policy, provided)
        if n:
            lo = win[inv, 0]
            hi = win[inv, 1]
            bad = np.flatnonzero((day < lo) | (day > hi))
            if bad.size:
                k = bad[0]
                raise RangeError(
                    f"record of investor {investors[inv[k]]} on day {day[k]} lies outside "
                    f"its activity window [{lo[k]}, {hi[k]}]")
        return cls(
            investors=investors, inv=inv, day=day, bought=bought, sold=sold,
            calendar_length=int(calendar_length), windows=win,
            categories=MappingProxyType(cats), window_policy=policy,
            dates=tuple(dates) if dates is not None else None,
            provided_windows=MappingProxyType(provided), report=report,
        )


def _compute_windows(investors, inv, day, calendar_length, policy, provided):
    n = len(investors)
    win = np.empty((n, 2), dtype=np.int32)
    if policy == "full_calendar":
        win[:, 0] = 0
        win[:, 1] = calendar_length - 1
    elif policy == "trade_span":
        win[:, 0] = calendar_length - 1
        win[:, 1] = 0
        np.minimum.at(win[:, 0], inv, day)
        np.maximum.at(win[:, 1], inv, day)
    else:
        for k, inv_id in enumerate(investors):
            if inv_id not in provided:
                raise MissingWindowError(f"no provided activity window for investor {inv_id}")
            win[k] = provided[inv_id]
    return win


# file ingest ---------------------------------------------------------------

def _parse_date(text: str, path, line) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise ParseError(path, line, f"invalid ISO-8601 date {text!r}") from None


def _parse_volume(text: str, path, line, column) -> int:
    try:
        value = int(text.strip())
    except ValueError:
        try:
            f = float(text)
        except ValueError:
            raise ParseError(path, line, f"non-numeric {column} {text!r}") from None
        if not f.is_integer():
            raise ParseError(path, line, f"non-integer {column} {text!r}") from None
        value = int(f)
    if value < 0:
        raise ParseError(path, line, f"negative {column} {value}")
    return value


def _reader(path, expected):
    fh = open(path, newline="", encoding="utf-8")
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != expected:
        fh.close()
        raise ParseError(path, 1, f"expected header {','.join(expected)}, got {header}")
    return fh, reader


def read_meta(path) -> dict:
    fh, reader = _reader(path, META_HEADER)
    cats = {}
    with fh:
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(path, line, f"expected 2 fields, got {len(row)}")
            cat = row[1].strip()
            if cat not in CATEGORIES:
                raise ParseError(path, line, f"unknown category {cat!r}")
            cats[row[0].strip()] = cat
    return cats


def load_trades(
    trades_path,
    meta_path=None,
    windows_path=None,
    policy: Optional[str] = None,
) -> Dataset:
    """Read the trades CSV (plus optional meta and windows CSVs)."""
    trades_path = Path(trades_path)
    fh, reader = _reader(trades_path, TRADES_HEADER)
    rows = []
    with fh:
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(trades_path, line, f"expected 4 fields, got {len(row)}")
            inv_id = row[0].strip()
            if not inv_id:
                raise ParseError(trades_path, line, "empty investor_id")
            date = _parse_date(row[1], trades_path, line)
            b = _parse_volume(row[2], trades_path, line, "volume_bought")
            s = _parse_volume(row[3], trades_path, line, "volume_sold")
            rows.append((inv_id, date, b, s))

    calendar = sorted({r[1] for r in rows})
    day_index = {d: k for k, d in enumerate(calendar)}
    categories = read_meta(meta_path) if meta_path is not None else None

    windows = None
    if windows_path is not None:
        windows = {}
        fh, wreader = _reader(windows_path, WINDOWS_HEADER)
        with fh:
            for row in wreader:
                line = wreader.line_num
                if not row:
                    continue
                if len(row) != 3:
                    raise ParseError(windows_path, line, f"expected 3 fields, got {len(row)}")
                first = _parse_date(row[1], windows_path, line)
                last = _parse_date(row[2], windows_path, line)
                lo = bisect.bisect_left(calendar, first)
                hi = bisect.bisect_right(calendar, last) - 1
                if lo > hi:
                    raise RangeError(
                        f"{windows_path}:{line}: window {first}..{last} contains no trading day")
                windows[row[0].strip()] = (lo, hi)

    ds = Dataset.from_records(
        [(i, day_index[d], b, s) for i, d, b, s in rows],
        calendar_length=max(len(calendar), 1),
        categories=categories,
        windows=windows,
        policy=policy,
        dates=[d.isoformat() for d in calendar] or ["1970-01-01"],
    )
    logger.info("ingested %d rows: %d dropped (zero volume), %d aggregated, %d investors",
                ds.report.rows_read, ds.report.dropped_zero, ds.report.aggregated, ds.n_investors)
    return ds


# operations ------------------------------------------------------------------

def filter_active(ds: Dataset, min_active_days: int) -> Dataset:
    """Keep investors with at least ``min_active_days`` distinct trading days."""
    if min_active_days < 1:
        raise ValueError("min_active_days must be >= 1")
    counts = ds.active_days()
    keep = np.flatnonzero(counts >= min_active_days)
    if keep.size == ds.n_investors:
        return ds
    remap = np.full(ds.n_investors, -1, dtype=np.int32)
    remap[keep] = np.arange(keep.size, dtype=np.int32)
    rows = remap[ds.inv] >= 0
    investors = tuple(ds.investors[k] for k in keep)
    return Dataset(
        investors=investors,
        inv=remap[ds.inv[rows]],
        day=ds.day[rows].copy(),
        bought=ds.bought[rows].copy(),
        sold=ds.sold[rows].copy(),
        calendar_length=ds.calendar_length,
        windows=ds.windows[keep].copy(),
        categories=MappingProxyType({i: ds.categories[i] for i in investors}),
        window_policy=ds.window_policy,
        dates=ds.dates,
        provided_windows=MappingProxyType(
            {i: w for i, w in ds.provided_windows.items() if i in set(investors)}),
        report=ds.report,
    )


def subset(ds: Dataset, investor_ids: Iterable) -> Dataset:
    """Restrict a dataset to the given investors (calendar unchanged)."""
    wanted = {str(i) for i in investor_ids}
    keep = np.array([k for k, i in enumerate(ds.investors) if i in wanted], dtype=np.int64)
    remap = np.full(ds.n_investors, -1, dtype=np.int32)
    remap[keep] = np.arange(keep.size, dtype=np.int32)
    rows = remap[ds.inv] >= 0
    investors = tuple(ds.investors[k] for k in keep)
    return Dataset(
        investors=investors, inv=remap[ds.inv[rows]], day=ds.day[rows].copy(),
        bought=ds.bought[rows].copy(), sold=ds.sold[rows].copy(),
        calendar_length=ds.calendar_length, windows=ds.windows[keep].copy(),
        categories=MappingProxyType({i: ds.categories[i] for i in investors}),
        window_policy=ds.window_policy, dates=ds.dates,
        provided_windows=MappingProxyType(
            {i: w for i, w in ds.provided_windows.items() if i in wanted}),
        report=ds.report,
    )


def activity_window(ds: Dataset, investor_id, policy: str = "full_calendar") -> ActivityWindow:
    k = ds.index_of(investor_id)
    inv_id = ds.investors[k]
    if policy == "full_calendar":
        return ActivityWindow(inv_id, 0, ds.calendar_length - 1)
    if policy == "trade_span":
        days = ds.day[ds.inv == k]
        return ActivityWindow(inv_id, int(days.min()), int(days.max()))
    if policy == "provided":
        if inv_id not in ds.provided_windows:
            raise MissingWindowError(f"no provided activity window for investor {inv_id}")
        first, last = ds.provided_windows[inv_id]
        return ActivityWindow(inv_id, first, last)
    raise ValueError(f"unknown window policy {policy!r}")


def activity_ccdf(ds: Dataset) -> list:
    """Empirical CCDF of transaction-days: ``[(N, P(count >= N)), ...]``."""
    if ds.n_investors == 0:
        raise EmptyInputError("activity CCDF of an empty dataset")
    counts = ds.active_days()
    values, freq = np.unique(counts, return_counts=True)
    at_least = np.cumsum(freq[::-1])[::-1]
    n = counts.size
    return [(int(v), float(c) / n) for v, c in zip(values, at_least)]


def write_trades(ds: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRADES_HEADER)
        for k, d, b, s in zip(ds.inv.tolist(), ds.day.tolist(),
                              ds.bought.tolist(), ds.sold.tolist()):
            w.writerow([ds.investors[k], ds.date_of(d), b, s])


def write_meta(ds: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(META_HEADER)
        for inv_id in ds.investors:
            w.writerow([inv_id, ds.categories[inv_id]])


def write_windows(ds: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(WINDOWS_HEADER)
        for inv_id, (first, last) in zip(ds.investors, ds.windows.tolist()):
            w.writerow([inv_id, ds.date_of(first), ds.date_of(last)])
