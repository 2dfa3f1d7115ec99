"""Price and report-data ingestion with decision-time gating.

Everything downstream (signals, consensus, backtesting) consumes data through
this module, so the windowing and gating rules here are the single place where
look-ahead is prevented at the data layer:

* price windows are half-open on calendar dates: ``(anchor - h, anchor]``
* info items are partitioned against an explicit cutoff timestamp, never
  silently dropped

Horizons are calendar-day windows evaluated over whatever trading bars exist
inside them; holidays and weekends are not interpolated.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path

logger = logging.getLogger(__name__)

#: Default day-count horizons used across the pipeline.
DEFAULT_HORIZONS = (1, 7, 14, 28, 90, 180, 360)


class MarketDataError(Exception):
    """Base class for ingestion and windowing failures."""


class IngestionError(MarketDataError):
    """Source missing or unreadable."""


class RowParseError(MarketDataError):
    """A CSV row failed validation; carries the 1-based data row index."""

    def __init__(self, row_index: int, message: str):
        super().__init__(f"row {row_index}: {message}")
        self.row_index = row_index


class EmptyWindowError(MarketDataError):
    """No bars fall inside the requested window."""


class ShortWindowError(MarketDataError):
    """Requested horizon exceeds the available history.

    ``available_days`` is the calendar span the series actually covers up to
    the anchor date.
    """

    def __init__(self, requested: int, available_days: int):
        super().__init__(
            f"window of {requested} days requested but only "
            f"{available_days} days of history available"
        )
        self.requested = requested
        self.available_days = available_days


@dataclass(frozen=True)
class PriceBar:
    """One daily OHLCV bar."""

    date: date
    open: float
    high: float
    low: float
    close: float
    volume: int

    def __post_init__(self):
        if self.low > min(self.open, self.close) or self.high < max(self.open, self.close):
            raise ValueError(
                f"bar {self.date}: low/high must bracket open/close "
                f"(o={self.open} h={self.high} l={self.low} c={self.close})"
            )
        if self.volume < 0:
            raise ValueError(f"bar {self.date}: negative volume {self.volume}")


@dataclass(frozen=True)
class PriceSeries:
    """Date-ordered, deduplicated daily bars for one ticker."""

    ticker: str
    bars: tuple[PriceBar, ...]

    def __post_init__(self):
        for prev, cur in zip(self.bars, self.bars[1:]):
            if cur.date <= prev.date:
                raise ValueError(
                    f"{self.ticker}: bars out of order or duplicated at {cur.date}"
                )

    def __len__(self) -> int:
        return len(self.bars)

    @property
    def first_date(self) -> date:
        return self.bars[0].date

    @property
    def last_date(self) -> date:
        return self.bars[-1].date

    @property
    def closes(self) -> list[float]:
        return [b.close for b in self.bars]

    def span_days(self) -> int:
        """Calendar days covered, inclusive of both endpoints."""
        return (self.last_date - self.first_date).days + 1

    def close_on(self, day: date) -> float | None:
        """Close price on an exact date, or None when no bar exists."""
        for bar in reversed(self.bars):
            if bar.date == day:
                return bar.close
            if bar.date < day:
                return None
        return None


@dataclass(frozen=True)
class InfoItem:
    """A timestamped piece of non-price information (news, sentiment, ...)."""

    domain: str
    payload: str
    as_of: datetime
    source: str

    def __post_init__(self):
        if self.as_of is None:
            raise ValueError("InfoItem requires an as_of timestamp")

    @property
    def item_id(self) -> str:
        import hashlib

        raw = f"{self.domain}|{self.source}|{self.as_of.isoformat()}|{self.payload}"
        return hashlib.sha256(raw.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class HorizonSet:
    """Ordered day-count horizons."""

    horizons: tuple[int, ...] = field(default=DEFAULT_HORIZONS)

    def __post_init__(self):
        if tuple(sorted(set(self.horizons))) != tuple(self.horizons):
            raise ValueError(f"horizons must be strictly increasing: {self.horizons}")

    def max(self) -> int:
        return max(self.horizons)

    def __iter__(self):
        return iter(self.horizons)


_CSV_COLUMNS = ["date", "open", "high", "low", "close", "volume"]


@dataclass(frozen=True)
class FetchDescriptor:
    """Opaque pointer to an external market-data source (URL + ticker).

    Resolution happens through a pluggable client that returns CSV text in the
    standard column layout; nothing in the deterministic test path uses it.
    """

    url: str
    ticker: str


def _parse_rows(reader, source_name: str, ticker: str, end_date: date, max_lookback: int):
    try:
        header = next(reader)
    except StopIteration:
        raise IngestionError(f"{source_name}: empty input") from None
    if [h.strip().lower() for h in header] != _CSV_COLUMNS:
        raise IngestionError(
            f"{source_name}: expected header {','.join(_CSV_COLUMNS)}, got {','.join(header)}"
        )
    by_date: dict[date, PriceBar] = {}
    window_start = end_date - timedelta(days=max_lookback)
    for idx, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(_CSV_COLUMNS):
            raise RowParseError(idx, f"expected {len(_CSV_COLUMNS)} columns, got {len(row)}")
        try:
            bar = PriceBar(
                date=date.fromisoformat(row[0].strip()),
                open=float(row[1]),
                high=float(row[2]),
                low=float(row[3]),
                close=float(row[4]),
                volume=int(row[5]),
            )
        except (ValueError, TypeError) as exc:
            raise RowParseError(idx, str(exc)) from exc
        if window_start < bar.date <= end_date:
            # keep-last wins on duplicated dates
            by_date[bar.date] = bar
    if not by_date:
        raise EmptyWindowError(
            f"{source_name}: no bars in ({window_start}, {end_date}] for {ticker}"
        )
    return tuple(by_date[d] for d in sorted(by_date))


def load_price_series(
    source: str | Path | FetchDescriptor,
    ticker: str,
    end_date: date,
    max_lookback: int,
    fetch_client=None,
) -> PriceSeries:
    """Load daily bars, keeping ``(end_date - max_lookback, end_date]``.

    ``source`` is either a CSV path or a FetchDescriptor resolved through the
    supplied client. Duplicate dates keep the last occurrence (feed-correction
    semantics). Bars dated after ``end_date`` are excluded so a stale file can
    never leak future prices into a decision.

    Raises
    ------
    IngestionError
        Source missing, header malformed, or descriptor without a client.
    RowParseError
        A data row fails to parse; the error names the row index.
    EmptyWindowError
        No bars fall inside the lookback window.
    """
    if isinstance(source, FetchDescriptor):
        if fetch_client is None:
            raise IngestionError(
                f"fetch descriptor {source.url} given but no market-data client configured"
            )
        try:
            text = fetch_client(source)
        except Exception as exc:  # noqa: BLE001 - client boundary
            raise IngestionError(f"fetch failed for {source.url}: {exc}") from exc
        reader = csv.reader(text.splitlines())
        bars = _parse_rows(reader, source.url, ticker, end_date, max_lookback)
    else:
        path = Path(source)
        if not path.is_file():
            raise IngestionError(f"price source not found: {path}")
        with path.open(newline="") as fh:
            bars = _parse_rows(csv.reader(fh), str(path), ticker, end_date, max_lookback)
    logger.debug("loaded %d bars for %s ending %s", len(bars), ticker, bars[-1].date)
    return PriceSeries(ticker=ticker, bars=bars)


def window(series: PriceSeries, h: int, as_of: date) -> PriceSeries:
    """Sub-series covering the last ``h`` calendar days up to and including ``as_of``.

    Keeps bars with date in ``(as_of - h, as_of]``. Raises ShortWindowError when
    the series does not reach back far enough to cover the window; the window is
    never silently widened or shrunk.
    """
    if not series.bars:
        raise EmptyWindowError(f"{series.ticker}: empty series")
    if as_of < series.first_date:
        raise ShortWindowError(h, 0)
    available = (as_of - series.first_date).days + 1
    if h > available:
        raise ShortWindowError(h, available)
    lo = as_of - timedelta(days=h)
    kept = tuple(b for b in series.bars if lo < b.date <= as_of)
    if not kept:
        raise EmptyWindowError(f"{series.ticker}: no bars in ({lo}, {as_of}]")
    return PriceSeries(ticker=series.ticker, bars=kept)


def slice_window(series: PriceSeries, h: int, as_of: date) -> PriceSeries:
    """Like :func:`window` but tolerant of short history.

    Returns whatever bars fall in ``(as_of - h, as_of]`` without requiring the
    series to cover the whole span; statistics over the result describe *at
    most* the last h days. Raises only when the slice is empty.
    """
    lo = as_of - timedelta(days=h)
    kept = tuple(b for b in series.bars if lo < b.date <= as_of)
    if not kept:
        raise EmptyWindowError(f"{series.ticker}: no bars in ({lo}, {as_of}]")
    return PriceSeries(ticker=series.ticker, bars=kept)


def gate_by_timestamp(
    items: list[InfoItem], cutoff: datetime
) -> tuple[list[InfoItem], list[InfoItem]]:
    """Partition items into (admitted, flagged) against a cutoff timestamp.

    Admitted items have ``as_of <= cutoff``; everything else is flagged.
    Relative order is preserved within each list, and the two lists always
    form an exact partition of the input.
    """
    admitted: list[InfoItem] = []
    flagged: list[InfoItem] = []
    for item in items:
        (admitted if item.as_of <= cutoff else flagged).append(item)
    if flagged:
        logger.debug("gated %d/%d items after cutoff %s", len(flagged), len(items), cutoff)
    return admitted, flagged
