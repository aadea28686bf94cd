"""CSV loading, tweet filtering, daily aggregation and the price/sentiment merge."""

from __future__ import annotations

import csv
import datetime as dt
import logging
import warnings
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .errors import DuplicateError, EmptyInputError, RowError, SchemaError

log = logging.getLogger(__name__)

STOCK_COLUMNS = {
    "date": "Date", "open": "Open", "high": "High", "low": "Low", "close": "Close",
    "adjclose": "Adj Close", "volume": "Volume", "stockname": "Stock Name",
}
TWEET_COLUMNS = {
    "date": "Date", "tweet": "Tweet", "stockname": "Stock Name",
    "companyname": "Company Name",
}


class MissingLikesWarning(UserWarning):
    """The tweets carry no likes column, so the likes filter was skipped."""


@dataclass(frozen=True)
class OhlcvBar:
    date: dt.date
    open: float
    high: float
    low: float
    close: float
    adj_close: float
    volume: int
    ticker: str


@dataclass(frozen=True)
class TweetRecord:
    timestamp: dt.datetime
    text: str
    ticker: str
    company: str
    likes: int | None = None

    @property
    def day(self) -> dt.date:
        return self.timestamp.astimezone(dt.timezone.utc).date()


@dataclass(frozen=True)
class DailySentiment:
    date: dt.date
    mean_compound: float
    tweet_count: int


@dataclass(frozen=True)
class FeatureRow:
    date: dt.date
    adj_close: float
    sentiment: float
    tweet_count: int = 0
    imputed: bool = False


@dataclass(frozen=True)
class FeatureTable:
    ticker: str
    rows: tuple

    def __len__(self):
        return len(self.rows)

    @property
    def sentiment_fill(self) -> int:
        return sum(r.imputed for r in self.rows)

    @property
    def dates(self):
        return [r.date for r in self.rows]

    @property
    def adj_close(self):
        return np.array([r.adj_close for r in self.rows], dtype=np.float64)

    @property
    def sentiment(self):
        return np.array([r.sentiment for r in self.rows], dtype=np.float64)

    def slice(self, start, stop):
        return FeatureTable(self.ticker, self.rows[start:stop])

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["date", "adj_close", "sentiment"])
            for r in self.rows:
                w.writerow([r.date.isoformat(), repr(r.adj_close), repr(r.sentiment)])

    @classmethod
    def from_csv(cls, path, ticker=""):
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            for rec in csv.DictReader(fh):
                rows.append(FeatureRow(dt.date.fromisoformat(rec["date"]),
                                       float(rec["adj_close"]), float(rec["sentiment"])))
        return cls(ticker, tuple(rows))


def _norm(name):
    return "".join(ch for ch in name.strip().lower() if ch.isalnum())


def _header_map(header, required, path, optional=()):
    index = {}
    for i, col in enumerate(header):
        key = _norm(col)
        if key and key not in index:
            index[key] = i
    for key, pretty in required.items():
        if key not in index:
            raise SchemaError(pretty, path)
    return {k: index[k] for k in list(required) + [o for o in optional if o in index]}


def _number(text, line, column):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise RowError(line, f"column {column!r}: not a number: {text!r}") from None
    if not np.isfinite(value):
        raise RowError(line, f"column {column!r}: non-finite value {text!r}")
    return value


def _count(text, line, column):
    value = _number(text, line, column)
    if value < 0 or value != int(value):
        raise RowError(line, f"column {column!r}: expected a non-negative integer, got {text!r}")
    return int(value)


def load_stock_csv(path) -> list[OhlcvBar]:
    """Read daily OHLCV bars; result is ordered by (ticker, date)."""
    bars = []
    seen = {}
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError("Date", path)
        cols = _header_map(header, STOCK_COLUMNS, path)
        for rec in reader:
            line = reader.line_num
            if not any(field.strip() for field in rec):
                continue
            if len(rec) < len(header):
                raise RowError(line, f"expected {len(header)} fields, got {len(rec)}")
            try:
                date = dt.date.fromisoformat(rec[cols["date"]].strip()[:10])
            except ValueError:
                raise RowError(line, f"bad date {rec[cols['date']]!r}") from None
            vals = {k: _number(rec[cols[k]], line, STOCK_COLUMNS[k])
                    for k in ("open", "high", "low", "close", "adjclose")}
            volume = _count(rec[cols["volume"]], line, "Volume")
            ticker = rec[cols["stockname"]].strip().upper()
            if not ticker:
                raise RowError(line, "empty stock name")
            if min(vals.values()) <= 0:
                raise RowError(line, "prices must be positive")
            if vals["low"] > min(vals["open"], vals["close"]) or \
                    vals["high"] < max(vals["open"], vals["close"]):
                raise RowError(line, "high/low do not bracket open/close")
            key = (ticker, date)
            if key in seen:
                raise DuplicateError(f"{path}: {ticker} {date} on lines {seen[key]} and {line}")
            seen[key] = line
            bars.append(OhlcvBar(date, vals["open"], vals["high"], vals["low"],
                                 vals["close"], vals["adjclose"], volume, ticker))
    bars.sort(key=lambda b: (b.ticker, b.date))
    return bars


def write_stock_csv(bars, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(STOCK_COLUMNS.values()))
        for b in bars:
            w.writerow([b.date.isoformat(), repr(b.open), repr(b.high), repr(b.low),
                        repr(b.close), repr(b.adj_close), b.volume, b.ticker])


def load_tweets_csv(path) -> list[TweetRecord]:
    """Read tweets in file order; ``likes`` is filled only if the column exists."""
    out = []
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError("Date", path)
        cols = _header_map(header, TWEET_COLUMNS, path, optional=("likes",))
        has_likes = "likes" in cols
        for rec in reader:
            line = reader.line_num
            if not rec:
                continue
            if len(rec) < len(header):
                raise RowError(line, f"expected {len(header)} fields, got {len(rec)}")
            raw_ts = rec[cols["date"]].strip()
            try:
                ts = dt.datetime.fromisoformat(raw_ts)
            except ValueError:
                raise RowError(line, f"bad timestamp {raw_ts!r}") from None
            if ts.tzinfo is None:
                raise RowError(line, f"timestamp {raw_ts!r} has no UTC offset")
            text = rec[cols["tweet"]]
            if not text.strip():
                raise RowError(line, "empty tweet text")
            likes = None
            if has_likes and rec[cols["likes"]].strip():
                likes = _count(rec[cols["likes"]], line, "likes")
            out.append(TweetRecord(ts, text, rec[cols["stockname"]].strip().upper(),
                                   rec[cols["companyname"]], likes))
    return out


def write_tweets_csv(records, path):
    has_likes = any(r.likes is not None for r in records)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(TWEET_COLUMNS.values()) + (["Likes"] if has_likes else []))
        for r in records:
            row = [r.timestamp.isoformat(sep=" "), r.text, r.ticker, r.company]
            if has_likes:
                row.append("" if r.likes is None else r.likes)
            w.writerow(row)


def filter_tweets(records, min_likes: int = 10) -> list[TweetRecord]:
    """Keep tweets with strictly more than ``min_likes`` likes.

    Records without a likes value are dropped, unless no record has one, in
    which case the input comes back unchanged with a
    :class:`MissingLikesWarning`.
    """
    if min_likes < 0:
        raise ValueError("min_likes must be non-negative")
    records = list(records)
    if records and all(r.likes is None for r in records):
        warnings.warn("tweets carry no likes column; likes filter skipped",
                      MissingLikesWarning, stacklevel=2)
        return records
    return [r for r in records if r.likes is not None and r.likes > min_likes]


def aggregate_daily(scored) -> list[DailySentiment]:
    """Mean compound per UTC calendar day from ``(TweetRecord, compound)`` pairs."""
    groups = defaultdict(list)
    for rec, compound in scored:
        groups[rec.day].append(compound)
    return [DailySentiment(day, min(1.0, max(-1.0, float(np.mean(vals)))), len(vals))
            for day, vals in sorted(groups.items())]


def merge(bars, daily) -> FeatureTable:
    """One row per trading bar, carrying a tweet-count-weighted sentiment.

    Sentiment from a trading day and from the non-trading days since the
    previous bar is pooled onto that bar.  Days before the first bar or
    after the last one are dropped.  Bars with no coverage get 0.0 and are
    marked imputed.
    """
    bars = sorted(bars, key=lambda b: b.date)
    if not bars:
        raise EmptyInputError("merge: no price bars")
    tickers = {b.ticker for b in bars}
    if len(tickers) != 1:
        raise ValueError(f"merge expects a single ticker, got {sorted(tickers)}")
    daily = sorted(daily, key=lambda d: d.date)
    rows = []
    j = 0
    prev = bars[0].date - dt.timedelta(days=1)
    for bar in bars:
        while j < len(daily) and daily[j].date <= prev:
            j += 1
        weighted, count = 0.0, 0
        while j < len(daily) and daily[j].date <= bar.date:
            weighted += daily[j].mean_compound * daily[j].tweet_count
            count += daily[j].tweet_count
            j += 1
        if count:
            rows.append(FeatureRow(bar.date, bar.adj_close,
                                   min(1.0, max(-1.0, weighted / count)), count))
        else:
            rows.append(FeatureRow(bar.date, bar.adj_close, 0.0, 0, True))
        prev = bar.date
    return FeatureTable(bars[0].ticker, tuple(rows))


def bars_by_ticker(bars) -> dict[str, list[OhlcvBar]]:
    out = defaultdict(list)
    for b in bars:
        out[b.ticker].append(b)
    return dict(out)


def build_feature_table(bars, tweets, ticker, score_fn, min_likes=10) -> FeatureTable:
    """Filter, score, aggregate and merge one ticker's data.

    ``score_fn`` maps tweet text to a compound score in [-1, 1].
    """
    ticker = ticker.upper()
    tb = [b for b in bars if b.ticker == ticker]
    if not tb:
        raise EmptyInputError(f"no price bars for {ticker}")
    tw = [t for t in tweets if t.ticker == ticker]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MissingLikesWarning)
        if tw and all(t.likes is None for t in tw):
            log.warning("%s: tweets have no likes column; likes filter skipped", ticker)
        tw = filter_tweets(tw, min_likes)
    daily = aggregate_daily((t, score_fn(t.text)) for t in tw)
    return merge(tb, daily)
