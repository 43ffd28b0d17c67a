"""
Candle ingestion, resampling and training/testing period selection
"""

import math
import re
from decimal import Decimal, InvalidOperation, ROUND_HALF_EVEN
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from config.bot_config import DEFAULT_PAIR, DEFAULT_STRIDE_SECONDS, WINDOW_SECONDS
from utils.errors import (
    EmptyFile,
    EmptyList,
    MalformedRow,
    NonUniformSpacing,
    NotAMultiple,
    SeriesTooShort,
    WindowOutOfRange,
)
from utils.logger_config import get_logger

logger = get_logger("market_data")

CSV_COLUMNS = ["timestamp", "open", "high", "low", "close", "volume"]
_CENT = Decimal("0.01")
# closes feed int64 arrays
_MAX_CENTS = int(np.iinfo(np.int64).max)


def first_gap(timestamps: List[int], period_seconds: int) -> Optional[int]:
    """First timestamp that is not exactly one period after its predecessor"""
    for prev, ts in zip(timestamps, timestamps[1:]):
        if ts - prev != period_seconds:
            return ts
    return None


class Candle(BaseModel):
    """One candle; prices in integer cents of the quote asset"""
    model_config = ConfigDict(frozen=True)

    timestamp: int = Field(ge=0, description="Unix seconds")
    close: int = Field(gt=0, description="Close price in cents")
    open: Optional[int] = None
    high: Optional[int] = None
    low: Optional[int] = None
    volume: Optional[int] = None


class PeriodRole(str, Enum):
    TRAIN = "Train"
    TEST = "Test"


class PeriodWindow(BaseModel):
    """A 30-day window [start, end], both ends inclusive"""
    model_config = ConfigDict(frozen=True)

    start: int = Field(ge=0)
    end: int
    role: Optional[PeriodRole] = None

    @model_validator(mode="after")
    def _thirty_days(self):
        if self.end - self.start != WINDOW_SECONDS:
            raise ValueError(f"window must span {WINDOW_SECONDS}s, got {self.end - self.start}s")
        return self

    def tagged(self, role: PeriodRole) -> "PeriodWindow":
        return self.model_copy(update={"role": role})


class PriceSeries(BaseModel):
    """Uniformly spaced close prices of one asset pair"""
    model_config = ConfigDict(frozen=True)

    pair: str
    period_seconds: int = Field(gt=0)
    candles: Tuple[Candle, ...]

    _closes: Optional[np.ndarray] = PrivateAttr(default=None)

    @model_validator(mode="after")
    def _uniform(self):
        if not self.candles:
            raise ValueError("price series must not be empty")
        gap = first_gap([c.timestamp for c in self.candles], self.period_seconds)
        if gap is not None:
            raise ValueError(f"non-uniform candle spacing at timestamp {gap}")
        return self

    def __len__(self) -> int:
        return len(self.candles)

    @property
    def first_timestamp(self) -> int:
        return self.candles[0].timestamp

    @property
    def last_timestamp(self) -> int:
        return self.candles[-1].timestamp

    def closes(self) -> np.ndarray:
        """Close prices as an int64 array (cached)"""
        if self._closes is None:
            self._closes = np.fromiter((c.close for c in self.candles), dtype=np.int64, count=len(self.candles))
        return self._closes

    def index_of(self, timestamp: int) -> Optional[int]:
        """Index of the candle stamped exactly `timestamp`, or None"""
        offset = timestamp - self.first_timestamp
        if offset < 0 or offset % self.period_seconds:
            return None
        idx = offset // self.period_seconds
        return idx if idx < len(self.candles) else None


def _to_cents(raw: str, line: int, column: str) -> Optional[int]:
    raw = raw.strip() if isinstance(raw, str) else ""
    if not raw:
        return None
    try:
        value = Decimal(raw)
    except InvalidOperation:
        raise MalformedRow(line, f"{column}={raw!r} is not a number")
    if not value.is_finite():
        raise MalformedRow(line, f"{column}={raw!r} is not finite")
    try:
        cents = int(value.quantize(_CENT, rounding=ROUND_HALF_EVEN) * 100)
    except InvalidOperation:
        cents = None
    if cents is None or abs(cents) > _MAX_CENTS:
        raise MalformedRow(line, f"{column}={raw!r} is out of range")
    return cents


def _to_timestamp(raw: str, line: int) -> int:
    raw = raw.strip() if isinstance(raw, str) else ""
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        ts = pd.Timestamp(raw) if raw else pd.NaT
    except (ValueError, TypeError):
        ts = pd.NaT
    if pd.isna(ts):
        raise MalformedRow(line, f"timestamp={raw!r} is not unix seconds or a date")
    if ts.tzinfo is None:
        ts = ts.tz_localize("UTC")
    return int(ts.timestamp())


def load_candles(path, pair: str = DEFAULT_PAIR, period_seconds: int = 60) -> PriceSeries:
    """
    Load a candle CSV (`timestamp,open,high,low,close,volume`, header required).

    Decimal prices are converted to cents with round-half-even. Only timestamp
    and close are required; rows are sorted, duplicates and gaps rejected.
    """
    path = Path(path)
    logger.info(f"Loading candles from {path} (pair={pair}, period={period_seconds}s)")
    if not path.exists():
        raise FileNotFoundError(f"Candle file not found: {path}")

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise EmptyFile(str(path))
    except UnicodeDecodeError as e:
        raise MalformedRow(1, f"file is not UTF-8 text: {e}")
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        raise MalformedRow(int(match.group(1)) if match else 0, str(e))

    frame.columns = [str(c).strip().lower() for c in frame.columns]
    if "timestamp" not in frame.columns or "close" not in frame.columns:
        raise MalformedRow(1, f"header must contain timestamp and close, got {list(frame.columns)}")
    if frame.empty:
        raise EmptyFile(str(path))

    optional = [c for c in ("open", "high", "low", "volume") if c in frame.columns]
    rows = []
    seen = {}
    for offset, record in enumerate(frame.to_dict("records")):
        line = offset + 2  # header is line 1
        ts = _to_timestamp(record["timestamp"], line)
        close = _to_cents(record["close"], line, "close")
        if close is None or close <= 0:
            raise MalformedRow(line, "close must be a positive price")
        if ts < 0:
            raise MalformedRow(line, "timestamp must be non-negative")
        if ts in seen:
            raise MalformedRow(line, f"duplicate timestamp {ts} (first seen at line {seen[ts]})")
        seen[ts] = line
        extra = {c: _to_cents(record[c], line, c) for c in optional}
        rows.append(Candle(timestamp=ts, close=close, **extra))

    rows.sort(key=lambda c: c.timestamp)
    gap = first_gap([c.timestamp for c in rows], period_seconds)
    if gap is not None:
        raise NonUniformSpacing(gap)
    series = PriceSeries(pair=pair, period_seconds=period_seconds, candles=tuple(rows))
    logger.info(f"Loaded {len(series)} candles spanning {series.first_timestamp}..{series.last_timestamp}")
    return series


def _fmt_cents(value: Optional[int]) -> str:
    if value is None:
        return ""
    sign = "-" if value < 0 else ""
    value = abs(value)
    return f"{sign}{value // 100}.{value % 100:02d}"


def write_candles(series: PriceSeries, path) -> Path:
    """Write a series back to the CSV layout accepted by load_candles"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        [
            {
                "timestamp": c.timestamp,
                "open": _fmt_cents(c.open),
                "high": _fmt_cents(c.high),
                "low": _fmt_cents(c.low),
                "close": _fmt_cents(c.close),
                "volume": _fmt_cents(c.volume),
            }
            for c in series.candles
        ],
        columns=CSV_COLUMNS,
    )
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def resample(series: PriceSeries, new_period_seconds: int) -> PriceSeries:
    """Aggregate into coarser candles; buckets start at the first candle, partial tail dropped"""
    if new_period_seconds <= 0 or new_period_seconds % series.period_seconds:
        raise NotAMultiple(new_period_seconds, series.period_seconds)
    k = new_period_seconds // series.period_seconds
    if k == 1:
        return series

    full = len(series) // k
    out = []
    for b in range(full):
        bucket = series.candles[b * k:(b + 1) * k]
        opens = [c.open for c in bucket if c.open is not None]
        highs = [c.high for c in bucket if c.high is not None]
        lows = [c.low for c in bucket if c.low is not None]
        vols = [c.volume for c in bucket if c.volume is not None]
        out.append(Candle(
            timestamp=bucket[0].timestamp,
            close=bucket[-1].close,
            open=bucket[0].open if opens else None,
            high=max(highs) if highs else None,
            low=min(lows) if lows else None,
            volume=sum(vols) if vols else None,
        ))
    if not out:
        raise SeriesTooShort(f"{len(series)} candles do not fill one {new_period_seconds}s bucket")

    logger.debug(f"Resampled {len(series)} x {series.period_seconds}s -> {len(out)} x {new_period_seconds}s")
    return PriceSeries(pair=series.pair, period_seconds=new_period_seconds, candles=tuple(out))


def window_bounds(series: PriceSeries, window: PeriodWindow) -> Tuple[int, int]:
    """Inclusive candle index range covered by a window"""
    i0 = series.index_of(window.start)
    if i0 is None or window.end > series.last_timestamp:
        raise WindowOutOfRange(
            f"window {window.start}..{window.end} not inside series "
            f"{series.first_timestamp}..{series.last_timestamp}")
    i1 = i0 + (window.end - window.start) // series.period_seconds
    return i0, i1


def window_closes(series: PriceSeries, window: PeriodWindow) -> np.ndarray:
    i0, i1 = window_bounds(series, window)
    return series.closes()[i0:i1 + 1]


def select_periods(series: PriceSeries, step_seconds: int = DEFAULT_STRIDE_SECONDS) -> List[PeriodWindow]:
    """Every 30-day window (stride step_seconds) over which buy-and-hold lost money"""
    span = series.last_timestamp - series.first_timestamp
    if span < WINDOW_SECONDS:
        raise SeriesTooShort(f"series spans {span}s, need at least {WINDOW_SECONDS}s")
    if step_seconds <= 0 or step_seconds % series.period_seconds:
        raise NotAMultiple(step_seconds, series.period_seconds)

    closes = series.closes()
    stride = step_seconds // series.period_seconds
    width = WINDOW_SECONDS // series.period_seconds
    # i + width is the last candle inside the window
    starts = np.arange(0, max(len(closes) - width, 0), stride, dtype=np.int64)
    losing = starts[closes[starts + width] < closes[starts]]

    base = series.first_timestamp
    period = series.period_seconds
    windows = [PeriodWindow(start=base + int(i) * period, end=base + int(i) * period + WINDOW_SECONDS)
               for i in losing]
    logger.info(f"Selected {len(windows)} losing windows out of {len(starts)} candidates "
                f"(stride {step_seconds}s)")
    return windows


def split_periods(windows: List[PeriodWindow]) -> Tuple[List[PeriodWindow], List[PeriodWindow]]:
    """First ceil(n/2) windows train, the rest test"""
    if not windows:
        raise EmptyList("no windows to split")
    cut = math.ceil(len(windows) / 2)
    train = [w.tagged(PeriodRole.TRAIN) for w in windows[:cut]]
    test = [w.tagged(PeriodRole.TEST) for w in windows[cut:]]
    return train, test


def synthetic_series(seed: int, n_candles: int, period_seconds: int = 3600,
                     start_cents: int = 300_000, drift: float = -0.0005, sigma: float = 0.003,
                     pair: str = DEFAULT_PAIR, start_timestamp: int = 0) -> PriceSeries:
    """Seeded geometric random walk in integer cents"""
    rng = np.random.default_rng(seed)
    steps = rng.normal(drift, sigma, size=n_candles - 1)
    log_path = np.concatenate([[0.0], np.cumsum(steps)])
    closes = np.maximum(1, np.rint(start_cents * np.exp(log_path))).astype(np.int64)
    candles = tuple(
        Candle(timestamp=start_timestamp + i * period_seconds, close=int(c))
        for i, c in enumerate(closes)
    )
    return PriceSeries(pair=pair, period_seconds=period_seconds, candles=candles)
