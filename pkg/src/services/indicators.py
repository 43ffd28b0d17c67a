"""
Bollinger Bands over a simple moving average, in exact integer cents.

Mean and population standard deviation truncate the same way on-chain
arithmetic does: sma = floor(sum / n), stddev = isqrt(floor(var)).
"""

import math
from dataclasses import dataclass
from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from services.market_data import PriceSeries
from utils.errors import InsufficientHistory

# n * max_close must stay below this for the int64 path to be overflow-free
_INT64_SAFE_PRODUCT = 2_500_000_000


class BollingerBands(BaseModel):
    model_config = ConfigDict(frozen=True)

    sma: int
    stddev: int = Field(ge=0)
    upper: int
    lower: int

    @model_validator(mode="after")
    def _ordered(self):
        if not self.upper >= self.sma >= self.lower:
            raise ValueError("bands must satisfy upper >= sma >= lower")
        return self


def _window(series: PriceSeries, at: int, n: int) -> List[int]:
    if n < 1:
        raise ValueError(f"window size must be >= 1, got {n}")
    idx = series.index_of(at)
    if idx is None:
        raise InsufficientHistory(at, n, 0)
    if idx + 1 < n:
        raise InsufficientHistory(at, n, idx + 1)
    return [c.close for c in series.candles[idx - n + 1:idx + 1]]


def _population_stddev(closes: List[int]) -> int:
    n = len(closes)
    s1 = sum(closes)
    s2 = sum(x * x for x in closes)
    # floor(sqrt(q)) == isqrt(floor(q)) for any rational q >= 0
    return math.isqrt((n * s2 - s1 * s1) // (n * n))


def sma(series: PriceSeries, at: int, window_n: int) -> int:
    """Truncated mean of the window_n closes ending at `at`"""
    closes = _window(series, at, window_n)
    return sum(closes) // window_n


def bollinger(series: PriceSeries, at: int, n: int, d: int) -> BollingerBands:
    """Bands at `at`: sma +/- d population standard deviations"""
    if d < 0:
        raise ValueError(f"d must be >= 0, got {d}")
    closes = _window(series, at, n)
    mean = sum(closes) // n
    sd = _population_stddev(closes)
    return BollingerBands(sma=mean, stddev=sd, upper=mean + d * sd, lower=mean - d * sd)


@dataclass(frozen=True)
class BandSeries:
    """Bands for every candle; entries before `start` are zero and meaningless"""
    n: int
    d: int
    start: int
    sma: np.ndarray
    stddev: np.ndarray
    upper: np.ndarray
    lower: np.ndarray


def _isqrt_array(v: np.ndarray) -> np.ndarray:
    s = np.floor(np.sqrt(v.astype(np.float64))).astype(np.int64)
    for _ in range(2):
        s = np.where(s * s > v, s - 1, s)
        s = np.where((s + 1) * (s + 1) <= v, s + 1, s)
    return s


def bollinger_series(series: PriceSeries, n: int, d: int) -> BandSeries:
    """Vectorised bollinger() for every candle with at least n candles of history"""
    if n < 1 or d < 0:
        raise ValueError(f"invalid band parameters n={n}, d={d}")
    closes = series.closes()
    size = len(closes)
    start = n - 1
    zeros = np.zeros(size, dtype=np.int64)
    if size < n:
        return BandSeries(n, d, start, zeros, zeros.copy(), zeros.copy(), zeros.copy())

    if n * int(closes.max()) >= _INT64_SAFE_PRODUCT:
        return _bollinger_series_exact(series, n, d)

    # window sums from cumulative sums; wrap-around in cumsum cancels in the difference
    c1 = np.concatenate([[0], np.cumsum(closes)])
    c2 = np.concatenate([[0], np.cumsum(closes * closes)])
    s1 = c1[n:] - c1[:-n]
    s2 = c2[n:] - c2[:-n]
    mean = s1 // n
    var_floor = (n * s2 - s1 * s1) // (n * n)
    sd = _isqrt_array(var_floor)

    out_sma, out_sd = zeros.copy(), zeros.copy()
    out_sma[start:] = mean
    out_sd[start:] = sd
    upper, lower = zeros.copy(), zeros.copy()
    upper[start:] = mean + d * sd
    lower[start:] = mean - d * sd
    return BandSeries(n, d, start, out_sma, out_sd, upper, lower)


def _bollinger_series_exact(series: PriceSeries, n: int, d: int) -> BandSeries:
    closes = [c.close for c in series.candles]
    size = len(closes)
    out = {k: np.zeros(size, dtype=object) for k in ("sma", "sd")}
    for i in range(n - 1, size):
        window = closes[i - n + 1:i + 1]
        out["sma"][i] = sum(window) // n
        out["sd"][i] = _population_stddev(window)
    return BandSeries(n, d, n - 1, out["sma"], out["sd"],
                      out["sma"] + d * out["sd"], out["sma"] - d * out["sd"])
