import math
from fractions import Fraction

import numpy as np
import pytest
from pydantic import ValidationError

from conftest import make_series
from services.indicators import BollingerBands, bollinger, bollinger_series, sma
from services.market_data import synthetic_series
from utils.errors import InsufficientHistory


def exact_bands(closes, n, d):
    """Reference bands computed with rationals"""
    window = closes[-n:]
    mean = Fraction(sum(window), n)
    var = sum((Fraction(x) - mean) ** 2 for x in window) / n
    sd = math.isqrt(math.floor(var))
    m = math.floor(mean)
    return m, sd, m + d * sd, m - d * sd


def test_simple_window():
    series = make_series([100, 200, 300, 400])
    bands = bollinger(series, at=180, n=4, d=2)
    # mean 250, variance 12500, sqrt 111.8
    assert (bands.sma, bands.stddev, bands.upper, bands.lower) == (250, 111, 472, 28)


def test_sma_truncates():
    series = make_series([1, 2, 2])
    assert sma(series, at=120, window_n=3) == 1


def test_constant_series_has_zero_width(constant_series):
    bands = bollinger(constant_series, at=constant_series.last_timestamp, n=20, d=6)
    assert bands.stddev == 0
    assert bands.upper == bands.sma == bands.lower == 250000


def test_insufficient_history():
    series = make_series([1, 2, 3])
    with pytest.raises(InsufficientHistory) as err:
        bollinger(series, at=60, n=3, d=1)
    assert err.value.at == 60


def test_timestamp_not_in_series():
    series = make_series([1, 2, 3])
    with pytest.raises(InsufficientHistory):
        sma(series, at=61, window_n=1)


def test_bands_are_ordered_by_construction():
    with pytest.raises(ValidationError):
        BollingerBands(sma=10, stddev=1, upper=9, lower=11)


def test_matches_rational_reference_on_long_series():
    series = synthetic_series(seed=5, n_candles=10_000, period_seconds=60)
    closes = [int(c) for c in series.closes()]
    for n, d in [(5, 1), (20, 2), (55, 6)]:
        bands = bollinger(series, at=series.last_timestamp, n=n, d=d)
        assert (bands.sma, bands.stddev, bands.upper, bands.lower) == exact_bands(closes, n, d)


@pytest.mark.parametrize("n,d", [(5, 0), (13, 3), (55, 6)])
def test_vectorised_bands_match_scalar(n, d):
    series = synthetic_series(seed=9, n_candles=500, period_seconds=60)
    bands = bollinger_series(series, n, d)
    assert bands.start == n - 1
    for i in range(n - 1, len(series)):
        scalar = bollinger(series, at=series.candles[i].timestamp, n=n, d=d)
        assert (bands.sma[i], bands.stddev[i], bands.upper[i], bands.lower[i]) == (
            scalar.sma, scalar.stddev, scalar.upper, scalar.lower)


def test_exact_path_for_large_prices():
    # n * max close above the int64-safe bound switches to Python integers
    closes = [10 ** 9 + (i * 7919) % 10 ** 6 for i in range(40)]
    series = make_series(closes)
    bands = bollinger_series(series, 10, 2)
    for i in range(9, len(closes)):
        assert (int(bands.sma[i]), int(bands.stddev[i])) == exact_bands(closes[:i + 1], 10, 2)[:2]
    assert np.asarray(bands.upper[9:] >= bands.lower[9:], dtype=bool).all()


def test_short_series_returns_empty_bands():
    bands = bollinger_series(make_series([5, 6]), 3, 1)
    assert not bands.sma.any()


def test_random_short_series_match_rational_reference():
    rng = np.random.default_rng(2024)
    for _ in range(10_000):
        size = int(rng.integers(1, 33))
        closes = [int(x) for x in rng.integers(1, 1_000_001, size=size)]
        n = int(rng.integers(1, size + 1))
        d = int(rng.integers(1, 7))
        series = make_series(closes)
        bands = bollinger(series, at=series.last_timestamp, n=n, d=d)
        assert (bands.sma, bands.stddev, bands.upper, bands.lower) == exact_bands(closes, n, d)


def test_shifting_closes_shifts_bands():
    rng = np.random.default_rng(77)
    for _ in range(500):
        size = int(rng.integers(1, 41))
        closes = [int(x) for x in rng.integers(1, 500_000, size=size)]
        shift = int(rng.integers(1, 1_000_000))
        n = int(rng.integers(1, size + 1))
        d = int(rng.integers(1, 7))
        base = make_series(closes)
        moved = make_series([c + shift for c in closes])
        a = bollinger(base, at=base.last_timestamp, n=n, d=d)
        b = bollinger(moved, at=moved.last_timestamp, n=n, d=d)
        assert b.stddev == a.stddev
        assert (b.sma, b.upper, b.lower) == (a.sma + shift, a.upper + shift, a.lower + shift)


def test_bands_widen_with_d():
    series = synthetic_series(seed=12, n_candles=300, period_seconds=60)
    for n in (1, 5, 20, 40):
        for t in (series.candles[i].timestamp for i in range(n - 1, len(series), 13)):
            bands = [bollinger(series, at=t, n=n, d=d) for d in range(1, 7)]
            uppers = [b.upper for b in bands]
            lowers = [b.lower for b in bands]
            assert uppers == sorted(uppers)
            assert lowers == sorted(lowers, reverse=True)
