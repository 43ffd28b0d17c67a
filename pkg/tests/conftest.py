import sys
from pathlib import Path
from typing import Sequence

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from config.bot_config import WINDOW_SECONDS  # noqa: E402
from services.market_data import Candle, PeriodWindow, PriceSeries, synthetic_series  # noqa: E402
from services.strategy import ParamConfig  # noqa: E402
from services.zkproof import setup  # noqa: E402

DATA_DIR = Path(__file__).parent / "data"

# six candles spanning exactly one 30-day window
SIX_CANDLE_PERIOD = WINDOW_SECONDS // 5
SIX_CANDLE_CLOSES = [10000, 10000, 10000, 8000, 8000, 12000]


def make_series(closes: Sequence[int], period_seconds: int = 60, start: int = 0, pair: str = "ETH:USDC") -> PriceSeries:
    return PriceSeries(
        pair=pair,
        period_seconds=period_seconds,
        candles=tuple(Candle(timestamp=start + i * period_seconds, close=int(c)) for i, c in enumerate(closes)),
    )


@pytest.fixture
def six_candle_series() -> PriceSeries:
    return make_series(SIX_CANDLE_CLOSES, SIX_CANDLE_PERIOD)


@pytest.fixture
def six_candle_window() -> PeriodWindow:
    return PeriodWindow(start=0, end=WINDOW_SECONDS)


@pytest.fixture
def oracle_config() -> ParamConfig:
    return ParamConfig(n=3, d=1, u=0, l=0)


@pytest.fixture(scope="session")
def losing_series() -> PriceSeries:
    """120 days of hourly candles drifting down; buy-and-hold loses in most windows"""
    return synthetic_series(seed=11, n_candles=120 * 24, period_seconds=3600)


@pytest.fixture
def alternating_series() -> PriceSeries:
    """Closes 10100, 10000, ... : with config 2.1.1.1 every round from index 1 trades"""
    return make_series([10100 if i % 2 == 0 else 10000 for i in range(1200)], 60)


@pytest.fixture
def alternating_config() -> ParamConfig:
    return ParamConfig(n=2, d=1, u=1, l=1)


@pytest.fixture
def constant_series() -> PriceSeries:
    return make_series([250000] * 100, 60)


@pytest.fixture(scope="session")
def keys():
    return setup(b"test-ceremony")
