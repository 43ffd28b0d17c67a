import pytest
from pydantic import ValidationError

from config.bot_config import WINDOW_SECONDS
from conftest import DATA_DIR, make_series
from services.market_data import (
    Candle,
    PeriodRole,
    PeriodWindow,
    PriceSeries,
    load_candles,
    resample,
    select_periods,
    split_periods,
    synthetic_series,
    window_bounds,
    window_closes,
    write_candles,
)
from utils.errors import (
    EmptyFile,
    EmptyList,
    MalformedRow,
    NonUniformSpacing,
    NotAMultiple,
    SeriesTooShort,
    WindowOutOfRange,
)

AUG_1_2021 = 1627776000


def write(tmp_path, text, name="candles.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadCandles:
    def test_committed_fixture_sorted_and_rounded_half_even(self):
        series = load_candles(DATA_DIR / "candles_small.csv", period_seconds=60)
        assert len(series) == 6
        assert series.first_timestamp == AUG_1_2021
        assert [c.timestamp for c in series.candles] == [AUG_1_2021 + 60 * i for i in range(6)]
        assert series.candles[0].close == 253400  # 2534.005 -> 2534.00
        assert series.candles[1].close == 254002  # 2540.015 -> 2540.02
        assert series.candles[2].high == 254500
        assert series.candles[0].volume == 1000

    def test_unix_seconds_and_close_only(self, tmp_path):
        path = write(tmp_path, "timestamp,close\n0,100.00\n60,101.50\n120,99.99\n")
        series = load_candles(path, period_seconds=60)
        assert list(series.closes()) == [10000, 10150, 9999]
        assert series.candles[0].open is None

    def test_gap_reports_first_offending_timestamp(self, tmp_path):
        path = write(tmp_path, "timestamp,close\n0,1\n60,1\n180,1\n240,1\n")
        with pytest.raises(NonUniformSpacing) as err:
            load_candles(path, period_seconds=60)
        assert err.value.timestamp == 180

    def test_duplicate_timestamp_is_malformed(self, tmp_path):
        path = write(tmp_path, "timestamp,close\n0,1\n60,1\n60,2\n")
        with pytest.raises(MalformedRow) as err:
            load_candles(path, period_seconds=60)
        assert err.value.line == 4

    def test_non_numeric_price_reports_line(self, tmp_path):
        path = write(tmp_path, "timestamp,close\n0,1\n60,abc\n")
        with pytest.raises(MalformedRow) as err:
            load_candles(path, period_seconds=60)
        assert err.value.line == 3

    @pytest.mark.parametrize("close", ["1e30", "1e20", "-1e30"])
    def test_out_of_range_price_is_malformed(self, tmp_path, close):
        path = write(tmp_path, f"timestamp,close\n0,1\n60,{close}\n")
        with pytest.raises(MalformedRow) as err:
            load_candles(path, period_seconds=60)
        assert err.value.line == 3

    def test_largest_int64_price_loads(self, tmp_path):
        path = write(tmp_path, "timestamp,close\n0,92233720368547758.07\n")
        assert load_candles(path, period_seconds=60).candles[0].close == 2 ** 63 - 1

    def test_binary_file_is_malformed(self, tmp_path):
        path = tmp_path / "binary.csv"
        path.write_bytes(b"\xff\xfe")
        with pytest.raises(MalformedRow):
            load_candles(path, period_seconds=60)

    def test_non_positive_close_rejected(self, tmp_path):
        path = write(tmp_path, "timestamp,close\n0,0\n")
        with pytest.raises(MalformedRow):
            load_candles(path, period_seconds=60)

    def test_empty_and_header_only(self, tmp_path):
        with pytest.raises(EmptyFile):
            load_candles(write(tmp_path, "", "empty.csv"))
        with pytest.raises(EmptyFile):
            load_candles(write(tmp_path, "timestamp,open,high,low,close,volume\n", "header.csv"))

    def test_missing_close_column(self, tmp_path):
        with pytest.raises(MalformedRow):
            load_candles(write(tmp_path, "timestamp,price\n0,1\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_candles(tmp_path / "nope.csv")

    def test_written_series_loads_back(self, tmp_path):
        series = load_candles(DATA_DIR / "candles_small.csv", period_seconds=60)
        again = load_candles(write_candles(series, tmp_path / "out.csv"), period_seconds=60)
        assert again.candles == series.candles


class TestDomainTypes:
    def test_candle_requires_positive_close(self):
        with pytest.raises(ValidationError):
            Candle(timestamp=0, close=0)

    def test_series_rejects_gaps(self):
        with pytest.raises(ValidationError):
            PriceSeries(pair="ETH:USDC", period_seconds=60,
                        candles=(Candle(timestamp=0, close=1), Candle(timestamp=120, close=1)))

    def test_window_must_span_thirty_days(self):
        with pytest.raises(ValidationError):
            PeriodWindow(start=0, end=WINDOW_SECONDS - 1)
        assert PeriodWindow(start=5, end=5 + WINDOW_SECONDS).role is None


class TestResample:
    def test_ohlcv_aggregation(self):
        candles = tuple(
            Candle(timestamp=60 * i, open=100 + i, high=200 + i, low=50 - i, close=150 + i, volume=10)
            for i in range(7)
        )
        series = PriceSeries(pair="ETH:USDC", period_seconds=60, candles=candles)
        out = resample(series, 180)
        assert out.period_seconds == 180
        assert len(out) == 2  # partial tail dropped
        first = out.candles[0]
        assert (first.timestamp, first.open, first.high, first.low, first.close, first.volume) == (
            0, 100, 202, 48, 152, 30)
        assert out.candles[1].timestamp == 180

    def test_not_a_multiple(self):
        with pytest.raises(NotAMultiple):
            resample(make_series([1] * 10), 90)

    def test_same_period_is_identity(self):
        series = make_series([1, 2, 3])
        assert resample(series, 60) is series


class TestPeriods:
    def test_select_losing_windows(self):
        # daily candles: windows starting at days 0..10, only the one starting on day 2 loses
        closes = [100] * 41
        closes[2] = 120
        series = make_series(closes, 86400)
        windows = select_periods(series, 86400)
        assert [w.start for w in windows] == [2 * 86400]
        assert windows[0].end == 2 * 86400 + WINDOW_SECONDS

    def test_window_is_inclusive(self):
        series = make_series(list(range(200, 169, -1)), 86400)  # exactly 31 candles
        windows = select_periods(series, 86400)
        assert len(windows) == 1
        assert list(window_closes(series, windows[0]))[-1] == 170

    def test_too_short(self):
        with pytest.raises(SeriesTooShort):
            select_periods(make_series([1] * 30, 86400), 86400)

    def test_step_must_be_multiple_of_period(self):
        with pytest.raises(NotAMultiple):
            select_periods(make_series([1] * 40, 86400), 3600)

    def test_split_rounds_train_up(self):
        windows = [PeriodWindow(start=i * 86400, end=i * 86400 + WINDOW_SECONDS) for i in range(5)]
        train, test = split_periods(windows)
        assert len(train) == 3 and len(test) == 2
        assert all(w.role is PeriodRole.TRAIN for w in train)
        assert all(w.role is PeriodRole.TEST for w in test)
        assert test[0].start > train[-1].start

    def test_split_empty(self):
        with pytest.raises(EmptyList):
            split_periods([])

    def test_window_out_of_range(self):
        series = make_series([1] * 10, 86400)
        with pytest.raises(WindowOutOfRange):
            window_bounds(series, PeriodWindow(start=0, end=WINDOW_SECONDS))


def test_synthetic_series_is_seeded():
    a = synthetic_series(seed=3, n_candles=500)
    b = synthetic_series(seed=3, n_candles=500)
    c = synthetic_series(seed=4, n_candles=500)
    assert a.candles == b.candles
    assert list(a.closes()) != list(c.closes())
    assert a.closes().min() > 0


def test_losing_fixture_has_enough_windows(losing_series):
    assert len(select_periods(losing_series, 86400)) >= 10
