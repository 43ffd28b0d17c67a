"""
Grid-search training, backtesting and ranking of Bollinger parameter configurations
"""

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from config.bot_config import (
    DEFAULT_FEES_BPS,
    DEFAULT_INITIAL_CENTS,
    DEFAULT_RISKLESS_PCT,
    DEFAULT_STRIDE_SECONDS,
    DEFAULT_TOP_K,
    DEFAULT_WORKERS,
    PARAM_RANGES,
)
from services.indicators import BandSeries, bollinger_series
from services.market_data import (PeriodWindow, PriceSeries, resample, select_periods, split_periods,
                                  window_bounds, window_closes)
from services.strategy import BUY_SIGNAL, SELL_SIGNAL, ParamConfig, decision_signals
from utils.errors import (
    EmptyTestSet,
    InvalidRange,
    TooFewSamples,
    WindowMismatch,
    ZeroVariance,
)
from utils.logger_config import get_logger, get_performance_logger

logger = get_logger("training")
perf_logger = get_performance_logger("training")

BPS = 10_000


class GridSpace(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_values: Tuple[int, ...]
    d_values: Tuple[int, ...]
    u_values: Tuple[int, ...]
    l_values: Tuple[int, ...]

    @classmethod
    def from_ranges(cls, ranges: Dict[str, Tuple[int, int]] = PARAM_RANGES) -> "GridSpace":
        return cls(**{f"{axis}_values": tuple(sorted(grid_values(*ranges[axis]))) for axis in "ndul"})

    @property
    def size(self) -> int:
        return len(self.n_values) * len(self.d_values) * len(self.u_values) * len(self.l_values)


class BacktestResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    config: Optional[ParamConfig] = None  # None for the buy-and-hold baseline
    window: PeriodWindow
    initial_balance: int = Field(gt=0)
    end_balance: int = Field(ge=0)
    return_pct: float
    relative_return_pp: float = 0.0
    trade_count: int = Field(ge=0)
    max_drawdown_pct: float = 0.0


class RankingMethod(str, Enum):
    SHARPE = "sharpe"
    AVERAGE = "avg"


class RankingRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    config: Optional[ParamConfig] = None  # None for the overall row
    label: str
    score: float
    max: float
    min: float
    mean: float
    stddev: float
    returns: Tuple[float, ...]


class RankingReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    method: RankingMethod
    rows: Tuple[RankingRow, ...]
    overall: RankingRow

    def table(self) -> List[Dict[str, object]]:
        """Rows shaped like the published comparison: config,max,min,mean,stddev"""
        return [
            {"config": r.label, "max": r.max, "min": r.min, "mean": r.mean, "stddev": r.stddev}
            for r in (*self.rows, self.overall)
        ]


def grid_values(min_value: int, max_value: int) -> set:
    """{min, max, floor((min + max) / 2)}"""
    if min_value > max_value:
        raise InvalidRange(f"min {min_value} > max {max_value}")
    return {min_value, max_value, (min_value + max_value) // 2}


def enumerate_configs(space: GridSpace) -> List[ParamConfig]:
    """Cartesian product in lexicographic (n, d, u, l) order"""
    axes = [sorted(set(v)) for v in (space.n_values, space.d_values, space.u_values, space.l_values)]
    return [ParamConfig(n=n, d=d, u=u, l=l) for n, d, u, l in itertools.product(*axes)]


def _pct(value: Fraction, initial: int) -> float:
    return float((value - initial) * 100 / initial)


def _max_drawdown_pct(equity: np.ndarray) -> float:
    if equity.size == 0:
        return 0.0
    peak = np.maximum.accumulate(equity)
    return float(np.max((peak - equity) / peak) * 100)


def _executed_trades(signals: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Positions and kinds of position-changing signals, starting flat in quote"""
    idx = np.flatnonzero(signals)
    if idx.size == 0:
        return idx, idx
    kinds = signals[idx]
    keep = np.ones(idx.size, dtype=bool)
    keep[1:] = kinds[1:] != kinds[:-1]
    idx, kinds = idx[keep], kinds[keep]
    if kinds.size and kinds[0] == SELL_SIGNAL:
        idx, kinds = idx[1:], kinds[1:]
    return idx, kinds


def _simulate(closes: np.ndarray, signals: np.ndarray, fees_bps: int, initial: int) -> Tuple[Fraction, int, float]:
    """
    All-in/all-out over one window. `signals` is aligned with `closes`.
    Returns (final value in cents, trade count, max drawdown %).
    """
    idx, kinds = _executed_trades(signals)
    quote, base = Fraction(initial), Fraction(0)
    equity = np.full(closes.size, float(initial))
    for pos, (i, kind) in enumerate(zip(idx, kinds)):
        price = int(closes[i])
        end = idx[pos + 1] if pos + 1 < idx.size else closes.size
        if kind == BUY_SIGNAL:
            base = quote * (BPS - fees_bps) / (BPS * price)
            quote = Fraction(0)
            equity[i:end] = float(base) * closes[i:end]
        else:
            quote = Fraction(math.floor(base * price * (BPS - fees_bps) / BPS))
            base = Fraction(0)
            equity[i:end] = float(quote)
    final = quote + base * int(closes[-1])
    return final, int(idx.size), _max_drawdown_pct(equity)


def _baseline_final(closes: np.ndarray, initial: int) -> Fraction:
    return Fraction(initial) * int(closes[-1]) / int(closes[0])


def buy_and_hold(series: PriceSeries, window: PeriodWindow, initial: int = DEFAULT_INITIAL_CENTS) -> BacktestResult:
    """Buy everything at the window's first close, hold to its last"""
    if initial <= 0:
        raise ValueError("initial balance must be positive")
    closes = window_closes(series, window)
    final = _baseline_final(closes, initial)
    return BacktestResult(
        window=window,
        initial_balance=initial,
        end_balance=math.floor(final),
        return_pct=_pct(final, initial),
        trade_count=1,
        max_drawdown_pct=_max_drawdown_pct(closes.astype(np.float64)),
    )


def _window_result(series: PriceSeries, window: PeriodWindow, config: ParamConfig, full_signals: np.ndarray,
                   fees_bps: int, initial: int) -> BacktestResult:
    i0, i1 = window_bounds(series, window)
    closes = series.closes()[i0:i1 + 1]
    final, trades, drawdown = _simulate(closes, full_signals[i0:i1 + 1], fees_bps, initial)
    baseline = _baseline_final(closes, initial)
    return_pct = _pct(final, initial)
    return BacktestResult(
        config=config,
        window=window,
        initial_balance=initial,
        end_balance=math.floor(final),
        return_pct=return_pct,
        relative_return_pp=return_pct - _pct(baseline, initial),
        trade_count=trades,
        max_drawdown_pct=drawdown,
    )


def _full_signals(series: PriceSeries, config: ParamConfig, bands: Optional[BandSeries] = None) -> np.ndarray:
    bands = bands or bollinger_series(series, config.n, config.d)
    signals = decision_signals(series.closes(), bands.upper, bands.lower, config.u, config.l)
    signals[:bands.start] = 0  # no decision without a full moving-average window
    return signals


def backtest(series: PriceSeries, window: PeriodWindow, config: ParamConfig,
             fees_bps: int = DEFAULT_FEES_BPS, initial: int = DEFAULT_INITIAL_CENTS) -> BacktestResult:
    """
    Simulate all-in/all-out trading of `config` over `window`.

    Bands may use candles before the window start as history. Buy converts the
    whole quote balance to base at the close (minus fees), Sell the reverse;
    repeated signals are no-ops. The result is marked to market at the last close.
    """
    if initial <= 0:
        raise ValueError("initial balance must be positive")
    if not 0 <= fees_bps < BPS:
        raise ValueError(f"fees_bps must be in [0, {BPS}), got {fees_bps}")
    return _window_result(series, window, config, _full_signals(series, config), fees_bps, initial)


def relative_return(strategy: BacktestResult, baseline: BacktestResult) -> float:
    """Strategy return minus baseline return, in percentage points"""
    if (strategy.window.start, strategy.window.end) != (baseline.window.start, baseline.window.end):
        raise WindowMismatch("results cover different windows")
    if strategy.initial_balance != baseline.initial_balance:
        raise WindowMismatch("results start from different balances")
    return strategy.return_pct - baseline.return_pct


def sharpe(per_window_returns: Sequence[float], riskless: float = DEFAULT_RISKLESS_PCT) -> float:
    """Mean excess return over its population standard deviation"""
    if len(per_window_returns) < 2:
        raise TooFewSamples(f"Sharpe ratio needs at least 2 samples, got {len(per_window_returns)}")
    excess = np.asarray(per_window_returns, dtype=np.float64) - riskless
    sd = float(np.std(excess))
    if sd == 0.0:
        raise ZeroVariance("all returns are equal")
    return float(np.mean(excess)) / sd


def run_grid(series: PriceSeries, windows: Sequence[PeriodWindow], configs: Iterable[ParamConfig],
             fees_bps: int = DEFAULT_FEES_BPS, initial: int = DEFAULT_INITIAL_CENTS,
             workers: int = DEFAULT_WORKERS) -> Dict[ParamConfig, List[BacktestResult]]:
    """
    Backtest every config over every window. Configs run concurrently; the
    returned mapping is ordered by config, each list by window.
    """
    configs = sorted(set(configs), key=ParamConfig.as_tuple)
    windows = sorted(windows, key=lambda w: w.start)
    band_cache: Dict[Tuple[int, int], BandSeries] = {}
    for nd in sorted({(c.n, c.d) for c in configs}):
        band_cache[nd] = bollinger_series(series, *nd)

    def _one(config: ParamConfig) -> List[BacktestResult]:
        signals = _full_signals(series, config, band_cache[(config.n, config.d)])
        return [_window_result(series, w, config, signals, fees_bps, initial) for w in windows]

    perf_logger.start_timer("grid")
    if workers > 1 and len(configs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one, configs))
    else:
        results = [_one(c) for c in configs]
    perf_logger.stop_timer("grid", message=f"Backtested {len(configs)} configs x {len(windows)} windows")
    return dict(zip(configs, results))


def _row(config: Optional[ParamConfig], label: str, score: float, returns: Sequence[float]) -> RankingRow:
    arr = np.asarray(returns, dtype=np.float64)
    return RankingRow(
        config=config,
        label=label,
        score=score,
        max=float(arr.max()),
        min=float(arr.min()),
        mean=float(arr.mean()),
        stddev=float(arr.std()),
        returns=tuple(float(x) for x in arr),
    )


def _overall(rows: Sequence[RankingRow]) -> RankingRow:
    union = [r for row in rows for r in row.returns]
    return _row(None, "overall", float(np.mean([row.score for row in rows])), union)


def rank(results: Dict[ParamConfig, Sequence[float]], method: RankingMethod = RankingMethod.AVERAGE,
         k: int = DEFAULT_TOP_K) -> RankingReport:
    """
    Score each config by the Sharpe ratio (riskless 0) or the mean of its
    per-window relative returns and keep the top k; ties go to the
    lexicographically smaller config.
    """
    if not results:
        raise TooFewSamples("nothing to rank")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    method = RankingMethod(method)
    scored = []
    for config, returns in results.items():
        if not len(returns):
            raise TooFewSamples(f"config {config.label} has no results")
        score = sharpe(returns) if method is RankingMethod.SHARPE else float(np.mean(returns))
        scored.append((score, config, returns))
    scored.sort(key=lambda item: (-item[0], item[1].as_tuple()))

    rows = tuple(_row(c, c.label, s, r) for s, c, r in scored[:k])
    report = RankingReport(method=method, rows=rows, overall=_overall(rows))
    logger.info(f"Ranked {len(results)} configs by {method.value}; top: "
                f"{', '.join(f'{r.label} ({r.score:.4f})' for r in rows)}")
    return report


def relative_returns(grid: Dict[ParamConfig, List[BacktestResult]]) -> Dict[ParamConfig, List[float]]:
    return {c: [r.relative_return_pp for r in results] for c, results in grid.items()}


def train(series: PriceSeries, train_windows: Sequence[PeriodWindow],
          method: RankingMethod = RankingMethod.AVERAGE, k: int = DEFAULT_TOP_K,
          space: Optional[GridSpace] = None, fees_bps: int = DEFAULT_FEES_BPS,
          initial: int = DEFAULT_INITIAL_CENTS, workers: int = DEFAULT_WORKERS) -> RankingReport:
    """Grid search over the training windows and rank"""
    space = space or GridSpace.from_ranges()
    logger.info(f"Training {space.size} configs over {len(train_windows)} windows (method={RankingMethod(method).value})")
    grid = run_grid(series, train_windows, enumerate_configs(space), fees_bps, initial, workers)
    return rank(relative_returns(grid), method, k)


def evaluate(top: RankingReport, series: PriceSeries, test_windows: Sequence[PeriodWindow],
             fees_bps: int = DEFAULT_FEES_BPS, initial: int = DEFAULT_INITIAL_CENTS,
             workers: int = DEFAULT_WORKERS) -> RankingReport:
    """Backtest the ranked configs over the test windows; rows keep the training order and scores"""
    if not test_windows:
        raise EmptyTestSet("no test windows")
    configs = [row.config for row in top.rows]
    grid = run_grid(series, test_windows, configs, fees_bps, initial, workers)
    rows = tuple(
        _row(row.config, row.label, row.score, [r.relative_return_pp for r in grid[row.config]])
        for row in top.rows
    )
    report = RankingReport(method=top.method, rows=rows, overall=_overall(rows))
    logger.info(f"Evaluated {len(rows)} configs over {len(test_windows)} test windows: "
                f"overall mean {report.overall.mean:.2f}pp")
    return report


class TrainingOutcome(BaseModel):
    model_config = ConfigDict(frozen=True)

    period_seconds: int
    train_windows: Tuple[PeriodWindow, ...]
    test_windows: Tuple[PeriodWindow, ...]
    training: RankingReport
    testing: RankingReport


def train_and_evaluate(series: PriceSeries, method: RankingMethod = RankingMethod.AVERAGE,
                       k: int = DEFAULT_TOP_K, step_seconds: int = DEFAULT_STRIDE_SECONDS,
                       fees_bps: int = DEFAULT_FEES_BPS, initial: int = DEFAULT_INITIAL_CENTS,
                       workers: int = DEFAULT_WORKERS, space: Optional[GridSpace] = None) -> TrainingOutcome:
    """Select losing windows, split, train on the first half and test on the second"""
    train_windows, test_windows = split_periods(select_periods(series, step_seconds))
    if not test_windows:
        raise EmptyTestSet(f"only {len(train_windows)} losing window(s); nothing left for testing")
    training = train(series, train_windows, method, k, space, fees_bps, initial, workers)
    testing = evaluate(training, series, test_windows, fees_bps, initial, workers)
    return TrainingOutcome(
        period_seconds=series.period_seconds,
        train_windows=tuple(train_windows),
        test_windows=tuple(test_windows),
        training=training,
        testing=testing,
    )


def frequency_study(series: PriceSeries, periods: Sequence[int], k: int = DEFAULT_TOP_K,
                    method: RankingMethod = RankingMethod.AVERAGE, step_seconds: int = DEFAULT_STRIDE_SECONDS,
                    fees_bps: int = DEFAULT_FEES_BPS, initial: int = DEFAULT_INITIAL_CENTS,
                    workers: int = DEFAULT_WORKERS) -> List[Tuple[int, RankingReport]]:
    """
    Re-run the whole pipeline at each trading period. Windows are re-selected
    per period, so the training and testing sets may differ between periods.
    """
    reports = []
    for period in periods:
        logger.info(f"Frequency study: trading period {period}s")
        outcome = train_and_evaluate(resample(series, period), method, k, step_seconds,
                                     fees_bps, initial, workers)
        reports.append((period, outcome.testing))
    return reports


def frequency_table(reports: Sequence[Tuple[int, RankingReport]]) -> List[Dict[str, object]]:
    """Combined comparison: each per-period table with a leading period column"""
    return [{"period": period, **row} for period, report in reports for row in report.table()]
