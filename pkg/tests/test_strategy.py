import itertools

import numpy as np
import pytest
from pydantic import ValidationError

from services.strategy import (
    BUY_SIGNAL,
    SELL_SIGNAL,
    ParamConfig,
    PublicParams,
    TradeKind,
    buy_threshold,
    config_label,
    decide,
    decide_raw,
    decision_signals,
    parse_config,
    sell_threshold,
    truncdiv,
)
from services.zkproof import Witness, circuit_eval


def test_truncdiv_rounds_toward_zero():
    assert truncdiv(199, 100) == 1
    assert truncdiv(-199, 100) == -1
    assert truncdiv(0, 100) == 0
    assert truncdiv(7, -2) == -3


def test_thresholds_divide_before_multiplying():
    # 9999 / 100 truncates to 99 before scaling
    assert buy_threshold(9999, 1) == 99 * 101
    assert sell_threshold(10099, -1) == 100 * 101


@pytest.mark.parametrize("price,expected", [
    (9000, TradeKind.BUY),
    (10999, TradeKind.HOLD),
    (11000, TradeKind.HOLD),
    (12001, TradeKind.SELL),
])
def test_decide_basic(price, expected):
    p = PublicParams(price=price, upper=12000, lower=10000)
    assert decide(p, ParamConfig(n=20, d=2, u=0, l=0)).kind is expected
    assert decide_raw(price, 12000, 10000, 0, 0) is expected


def test_strict_inequalities_at_threshold():
    c = ParamConfig(n=5, d=1, u=0, l=0)
    assert decide(PublicParams(price=10000, upper=12000, lower=10000), c).kind is TradeKind.HOLD
    assert decide(PublicParams(price=12000, upper=12000, lower=10000), c).kind is TradeKind.HOLD


def test_buy_wins_when_both_fire():
    # zero-width band with generous thresholds: price below buy and above sell
    p = PublicParams(price=10000, upper=10000, lower=10000)
    assert decide(p, ParamConfig(n=5, d=1, u=30, l=30)).kind is TradeKind.BUY


def test_negative_thresholds_tighten_the_rule():
    p = PublicParams(price=9950, upper=12000, lower=10000)
    assert decide(p, ParamConfig(n=5, d=1, u=0, l=0)).kind is TradeKind.BUY
    assert decide(p, ParamConfig(n=5, d=1, u=0, l=-1)).kind is TradeKind.HOLD


def test_public_params_validation():
    with pytest.raises(ValidationError):
        PublicParams(price=0, upper=10, lower=5)
    with pytest.raises(ValidationError):
        PublicParams(price=10, upper=4, lower=5)
    assert PublicParams(price=10, upper=5, lower=0).lower == 0


def test_param_ranges_enforced():
    with pytest.raises(ValidationError):
        ParamConfig(n=0, d=1, u=0, l=0)
    with pytest.raises(ValidationError):
        ParamConfig(n=41, d=1, u=0, l=0)
    with pytest.raises(ValidationError):
        ParamConfig(n=5, d=7, u=0, l=0)
    with pytest.raises(ValidationError):
        ParamConfig(n=5, d=1, u=-2, l=0)


def test_parse_config_labels():
    c = parse_config("20.3.-1.-1")
    assert c.as_tuple() == (20, 3, -1, -1)
    assert c.label == config_label(c) == "20.3.-1.-1"
    assert parse_config(config_label(ParamConfig(n=1, d=6, u=30, l=0))).as_tuple() == (1, 6, 30, 0)
    with pytest.raises(ValueError):
        parse_config("20.3.1")
    with pytest.raises(ValueError):
        parse_config("a.b.c.d")


def test_configs_sort_by_tuple():
    configs = [parse_config(s) for s in ("20.1.0.0", "5.6.0.0", "5.1.3.0")]
    assert [c.label for c in sorted(configs)] == ["5.1.3.0", "5.6.0.0", "20.1.0.0"]


PRICES = range(9000, 11001, 50)
BANDS = [(10500, 9500), (11000, 10000), (10100, 9900), (10000, 10000), (10099, 99), (12345, 0)]
BOUNDS = range(-1, 31)


def test_decide_agrees_with_circuit():
    """Every non-Hold decision is provable, and the opposite side never is"""
    buy_witness = {b: Witness(buy_sell_flag=1, bound_percentage=b) for b in BOUNDS}
    sell_witness = {b: Witness(buy_sell_flag=0, bound_percentage=b) for b in BOUNDS}
    for price, (upper, lower) in itertools.product(PRICES, BANDS):
        p = PublicParams(price=price, upper=upper, lower=lower)
        for u, l in itertools.product(BOUNDS, BOUNDS):
            kind = decide_raw(price, upper, lower, u, l)
            buy_ok = circuit_eval(p, buy_witness[l])
            sell_ok = circuit_eval(p, sell_witness[u])
            if kind is TradeKind.BUY:
                assert buy_ok
            elif kind is TradeKind.SELL:
                assert sell_ok and not buy_ok
            else:
                assert not buy_ok and not sell_ok


def test_vectorised_signals_match_scalar():
    rng = np.random.default_rng(1)
    closes = rng.integers(9000, 11000, size=400)
    lower = rng.integers(9000, 10200, size=400)
    upper = lower + rng.integers(0, 1500, size=400)
    for u, l in [(0, 0), (-1, 5), (30, 30), (7, -1)]:
        signals = decision_signals(closes, upper, lower, u, l)
        expected = {TradeKind.BUY: BUY_SIGNAL, TradeKind.SELL: SELL_SIGNAL, TradeKind.HOLD: 0}
        for i in range(len(closes)):
            kind = decide_raw(int(closes[i]), int(upper[i]), int(lower[i]), u, l)
            assert signals[i] == expected[kind]


def test_larger_l_buys_more_often():
    p = PublicParams(price=10200, upper=12000, lower=10000)
    kinds = [decide(p, ParamConfig(n=5, d=1, u=0, l=l)).kind for l in range(-1, 31)]
    first_buy = kinds.index(TradeKind.BUY)
    assert all(k is TradeKind.BUY for k in kinds[first_buy:])


def test_signals_are_monotonic_in_thresholds():
    """Raising u never removes a sell; raising l never removes a buy"""
    for price, (upper, lower) in itertools.product(PRICES, BANDS):
        for fixed in BOUNDS:
            sells = [decide_raw(price, upper, lower, u, fixed) is TradeKind.SELL for u in BOUNDS]
            buys = [decide_raw(price, upper, lower, fixed, l) is TradeKind.BUY for l in BOUNDS]
            assert sells == sorted(sells)
            assert buys == sorted(buys)


def test_larger_u_sells_more_often():
    p = PublicParams(price=11500, upper=12000, lower=10000)
    kinds = [decide(p, ParamConfig(n=5, d=1, u=u, l=0)).kind for u in range(-1, 31)]
    first_sell = kinds.index(TradeKind.SELL)
    assert first_sell > 0
    assert all(k is TradeKind.SELL for k in kinds[first_sell:])
