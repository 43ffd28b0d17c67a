"""
Parametrised Bollinger trading rule with the proof circuit's integer semantics:

    buy:  price < (lower / 100) * (100 + l)
    sell: price > (upper / 100) * (100 - u)

Division truncates toward zero before the multiplication. Buy wins when both fire.
"""

from enum import Enum
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config.bot_config import PARAM_RANGES

N_MIN, N_MAX = PARAM_RANGES["n"]
D_MIN, D_MAX = PARAM_RANGES["d"]
U_MIN, U_MAX = PARAM_RANGES["u"]
L_MIN, L_MAX = PARAM_RANGES["l"]


class ParamConfig(BaseModel):
    """The four trained parameters N, D, U, L"""
    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=N_MIN, le=N_MAX, description="moving-average periods")
    d: int = Field(ge=D_MIN, le=D_MAX, description="standard deviations")
    u: int = Field(ge=U_MIN, le=U_MAX, description="sell threshold percent")
    l: int = Field(ge=L_MIN, le=L_MAX, description="buy threshold percent")

    def as_tuple(self) -> Tuple[int, int, int, int]:
        return (self.n, self.d, self.u, self.l)

    @property
    def label(self) -> str:
        return f"{self.n}.{self.d}.{self.u}.{self.l}"

    def __lt__(self, other: "ParamConfig") -> bool:
        return self.as_tuple() < other.as_tuple()


def config_label(c: ParamConfig) -> str:
    return c.label


def parse_config(label: str) -> ParamConfig:
    """Parse an `N.D.U.L` label such as `20.6.14.14` or `20.3.-1.-1`"""
    parts = label.strip().split(".")
    if len(parts) != 4:
        raise ValueError(f"config label must have four dot-separated integers, got {label!r}")
    try:
        n, d, u, l = (int(p) for p in parts)
    except ValueError:
        raise ValueError(f"config label must contain integers, got {label!r}")
    return ParamConfig(n=n, d=d, u=u, l=l)


class PublicParams(BaseModel):
    """Inputs the chain can recompute: current price and both bands, in cents"""
    model_config = ConfigDict(frozen=True)

    price: int = Field(gt=0)
    upper: int = Field(gt=0)
    # may be 0: the chain clamps a negative lower band to zero
    lower: int = Field(ge=0)

    @model_validator(mode="after")
    def _ordered(self):
        if self.upper < self.lower:
            raise ValueError("upper band must be >= lower band")
        return self


class TradeKind(str, Enum):
    BUY = "Buy"
    SELL = "Sell"
    HOLD = "Hold"


class TradeDecision(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: TradeKind


def truncdiv(x: int, m: int) -> int:
    """Integer division truncating toward zero"""
    q = abs(x) // abs(m)
    return q if (x >= 0) == (m > 0) else -q


def buy_threshold(lower: int, l: int) -> int:
    return truncdiv(lower, 100) * (100 + l)


def sell_threshold(upper: int, u: int) -> int:
    return truncdiv(upper, 100) * (100 - u)


def decide_raw(price: int, upper: int, lower: int, u: int, l: int) -> TradeKind:
    if price < buy_threshold(lower, l):
        return TradeKind.BUY
    if price > sell_threshold(upper, u):
        return TradeKind.SELL
    return TradeKind.HOLD


def decide(p: PublicParams, c: ParamConfig) -> TradeDecision:
    """Trading decision for public parameters under a parameter configuration"""
    return TradeDecision(kind=decide_raw(p.price, p.upper, p.lower, c.u, c.l))


BUY_SIGNAL = 1
SELL_SIGNAL = -1


def decision_signals(closes: np.ndarray, upper: np.ndarray, lower: np.ndarray, u: int, l: int) -> np.ndarray:
    """Vectorised decide_raw: +1 buy, -1 sell, 0 hold for each element"""
    def _trunc100(x):
        return np.where(x < 0, -((-x) // 100), x // 100)

    buy = np.asarray(closes < _trunc100(lower) * (100 + l), dtype=bool)
    sell = np.asarray(closes > _trunc100(upper) * (100 - u), dtype=bool) & ~buy
    return np.where(buy, BUY_SIGNAL, np.where(sell, SELL_SIGNAL, 0)).astype(np.int8)
