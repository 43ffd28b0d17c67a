"""
Simulated chain: price oracle, on-chain bot contract, verifier contract,
append-only gas ledger and per-phase latency sampling
"""

import math
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config.bot_config import (
    ETH_USD,
    GAS_PRICE_GWEI,
    LATENCY_FAMILIES,
    LATENCY_PHASES,
    PUBLIC_PARAMS_GAS,
    VERIFIER_GAS_MEAN,
    VERIFIER_JITTER_PCT,
)
from services.indicators import bollinger
from services.market_data import PriceSeries
from services.strategy import PublicParams
from services.zkproof import Proof, verify
from utils.errors import DuplicateUser, EmptyPool, NoData, UnknownPhase, ZeroAmount
from utils.logger_config import get_logger, get_request_logger

logger = get_logger("chain_sim")


def seeded_generators(seed: int, names: Sequence[str]) -> Dict[str, np.random.Generator]:
    """Independent generators for each named stream, all derived from one seed"""
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {name: np.random.default_rng(child) for name, child in zip(names, children)}


class GasSchedule(BaseModel):
    model_config = ConfigDict(frozen=True)

    public_params_gas: int = Field(default=PUBLIC_PARAMS_GAS, gt=0)
    verifier_gas_mean: int = Field(default=VERIFIER_GAS_MEAN, gt=0)
    gas_price_gwei: float = Field(default=GAS_PRICE_GWEI, gt=0)
    eth_usd: float = Field(default=ETH_USD, gt=0)
    jitter_pct: float = Field(default=VERIFIER_JITTER_PCT, ge=0, lt=100)

    def usd(self, gas: int) -> float:
        return gas * self.gas_price_gwei * 1e-9 * self.eth_usd

    def usd_cents(self, gas: int) -> int:
        return int(round(self.usd(gas) * 100))

    @property
    def round_gas(self) -> int:
        """Gas of one traded round without jitter"""
        return self.public_params_gas + self.verifier_gas_mean


class ContractName(str, Enum):
    ON_CHAIN_BOT = "OnChainBot"
    VERIFIER = "Verifier"


class GasEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    round_id: int
    contract: ContractName
    gas: int = Field(ge=0)
    timestamp: int
    seconds: float = 0.0


class GasLedger:
    """Append-only record of every gas-charging contract call"""

    def __init__(self):
        self._entries: List[GasEntry] = []

    def record(self, round_id: int, contract: ContractName, gas: int, timestamp: int,
               seconds: float = 0.0) -> GasEntry:
        entry = GasEntry(round_id=round_id, contract=contract, gas=gas, timestamp=timestamp, seconds=seconds)
        self._entries.append(entry)
        return entry

    @property
    def entries(self) -> Tuple[GasEntry, ...]:
        return tuple(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def total_gas(self, contract: Optional[ContractName] = None) -> int:
        return sum(e.gas for e in self._entries if contract is None or e.contract == contract)

    def round_gas(self, round_id: int) -> int:
        return sum(e.gas for e in self._entries if e.round_id == round_id)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [{"round": e.round_id, "contract": e.contract.value, "gas": e.gas, "seconds": e.seconds}
             for e in self._entries],
            columns=["round", "contract", "gas", "seconds"],
        )

    def export_csv(self, path) -> Path:
        """Write `round,contract,gas,seconds`"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, lineterminator="\n", float_format="%.6f")
        return path


class Subscription(BaseModel):
    model_config = ConfigDict(frozen=True)

    user_id: str
    deposit: int = Field(gt=0, description="quote cents")


class PhaseLatency(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean: float = Field(gt=0)
    min: float = Field(ge=0)
    max: float
    sigma: float = Field(default=0.75, gt=0)

    @model_validator(mode="after")
    def _bounded(self):
        if not self.min <= self.mean <= self.max:
            raise ValueError("phase latency must satisfy min <= mean <= max")
        return self


class LatencyModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: str = "lognormal"
    phases: Dict[str, PhaseLatency] = Field(
        default_factory=lambda: {k: PhaseLatency(**v) for k, v in LATENCY_PHASES.items()})

    @model_validator(mode="after")
    def _known_family(self):
        if self.family not in LATENCY_FAMILIES:
            raise ValueError(f"latency family must be one of {LATENCY_FAMILIES}, got {self.family!r}")
        return self

    def phase(self, name: str) -> PhaseLatency:
        try:
            return self.phases[name]
        except KeyError:
            raise UnknownPhase(name)


def sample_latency(phase: str, rng: np.random.Generator, model: Optional[LatencyModel] = None) -> float:
    """
    One simulated latency in seconds, clipped to the phase bounds.

    The lognormal family is parametrised so that its unclipped mean equals the
    phase mean; the uniform family is symmetric around the mean.
    """
    model = model or DEFAULT_LATENCY
    bounds = model.phase(phase)
    if model.family == "uniform":
        high = min(bounds.max, 2 * bounds.mean - bounds.min)
        value = rng.uniform(bounds.min, high)
    else:
        mu = math.log(bounds.mean) - bounds.sigma ** 2 / 2
        value = rng.lognormal(mu, bounds.sigma)
    return float(min(max(value, bounds.min), bounds.max))


DEFAULT_LATENCY = LatencyModel()


class PhaseSummary(BaseModel):
    """Boxplot statistics of one phase"""
    count: int
    mean: float
    min: float
    q1: float
    median: float
    q3: float
    max: float


def summarize_latencies(samples: Dict[str, Sequence[float]]) -> Dict[str, PhaseSummary]:
    out = {}
    for phase, values in samples.items():
        arr = np.asarray(values, dtype=np.float64)
        if arr.size == 0:
            continue
        q1, median, q3 = np.percentile(arr, [25, 50, 75])
        out[phase] = PhaseSummary(count=int(arr.size), mean=float(arr.mean()), min=float(arr.min()),
                                  q1=float(q1), median=float(median), q3=float(q3), max=float(arr.max()))
    return out


class PriceOracle:
    """On-chain price feed backed by a candle series"""

    def __init__(self, series: PriceSeries):
        self.series = series

    def get_price(self, t: int) -> int:
        idx = self.series.index_of(t)
        if idx is None:
            raise NoData(t)
        return self.series.candles[idx].close


class VerifierContract:
    """Deployed verifier: checks proofs against its verification key and charges gas"""

    def __init__(self, verification_key: bytes, schedule: GasSchedule, ledger: GasLedger,
                 rng: Optional[np.random.Generator] = None):
        self.verification_key = verification_key
        self.schedule = schedule
        self.ledger = ledger
        self.rng = rng or np.random.default_rng(0)

    def gas_for_call(self) -> int:
        jitter = self.schedule.jitter_pct
        if jitter == 0:
            return self.schedule.verifier_gas_mean
        factor = 1 + self.rng.uniform(-jitter, jitter) / 100
        return int(round(self.schedule.verifier_gas_mean * factor))

    def verify(self, proof: Proof, round_id: int = 0, timestamp: int = 0, seconds: float = 0.0) -> bool:
        ok = verify(self.verification_key, proof)
        self.ledger.record(round_id, ContractName.VERIFIER, self.gas_for_call(), timestamp, seconds)
        return ok


class SettlementRow(BaseModel):
    user_id: str
    deposit: int
    gross_payout: int
    earnings: int
    gas_share: int
    net_payout: int


class SettlementReport(BaseModel):
    initial_pool: int
    final_pool: int
    total_gas: int
    gas_usd_cents: int
    rows: List[SettlementRow]

    def per_user_gas_cents(self) -> float:
        return self.gas_usd_cents / len(self.rows)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.model_dump() for r in self.rows])


def settle_epoch(subscriptions: Sequence[Subscription], final_pool: int, ledger: GasLedger,
                 schedule: GasSchedule) -> SettlementReport:
    """
    Pay each subscriber a deposit-proportional share of the final pool and charge
    an equal share of the epoch's gas in cents. Floor remainders go to the first user.
    """
    if not subscriptions:
        raise EmptyPool("no subscriptions to settle")
    if final_pool < 0:
        raise ValueError("final pool must be non-negative")
    total = sum(s.deposit for s in subscriptions)
    gross = [final_pool * s.deposit // total for s in subscriptions]
    gross[0] += final_pool - sum(gross)

    total_gas = ledger.total_gas()
    gas_cents = schedule.usd_cents(total_gas)
    share = [gas_cents // len(subscriptions)] * len(subscriptions)
    share[0] += gas_cents - sum(share)

    rows = [
        SettlementRow(user_id=s.user_id, deposit=s.deposit, gross_payout=g, earnings=g - s.deposit,
                      gas_share=gs, net_payout=g - gs)
        for s, g, gs in zip(subscriptions, gross, share)
    ]
    logger.info(f"Settled epoch for {len(rows)} users: pool {total} -> {final_pool} cents, "
                f"gas {total_gas} ({gas_cents} cents)")
    return SettlementReport(initial_pool=total, final_pool=final_pool, total_gas=total_gas,
                            gas_usd_cents=gas_cents, rows=rows)


class OnChainBot:
    """
    On-chain half of the bot: recomputes public parameters from the oracle,
    checks submitted proofs against them and manages subscriptions.
    The oracle read is charged as part of the constant public-parameter gas.
    """

    def __init__(self, oracle: PriceOracle, verifier: VerifierContract,
                 schedule: Optional[GasSchedule] = None, ledger: Optional[GasLedger] = None):
        self.oracle = oracle
        self.verifier = verifier
        self.schedule = schedule or verifier.schedule
        self.ledger = ledger or verifier.ledger
        self._subscriptions: Dict[str, Subscription] = {}

    def oracle_get_price(self, t: int) -> int:
        return self.oracle.get_price(t)

    def get_public_params(self, t: int, n: int, d: int, round_id: int = 0, seconds: float = 0.0) -> PublicParams:
        price = self.oracle_get_price(t)
        bands = bollinger(self.oracle.series, t, n, d)
        params = PublicParams(price=price, upper=bands.upper, lower=max(bands.lower, 0))
        self.ledger.record(round_id, ContractName.ON_CHAIN_BOT, self.schedule.public_params_gas, t, seconds)
        get_request_logger("chain_sim", round_id=round_id).debug(
            f"Public params at {t}: price={params.price} upper={params.upper} lower={params.lower}")
        return params

    def verify_and_check(self, proof: Proof, expected: PublicParams, round_id: int = 0,
                         timestamp: int = 0, seconds: float = 0.0) -> bool:
        """Proof must verify and carry exactly the public parameters the chain computed"""
        ok = self.verifier.verify(proof, round_id, timestamp, seconds)
        matches = proof.public_inputs == expected
        if ok and not matches:
            get_request_logger("chain_sim", round_id=round_id).warning(
                "Proof verifies but its public inputs differ from the on-chain values")
        return ok and matches

    def subscribe(self, user: str, amount: int) -> Subscription:
        if amount <= 0:
            raise ZeroAmount("subscription deposit")
        if user in self._subscriptions:
            raise DuplicateUser(user)
        sub = Subscription(user_id=user, deposit=amount)
        self._subscriptions[user] = sub
        return sub

    @property
    def subscriptions(self) -> List[Subscription]:
        return list(self._subscriptions.values())

    def total_pool(self) -> int:
        return sum(s.deposit for s in self._subscriptions.values())

    def settle_epoch(self, final_pool: int) -> SettlementReport:
        return settle_epoch(self.subscriptions, final_pool, self.ledger, self.schedule)
