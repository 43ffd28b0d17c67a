"""
End-to-end trade rounds and epochs across the off-chain bot, the simulated
chain and the DEX, with conformance checking of the recorded message traces
"""

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field

from config.bot_config import (
    BASE_UNIT,
    BOT_USER_ID,
    DEFAULT_DEPOSIT_CENTS,
    DEFAULT_ROUNDS,
    DEFAULT_SEED,
    DEFAULT_SLIPPAGE_BPS,
    DEFAULT_USERS,
)
from services.chain_sim import (
    GasEntry,
    GasLedger,
    GasSchedule,
    LatencyModel,
    OnChainBot,
    PhaseSummary,
    PriceOracle,
    SettlementReport,
    VerifierContract,
    sample_latency,
    seeded_generators,
    summarize_latencies,
)
from services.dex_sim import Dex
from services.market_data import PriceSeries, resample
from services.strategy import ParamConfig, TradeKind, decide
from services.zkproof import NonceSource, Proof, SetupKeys, Witness, prove, setup
from utils.errors import FeedExhausted, TradingBotError
from utils.logger_config import get_logger, get_performance_logger, get_request_logger

logger = get_logger("orchestrator")
perf_logger = get_performance_logger("orchestrator")

PHASES = ("public_params", "proof_generation", "verification", "trading")
END_TO_END = "end_to_end"


class MessageType(str, Enum):
    GET_PUBLIC_PARAMS = "GetPublicParams"
    DECIDE = "Decide"
    PROVE = "Prove"
    SUBMIT_PROOF = "SubmitProof"
    PUBLIC_PARAM_CHECK = "PublicParamCheck"
    VERIFY_RESULT = "VerifyResult"
    SWAP = "Swap"
    ABORT = "Abort"


class TraceMessage(BaseModel):
    model_config = ConfigDict(frozen=True)

    type: MessageType
    ok: Optional[bool] = None        # VerifyResult
    digest: Optional[str] = None     # Swap
    reason: Optional[str] = None     # Abort
    decision: Optional[TradeKind] = None  # Decide; never serialized publicly


class TradeRoundTrace(BaseModel):
    round_id: int
    timestamp: int
    messages: List[TraceMessage] = Field(default_factory=list)
    latencies: Dict[str, float] = Field(default_factory=dict)
    gas: List[GasEntry] = Field(default_factory=list)
    signal: TradeKind = TradeKind.HOLD
    decision: TradeKind = TradeKind.HOLD

    def add(self, type_: MessageType, **fields) -> None:
        self.messages.append(TraceMessage(type=type_, **fields))

    @property
    def types(self) -> List[MessageType]:
        return [m.type for m in self.messages]

    @property
    def executed(self) -> bool:
        return MessageType.SWAP in self.types

    @property
    def aborted(self) -> bool:
        return MessageType.ABORT in self.types

    @property
    def end_to_end_seconds(self) -> float:
        return sum(self.latencies.values())

    def public_lines(self) -> List[str]:
        """One JSON object per message carrying only what an observer of the protocol sees"""
        lines = []
        for m in self.messages:
            record = {"round": self.round_id, "type": m.type.value}
            if m.ok is not None:
                record["ok"] = m.ok
            if m.digest is not None:
                record["digest"] = m.digest
            if m.reason is not None:
                record["reason"] = m.reason
            lines.append(json.dumps(record, sort_keys=True, separators=(",", ":")))
        return lines

    def full_record(self) -> Dict:
        return self.model_dump(mode="json")


# Explicit automaton of the round protocol. Abort is legal from every
# non-final state; DECIDED (Hold) and DONE are accepting.
_START, _PARAMS, _DECIDED, _PROVED, _SUBMITTED, _CHECKED, _VERIFIED, _REJECTED, _DONE = (
    "start", "params", "decided", "proved", "submitted", "checked", "verified", "rejected", "done")
_ACCEPTING = {_DECIDED, _DONE}
_TRANSITIONS: Dict[Tuple[str, MessageType, Optional[bool]], str] = {
    (_START, MessageType.GET_PUBLIC_PARAMS, None): _PARAMS,
    (_PARAMS, MessageType.DECIDE, None): _DECIDED,
    (_DECIDED, MessageType.PROVE, None): _PROVED,
    (_PROVED, MessageType.SUBMIT_PROOF, None): _SUBMITTED,
    (_SUBMITTED, MessageType.PUBLIC_PARAM_CHECK, None): _CHECKED,
    (_CHECKED, MessageType.VERIFY_RESULT, True): _VERIFIED,
    (_CHECKED, MessageType.VERIFY_RESULT, False): _REJECTED,
    (_VERIFIED, MessageType.SWAP, None): _DONE,
}


def conformance_check(trace: TradeRoundTrace) -> bool:
    """True iff the trace's message order is accepted by the round automaton"""
    state = _START
    for m in trace.messages:
        if m.type is MessageType.ABORT:
            if state == _DONE:
                return False
            state = _DONE
            continue
        ok = m.ok if m.type is MessageType.VERIFY_RESULT else None
        if m.type is MessageType.VERIFY_RESULT and ok is None:
            return False
        nxt = _TRANSITIONS.get((state, m.type, ok))
        if nxt is None:
            return False
        state = nxt
    return state in _ACCEPTING


class EpochConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    config: ParamConfig
    period_seconds: int = Field(gt=0)
    rounds: int = Field(default=DEFAULT_ROUNDS, ge=1)
    users: int = Field(default=DEFAULT_USERS, ge=1)
    deposit_cents: int = Field(default=DEFAULT_DEPOSIT_CENTS, gt=0)
    gas: GasSchedule = Field(default_factory=GasSchedule)
    latency: LatencyModel = Field(default_factory=LatencyModel)
    slippage_bps: int = Field(default=DEFAULT_SLIPPAGE_BPS, ge=0)
    seed: int = DEFAULT_SEED


class EpochReport(BaseModel):
    config: str
    period_seconds: int
    seed: int
    rounds: int
    executed_trades: int
    holds: int
    aborts: int
    users: int
    initial_pool: int
    final_pool: int
    pool_return_pct: float
    total_gas: int
    gas_usd: float
    gas_usd_per_trade: float
    gas_cents_per_user: float
    latency: Dict[str, PhaseSummary]
    settlement: SettlementReport


@dataclass
class EpochOutcome:
    report: EpochReport
    traces: List[TradeRoundTrace]
    ledger: GasLedger = field(repr=False)


class Orchestrator:
    """
    Off-chain bot driving one chain and one DEX instance. Rounds run strictly
    in order since they share chain and DEX state.
    """

    def __init__(self, series: PriceSeries, epoch: EpochConfig, keys: Optional[SetupKeys] = None,
                 tamper: Optional[Callable[[Proof], Proof]] = None, bot_user: str = BOT_USER_ID):
        self.series = series
        self.epoch = epoch
        self.tamper = tamper
        self.bot_user = bot_user
        self.rngs = seeded_generators(epoch.seed, ["jitter", "latency", "nonce"])
        self.keys = keys or setup(f"seed:{epoch.seed}".encode("utf-8"))
        self.ledger = GasLedger()
        verifier = VerifierContract(self.keys.verification_key, epoch.gas, self.ledger, self.rngs["jitter"])
        self.chain = OnChainBot(PriceOracle(series), verifier, epoch.gas, self.ledger)
        self.dex = Dex(pair=series.pair, slippage_bps=epoch.slippage_bps)
        self.nonces = NonceSource(self.rngs["nonce"])
        self.traces: List[TradeRoundTrace] = []

    def _latency(self, phase: str) -> float:
        return sample_latency(phase, self.rngs["latency"], self.epoch.latency)

    def _position_adjusted(self, kind: TradeKind) -> TradeKind:
        holding = self.dex.balance(self.bot_user, self.dex.base_asset) > 0
        if (kind is TradeKind.BUY and holding) or (kind is TradeKind.SELL and not holding):
            return TradeKind.HOLD
        return kind

    def run_round(self, t: int, cfg: Optional[ParamConfig] = None, round_id: Optional[int] = None) -> TradeRoundTrace:
        """
        get_public_params -> decide -> (Hold: stop) -> prove -> verify_and_check
        -> (rejected: Abort) -> swap. Domain errors end the round with Abort.
        """
        cfg = cfg or self.epoch.config
        round_id = len(self.traces) + 1 if round_id is None else round_id
        rlog = get_request_logger("orchestrator", round_id=round_id)
        trace = TradeRoundTrace(round_id=round_id, timestamp=t)
        first_entry = len(self.ledger)
        try:
            trace.latencies["public_params"] = self._latency("public_params")
            params = self.chain.get_public_params(t, cfg.n, cfg.d, round_id, trace.latencies["public_params"])
            trace.add(MessageType.GET_PUBLIC_PARAMS)

            trace.signal = decide(params, cfg).kind
            trace.decision = self._position_adjusted(trace.signal)
            trace.add(MessageType.DECIDE, decision=trace.decision)
            if trace.decision is TradeKind.HOLD:
                rlog.debug(f"Hold at {t} (signal {trace.signal.value})")
                return trace

            # an order the DEX cannot fill is dropped before any proof is made
            give_asset = self.dex.quote_asset if trace.decision is TradeKind.BUY else self.dex.base_asset
            amount = self.dex.balance(self.bot_user, give_asset)
            self.dex.quote_swap(self.bot_user, give_asset, amount, params.price)

            trace.latencies["proof_generation"] = self._latency("proof_generation")
            proof = prove(self.keys.proving_key, params, Witness.for_decision(trace.decision, cfg), self.nonces.next())
            trace.add(MessageType.PROVE)
            if self.tamper is not None:
                proof = self.tamper(proof)
            trace.add(MessageType.SUBMIT_PROOF)

            trace.latencies["verification"] = self._latency("verification")
            trace.add(MessageType.PUBLIC_PARAM_CHECK)
            ok = self.chain.verify_and_check(proof, params, round_id, t, trace.latencies["verification"])
            trace.add(MessageType.VERIFY_RESULT, ok=ok)
            if not ok:
                rlog.warning(f"Proof rejected at {t}; no trade")
                trace.add(MessageType.ABORT, reason="verification failed")
                return trace

            trace.latencies["trading"] = self._latency("trading")
            result = self.dex.swap(self.bot_user, give_asset, amount, params.price)
            trace.add(MessageType.SWAP, digest=result.commitment.root)
            rlog.debug(f"{trace.decision.value} executed at {params.price} cents; batch {result.commitment.sequence}")
            return trace
        except TradingBotError as e:
            rlog.error(f"Round aborted: {e}", exc_info=True)
            trace.add(MessageType.ABORT, reason=type(e).__name__)
            return trace
        finally:
            trace.gas = list(self.ledger.entries[first_entry:])
            self.traces.append(trace)

    def pool_value(self, price_cents: int) -> int:
        """Bot holdings marked to market in quote cents"""
        quote = self.dex.balance(self.bot_user, self.dex.quote_asset)
        base = self.dex.balance(self.bot_user, self.dex.base_asset)
        return quote + base * price_cents // BASE_UNIT

    def subscribe_users(self) -> int:
        for i in range(self.epoch.users):
            self.chain.subscribe(f"user-{i + 1:04d}", self.epoch.deposit_cents)
        pool = self.chain.total_pool()
        self.dex.deposit(self.bot_user, self.dex.quote_asset, pool)
        return pool

    def run(self) -> EpochOutcome:
        e = self.epoch
        start = e.config.n - 1
        if start + e.rounds > len(self.series):
            raise FeedExhausted(
                f"{e.rounds} rounds from candle {start} need {start + e.rounds} candles, feed has {len(self.series)}")

        perf_logger.start_timer("epoch")
        initial_pool = self.subscribe_users()
        for i in range(e.rounds):
            self.run_round(self.series.candles[start + i].timestamp, e.config, i + 1)
        last_price = self.series.candles[start + e.rounds - 1].close
        final_pool = self.pool_value(last_price)
        settlement = self.chain.settle_epoch(final_pool)
        report = self._report(initial_pool, final_pool, settlement)
        perf_logger.stop_timer("epoch", message=f"Epoch of {e.rounds} rounds ({report.executed_trades} trades)")
        return EpochOutcome(report=report, traces=list(self.traces), ledger=self.ledger)

    def _report(self, initial_pool: int, final_pool: int, settlement: SettlementReport) -> EpochReport:
        e = self.epoch
        executed = [t for t in self.traces if t.executed]
        samples: Dict[str, List[float]] = {p: [] for p in PHASES}
        for t in self.traces:
            for phase, seconds in t.latencies.items():
                samples[phase].append(seconds)
        samples[END_TO_END] = [t.end_to_end_seconds for t in executed]

        total_gas = self.ledger.total_gas()
        gas_usd = e.gas.usd(total_gas)
        return EpochReport(
            config=e.config.label,
            period_seconds=self.series.period_seconds,
            seed=e.seed,
            rounds=len(self.traces),
            executed_trades=len(executed),
            holds=sum(1 for t in self.traces if t.decision is TradeKind.HOLD and not t.aborted),
            aborts=sum(1 for t in self.traces if t.aborted),
            users=e.users,
            initial_pool=initial_pool,
            final_pool=final_pool,
            pool_return_pct=(final_pool - initial_pool) * 100 / initial_pool,
            total_gas=total_gas,
            gas_usd=gas_usd,
            gas_usd_per_trade=(sum(e.gas.usd(sum(g.gas for g in t.gas)) for t in executed) / len(executed)
                               if executed else 0.0),
            gas_cents_per_user=settlement.per_user_gas_cents(),
            latency=summarize_latencies(samples),
            settlement=settlement,
        )


def run_epoch(series: PriceSeries, epoch: EpochConfig, keys: Optional[SetupKeys] = None,
              tamper: Optional[Callable[[Proof], Proof]] = None) -> EpochOutcome:
    """Run one epoch on a fresh chain and DEX, resampling the feed to the trading period"""
    if series.period_seconds != epoch.period_seconds:
        series = resample(series, epoch.period_seconds)
    logger.info(f"Running epoch: config {epoch.config.label}, {epoch.rounds} rounds, "
                f"{epoch.users} users, seed {epoch.seed}")
    return Orchestrator(series, epoch, keys=keys, tamper=tamper).run()


def write_public_trace(traces: Sequence[TradeRoundTrace], path) -> Path:
    """JSON-lines trace without decisions, latencies or gas"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for trace in traces:
            for line in trace.public_lines():
                f.write(line + "\n")
    return path


def write_full_trace(traces: Sequence[TradeRoundTrace], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for trace in traces:
            f.write(json.dumps(trace.full_record(), sort_keys=True, separators=(",", ":")) + "\n")
    return path
