"""
Exception hierarchy shared by every service module.

DataError covers bad inputs and unusable data (CLI exit code 3).
StateError covers illegal operations against simulated chain/DEX state.
"""

from typing import Optional


class TradingBotError(Exception):
    """Base class for all domain errors raised by the bot"""


class DataError(TradingBotError, ValueError):
    """Input data cannot be used for the requested operation"""


class StateError(TradingBotError):
    """Operation is not allowed in the current simulated state"""


# market_data

class MalformedRow(DataError):
    def __init__(self, line: int, detail: str = ""):
        self.line = line
        super().__init__(f"Malformed candle row at line {line}" + (f": {detail}" if detail else ""))


class NonUniformSpacing(DataError):
    def __init__(self, timestamp: int):
        self.timestamp = timestamp
        super().__init__(f"Non-uniform candle spacing at timestamp {timestamp}")


class EmptyFile(DataError):
    def __init__(self, path: str = ""):
        super().__init__(f"Candle file has no data rows: {path}")


class NotAMultiple(DataError):
    def __init__(self, value: int, base: int):
        super().__init__(f"{value} is not a positive multiple of {base}")


class SeriesTooShort(DataError):
    pass


class EmptyList(DataError):
    pass


# indicators

class InsufficientHistory(DataError):
    def __init__(self, at: int, needed: int, available: int):
        self.at = at
        super().__init__(f"Need {needed} candles ending at {at}, only {available} available")


# training

class InvalidRange(DataError):
    pass


class WindowOutOfRange(DataError):
    pass


class WindowMismatch(DataError):
    pass


class ZeroVariance(DataError):
    pass


class TooFewSamples(DataError):
    pass


class EmptyTestSet(DataError):
    pass


# zkproof

class ConstraintUnsatisfied(StateError):
    pass


# chain_sim

class NoData(DataError):
    def __init__(self, timestamp: int):
        self.timestamp = timestamp
        super().__init__(f"Oracle has no price at timestamp {timestamp}")


class DuplicateUser(StateError):
    def __init__(self, user: str):
        super().__init__(f"User already subscribed: {user}")


class ZeroAmount(StateError):
    def __init__(self, what: Optional[str] = None):
        super().__init__(f"Amount must be positive{f' ({what})' if what else ''}")


class EmptyPool(StateError):
    pass


class UnknownPhase(StateError):
    def __init__(self, phase: str):
        super().__init__(f"Unknown latency phase: {phase}")


# dex_sim

class InsufficientBalance(StateError):
    def __init__(self, vault_id: int, balance: int, requested: int):
        super().__init__(f"Vault {vault_id} holds {balance}, requested {requested}")


class InsufficientLiquidity(StateError):
    pass


# orchestrator

class FeedExhausted(DataError):
    pass
