"""
Configuration defaults for the trading bot: strategy parameter ranges, gas schedule,
latency model, DEX units and CLI defaults
"""
import os
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml
from pydantic import BaseModel, ConfigDict, Field

from utils.logger_config import get_logger

# Set up logger for this module
logger = get_logger("bot_config")

logger.debug("Loading bot configuration")


# Limiting values of the four strategy parameters (inclusive)
PARAM_RANGES: Dict[str, Tuple[int, int]] = {
    "n": (1, 40),   # moving-average periods
    "d": (1, 6),    # standard deviations
    "u": (-1, 30),  # sell threshold percent
    "l": (-1, 30),  # buy threshold percent
}

# Period selection
WINDOW_DAYS = 30
WINDOW_SECONDS = WINDOW_DAYS * 86400
DEFAULT_STRIDE_SECONDS = 86400
DEFAULT_PAIR = "ETH:USDC"
DEFAULT_PERIOD_SECONDS = 60

# Training
DEFAULT_TOP_K = 5
DEFAULT_FEES_BPS = 0
DEFAULT_INITIAL_CENTS = 100_000
DEFAULT_RISKLESS_PCT = 0.0
DEFAULT_WORKERS = int(os.environ.get("BOT_WORKERS", "4"))

# Gas schedule; 97 gwei x $3,267/ETH makes one 473,402 gas round cost ~$150
PUBLIC_PARAMS_GAS = 281_715
VERIFIER_GAS_MEAN = 191_687
GAS_PRICE_GWEI = 97.0
ETH_USD = 3267.0
VERIFIER_JITTER_PCT = 2.0

# Per-phase latency in seconds
LATENCY_PHASES: Dict[str, Dict[str, float]] = {
    "public_params": {"mean": 22.8, "min": 1.2, "max": 415.8, "sigma": 0.75},
    "proof_generation": {"mean": 0.5, "min": 0.2, "max": 0.8, "sigma": 0.3},
    "verification": {"mean": 23.0, "min": 1.6, "max": 317.2, "sigma": 0.75},
    "trading": {"mean": 2.3, "min": 2.0, "max": 2.6, "sigma": 0.05},
}
LATENCY_FAMILIES = ("lognormal", "uniform")

# Proof system
CIRCUIT_ID = "bollinger-v1"
NONCE_BYTES = 16

# DEX units: quote asset in cents, base asset in 1e-8 units
BASE_UNIT = 10 ** 8
DEFAULT_SLIPPAGE_BPS = 0
MAKER_LIQUIDITY = {"quote": 10 ** 15, "base": 10 ** 18}

# Epoch simulation
DEFAULT_SEED = 7
DEFAULT_USERS = 1000
DEFAULT_DEPOSIT_CENTS = 100_000
DEFAULT_ROUNDS = 20
BOT_USER_ID = "onchain-bot"

# CLI exit codes
EXIT_OK = 0
EXIT_BAD_ARGS = 2
EXIT_BAD_DATA = 3
EXIT_INTERNAL = 4

# Upload validation for the HTTP surface
MAX_UPLOAD_SIZE_MB = 50
SUPPORTED_CANDLE_FORMATS = [".csv"]


def load_config_file(path) -> Dict[str, Any]:
    """Load a YAML or JSON run configuration file into a dict"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f)  # JSON is a subset of YAML
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError(f"Config file {path} must contain a mapping, got {type(data).__name__}")
    logger.info(f"Loaded run configuration from {path}")
    return data


def validate_upload(file_name: str, size_bytes: int) -> Tuple[bool, str]:
    """Validate an uploaded candle file against limits"""
    ext = os.path.splitext(file_name or "")[1].lower()
    if ext not in SUPPORTED_CANDLE_FORMATS:
        return False, f"File format {ext or '<none>'} not supported. Supported formats: {SUPPORTED_CANDLE_FORMATS}"
    size_mb = size_bytes / (1024 * 1024)
    if size_mb > MAX_UPLOAD_SIZE_MB:
        return False, f"File size {size_mb:.1f}MB exceeds maximum of {MAX_UPLOAD_SIZE_MB}MB"
    return True, "Upload valid"


# Nested layout of config files -> flat RunSettings field names
_FILE_SECTIONS: Dict[str, Dict[str, str]] = {
    "market": {"pair": "pair", "period_seconds": "period_seconds", "stride_seconds": "stride_seconds"},
    "training": {"method": "method", "top": "top", "fees_bps": "fees_bps",
                 "initial_cents": "initial_cents", "workers": "workers"},
    "chain": {"jitter": "jitter", "jitter_pct": "jitter_pct"},
    "gas": {"public_params_gas": "public_params_gas", "verifier_gas_mean": "verifier_gas_mean",
            "gas_price_gwei": "gas_price_gwei", "eth_usd": "eth_usd"},
    "latency": {"family": "latency_family", "phases": "latency_phases"},
    "simulation": {"users": "users", "deposit_cents": "deposit_cents", "rounds": "rounds",
                   "slippage_bps": "slippage_bps"},
}


class RunSettings(BaseModel):
    """Every knob of a run; the snapshot is written to each run manifest"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    seed: int = DEFAULT_SEED
    pair: str = DEFAULT_PAIR
    period_seconds: int = Field(default=DEFAULT_PERIOD_SECONDS, gt=0)
    stride_seconds: int = Field(default=DEFAULT_STRIDE_SECONDS, gt=0)
    method: str = Field(default="avg", pattern="^(avg|sharpe)$")
    top: int = Field(default=DEFAULT_TOP_K, ge=1)
    fees_bps: int = Field(default=DEFAULT_FEES_BPS, ge=0, lt=10_000)
    initial_cents: int = Field(default=DEFAULT_INITIAL_CENTS, gt=0)
    workers: int = Field(default=DEFAULT_WORKERS, ge=1)
    public_params_gas: int = Field(default=PUBLIC_PARAMS_GAS, gt=0)
    verifier_gas_mean: int = Field(default=VERIFIER_GAS_MEAN, gt=0)
    gas_price_gwei: float = Field(default=GAS_PRICE_GWEI, gt=0)
    eth_usd: float = Field(default=ETH_USD, gt=0)
    jitter: bool = True
    jitter_pct: float = Field(default=VERIFIER_JITTER_PCT, ge=0, lt=100)
    latency_family: str = "lognormal"
    latency_phases: Dict[str, Dict[str, float]] = Field(default_factory=lambda: {
        k: dict(v) for k, v in LATENCY_PHASES.items()})
    users: int = Field(default=DEFAULT_USERS, ge=1)
    deposit_cents: int = Field(default=DEFAULT_DEPOSIT_CENTS, gt=0)
    rounds: int = Field(default=DEFAULT_ROUNDS, ge=1)
    slippage_bps: int = Field(default=DEFAULT_SLIPPAGE_BPS, ge=0, lt=10_000)

    @classmethod
    def resolve(cls, file_data: Optional[Dict[str, Any]] = None,
                overrides: Optional[Dict[str, Any]] = None) -> "RunSettings":
        """Defaults, then the config file, then explicitly given flags (None means not given)"""
        merged: Dict[str, Any] = {}
        merged.update(flatten_config(file_data or {}))
        merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls(**merged)


def flatten_config(data: Dict[str, Any]) -> Dict[str, Any]:
    """Accept both the nested file layout and flat RunSettings keys"""
    flat: Dict[str, Any] = {}
    for key, value in data.items():
        if key == "chain" and isinstance(value, dict) and isinstance(value.get("gas"), dict):
            value = dict(value)
            flat.update(flatten_config({"gas": value.pop("gas")}))
        if key in _FILE_SECTIONS and isinstance(value, dict):
            for sub_key, sub_value in value.items():
                if sub_key not in _FILE_SECTIONS[key]:
                    raise ValueError(f"Unknown config key {key}.{sub_key}")
                flat[_FILE_SECTIONS[key][sub_key]] = sub_value
        elif key in RunSettings.model_fields:
            flat[key] = value
        else:
            raise ValueError(f"Unknown config key {key}")
    return flat


logger.debug(f"Bot configuration loaded: {len(PARAM_RANGES)} strategy parameters, "
             f"round gas {PUBLIC_PARAMS_GAS + VERIFIER_GAS_MEAN}, circuit {CIRCUIT_ID}")
