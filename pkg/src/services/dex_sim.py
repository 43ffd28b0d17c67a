"""
Validium-style DEX model.

Balances live in single-asset vaults off-chain. Deposits and withdrawals are
on-chain events anyone can see; swaps settle off-chain as signed maker/taker
orders kept in the operator's private store, and only a Merkle root over all
vault balances is published after each batch.
"""

import hashlib
import hmac
import json
import struct
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from config.bot_config import BASE_UNIT, DEFAULT_PAIR, DEFAULT_SLIPPAGE_BPS, MAKER_LIQUIDITY
from utils.errors import InsufficientBalance, InsufficientLiquidity, ZeroAmount
from utils.logger_config import get_logger

logger = get_logger("dex_sim")

BPS = 10_000
MAKER_ID = "liquidity-provider"


class MerkleTree:
    """Binary sha3-256 tree with sorted pairs; an odd node is promoted unchanged"""

    def __init__(self, leaves: List[bytes]):
        self.leaves = leaves
        self.layers = [self.leaves]
        while len(self.layers[-1]) > 1:
            self.layers.append(self._next_layer(self.layers[-1]))

    def _next_layer(self, layer: List[bytes]) -> List[bytes]:
        next_layer = []
        for i in range(0, len(layer), 2):
            if i + 1 < len(layer):
                left, right = sorted((layer[i], layer[i + 1]))
                next_layer.append(hashlib.sha3_256(left + right).digest())
            else:
                next_layer.append(layer[i])
        return next_layer

    def get_root(self) -> bytes:
        return self.layers[-1][0] if self.leaves else hashlib.sha3_256(b"").digest()


class Vault(BaseModel):
    model_config = ConfigDict(validate_assignment=True)

    id: int
    owner: str
    asset: str
    balance: int = Field(default=0, ge=0)

    def leaf(self) -> bytes:
        payload = struct.pack("<qQ", self.id, self.balance) + f"{self.owner}|{self.asset}".encode("utf-8")
        return hashlib.sha3_256(payload).digest()


class Order(BaseModel):
    """A filled maker/taker order; never leaves the operator's store"""
    model_config = ConfigDict(frozen=True)

    order_id: int
    maker_give_vault: int
    maker_receive_vault: int
    taker_give_vault: int
    taker_receive_vault: int
    give_amount: int = Field(gt=0, description="amount the taker gives")
    receive_amount: int = Field(gt=0, description="amount the taker receives")
    maker_signature: str
    taker_signature: str


class BatchCommitment(BaseModel):
    model_config = ConfigDict(frozen=True)

    sequence: int
    root: str


class DexEvent(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: str  # deposit | withdraw
    user: str
    asset: str
    amount: int


class ObserverView(BaseModel):
    """Everything a chain observer can see: on-chain events and batch roots"""
    model_config = ConfigDict(frozen=True)

    events: Tuple[DexEvent, ...]
    commitments: Tuple[BatchCommitment, ...]

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2)


class SwapResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    receive_amount: int
    commitment: BatchCommitment


class WithdrawalReceipt(BaseModel):
    model_config = ConfigDict(frozen=True)

    vault_id: int
    asset: str
    amount: int
    balance_after: int


def quote_for_base(give_base: int, price_cents: int, slippage_bps: int) -> int:
    """Quote cents received for base units sold; slippage lowers the effective price"""
    return give_base * price_cents * (BPS - slippage_bps) // (BASE_UNIT * BPS)


def base_for_quote(give_cents: int, price_cents: int, slippage_bps: int) -> int:
    """Base units received for quote cents spent; slippage raises the effective price"""
    return give_cents * BASE_UNIT * BPS // (price_cents * (BPS + slippage_bps))


class Dex:
    """
    One DEX instance for a single base:quote pair. Every balance mutation goes
    through deposit, swap or withdraw.
    """

    def __init__(self, pair: str = DEFAULT_PAIR, slippage_bps: int = DEFAULT_SLIPPAGE_BPS,
                 operator_key: bytes = b"dex-operator", maker_liquidity: Optional[Dict[str, int]] = None):
        self.base_asset, self.quote_asset = pair.split(":")
        if not 0 <= slippage_bps < BPS:
            raise ValueError(f"slippage_bps must be in [0, {BPS}), got {slippage_bps}")
        self.slippage_bps = slippage_bps
        self._operator_key = operator_key
        self._vaults: Dict[int, Vault] = {}
        self._vault_index: Dict[Tuple[str, str], int] = {}
        self._events: List[DexEvent] = []
        self._commitments: List[BatchCommitment] = []
        self._orders: List[Order] = []
        self._deposited: Dict[str, int] = {self.base_asset: 0, self.quote_asset: 0}
        self._withdrawn: Dict[str, int] = {self.base_asset: 0, self.quote_asset: 0}

        liquidity = MAKER_LIQUIDITY if maker_liquidity is None else maker_liquidity
        self.deposit(MAKER_ID, self.quote_asset, liquidity["quote"])
        self.deposit(MAKER_ID, self.base_asset, liquidity["base"])

    def _check_asset(self, asset: str):
        if asset not in (self.base_asset, self.quote_asset):
            raise ValueError(f"asset {asset!r} not traded on {self.base_asset}:{self.quote_asset}")

    def _vault(self, user: str, asset: str, create: bool = False) -> Optional[Vault]:
        key = (user, asset)
        vid = self._vault_index.get(key)
        if vid is None:
            if not create:
                return None
            vid = len(self._vaults) + 1
            self._vaults[vid] = Vault(id=vid, owner=user, asset=asset)
            self._vault_index[key] = vid
        return self._vaults[vid]

    def _sign(self, party: str, message: bytes) -> str:
        key = hmac.new(self._operator_key, party.encode("utf-8"), hashlib.sha256).digest()
        return hmac.new(key, message, hashlib.sha256).hexdigest()

    def state_root(self) -> str:
        leaves = [self._vaults[vid].leaf() for vid in sorted(self._vaults)]
        return MerkleTree(leaves).get_root().hex()

    def balance(self, user: str, asset: str) -> int:
        self._check_asset(asset)
        vault = self._vault(user, asset)
        return vault.balance if vault else 0

    def vault_id(self, user: str, asset: str) -> Optional[int]:
        return self._vault_index.get((user, asset))

    def deposit(self, user: str, asset: str, amount: int) -> int:
        """Credit the user's vault for `asset` (created on first use); returns the vault id"""
        self._check_asset(asset)
        if amount <= 0:
            raise ZeroAmount("deposit")
        vault = self._vault(user, asset, create=True)
        vault.balance += amount
        self._deposited[asset] += amount
        self._events.append(DexEvent(kind="deposit", user=user, asset=asset, amount=amount))
        logger.debug(f"Deposit of {amount} {asset} into vault {vault.id}")
        return vault.id

    def quote_swap(self, user: str, give_asset: str, give_amount: int, price_cents: int,
                   slippage_bps: Optional[int] = None) -> int:
        """
        Amount `swap` would pay out for the same arguments, raising exactly what
        it would raise. Touches no state.
        """
        self._check_asset(give_asset)
        if price_cents <= 0:
            raise ValueError(f"price must be positive, got {price_cents}")
        if give_amount <= 0:
            raise ZeroAmount("swap amount")
        slippage = self.slippage_bps if slippage_bps is None else slippage_bps

        taker_give = self._vault(user, give_asset)
        if taker_give is None or taker_give.balance < give_amount:
            raise InsufficientBalance(taker_give.id if taker_give else 0,
                                      taker_give.balance if taker_give else 0, give_amount)

        buying = give_asset == self.quote_asset
        receive_asset = self.base_asset if buying else self.quote_asset
        receive = (base_for_quote(give_amount, price_cents, slippage) if buying
                   else quote_for_base(give_amount, price_cents, slippage))
        if receive <= 0:
            raise ZeroAmount("swap output")
        maker_give = self._vault(MAKER_ID, receive_asset)
        if maker_give is None or maker_give.balance < receive:
            raise InsufficientLiquidity(f"liquidity provider cannot fill {receive} {receive_asset}")
        return receive

    def swap(self, user: str, give_asset: str, give_amount: int, price_cents: int,
             slippage_bps: Optional[int] = None) -> SwapResult:
        """
        Fill a taker order against the liquidity provider at `price_cents`
        (quote cents per whole base unit) adjusted by slippage against the taker.
        Balances update atomically and one batch commitment is appended.
        """
        receive = self.quote_swap(user, give_asset, give_amount, price_cents, slippage_bps)
        receive_asset = self.base_asset if give_asset == self.quote_asset else self.quote_asset
        taker_give = self._vault(user, give_asset)
        maker_give = self._vault(MAKER_ID, receive_asset)

        taker_receive = self._vault(user, receive_asset, create=True)
        maker_receive = self._vault(MAKER_ID, give_asset, create=True)
        order_id = len(self._orders) + 1
        message = struct.pack("<qqqqqqq", order_id, maker_give.id, maker_receive.id,
                              taker_give.id, taker_receive.id, give_amount, receive)

        taker_give.balance -= give_amount
        maker_receive.balance += give_amount
        maker_give.balance -= receive
        taker_receive.balance += receive

        self._orders.append(Order(
            order_id=order_id,
            maker_give_vault=maker_give.id,
            maker_receive_vault=maker_receive.id,
            taker_give_vault=taker_give.id,
            taker_receive_vault=taker_receive.id,
            give_amount=give_amount,
            receive_amount=receive,
            maker_signature=self._sign(MAKER_ID, message),
            taker_signature=self._sign(user, message),
        ))
        commitment = BatchCommitment(sequence=len(self._commitments) + 1, root=self.state_root())
        self._commitments.append(commitment)
        logger.debug(f"Batch {commitment.sequence} committed (root {commitment.root[:16]})")
        return SwapResult(receive_amount=receive, commitment=commitment)

    def withdraw(self, user: str, asset: str, amount: int) -> WithdrawalReceipt:
        self._check_asset(asset)
        if amount <= 0:
            raise ZeroAmount("withdrawal")
        vault = self._vault(user, asset)
        if vault is None or vault.balance < amount:
            raise InsufficientBalance(vault.id if vault else 0, vault.balance if vault else 0, amount)
        vault.balance -= amount
        self._withdrawn[asset] += amount
        self._events.append(DexEvent(kind="withdraw", user=user, asset=asset, amount=amount))
        return WithdrawalReceipt(vault_id=vault.id, asset=asset, amount=amount, balance_after=vault.balance)

    def observer_view(self) -> ObserverView:
        return ObserverView(events=tuple(self._events), commitments=tuple(self._commitments))

    def private_orders(self) -> Tuple[Order, ...]:
        """Operator-side order store, as held by a data availability committee"""
        return tuple(self._orders)

    def verify_order(self, order: Order, user: str) -> bool:
        message = struct.pack("<qqqqqqq", order.order_id, order.maker_give_vault, order.maker_receive_vault,
                              order.taker_give_vault, order.taker_receive_vault,
                              order.give_amount, order.receive_amount)
        return (hmac.compare_digest(order.maker_signature, self._sign(MAKER_ID, message))
                and hmac.compare_digest(order.taker_signature, self._sign(user, message)))

    def conservation_delta(self, asset: str) -> int:
        """Sum of vault balances plus withdrawals minus deposits; always 0"""
        self._check_asset(asset)
        held = sum(v.balance for v in self._vaults.values() if v.asset == asset)
        return held + self._withdrawn[asset] - self._deposited[asset]
