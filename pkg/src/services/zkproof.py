"""
Simulated decision-proof system.

One fixed circuit checks a buy/sell decision against plaintext public inputs
(price, upper band, lower band) and a private witness (flag, bound percentage).
Proofs carry the public inputs in the clear, a hiding commitment to the witness
and an HMAC binding tag keyed by the trusted-setup secret. The interface mirrors
a real proving backend; the authenticator is simulation grade.
"""

import hashlib
import hmac
import struct
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from config.bot_config import CIRCUIT_ID, NONCE_BYTES
from services.strategy import ParamConfig, PublicParams, TradeKind, buy_threshold, sell_threshold
from utils.errors import ConstraintUnsatisfied
from utils.logger_config import get_logger

logger = get_logger("zkproof")

DIGEST_BYTES = 32
# [circuit_id:32][price:8][upper:8][lower:8][commitment:32][tag:32], little-endian
PROOF_STRUCT = struct.Struct("<32sqqq32s32s")
PROOF_LAYOUT: Tuple[Tuple[str, int, int], ...] = (
    ("circuit_id", 0, 32),
    ("price", 32, 8),
    ("upper", 40, 8),
    ("lower", 48, 8),
    ("commitment", 56, 32),
    ("tag", 88, 32),
)
_HIDDEN_FIELDS = ("commitment", "tag")
_WITNESS_STRUCT = struct.Struct("<Bb")
_PK_MAGIC = b"bot-pk01"
_VK_MAGIC = b"bot-vk01"

_CIRCUIT_SOURCE = """\
circuit bollinger-v1
  public  price   : int   # current oracle price, cents
  public  upper   : int   # upper band, cents
  public  lower   : int   # lower band, cents
  private flag    : bool  # 1 buy, 0 sell
  private bound   : int   # buy (l) or sell (u) threshold percent
  output  ok      : bool

  if flag == 1:
      ok = price < (lower / 100) * (100 + bound)
  else:
      ok = price > (upper / 100) * (100 - bound)
  # division truncates toward zero
"""


def circuit_id_bytes(circuit_id: str = CIRCUIT_ID) -> bytes:
    raw = circuit_id.encode("ascii")
    if len(raw) > DIGEST_BYTES:
        raise ValueError(f"circuit id longer than {DIGEST_BYTES} bytes: {circuit_id!r}")
    return raw.ljust(DIGEST_BYTES, b"\x00")


def circuit_source() -> str:
    """Published root program of the decision circuit"""
    return _CIRCUIT_SOURCE


def source_digest(source: str) -> bytes:
    return hashlib.sha256(source.encode("utf-8")).digest()


class Witness(BaseModel):
    """Private circuit inputs"""
    model_config = ConfigDict(frozen=True)

    buy_sell_flag: int = Field(ge=0, le=1, description="1 buy, 0 sell")
    bound_percentage: int = Field(ge=-1, le=30)

    @classmethod
    def for_decision(cls, kind: TradeKind, config: ParamConfig) -> "Witness":
        if kind is TradeKind.BUY:
            return cls(buy_sell_flag=1, bound_percentage=config.l)
        if kind is TradeKind.SELL:
            return cls(buy_sell_flag=0, bound_percentage=config.u)
        raise ValueError("Hold decisions have no witness")

    def to_bytes(self) -> bytes:
        return _WITNESS_STRUCT.pack(self.buy_sell_flag, self.bound_percentage)


def circuit_eval(p: PublicParams, w: Witness) -> bool:
    if w.buy_sell_flag == 1:
        return p.price < buy_threshold(p.lower, w.bound_percentage)
    return p.price > sell_threshold(p.upper, w.bound_percentage)


class DecisionCircuit(BaseModel):
    """The single deployed circuit: three public inputs, two private, one boolean output"""
    model_config = ConfigDict(frozen=True)

    circuit_id: str = CIRCUIT_ID
    public_inputs: Tuple[str, ...] = ("price", "upper", "lower")
    private_inputs: Tuple[str, ...] = ("buy_sell_flag", "bound_percentage")

    def evaluate(self, p: PublicParams, w: Witness) -> bool:
        return circuit_eval(p, w)

    def source(self) -> str:
        return circuit_source()


CIRCUIT = DecisionCircuit()


class SetupKeys(BaseModel):
    model_config = ConfigDict(frozen=True)

    proving_key: bytes
    verification_key: bytes

    def vk_digest(self) -> str:
        return hashlib.sha256(self.verification_key).hexdigest()


def _pk_secret(pk: bytes) -> bytes:
    if len(pk) != len(_PK_MAGIC) + DIGEST_BYTES or not pk.startswith(_PK_MAGIC):
        raise ValueError("malformed proving key")
    return pk[len(_PK_MAGIC):]


def _vk_fields(vk: bytes) -> Tuple[bytes, bytes, bytes]:
    """(circuit id, source digest, secret)"""
    if len(vk) != len(_VK_MAGIC) + 3 * DIGEST_BYTES or not vk.startswith(_VK_MAGIC):
        raise ValueError("malformed verification key")
    body = vk[len(_VK_MAGIC):]
    return body[:32], body[32:64], body[64:]


def setup(rng_seed: bytes) -> SetupKeys:
    """Simulated trusted setup; the same seed always yields the same keys"""
    secret = hashlib.sha256(b"setup:" + bytes(rng_seed)).digest()
    keys = SetupKeys(
        proving_key=_PK_MAGIC + secret,
        verification_key=_VK_MAGIC + circuit_id_bytes() + source_digest(circuit_source()) + secret,
    )
    logger.info(f"Trusted setup complete for circuit {CIRCUIT_ID} (vk digest {keys.vk_digest()[:16]})")
    return keys


class Proof(BaseModel):
    model_config = ConfigDict(frozen=True)

    public_inputs: PublicParams
    witness_commitment: bytes
    binding_tag: bytes
    circuit_id: bytes = Field(default_factory=circuit_id_bytes)

    @field_validator("witness_commitment", "binding_tag", "circuit_id")
    @classmethod
    def _digest_sized(cls, v: bytes) -> bytes:
        if len(v) != DIGEST_BYTES:
            raise ValueError(f"expected {DIGEST_BYTES} bytes, got {len(v)}")
        return v

    def to_bytes(self) -> bytes:
        p = self.public_inputs
        return PROOF_STRUCT.pack(self.circuit_id, p.price, p.upper, p.lower,
                                 self.witness_commitment, self.binding_tag)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Proof":
        if len(data) != PROOF_STRUCT.size:
            raise ValueError(f"proof must be {PROOF_STRUCT.size} bytes, got {len(data)}")
        cid, price, upper, lower, commitment, tag = PROOF_STRUCT.unpack(data)
        return cls(
            public_inputs=PublicParams(price=price, upper=upper, lower=lower),
            witness_commitment=commitment,
            binding_tag=tag,
            circuit_id=cid,
        )

    def hex(self) -> str:
        return self.to_bytes().hex()


def _public_bytes(p: PublicParams) -> bytes:
    return struct.pack("<qqq", p.price, p.upper, p.lower)


def _tag(secret: bytes, circuit_id: bytes, p: PublicParams, commitment: bytes) -> bytes:
    return hmac.new(secret, circuit_id + _public_bytes(p) + commitment, hashlib.sha256).digest()


class NonceSource:
    """Seeded source of commitment nonces"""

    def __init__(self, seed: Union[int, np.random.SeedSequence, np.random.Generator]):
        self._rng = np.random.default_rng(seed)

    def next(self) -> bytes:
        return self._rng.bytes(NONCE_BYTES)


def prove(pk: bytes, p: PublicParams, w: Witness, nonce: bytes) -> Proof:
    """
    Prove that the witness decision holds for the public inputs.

    Raises:
        ConstraintUnsatisfied: the circuit evaluates to false
    """
    if not circuit_eval(p, w):
        raise ConstraintUnsatisfied(
            f"{'buy' if w.buy_sell_flag else 'sell'} decision does not hold for price {p.price}")
    secret = _pk_secret(pk)
    commitment = hashlib.sha256(w.to_bytes() + bytes(nonce)).digest()
    cid = circuit_id_bytes()
    return Proof(public_inputs=p, witness_commitment=commitment,
                 binding_tag=_tag(secret, cid, p, commitment), circuit_id=cid)


def verify(vk: bytes, proof: Union[Proof, bytes]) -> bool:
    """True iff the binding tag authenticates the proof under vk; False on any malformed input"""
    try:
        if not isinstance(proof, Proof):
            proof = Proof.from_bytes(bytes(proof))
        cid, _, secret = _vk_fields(bytes(vk))
        if proof.circuit_id != cid:
            return False
        expected = _tag(secret, cid, proof.public_inputs, proof.witness_commitment)
        return hmac.compare_digest(expected, proof.binding_tag)
    except (ValueError, TypeError) as e:
        logger.debug(f"Rejected malformed proof or key: {e}")
        return False


def audit_verifier(vk: bytes, source: Optional[str] = None) -> bool:
    """Confirm a verification key was generated for the published root program"""
    try:
        cid, digest, _ = _vk_fields(bytes(vk))
    except ValueError:
        return False
    source = circuit_source() if source is None else source
    return cid == circuit_id_bytes() and hmac.compare_digest(digest, source_digest(source))


class LeakAuditReport(BaseModel):
    proof_count: int
    equal_length: bool
    lengths: List[int]
    # byte offsets that differ between proofs, outside commitment/tag
    plaintext_diff_offsets: List[int]
    flag_field_absent: bool
    group_commitment_means: Dict[str, float] = Field(default_factory=dict)
    commitment_mean_delta: Optional[float] = None
    mean_delta_threshold: float = 8.0
    passed: bool


def _hidden_offsets() -> set:
    return {off + i for name, off, size in PROOF_LAYOUT if name in _HIDDEN_FIELDS for i in range(size)}


def leak_audit(proofs: Sequence[Proof], labels: Optional[Sequence[str]] = None,
               mean_delta_threshold: float = 8.0) -> LeakAuditReport:
    """
    Byte-level distinguishability report over serialized proofs.

    Proofs over identical public inputs must serialize to equal lengths and
    differ only inside the commitment and tag. When `labels` groups the proofs
    (e.g. "buy"/"sell"), the mean commitment byte value of each group is compared.
    """
    blobs = [p.to_bytes() for p in proofs]
    lengths = [len(b) for b in blobs]
    equal_length = len(set(lengths)) <= 1

    hidden = _hidden_offsets()
    diffs: List[int] = []
    if blobs and equal_length:
        stacked = np.frombuffer(b"".join(blobs), dtype=np.uint8).reshape(len(blobs), -1)
        varying = np.flatnonzero((stacked != stacked[0]).any(axis=0))
        diffs = [int(i) for i in varying if int(i) not in hidden]

    names = [name for name, _, _ in PROOF_LAYOUT] + list(Proof.model_fields)
    flag_absent = not any(("flag" in n or "decision" in n or "bound" in n) for n in names)

    means: Dict[str, float] = {}
    delta = None
    if labels is not None:
        if len(labels) != len(proofs):
            raise ValueError("labels must match proofs one to one")
        for group in sorted(set(labels)):
            data = b"".join(p.witness_commitment for p, g in zip(proofs, labels) if g == group)
            means[group] = float(np.frombuffer(data, dtype=np.uint8).mean())
        if len(means) >= 2:
            delta = max(means.values()) - min(means.values())

    passed = (len(proofs) >= 2 and equal_length and not diffs and flag_absent
              and (delta is None or delta < mean_delta_threshold))
    report = LeakAuditReport(
        proof_count=len(proofs),
        equal_length=equal_length,
        lengths=lengths,
        plaintext_diff_offsets=diffs,
        flag_field_absent=flag_absent,
        group_commitment_means=means,
        commitment_mean_delta=delta,
        mean_delta_threshold=mean_delta_threshold,
        passed=passed,
    )
    if not passed:
        logger.warning(f"Leak audit failed: {report.model_dump(exclude={'lengths'})}")
    return report
