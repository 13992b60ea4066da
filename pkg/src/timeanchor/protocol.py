"""The verifier's freshness protocol: commitments, proofs, verification.

One round, against a live chain view and a set of trusted TSAs:

  1. observe the latest block header and draw a secret 128-bit nonce r0;
  2. have each TSA timestamp h(r0 || header bytes), yielding token0;
  3. publish the hash of the token(s) on-chain as a commitment;
  4. wait for a block that includes the commitment, collecting every
     header seen along the way;
  5. draw r1, have the TSAs timestamp h(r1 || inclusion header bytes),
     yielding token1.

The resulting proof shows the covered blocks were mined inside the real
time window (token0.time, token1.time).  Verification is structural
(signatures, digests, inclusion, linkage, window orientation); the
per-header timestamp check is reported separately so that a valid proof
can demonstrate a *bad* block timestamp.
"""

from __future__ import annotations

import json
import secrets
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .core import (
    Block,
    BlockHeader,
    CoreError,
    MerkleProof,
    Transaction,
    TxKind,
    h,
    header_hash,
    merkle_prove,
    merkle_verify,
    serialize_header,
)
from .tsa import TimestampAuthority, TimestampToken, TrustStore, verify_token

NONCE_LEN = 16  # 128 bits

ENCODING_OP_RETURN = "op_return"
ENCODING_P2PKH = "p2pkh_truncated"

DEFAULT_STARVATION_BUDGET = 6

# stable reason codes (external contract)
REASON_TOKEN_INVALID = "token_invalid"
REASON_DIGEST0 = "digest_mismatch_token0"
REASON_DIGEST1 = "digest_mismatch_token1"
REASON_COMMITMENT = "commitment_mismatch"
REASON_INCLUSION = "inclusion_invalid"
REASON_LINKAGE = "linkage_broken"
REASON_WINDOW = "window_inverted"
REASON_DUPLICATE = "duplicate_payload"
REASON_STARVED = "commitment starved"


class ProtocolError(ValueError):
    """Raised on invalid protocol inputs."""


class CommitmentStarved(ProtocolError):
    """The commitment transaction never appeared within the block budget."""

    def __init__(self, budget: int) -> None:
        super().__init__(f"{REASON_STARVED}: not included within {budget} blocks")
        self.budget = budget


@dataclass(frozen=True)
class Nonce:
    bytes: bytes  # noqa: A003 - field name pinned by the proof format

    def __post_init__(self) -> None:
        if len(self.bytes) != NONCE_LEN:
            raise ProtocolError(f"nonce must be {NONCE_LEN} bytes")


class NonceSource:
    """Explicit-mode nonce generator: OS entropy or a seeded stream."""

    def __init__(self, mode: str = "production", seed: Optional[int] = None) -> None:
        if mode not in ("production", "simulation"):
            raise ProtocolError("nonce mode must be production or simulation")
        if mode == "simulation" and seed is None:
            raise ProtocolError("simulation mode requires a seed")
        self.mode = mode
        self._rng = random.Random(seed) if mode == "simulation" else None

    def draw(self) -> Nonce:
        if self._rng is not None:
            return Nonce(self._rng.getrandbits(8 * NONCE_LEN).to_bytes(NONCE_LEN, "big"))
        return Nonce(secrets.token_bytes(NONCE_LEN))


def make_digest(r: Nonce, header: BlockHeader) -> bytes:
    """The blinded header digest handed to the TSA: h(r || header bytes)."""
    return h(r.bytes + serialize_header(header))


@dataclass(frozen=True)
class Commitment:
    value: bytes
    source_tokens: Tuple[TimestampToken, ...]
    encoding: str = ENCODING_OP_RETURN


def make_commitment(tokens: Sequence[TimestampToken],
                    encoding: str = ENCODING_OP_RETURN) -> Commitment:
    """Hash of the canonical token encodings, ascending tsa_id order."""
    if not tokens:
        raise ProtocolError("commitment needs at least one token")
    ids = [t.tsa_id for t in tokens]
    if len(set(ids)) != len(ids):
        raise ProtocolError("duplicate tsa_id in multi-TSA commitment")
    ordered = tuple(sorted(tokens, key=lambda t: t.tsa_id))
    value = h(b"".join(t.encode() for t in ordered))
    return Commitment(value=value, source_tokens=ordered, encoding=encoding)


def encode_commitment_tx(c: Commitment) -> Transaction:
    if c.encoding == ENCODING_OP_RETURN:
        return Transaction(TxKind.COMMITMENT_OPRETURN, c.value)
    if c.encoding == ENCODING_P2PKH:
        return Transaction(TxKind.COMMITMENT_P2PKH, c.value[:20])
    raise ProtocolError(f"unknown commitment encoding {c.encoding!r}")


def payload_matches(value: bytes, tx: Transaction) -> bool:
    """Does a transaction carry this commitment value under its encoding?"""
    if tx.kind is TxKind.COMMITMENT_OPRETURN:
        return tx.payload == value
    if tx.kind is TxKind.COMMITMENT_P2PKH:
        return tx.payload == value[:20]
    return False


@dataclass(frozen=True)
class CommitmentLocation:
    index: int
    proof: MerkleProof
    duplicate: bool


def locate_commitment(block: Block, c: Commitment) -> Optional[CommitmentLocation]:
    """First transaction matching the commitment payload, with its proof."""
    matches = [
        i for i, tx in enumerate(block.transactions) if payload_matches(c.value, tx)
    ]
    if not matches:
        return None
    return CommitmentLocation(
        index=matches[0],
        proof=merkle_prove(block.transactions, matches[0]),
        duplicate=len(matches) > 1,
    )


def chain_next(prev_token1: Sequence[TimestampToken],
               encoding: str = ENCODING_OP_RETURN) -> Commitment:
    """Continuation commitment: hash of the prior round's closing token(s)."""
    return make_commitment(prev_token1, encoding)


# ---------------------------------------------------------------------------
# Proof object and serialization

def _header_to_dict(hd: BlockHeader) -> dict:
    return {
        "height": hd.height,
        "prev_hash": hd.prev_hash.hex(),
        "merkle_root": hd.merkle_root.hex(),
        "timestamp": hd.timestamp,
        "nonce": hd.nonce,
    }


def _header_from_dict(data: dict) -> BlockHeader:
    return BlockHeader(
        height=data["height"],
        prev_hash=bytes.fromhex(data["prev_hash"]),
        merkle_root=bytes.fromhex(data["merkle_root"]),
        timestamp=data["timestamp"],
        nonce=data["nonce"],
    )


@dataclass(frozen=True)
class FreshnessProof:
    """Everything needed to place the covered blocks inside (T0, T1)."""

    r0: Nonce
    header_prev: BlockHeader
    token0: Tuple[TimestampToken, ...]
    r1: Nonce
    header_i: BlockHeader
    token1: Tuple[TimestampToken, ...]
    inclusion: MerkleProof
    commitment_tx: Transaction
    covered_headers: Tuple[BlockHeader, ...]
    metadata: Dict[str, object] = field(default_factory=dict)

    @property
    def window_start(self) -> int:
        return max(t.time for t in self.token0)

    @property
    def window_end(self) -> int:
        return min(t.time for t in self.token1)

    def canonical_bytes(self) -> bytes:
        """Length-prefixed concatenation of field encodings, field order."""

        def lp(b: bytes) -> bytes:
            return len(b).to_bytes(4, "big") + b

        def tokens(ts: Tuple[TimestampToken, ...]) -> bytes:
            return bytes([len(ts)]) + b"".join(lp(t.encode()) for t in ts)

        return (
            lp(self.r0.bytes)
            + lp(serialize_header(self.header_prev))
            + tokens(self.token0)
            + lp(self.r1.bytes)
            + lp(serialize_header(self.header_i))
            + tokens(self.token1)
            + lp(self.inclusion.encode())
            + lp(self.commitment_tx.encode())
            + bytes([len(self.covered_headers)])
            + b"".join(lp(serialize_header(hd)) for hd in self.covered_headers)
        )

    def digest(self) -> bytes:
        return h(self.canonical_bytes())

    def to_dict(self) -> dict:
        return {
            "r0": self.r0.bytes.hex(),
            "header_prev": _header_to_dict(self.header_prev),
            "token0": [t.encode().hex() for t in self.token0],
            "r1": self.r1.bytes.hex(),
            "header_i": _header_to_dict(self.header_i),
            "token1": [t.encode().hex() for t in self.token1],
            "inclusion": self.inclusion.encode().hex(),
            "commitment_tx": self.commitment_tx.encode().hex(),
            "covered_headers": [_header_to_dict(hd) for hd in self.covered_headers],
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "FreshnessProof":
        return cls(
            r0=Nonce(bytes.fromhex(data["r0"])),
            header_prev=_header_from_dict(data["header_prev"]),
            token0=tuple(TimestampToken.decode(bytes.fromhex(t)) for t in data["token0"]),
            r1=Nonce(bytes.fromhex(data["r1"])),
            header_i=_header_from_dict(data["header_i"]),
            token1=tuple(TimestampToken.decode(bytes.fromhex(t)) for t in data["token1"]),
            inclusion=MerkleProof.decode(bytes.fromhex(data["inclusion"])),
            commitment_tx=Transaction.decode(bytes.fromhex(data["commitment_tx"])),
            covered_headers=tuple(
                _header_from_dict(hd) for hd in data["covered_headers"]
            ),
            metadata=dict(data.get("metadata", {})),
        )

    @classmethod
    def from_json(cls, text: str) -> "FreshnessProof":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class VerificationReport:
    valid: bool
    window_start: int
    window_end: int
    covered_heights: Tuple[int, int]
    timestamp_ok: Tuple[bool, ...]
    failure_reasons: Tuple[str, ...]
    warnings: Tuple[str, ...] = ()

    @property
    def all_timestamps_ok(self) -> bool:
        return all(self.timestamp_ok)

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "window_start": self.window_start,
            "window_end": self.window_end,
            "covered_heights": list(self.covered_heights),
            "timestamp_ok": list(self.timestamp_ok),
            "all_timestamps_ok": self.all_timestamps_ok,
            "failure_reasons": list(self.failure_reasons),
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def structural_reasons(proof: FreshnessProof, trust_store: TrustStore) -> List[str]:
    """Checks 1-6: signatures, digests, commitment, inclusion, linkage."""
    reasons: List[str] = []

    for token in proof.token0 + proof.token1:
        identity = trust_store.get(token.tsa_id)
        if identity is None or not verify_token(token, identity):
            reasons.append(REASON_TOKEN_INVALID)
            break

    d0 = make_digest(proof.r0, proof.header_prev)
    if any(t.digest != d0 for t in proof.token0):
        reasons.append(REASON_DIGEST0)

    try:
        commitment = make_commitment(proof.token0)
        if not payload_matches(commitment.value, proof.commitment_tx):
            reasons.append(REASON_COMMITMENT)
    except ProtocolError:
        reasons.append(REASON_COMMITMENT)

    if not proof.covered_headers:
        reasons.append(REASON_LINKAGE)
        return reasons

    anchor = proof.covered_headers[-1]
    if not merkle_verify(anchor.merkle_root, proof.commitment_tx.txid, proof.inclusion):
        reasons.append(REASON_INCLUSION)

    linked = proof.covered_headers[0].prev_hash == header_hash(proof.header_prev)
    for prev, nxt in zip(proof.covered_headers, proof.covered_headers[1:]):
        if nxt.prev_hash != header_hash(prev) or nxt.height != prev.height + 1:
            linked = False
    if proof.covered_headers[0].height != proof.header_prev.height + 1:
        linked = False
    if proof.header_i != anchor:
        linked = False
    if not linked:
        reasons.append(REASON_LINKAGE)

    d1 = make_digest(proof.r1, anchor)
    if any(t.digest != d1 for t in proof.token1):
        reasons.append(REASON_DIGEST1)

    return reasons


def verify_proof(proof: FreshnessProof, trust_store: TrustStore) -> VerificationReport:
    """Structural validity plus the per-header timestamp window verdicts."""
    reasons = structural_reasons(proof, trust_store)

    t0 = proof.window_start
    t1 = proof.window_end
    if t0 >= t1:
        reasons.append(REASON_WINDOW)

    timestamp_ok = tuple(
        t0 < hd.timestamp < t1 for hd in proof.covered_headers
    )
    warnings = tuple(
        w for w in (REASON_DUPLICATE,) if proof.metadata.get("duplicate_payload")
    )
    heights = (
        (proof.covered_headers[0].height, proof.covered_headers[-1].height)
        if proof.covered_headers
        else (0, 0)
    )
    return VerificationReport(
        valid=not reasons,
        window_start=t0,
        window_end=t1,
        covered_heights=heights,
        timestamp_ok=timestamp_ok,
        failure_reasons=tuple(dict.fromkeys(reasons)),
        warnings=warnings,
    )


# ---------------------------------------------------------------------------
# The verifier state machine

class Verifier:
    """Runs protocol rounds against a chain view using a fixed TSA set."""

    def __init__(self, tsas: Sequence[TimestampAuthority],
                 nonce_source: NonceSource,
                 encoding: str = ENCODING_OP_RETURN,
                 starvation_budget: int = DEFAULT_STARVATION_BUDGET) -> None:
        if not tsas:
            raise ProtocolError("at least one TSA required")
        if encoding not in (ENCODING_OP_RETURN, ENCODING_P2PKH):
            raise ProtocolError(f"unknown commitment encoding {encoding!r}")
        self.tsas = list(tsas)
        self.nonces = nonce_source
        self.encoding = encoding
        self.budget = starvation_budget

    def _issue_all(self, digest: bytes, now: float) -> Tuple[TimestampToken, ...]:
        return tuple(tsa.issue_token(digest, now) for tsa in self.tsas)

    def run_round(self, view,
                  seed_state: Optional[Tuple[Nonce, BlockHeader,
                                             Tuple[TimestampToken, ...]]] = None
                  ) -> FreshnessProof:
        """One full round; ``seed_state`` continues a chained sequence."""
        if seed_state is None:
            header_prev = view.next_block().header
            r0 = self.nonces.draw()
            token0 = self._issue_all(make_digest(r0, header_prev), view.now())
        else:
            r0, header_prev, token0 = seed_state

        commitment = make_commitment(token0, self.encoding)
        tx = encode_commitment_tx(commitment)
        view.submit(tx)

        covered: List[BlockHeader] = []
        location: Optional[CommitmentLocation] = None
        inclusion_block: Optional[Block] = None
        for _ in range(self.budget):
            block = view.next_block()
            covered.append(block.header)
            location = locate_commitment(block, commitment)
            if location is not None:
                inclusion_block = block
                break
        if location is None or inclusion_block is None:
            raise CommitmentStarved(self.budget)

        r1 = self.nonces.draw()
        token1 = self._issue_all(make_digest(r1, covered[-1]), view.now())
        return FreshnessProof(
            r0=r0,
            header_prev=header_prev,
            token0=token0,
            r1=r1,
            header_i=covered[-1],
            token1=token1,
            inclusion=location.proof,
            commitment_tx=inclusion_block.transactions[location.index],
            covered_headers=tuple(covered),
            metadata={
                "encoding": self.encoding,
                "duplicate_payload": location.duplicate,
                "tsa_ids": [t.tsa_id.hex() for t in token0],
            },
        )

    def run_chained(self, view, rounds: int) -> List[FreshnessProof]:
        """Consecutive rounds whose windows tile: T1(k) == T0(k+1)."""
        proofs: List[FreshnessProof] = []
        seed_state = None
        for _ in range(rounds):
            proof = self.run_round(view, seed_state)
            proofs.append(proof)
            seed_state = (proof.r1, proof.covered_headers[-1], proof.token1)
        return proofs


# ---------------------------------------------------------------------------
# Censorship distinguisher experiment

def adversary_guess_commitment(candidates: Sequence[Transaction],
                               header_prev: BlockHeader,
                               tsa: TimestampAuthority,
                               t0_hint: int,
                               rng: random.Random,
                               nonce_budget: int = 4) -> int:
    """Best effort by an adversary who lacks the secret nonce.

    The adversary may query the TSA with its own repeated-timestamping
    requests but must guess the 128-bit nonce; with a bounded budget the
    recomputation never matches, so it degrades to a uniform pick.
    """
    for _ in range(nonce_budget):
        guess = Nonce(rng.getrandbits(8 * NONCE_LEN).to_bytes(NONCE_LEN, "big"))
        token = tsa.issue_token(make_digest(guess, header_prev), t0_hint)
        value = make_commitment([token]).value
        for i, tx in enumerate(candidates):
            if payload_matches(value, tx):
                return i
    return rng.randrange(len(candidates))


def distinguisher_trial(tsa: TimestampAuthority, rng: random.Random,
                        decoys: int = 15) -> bool:
    """One trial: can the adversary spot the real commitment among decoys?"""
    header_prev = BlockHeader(
        height=rng.randrange(1, 10_000),
        prev_hash=rng.getrandbits(256).to_bytes(32, "big"),
        merkle_root=rng.getrandbits(256).to_bytes(32, "big"),
        timestamp=1_700_000_000 + rng.randrange(100_000),
        nonce=rng.getrandbits(64),
    )
    t0 = header_prev.timestamp + 2
    r0 = Nonce(rng.getrandbits(8 * NONCE_LEN).to_bytes(NONCE_LEN, "big"))
    token = tsa.issue_token(make_digest(r0, header_prev), t0)
    real_tx = encode_commitment_tx(make_commitment([token]))
    candidates = [
        Transaction(TxKind.COMMITMENT_OPRETURN, rng.getrandbits(256).to_bytes(32, "big"))
        for _ in range(decoys)
    ]
    slot = rng.randrange(decoys + 1)
    candidates.insert(slot, real_tx)
    guess = adversary_guess_commitment(candidates, header_prev, tsa, t0, rng)
    return guess == slot
