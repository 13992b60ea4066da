"""TSA accountability: evidence that one authority contradicted itself.

If the same TSA signs the opening and closing tokens of a round with
token0.time > token1.time, the proof's causal chain (token0 hashed into a
commitment that is Merkle-included in the header token1 was derived from)
shows the TSA timestamped the *older* digest with the *later* time.  The
packaged evidence is verifiable by any third party holding the trust
store.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Tuple

from .core import BlockHeader, MerkleProof, Transaction
from .protocol import (
    FreshnessProof,
    Nonce,
    ProtocolError,
    _header_from_dict,
    _header_to_dict,
    structural_reasons,
)
from .tsa import TimestampToken, TrustStore


class AuditError(ProtocolError):
    """Raised when a proof is too broken to audit."""


@dataclass(frozen=True)
class MisbehaviorEvidence:
    token0: TimestampToken
    token1: TimestampToken
    # commitment_tokens is the full opening token set (equals (token0,) in
    # the single-TSA case); all of them are needed to re-derive C.
    commitment_tokens: Tuple[TimestampToken, ...]
    r0: Nonce
    header_prev: BlockHeader
    commitment_tx: Transaction
    inclusion: MerkleProof
    covered_headers: Tuple[BlockHeader, ...]
    r1: Nonce
    verdict: str

    def causal_proof(self) -> FreshnessProof:
        """The sub-proof establishing token0's digest precedes token1's."""
        return FreshnessProof(
            r0=self.r0,
            header_prev=self.header_prev,
            token0=self.commitment_tokens,
            r1=self.r1,
            header_i=self.covered_headers[-1],
            token1=(self.token1,),
            inclusion=self.inclusion,
            commitment_tx=self.commitment_tx,
            covered_headers=self.covered_headers,
        )

    def to_dict(self) -> dict:
        return {
            "token0": self.token0.encode().hex(),
            "token1": self.token1.encode().hex(),
            "causal_chain": {
                "r0": self.r0.bytes.hex(),
                "header_prev": _header_to_dict(self.header_prev),
                "commitment_tokens": [
                    t.encode().hex() for t in self.commitment_tokens
                ],
                "commitment_tx": self.commitment_tx.encode().hex(),
                "inclusion": self.inclusion.encode().hex(),
                "covered_headers": [
                    _header_to_dict(hd) for hd in self.covered_headers
                ],
                "r1": self.r1.bytes.hex(),
            },
            "verdict": self.verdict,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "MisbehaviorEvidence":
        chain = data["causal_chain"]
        return cls(
            token0=TimestampToken.decode(bytes.fromhex(data["token0"])),
            token1=TimestampToken.decode(bytes.fromhex(data["token1"])),
            commitment_tokens=tuple(
                TimestampToken.decode(bytes.fromhex(t))
                for t in chain["commitment_tokens"]
            ),
            r0=Nonce(bytes.fromhex(chain["r0"])),
            header_prev=_header_from_dict(chain["header_prev"]),
            commitment_tx=Transaction.decode(bytes.fromhex(chain["commitment_tx"])),
            inclusion=MerkleProof.decode(bytes.fromhex(chain["inclusion"])),
            covered_headers=tuple(
                _header_from_dict(hd) for hd in chain["covered_headers"]
            ),
            r1=Nonce(bytes.fromhex(chain["r1"])),
            verdict=data["verdict"],
        )

    @classmethod
    def from_json(cls, text: str) -> "MisbehaviorEvidence":
        return cls.from_dict(json.loads(text))


def audit_proof(proof: FreshnessProof,
                trust_store: TrustStore) -> Optional[MisbehaviorEvidence]:
    """Evidence iff a single TSA stamped T0 after T1 inside one round.

    Cross-TSA disagreement is not misbehavior (no single authority
    contradicted itself), nor is exact equality at second granularity.
    """
    if structural_reasons(proof, trust_store):
        raise AuditError("cannot audit unverifiable proof")
    by_id = {t.tsa_id: t for t in proof.token1}
    for t0 in proof.token0:
        t1 = by_id.get(t0.tsa_id)
        if t1 is not None and t0.time > t1.time:
            return MisbehaviorEvidence(
                token0=t0,
                token1=t1,
                commitment_tokens=proof.token0,
                r0=proof.r0,
                header_prev=proof.header_prev,
                commitment_tx=proof.commitment_tx,
                inclusion=proof.inclusion,
                covered_headers=proof.covered_headers,
                r1=proof.r1,
                verdict=(
                    f"tsa {t0.tsa_id.hex()} timestamped the causally earlier "
                    f"digest at {t0.time}, the later one at {t1.time}"
                ),
            )
    return None


def verify_evidence(ev: MisbehaviorEvidence, trust_store: TrustStore) -> bool:
    """Re-run the causal chain and the T0 > T1 inequality from scratch."""
    if ev.token0.tsa_id != ev.token1.tsa_id:
        return False
    if ev.token0.time <= ev.token1.time:
        return False
    if not ev.covered_headers:
        return False
    if ev.token0.encode() not in [t.encode() for t in ev.commitment_tokens]:
        return False
    try:
        return not structural_reasons(ev.causal_proof(), trust_store)
    except ProtocolError:
        return False
