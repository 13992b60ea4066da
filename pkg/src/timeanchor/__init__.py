"""Strengthened blockchain timestamps via external timestamp authorities.

A verifier interleaves TSA-signed tokens with on-chain commitments to
prove that a block was mined inside a bounded real-time window, backed by
a deterministic network simulator for validating the accuracy, detection,
censorship-resistance, and accountability properties.
"""

from .core import (
    Block,
    BlockHeader,
    MerkleProof,
    Transaction,
    TxKind,
    merkle_prove,
    merkle_root,
    merkle_verify,
    serialize_header,
)
from .chain_sim import (
    MinerStrategy,
    NodeClock,
    Simulation,
    SimulationConfig,
    median_past_11,
    network_time,
    run_simulation,
    validate_block_timestamp,
)
from .tsa import TimestampAuthority, TimestampToken, TrustStore, TsaIdentity, verify_token
from .protocol import (
    Commitment,
    FreshnessProof,
    Nonce,
    NonceSource,
    VerificationReport,
    Verifier,
    chain_next,
    encode_commitment_tx,
    locate_commitment,
    make_commitment,
    make_digest,
    verify_proof,
)
from .accountability import MisbehaviorEvidence, audit_proof, verify_evidence

__version__ = "0.1.0"
