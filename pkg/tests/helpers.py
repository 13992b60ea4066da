"""Hand-built protocol rounds for tests that need full control."""

import random

from timeanchor.core import (
    BlockHeader,
    Transaction,
    TxKind,
    ZERO_DIGEST,
    build_block,
    header_hash,
)
from timeanchor.protocol import (
    FreshnessProof,
    Nonce,
    encode_commitment_tx,
    locate_commitment,
    make_commitment,
    make_digest,
)


def manual_round(token0_tsas, token1_tsas, t0=1000.0, t1=1600.0,
                 block_timestamp=1300, seed=0, encoding="op_return",
                 extra_matching_payloads=0):
    """One synthetic round on a two-block chain; returns (proof, block)."""
    rng = random.Random(seed)
    header_prev = BlockHeader(
        height=7,
        prev_hash=rng.getrandbits(256).to_bytes(32, "big"),
        merkle_root=rng.getrandbits(256).to_bytes(32, "big"),
        timestamp=int(t0) - 400,
        nonce=rng.getrandbits(64),
    )
    r0 = Nonce(rng.getrandbits(128).to_bytes(16, "big"))
    d0 = make_digest(r0, header_prev)
    token0 = tuple(tsa.issue_token(d0, t0) for tsa in token0_tsas)
    commitment = make_commitment(token0, encoding)
    commit_tx = encode_commitment_tx(commitment)
    txs = [
        Transaction(TxKind.PAYMENT, rng.getrandbits(256).to_bytes(32, "big")),
        commit_tx,
        Transaction(TxKind.PAYMENT, rng.getrandbits(256).to_bytes(32, "big")),
    ]
    txs += [commit_tx] * extra_matching_payloads
    block = build_block(
        height=8,
        prev_hash=header_hash(header_prev),
        timestamp=block_timestamp,
        nonce=rng.getrandbits(64),
        txs=txs,
    )
    location = locate_commitment(block, commitment)
    r1 = Nonce(rng.getrandbits(128).to_bytes(16, "big"))
    d1 = make_digest(r1, block.header)
    token1 = tuple(tsa.issue_token(d1, t1) for tsa in token1_tsas)
    proof = FreshnessProof(
        r0=r0,
        header_prev=header_prev,
        token0=token0,
        r1=r1,
        header_i=block.header,
        token1=token1,
        inclusion=location.proof,
        commitment_tx=block.transactions[location.index],
        covered_headers=(block.header,),
        metadata={"encoding": encoding,
                  "duplicate_payload": location.duplicate},
    )
    return proof, block
