"""Canonical block/transaction model, hashing, and Merkle trees.

All canonical encodings are big-endian and injective; SHA-256 is the
protocol hash throughout.  Merkle trees use Bitcoin-style odd-leaf
duplication plus 0x00/0x01 domain-separation prefixes:

    leaf  = H(0x00 || txid)
    node  = H(0x01 || left || right)

Every type here is an immutable value object and every operation is a
pure function.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from hashlib import sha256
from typing import List, Sequence, Tuple

DIGEST_LEN = 32
HEADER_LEN = 88
ZERO_DIGEST = b"\x00" * DIGEST_LEN

LEAF_PREFIX = b"\x00"
NODE_PREFIX = b"\x01"


class CoreError(ValueError):
    """Raised on malformed core-model inputs."""


def h(data: bytes) -> bytes:
    """The protocol hash function (SHA-256)."""
    return sha256(data).digest()


def check_digest(value: bytes, what: str = "digest") -> bytes:
    if not isinstance(value, (bytes, bytearray)) or len(value) != DIGEST_LEN:
        raise CoreError(f"{what} must be exactly {DIGEST_LEN} bytes")
    return bytes(value)


class TxKind(enum.Enum):
    PAYMENT = "payment"
    COMMITMENT_OPRETURN = "commitment_opreturn"
    COMMITMENT_P2PKH = "commitment_p2pkh"


_KIND_TAG = {
    TxKind.PAYMENT: 0,
    TxKind.COMMITMENT_OPRETURN: 1,
    TxKind.COMMITMENT_P2PKH: 2,
}
_TAG_KIND = {v: k for k, v in _KIND_TAG.items()}


@dataclass(frozen=True)
class BlockHeader:
    """Simplified 88-byte block header: prev-link, Merkle root, timestamp."""

    height: int
    prev_hash: bytes
    merkle_root: bytes
    timestamp: int
    nonce: int = 0

    def __post_init__(self) -> None:
        if self.height < 0:
            raise CoreError("height must be non-negative")
        check_digest(self.prev_hash, "prev_hash")
        check_digest(self.merkle_root, "merkle_root")
        if not 0 <= self.timestamp < 2**64:
            raise CoreError("timestamp out of u64 range")
        if not 0 <= self.nonce < 2**64:
            raise CoreError("nonce out of u64 range")


def serialize_header(header: BlockHeader) -> bytes:
    """Canonical 88-byte header encoding: height||prev||root||time||nonce."""
    return (
        header.height.to_bytes(8, "big")
        + header.prev_hash
        + header.merkle_root
        + header.timestamp.to_bytes(8, "big")
        + header.nonce.to_bytes(8, "big")
    )


def deserialize_header(data: bytes) -> BlockHeader:
    if len(data) != HEADER_LEN:
        raise CoreError(f"header encoding must be {HEADER_LEN} bytes")
    return BlockHeader(
        height=int.from_bytes(data[0:8], "big"),
        prev_hash=data[8:40],
        merkle_root=data[40:72],
        timestamp=int.from_bytes(data[72:80], "big"),
        nonce=int.from_bytes(data[80:88], "big"),
    )


def header_hash(header: BlockHeader) -> bytes:
    return h(serialize_header(header))


@dataclass(frozen=True)
class Transaction:
    """A simulator transaction: opaque payments or commitment carriers."""

    kind: TxKind
    payload: bytes

    def __post_init__(self) -> None:
        if self.kind is TxKind.COMMITMENT_OPRETURN and len(self.payload) != 32:
            raise CoreError("commitment_opreturn payload must be 32 bytes")
        if self.kind is TxKind.COMMITMENT_P2PKH and len(self.payload) != 20:
            raise CoreError("commitment_p2pkh payload must be 20 bytes")

    def encode(self) -> bytes:
        """Canonical encoding: kind tag (1) || payload length (4 BE) || payload."""
        return (
            bytes([_KIND_TAG[self.kind]])
            + len(self.payload).to_bytes(4, "big")
            + self.payload
        )

    @property
    def txid(self) -> bytes:
        return h(self.encode())

    @classmethod
    def decode(cls, data: bytes) -> "Transaction":
        if len(data) < 5:
            raise CoreError("transaction encoding too short")
        tag = data[0]
        if tag not in _TAG_KIND:
            raise CoreError(f"unknown transaction kind tag {tag}")
        length = int.from_bytes(data[1:5], "big")
        if len(data) != 5 + length:
            raise CoreError("transaction payload length mismatch")
        return cls(kind=_TAG_KIND[tag], payload=data[5:])


@dataclass(frozen=True)
class MerkleProof:
    """Inclusion path: ordered (sibling digest, side-of-sibling) pairs."""

    leaf_index: int
    path: Tuple[Tuple[bytes, str], ...]

    def __post_init__(self) -> None:
        if self.leaf_index < 0:
            raise CoreError("leaf_index must be non-negative")
        for sibling, side in self.path:
            check_digest(sibling, "proof sibling")
            if side not in ("left", "right"):
                raise CoreError(f"bad proof side {side!r}")

    def encode(self) -> bytes:
        out = self.leaf_index.to_bytes(4, "big") + len(self.path).to_bytes(2, "big")
        for sibling, side in self.path:
            out += (b"\x00" if side == "left" else b"\x01") + sibling
        return out

    @classmethod
    def decode(cls, data: bytes) -> "MerkleProof":
        if len(data) < 6:
            raise CoreError("merkle proof encoding too short")
        leaf_index = int.from_bytes(data[0:4], "big")
        count = int.from_bytes(data[4:6], "big")
        if len(data) != 6 + count * 33:
            raise CoreError("merkle proof length mismatch")
        path = []
        off = 6
        for _ in range(count):
            if data[off] not in (0, 1):
                raise CoreError("bad side marker in merkle proof encoding")
            side = "left" if data[off] == 0 else "right"
            path.append((data[off + 1 : off + 33], side))
            off += 33
        return cls(leaf_index=leaf_index, path=tuple(path))


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    transactions: Tuple[Transaction, ...]

    def __post_init__(self) -> None:
        if merkle_root(list(self.transactions)) != self.header.merkle_root:
            raise CoreError("header merkle_root does not match transactions")


# ---------------------------------------------------------------------------
# Merkle tree over leaf digests

def leaf_hash(item: bytes) -> bytes:
    return h(LEAF_PREFIX + item)


def node_hash(left: bytes, right: bytes) -> bytes:
    return h(NODE_PREFIX + left + right)


def merkle_root_digests(items: Sequence[bytes]) -> bytes:
    """Root over raw leaf items (each gets the 0x00 leaf prefix)."""
    if not items:
        raise CoreError("empty block body")
    level: List[bytes] = [leaf_hash(item) for item in items]
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [node_hash(level[i], level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


def merkle_prove_digests(items: Sequence[bytes], index: int) -> MerkleProof:
    if not 0 <= index < len(items):
        raise CoreError("leaf index out of range")
    level = [leaf_hash(item) for item in items]
    idx = index
    path: List[Tuple[bytes, str]] = []
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        sib = idx ^ 1
        side = "left" if sib < idx else "right"
        path.append((level[sib], side))
        level = [node_hash(level[i], level[i + 1]) for i in range(0, len(level), 2)]
        idx //= 2
    return MerkleProof(leaf_index=index, path=tuple(path))


def merkle_fold(item: bytes, proof: MerkleProof) -> bytes:
    cur = leaf_hash(item)
    for sibling, side in proof.path:
        cur = node_hash(sibling, cur) if side == "left" else node_hash(cur, sibling)
    return cur


def proof_index_consistent(proof: MerkleProof) -> bool:
    """The side markers fully determine the leaf position; enforce agreement."""
    expected = sum(
        1 << k for k, (_, side) in enumerate(proof.path) if side == "left"
    )
    return proof.leaf_index == expected


# ---------------------------------------------------------------------------
# Transaction-level API

def merkle_root(txs: Sequence[Transaction]) -> bytes:
    """Merkle root over the block's txids."""
    return merkle_root_digests([tx.txid for tx in txs])


def merkle_prove(txs: Sequence[Transaction], index: int) -> MerkleProof:
    return merkle_prove_digests([tx.txid for tx in txs], index)


def merkle_verify(root: bytes, txid: bytes, proof: MerkleProof) -> bool:
    """True iff folding txid's leaf hash up the path yields root."""
    try:
        check_digest(root, "root")
        check_digest(txid, "txid")
        if not proof_index_consistent(proof):
            return False
        return merkle_fold(txid, proof) == root
    except (CoreError, TypeError):
        return False


def build_block(height: int, prev_hash: bytes, timestamp: int, nonce: int,
                txs: Sequence[Transaction]) -> Block:
    """Assemble a block whose header commits to the given transactions."""
    header = BlockHeader(
        height=height,
        prev_hash=prev_hash,
        merkle_root=merkle_root(txs),
        timestamp=timestamp,
        nonce=nonce,
    )
    return Block(header=header, transactions=tuple(txs))
