"""Timestamp authorities: Ed25519-signed (digest, time) tokens.

Three interchangeable backends:

  rfc3161_style  -- the TSA signs each request directly; the signed payload
                    is the canonical token encoding minus the signature.
  roughtime_style-- the TSA batches requests into a Merkle tree (core rules)
                    and signs (root || time) once; each token carries its
                    path to the signed root.
  tls_style      -- models a ServerKeyExchange signature: the client random
                    is the digest, the server random leads with a 4-byte
                    timestamp, and the signature covers both plus a fixed
                    parameter placeholder.

A TSA may run with a skewed clock (``clock_offset``) to exercise the
accountability path; honest TSAs have offset 0.  Every digest a TSA is
asked to sign is appended to its observation log, which tests use to
assert the TSA learns nothing beyond blinded digests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .core import (
    CoreError,
    MerkleProof,
    check_digest,
    h,
    leaf_hash,
    merkle_fold,
    merkle_prove_digests,
    merkle_root_digests,
    proof_index_consistent,
)

BACKEND_RFC3161 = "rfc3161_style"
BACKEND_ROUGHTIME = "roughtime_style"
BACKEND_TLS = "tls_style"

_BACKEND_TAG = {BACKEND_RFC3161: 0, BACKEND_ROUGHTIME: 1, BACKEND_TLS: 2}
_TAG_BACKEND = {v: k for k, v in _BACKEND_TAG.items()}

TLS_PARAMS_PLACEHOLDER = b"\x00" * 8
_TLS_RANDOM_SALT = b"tls-server-random"


class TsaError(ValueError):
    """Raised on malformed TSA inputs."""


@dataclass(frozen=True)
class TsaIdentity:
    tsa_id: bytes
    public_key: bytes

    def __post_init__(self) -> None:
        if not 0 < len(self.tsa_id) <= 32:
            raise TsaError("tsa_id must be 1..32 bytes")
        if len(self.public_key) != 32:
            raise TsaError("ed25519 public key must be 32 bytes")


@dataclass(frozen=True)
class TimestampToken:
    """A TSA-signed (digest, time) pair."""

    backend: str
    digest: bytes
    time: int
    tsa_id: bytes
    signature: bytes
    raw_signed_payload: bytes
    batch_path: Optional[MerkleProof] = None

    def encode(self) -> bytes:
        """Canonical binary encoding; the input to commitment hashing."""
        out = (
            bytes([_BACKEND_TAG[self.backend]])
            + self.digest
            + self.time.to_bytes(8, "big")
            + bytes([len(self.tsa_id)])
            + self.tsa_id
            + len(self.signature).to_bytes(2, "big")
            + self.signature
        )
        if self.backend == BACKEND_ROUGHTIME:
            if self.batch_path is None:
                raise TsaError("roughtime token requires a batch path")
            out += self.batch_path.encode()
        return out

    @classmethod
    def decode(cls, data: bytes) -> "TimestampToken":
        try:
            backend = _TAG_BACKEND[data[0]]
            digest = data[1:33]
            check_digest(digest)
            time = int.from_bytes(data[33:41], "big")
            id_len = data[41]
            off = 42 + id_len
            tsa_id = data[42:off]
            if len(tsa_id) != id_len:
                raise TsaError("truncated tsa_id")
            sig_len = int.from_bytes(data[off : off + 2], "big")
            off += 2
            signature = data[off : off + sig_len]
            if len(signature) != sig_len:
                raise TsaError("truncated signature")
            off += sig_len
            batch_path = None
            if backend == BACKEND_ROUGHTIME:
                batch_path = MerkleProof.decode(data[off:])
            elif off != len(data):
                raise TsaError("trailing bytes in token encoding")
        except (IndexError, CoreError) as exc:
            raise TsaError(f"malformed token encoding: {exc}") from exc
        payload = _signed_payload(backend, digest, time, tsa_id, batch_path)
        return cls(
            backend=backend,
            digest=digest,
            time=time,
            tsa_id=tsa_id,
            signature=signature,
            raw_signed_payload=payload,
            batch_path=batch_path,
        )


def _rfc3161_payload(digest: bytes, time: int, tsa_id: bytes) -> bytes:
    return (
        bytes([_BACKEND_TAG[BACKEND_RFC3161]])
        + digest
        + time.to_bytes(8, "big")
        + bytes([len(tsa_id)])
        + tsa_id
    )


def _roughtime_payload(digest: bytes, time: int, path: Optional[MerkleProof]) -> bytes:
    if path is None:
        raise TsaError("roughtime token requires a batch path")
    root = merkle_fold(digest, path)
    return root + time.to_bytes(8, "big")


def tls_server_random(digest: bytes, time: int) -> bytes:
    """4-byte timestamp followed by 28 deterministic pseudo-random bytes."""
    if not 0 <= time < 2**32:
        raise TsaError("timestamp overflow")
    tail = h(_TLS_RANDOM_SALT + digest + time.to_bytes(8, "big"))[:28]
    return time.to_bytes(4, "big") + tail


def _tls_payload(digest: bytes, time: int) -> bytes:
    return digest + tls_server_random(digest, time) + TLS_PARAMS_PLACEHOLDER


def _signed_payload(backend: str, digest: bytes, time: int, tsa_id: bytes,
                    batch_path: Optional[MerkleProof]) -> bytes:
    if backend == BACKEND_RFC3161:
        return _rfc3161_payload(digest, time, tsa_id)
    if backend == BACKEND_ROUGHTIME:
        return _roughtime_payload(digest, time, batch_path)
    if backend == BACKEND_TLS:
        if not 0 <= time < 2**32:
            # decoded token with an unrepresentable time; keep the bytes
            # unverifiable rather than raising during parse
            return b""
        return _tls_payload(digest, time)
    raise TsaError(f"unknown backend {backend!r}")


def verify_token_report(token: TimestampToken, identity: TsaIdentity) -> Tuple[bool, str]:
    """Full token check; returns (ok, reason code)."""
    if token.tsa_id != identity.tsa_id:
        return False, "tsa_id_mismatch"
    try:
        expected = _signed_payload(
            token.backend, token.digest, token.time, token.tsa_id, token.batch_path
        )
    except TsaError:
        return False, "malformed_token"
    if not expected or token.raw_signed_payload != expected:
        return False, "payload_mismatch"
    if token.batch_path is not None and not proof_index_consistent(token.batch_path):
        return False, "payload_mismatch"
    try:
        Ed25519PublicKey.from_public_bytes(identity.public_key).verify(
            token.signature, token.raw_signed_payload
        )
    except (InvalidSignature, ValueError):
        return False, "bad_signature"
    return True, "ok"


def verify_token(token: TimestampToken, identity: TsaIdentity) -> bool:
    return verify_token_report(token, identity)[0]


class TimestampAuthority:
    """One TSA instance: a signing key, a clock, and an observation log.

    ``step_after_issuances`` applies ``step_delta`` to the clock once the
    given number of tokens has been issued (the skewed-TSA scenario device).
    """

    def __init__(self, tsa_id: bytes, backend: str, key_seed: bytes,
                 clock_offset: int = 0,
                 step_after_issuances: Optional[int] = None,
                 step_delta: int = 0) -> None:
        if backend not in _BACKEND_TAG:
            raise TsaError(f"unknown backend {backend!r}")
        self.tsa_id = bytes(tsa_id)
        self.backend = backend
        self.clock_offset = clock_offset
        self._step_after = step_after_issuances
        self._step_delta = step_delta
        self._issued = 0
        self._key = Ed25519PrivateKey.from_private_bytes(h(b"tsa-key" + key_seed))
        self.observed: List[bytes] = []

    @property
    def identity(self) -> TsaIdentity:
        return TsaIdentity(
            tsa_id=self.tsa_id,
            public_key=self._key.public_key().public_bytes_raw(),
        )

    def step_clock(self, delta: int) -> None:
        self.clock_offset += delta

    def _now(self, now: float) -> int:
        return int(now) + self.clock_offset

    def _bump(self) -> None:
        self._issued += 1
        if self._step_after is not None and self._issued == self._step_after:
            self.step_clock(self._step_delta)
            self._step_after = None

    def _sign(self, payload: bytes) -> bytes:
        return self._key.sign(payload)

    def issue_token(self, digest: bytes, now: float) -> TimestampToken:
        """Timestamp one digest with this TSA's backend."""
        check_digest(digest)
        if self.backend == BACKEND_ROUGHTIME:
            return self.issue_batch([digest], now)[0]
        self.observed.append(bytes(digest))
        time = self._now(now)
        self._bump()
        if self.backend == BACKEND_TLS:
            payload = _tls_payload(digest, time)
        else:
            payload = _rfc3161_payload(digest, time, self.tsa_id)
        return TimestampToken(
            backend=self.backend,
            digest=bytes(digest),
            time=time,
            tsa_id=self.tsa_id,
            signature=self._sign(payload),
            raw_signed_payload=payload,
        )

    def issue_batch(self, digests: Sequence[bytes], now: float) -> List[TimestampToken]:
        """Sign one Merkle root over the batch; one token per digest."""
        if self.backend != BACKEND_ROUGHTIME:
            raise TsaError("batch issuance is a roughtime_style operation")
        if not digests:
            raise TsaError("empty batch")
        for d in digests:
            check_digest(d)
            self.observed.append(bytes(d))
        time = self._now(now)
        self._bump()
        root = merkle_root_digests(digests)
        payload = root + time.to_bytes(8, "big")
        signature = self._sign(payload)
        tokens = []
        for i, digest in enumerate(digests):
            tokens.append(
                TimestampToken(
                    backend=self.backend,
                    digest=bytes(digest),
                    time=time,
                    tsa_id=self.tsa_id,
                    signature=signature,
                    raw_signed_payload=payload,
                    batch_path=merkle_prove_digests(digests, i),
                )
            )
        return tokens


class TrustStore:
    """Static map of trusted TSA identities, loadable from JSON."""

    def __init__(self, identities: Sequence[TsaIdentity] = ()) -> None:
        self._by_id: Dict[bytes, TsaIdentity] = {}
        for ident in identities:
            self.add(ident)

    def add(self, identity: TsaIdentity) -> None:
        if identity.tsa_id in self._by_id:
            raise TsaError("duplicate tsa_id in trust store")
        self._by_id[identity.tsa_id] = identity

    def get(self, tsa_id: bytes) -> Optional[TsaIdentity]:
        return self._by_id.get(tsa_id)

    def __len__(self) -> int:
        return len(self._by_id)

    def to_json(self) -> str:
        mapping = {
            ident.tsa_id.hex(): ident.public_key.hex()
            for ident in self._by_id.values()
        }
        return json.dumps(mapping, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrustStore":
        mapping = json.loads(text)
        store = cls()
        for tsa_id_hex, key_hex in mapping.items():
            store.add(TsaIdentity(bytes.fromhex(tsa_id_hex), bytes.fromhex(key_hex)))
        return store

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "TrustStore":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())
