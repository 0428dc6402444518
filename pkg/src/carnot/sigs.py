"""Pluggable signature scheme with a deterministic keyed-hash test scheme.

The protocol only needs four verbs: sign, verify, aggregate and
verify_aggregate.  Production curves (BLS, EdDSA, ...) can implement the same
interface; the shipped :class:`HashedTagScheme` derives every key pair from a
scenario seed and represents an aggregate as the canonical multiset of
per-signer tags, so aggregate soundness is exhaustively checkable.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass
from typing import Protocol

from .errors import InvalidInputError
from .overlay import NodeId
from .prng import derive_seed


@dataclass(frozen=True)
class KeyPair:
    public: bytes
    secret: bytes
    owner: NodeId


@dataclass(frozen=True)
class Signature:
    bytes_: bytes

    def hex(self) -> str:
        return self.bytes_.hex()


@dataclass(frozen=True)
class AggSignature:
    """Aggregate carrying one tag per signer, sorted by signer index."""

    signers: tuple[int, ...]
    tags: tuple[bytes, ...]

    def popcount(self) -> int:
        return len(self.signers)

    def signer_bits_hex(self, size: int) -> str:
        """Bit array over `size` node indices, one bit per signer, as hex."""
        if self.signers and max(self.signers) >= size:
            raise InvalidInputError("signer index outside bit array")
        bits = 0
        for s in self.signers:
            bits |= 1 << s
        return bits.to_bytes((size + 7) // 8, "big").hex()


class SignatureScheme(Protocol):
    def keypair(self, owner: NodeId) -> KeyPair: ...

    def sign(self, secret: bytes, payload: bytes) -> Signature: ...

    def verify(self, public: bytes, payload: bytes, sig: Signature) -> bool: ...

    def aggregate(self, sigs: list[tuple[Signature, int]]) -> AggSignature: ...

    def verify_aggregate(
        self, payloads: dict[int, bytes], agg: AggSignature
    ) -> bool: ...


class HashedTagScheme:
    """Test scheme: tag = HMAC-SHA256(secret, payload).

    Key pairs derive deterministically from (scenario seed, owner id).  The
    scheme keeps a signer-index registry so verification can recompute tags;
    this is fine for simulation and property tests, not for production.
    """

    # soft cap on memo entries; verification results are pure so eviction is
    # only a speed concern
    _CACHE_LIMIT = 1 << 18

    def __init__(self, scenario_seed: bytes, nodes: list[NodeId]):
        self._nodes = sorted(nodes)
        self._by_index: dict[int, KeyPair] = {}
        self._by_public: dict[bytes, KeyPair] = {}
        self._by_owner: dict[NodeId, tuple[int, KeyPair]] = {}
        self._verify_memo: dict[tuple, bool] = {}
        self._agg_memo: dict[bytes, bool] = {}
        for idx, owner in enumerate(self._nodes):
            secret = derive_seed(scenario_seed, "secret", idx)
            public = derive_seed(secret, "public")
            kp = KeyPair(public=public, secret=secret, owner=owner)
            self._by_index[idx] = kp
            self._by_public[public] = kp
            self._by_owner[owner] = (idx, kp)

    # -- key access -----------------------------------------------------------

    def keypair(self, owner: NodeId) -> KeyPair:
        return self._by_owner[owner][1]

    def index_of(self, owner: NodeId) -> int:
        return self._by_owner[owner][0]

    def owner_of(self, index: int) -> NodeId:
        return self._by_index[index].owner

    # -- single signatures ------------------------------------------------------

    def sign(self, secret: bytes, payload: bytes) -> Signature:
        if not payload:
            raise InvalidInputError("payload must be non-empty")
        return Signature(hmac.new(secret, payload, hashlib.sha256).digest())

    def verify(self, public: bytes, payload: bytes, sig: Signature) -> bool:
        kp = self._by_public.get(public)
        if kp is None or not payload:
            return False
        key = (public, payload, sig.bytes_)
        hit = self._verify_memo.get(key)
        if hit is not None:
            return hit
        expect = hmac.new(kp.secret, payload, hashlib.sha256).digest()
        ok = hmac.compare_digest(expect, sig.bytes_)
        if len(self._verify_memo) >= self._CACHE_LIMIT:
            self._verify_memo.clear()
        self._verify_memo[key] = ok
        return ok

    # -- aggregates --------------------------------------------------------------

    def aggregate(self, sigs: list[tuple[Signature, int]]) -> AggSignature:
        if not sigs:
            raise InvalidInputError("cannot aggregate an empty signature list")
        indices = [idx for _, idx in sigs]
        if len(set(indices)) != len(indices):
            raise InvalidInputError("duplicate signer index in aggregate")
        ordered = sorted(sigs, key=lambda pair: pair[1])
        return AggSignature(
            signers=tuple(idx for _, idx in ordered),
            tags=tuple(sig.bytes_ for sig, _ in ordered),
        )

    def verify_aggregate(self, payloads: dict[int, bytes], agg: AggSignature) -> bool:
        """Check each claimed signer individually signed its claimed payload.

        `payloads` maps signer index to the payload that signer covered;
        distinct payloads per signer are allowed (needed when aggregating
        new_view messages that carry different high-qc views).
        """
        if set(payloads) != set(agg.signers):
            return False
        h = hashlib.sha256()
        for idx, tag in zip(agg.signers, agg.tags):
            h.update(idx.to_bytes(8, "big"))
            h.update(tag)
            p = payloads[idx]
            h.update(len(p).to_bytes(4, "big"))
            h.update(p)
        key = h.digest()
        hit = self._agg_memo.get(key)
        if hit is not None:
            return hit
        ok = True
        for idx, tag in zip(agg.signers, agg.tags):
            kp = self._by_index.get(idx)
            if kp is None:
                ok = False
                break
            expect = hmac.new(kp.secret, payloads[idx], hashlib.sha256).digest()
            if not hmac.compare_digest(expect, tag):
                ok = False
                break
        if len(self._agg_memo) >= self._CACHE_LIMIT:
            self._agg_memo.clear()
        self._agg_memo[key] = ok
        return ok

    def merge_aggregates(self, parts: list[AggSignature]) -> AggSignature:
        """Aggregate-of-aggregates over disjoint signer sets."""
        pairs: list[tuple[Signature, int]] = []
        for part in parts:
            pairs.extend(
                (Signature(tag), idx) for idx, tag in zip(part.signers, part.tags)
            )
        return self.aggregate(pairs)
