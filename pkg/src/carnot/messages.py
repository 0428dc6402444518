"""Protocol objects and their canonical byte layout.

Every object that is hashed or signed is first serialized with the codec in
this module: a one-byte type tag followed by the fields in declaration order,
integers as 8-byte big-endian, byte strings length-prefixed with a 4-byte
count, optionals behind a presence byte and lists behind a 4-byte count.
The encoding is injective and platform independent; `decode` inverts it.

Block ids are SHA-256 over the canonical encoding of (view, qc, agg_qc, txs).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .errors import InvalidInputError
from .overlay import CommitteeTree, NodeId
from .sigs import AggSignature, HashedTagScheme, Signature

# type tags
_TAG_QC = 0x01
_TAG_BLOCK = 0x02
_TAG_VOTE = 0x03
_TAG_TIMEOUT = 0x04
_TAG_TIMEOUT_QC = 0x05
_TAG_NEW_VIEW = 0x06
_TAG_AGG_QC = 0x07

ZERO_ID = b"\x00" * 32


# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class Qc:
    view: int
    block: bytes
    voters: tuple[int, ...]
    agg_sig: AggSignature | None


@dataclass(frozen=True)
class AggregatedQc:
    view: int
    qc_views: tuple[int, ...]
    senders: tuple[int, ...]
    high_qc: Qc
    agg_sig: AggSignature


@dataclass(frozen=True)
class Block:
    view: int
    qc: Qc
    agg_qc: AggregatedQc | None
    txs: tuple[bytes, ...]
    id: bytes


@dataclass(frozen=True)
class Vote:
    view: int
    block: bytes
    voter: NodeId
    qc: Qc | None
    sig: Signature


@dataclass(frozen=True)
class Timeout:
    view: int
    high_qc: Qc
    sender: NodeId
    sig: Signature


@dataclass(frozen=True)
class TimeoutQc:
    view: int
    high_qc: Qc
    senders: tuple[int, ...]
    # per-sender high-qc views, aligned with `senders`; required to verify the
    # aggregate since each contributor signed (view, own high_qc.view)
    sender_high_qc_views: tuple[int, ...]
    agg_sig: AggSignature


@dataclass(frozen=True)
class NewView:
    view: int
    high_qc: Qc
    sender: NodeId
    timeout_qc: TimeoutQc
    agg_qc: AggregatedQc | None
    sig: Signature


Message = Block | Vote | Timeout | TimeoutQc | NewView


# ---------------------------------------------------------------------------
# codec primitives


class _Writer:
    def __init__(self):
        self.parts: list[bytes] = []

    def u8(self, v: int):
        self.parts.append(v.to_bytes(1, "big"))

    def u64(self, v: int):
        if v < 0:
            raise InvalidInputError("negative integer in encoding")
        self.parts.append(v.to_bytes(8, "big"))

    def blob(self, b: bytes):
        self.parts.append(len(b).to_bytes(4, "big"))
        self.parts.append(b)

    def done(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise InvalidInputError("truncated encoding")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u64(self) -> int:
        return int.from_bytes(self.take(8), "big")

    def blob(self) -> bytes:
        n = int.from_bytes(self.take(4), "big")
        return self.take(n)


def _put_agg_sig(w: _Writer, agg: AggSignature | None):
    if agg is None:
        w.u8(0)
        return
    w.u8(1)
    w.u64(len(agg.signers))
    for idx, tag in zip(agg.signers, agg.tags):
        w.u64(idx)
        w.blob(tag)


def _get_agg_sig(r: _Reader) -> AggSignature | None:
    if r.u8() == 0:
        return None
    n = r.u64()
    signers, tags = [], []
    for _ in range(n):
        signers.append(r.u64())
        tags.append(r.blob())
    return AggSignature(signers=tuple(signers), tags=tuple(tags))


def _put_qc(w: _Writer, qc: Qc):
    w.u8(_TAG_QC)
    w.u64(qc.view)
    w.blob(qc.block)
    w.u64(len(qc.voters))
    for v in qc.voters:
        w.u64(v)
    _put_agg_sig(w, qc.agg_sig)


def _get_qc(r: _Reader) -> Qc:
    if r.u8() != _TAG_QC:
        raise InvalidInputError("expected qc tag")
    view = r.u64()
    block = r.blob()
    voters = tuple(r.u64() for _ in range(r.u64()))
    return Qc(view=view, block=block, voters=voters, agg_sig=_get_agg_sig(r))


def _put_agg_qc(w: _Writer, agg: AggregatedQc | None):
    if agg is None:
        w.u8(0)
        return
    w.u8(1)
    w.u8(_TAG_AGG_QC)
    w.u64(agg.view)
    w.u64(len(agg.qc_views))
    for v in agg.qc_views:
        w.u64(v)
    w.u64(len(agg.senders))
    for s in agg.senders:
        w.u64(s)
    _put_qc(w, agg.high_qc)
    _put_agg_sig(w, agg.agg_sig)


def _get_agg_qc(r: _Reader) -> AggregatedQc | None:
    if r.u8() == 0:
        return None
    if r.u8() != _TAG_AGG_QC:
        raise InvalidInputError("expected aggregated-qc tag")
    view = r.u64()
    qc_views = tuple(r.u64() for _ in range(r.u64()))
    senders = tuple(r.u64() for _ in range(r.u64()))
    high_qc = _get_qc(r)
    agg_sig = _get_agg_sig(r)
    return AggregatedQc(
        view=view, qc_views=qc_views, senders=senders, high_qc=high_qc, agg_sig=agg_sig
    )


def _put_sig(w: _Writer, sig: Signature):
    w.blob(sig.bytes_)


def _get_sig(r: _Reader) -> Signature:
    return Signature(r.blob())


def _put_timeout_qc(w: _Writer, tqc: TimeoutQc):
    w.u8(_TAG_TIMEOUT_QC)
    w.u64(tqc.view)
    _put_qc(w, tqc.high_qc)
    w.u64(len(tqc.senders))
    for s in tqc.senders:
        w.u64(s)
    w.u64(len(tqc.sender_high_qc_views))
    for v in tqc.sender_high_qc_views:
        w.u64(v)
    _put_agg_sig(w, tqc.agg_sig)


def _get_timeout_qc(r: _Reader) -> TimeoutQc:
    if r.u8() != _TAG_TIMEOUT_QC:
        raise InvalidInputError("expected timeout-qc tag")
    view = r.u64()
    high_qc = _get_qc(r)
    senders = tuple(r.u64() for _ in range(r.u64()))
    views = tuple(r.u64() for _ in range(r.u64()))
    return TimeoutQc(
        view=view,
        high_qc=high_qc,
        senders=senders,
        sender_high_qc_views=views,
        agg_sig=_get_agg_sig(r),
    )


# ---------------------------------------------------------------------------
# public codec


def block_body_encoding(view: int, qc: Qc, agg_qc: AggregatedQc | None,
                        txs: tuple[bytes, ...]) -> bytes:
    w = _Writer()
    w.u8(_TAG_BLOCK)
    w.u64(view)
    _put_qc(w, qc)
    _put_agg_qc(w, agg_qc)
    w.u64(len(txs))
    for tx in txs:
        w.blob(tx)
    return w.done()


def make_block(view: int, qc: Qc, agg_qc: AggregatedQc | None = None,
               txs: tuple[bytes, ...] = ()) -> Block:
    body = block_body_encoding(view, qc, agg_qc, txs)
    return Block(view=view, qc=qc, agg_qc=agg_qc, txs=txs,
                 id=hashlib.sha256(body).digest())


def canonical_encode(obj) -> bytes:
    w = _Writer()
    if isinstance(obj, Qc):
        _put_qc(w, obj)
    elif isinstance(obj, AggregatedQc):
        _put_agg_qc(w, obj)
    elif isinstance(obj, TimeoutQc):
        _put_timeout_qc(w, obj)
    elif isinstance(obj, Block):
        return block_body_encoding(obj.view, obj.qc, obj.agg_qc, obj.txs)
    elif isinstance(obj, Vote):
        w.u8(_TAG_VOTE)
        w.u64(obj.view)
        w.blob(obj.block)
        w.u64(obj.voter)
        if obj.qc is None:
            w.u8(0)
        else:
            w.u8(1)
            _put_qc(w, obj.qc)
        _put_sig(w, obj.sig)
    elif isinstance(obj, Timeout):
        w.u8(_TAG_TIMEOUT)
        w.u64(obj.view)
        _put_qc(w, obj.high_qc)
        w.u64(obj.sender)
        _put_sig(w, obj.sig)
    elif isinstance(obj, NewView):
        w.u8(_TAG_NEW_VIEW)
        w.u64(obj.view)
        _put_qc(w, obj.high_qc)
        w.u64(obj.sender)
        _put_timeout_qc(w, obj.timeout_qc)
        _put_agg_qc(w, obj.agg_qc)
        _put_sig(w, obj.sig)
    else:
        raise InvalidInputError(f"cannot encode {type(obj).__name__}")
    return w.done()


def decode(data: bytes):
    r = _Reader(data)
    tag = data[0] if data else None
    if tag == _TAG_QC:
        obj = _get_qc(r)
    elif tag == _TAG_BLOCK:
        r.u8()
        view = r.u64()
        qc = _get_qc(r)
        agg_qc = _get_agg_qc(r)
        txs = tuple(r.blob() for _ in range(r.u64()))
        obj = make_block(view, qc, agg_qc, txs)
    elif tag == _TAG_VOTE:
        r.u8()
        view = r.u64()
        block = r.blob()
        voter = r.u64()
        qc = _get_qc(r) if r.u8() else None
        obj = Vote(view=view, block=block, voter=voter, qc=qc, sig=_get_sig(r))
    elif tag == _TAG_TIMEOUT:
        r.u8()
        view = r.u64()
        high_qc = _get_qc(r)
        sender = r.u64()
        obj = Timeout(view=view, high_qc=high_qc, sender=sender, sig=_get_sig(r))
    elif tag == _TAG_TIMEOUT_QC:
        obj = _get_timeout_qc(r)
    elif tag == _TAG_NEW_VIEW:
        r.u8()
        view = r.u64()
        high_qc = _get_qc(r)
        sender = r.u64()
        tqc = _get_timeout_qc(r)
        agg_qc = _get_agg_qc(r)
        obj = NewView(view=view, high_qc=high_qc, sender=sender, timeout_qc=tqc,
                      agg_qc=agg_qc, sig=_get_sig(r))
    else:
        raise InvalidInputError("unknown type tag")
    if r.pos != len(data):
        raise InvalidInputError("trailing bytes after encoding")
    return obj


# ---------------------------------------------------------------------------
# signing payload layouts


def vote_payload(view: int, block_id: bytes) -> bytes:
    w = _Writer()
    w.u8(0xA1)
    w.u64(view)
    w.blob(block_id)
    return w.done()


def timeout_payload(view: int, high_qc_view: int) -> bytes:
    w = _Writer()
    w.u8(0xA2)
    w.u64(view)
    w.u64(high_qc_view)
    return w.done()


def new_view_payload(view: int, high_qc_view: int) -> bytes:
    w = _Writer()
    w.u8(0xA3)
    w.u64(view)
    w.u64(high_qc_view)
    return w.done()


# ---------------------------------------------------------------------------
# genesis


def genesis_block() -> Block:
    return make_block(view=0, qc=Qc(view=0, block=ZERO_ID, voters=(), agg_sig=None))


def genesis_qc() -> Qc:
    """Self-certifying attestation of the genesis block (view 0, no voters)."""
    return Qc(view=0, block=genesis_block().id, voters=(), agg_sig=None)


# ---------------------------------------------------------------------------
# validation


def _is_genesis_qc(qc: Qc) -> bool:
    return qc.view == 0 and not qc.voters and qc.agg_sig is None


def _validate_qc(qc: Qc, tree: CommitteeTree, scheme: HashedTagScheme,
                 level: str, out: list[str], prefix: str = "qc") -> None:
    if _is_genesis_qc(qc):
        return
    if level == "leader":
        threshold = tree.leader_supermajority_threshold()
    else:
        threshold = tree.child_supermajority_threshold(1)
    if len(qc.voters) < threshold:
        out.append(f"{prefix}: voter count {len(qc.voters)} below threshold {threshold}")
    if qc.agg_sig is None:
        out.append(f"{prefix}: missing aggregate signature")
        return
    if tuple(qc.agg_sig.signers) != tuple(sorted(qc.voters)):
        out.append(f"{prefix}: aggregate signer set differs from voters")
        return
    payloads = {idx: vote_payload(qc.view, qc.block) for idx in qc.voters}
    if not scheme.verify_aggregate(payloads, qc.agg_sig):
        out.append(f"{prefix}: aggregate signature invalid")


def _validate_agg_qc(agg: AggregatedQc, tree: CommitteeTree,
                     scheme: HashedTagScheme, out: list[str],
                     level: str = "leader") -> None:
    if agg.qc_views and agg.high_qc.view != max(agg.qc_views):
        out.append("agg_qc: high_qc.view is not the max of qc_views")
    if level == "leader":
        threshold = tree.leader_supermajority_threshold()
    else:
        threshold = tree.child_supermajority_threshold(1)
    if len(agg.senders) < threshold:
        out.append(f"agg_qc: sender count {len(agg.senders)} below threshold {threshold}")
    if len(agg.senders) != len(agg.qc_views):
        out.append("agg_qc: senders and qc_views length mismatch")
        return
    payloads = {
        idx: new_view_payload(agg.view, qv)
        for idx, qv in zip(agg.senders, agg.qc_views)
    }
    if not scheme.verify_aggregate(payloads, agg.agg_sig):
        out.append("agg_qc: aggregate signature invalid")


def validate(obj, tree: CommitteeTree, scheme: HashedTagScheme) -> list[str]:
    """Collect every invariant violation on `obj` (empty list means ok)."""
    out: list[str] = []
    if isinstance(obj, Qc):
        _validate_qc(obj, tree, scheme, "leader", out)
    elif isinstance(obj, Block):
        body = block_body_encoding(obj.view, obj.qc, obj.agg_qc, obj.txs)
        if hashlib.sha256(body).digest() != obj.id:
            out.append("block: id does not match content hash")
        if obj.view == 0:
            return out
        _validate_qc(obj.qc, tree, scheme, "leader", out, prefix="block.qc")
        if obj.agg_qc is not None:
            _validate_agg_qc(obj.agg_qc, tree, scheme, out)
            if obj.qc != obj.agg_qc.high_qc:
                out.append("block: qc differs from agg_qc.high_qc")
    elif isinstance(obj, Vote):
        kp = scheme.keypair(obj.voter)
        if not scheme.verify(kp.public, vote_payload(obj.view, obj.block), obj.sig):
            out.append("vote: signature invalid")
        if obj.qc is not None:
            _validate_qc(obj.qc, tree, scheme, "child", out, prefix="vote.qc")
    elif isinstance(obj, Timeout):
        kp = scheme.keypair(obj.sender)
        payload = timeout_payload(obj.view, obj.high_qc.view)
        if not scheme.verify(kp.public, payload, obj.sig):
            out.append("timeout: signature invalid")
    elif isinstance(obj, TimeoutQc):
        threshold = tree.leader_supermajority_threshold()
        if len(obj.senders) < threshold:
            out.append(
                f"timeout_qc: sender count {len(obj.senders)} below threshold {threshold}"
            )
        if len(obj.senders) != len(obj.sender_high_qc_views):
            out.append("timeout_qc: senders and high-qc views length mismatch")
        else:
            if obj.sender_high_qc_views and obj.high_qc.view != max(
                obj.sender_high_qc_views
            ):
                out.append("timeout_qc: high_qc.view is not the contributors' max")
            payloads = {
                idx: timeout_payload(obj.view, qv)
                for idx, qv in zip(obj.senders, obj.sender_high_qc_views)
            }
            if not scheme.verify_aggregate(payloads, obj.agg_sig):
                out.append("timeout_qc: aggregate signature invalid")
    elif isinstance(obj, NewView):
        if obj.view != obj.timeout_qc.view + 1:
            out.append("new_view: view is not timeout_qc.view + 1")
        kp = scheme.keypair(obj.sender)
        payload = new_view_payload(obj.view, obj.high_qc.view)
        if not scheme.verify(kp.public, payload, obj.sig):
            out.append("new_view: signature invalid")
        if obj.agg_qc is not None:
            # a root member attaches an aggregate over its child committees,
            # which only reaches the child-level threshold
            _validate_agg_qc(obj.agg_qc, tree, scheme, out, level="child")
    elif isinstance(obj, AggregatedQc):
        _validate_agg_qc(obj, tree, scheme, out)
    else:
        out.append(f"unknown object type {type(obj).__name__}")
    return out


# ---------------------------------------------------------------------------
# JSON mirror (traces / debugging)


def to_json_dict(obj) -> dict:
    if obj is None:
        return None
    if isinstance(obj, Qc):
        return {
            "type": "qc",
            "view": obj.view,
            "block": obj.block.hex(),
            "voters": list(obj.voters),
        }
    if isinstance(obj, Block):
        return {
            "type": "block",
            "view": obj.view,
            "id": obj.id.hex(),
            "qc": to_json_dict(obj.qc),
            "agg_qc": to_json_dict(obj.agg_qc),
            "n_txs": len(obj.txs),
        }
    if isinstance(obj, Vote):
        return {
            "type": "vote",
            "view": obj.view,
            "block": obj.block.hex(),
            "voter": obj.voter,
            "has_qc": obj.qc is not None,
        }
    if isinstance(obj, Timeout):
        return {
            "type": "timeout",
            "view": obj.view,
            "sender": obj.sender,
            "high_qc_view": obj.high_qc.view,
        }
    if isinstance(obj, TimeoutQc):
        return {
            "type": "timeout_qc",
            "view": obj.view,
            "high_qc_view": obj.high_qc.view,
            "senders": list(obj.senders),
        }
    if isinstance(obj, NewView):
        return {
            "type": "new_view",
            "view": obj.view,
            "sender": obj.sender,
            "high_qc_view": obj.high_qc.view,
            "has_agg_qc": obj.agg_qc is not None,
        }
    if isinstance(obj, AggregatedQc):
        return {
            "type": "agg_qc",
            "view": obj.view,
            "qc_views": list(obj.qc_views),
            "senders": list(obj.senders),
            "high_qc_view": obj.high_qc.view,
        }
    raise InvalidInputError(f"cannot jsonify {type(obj).__name__}")


def to_json(obj) -> str:
    return json.dumps(to_json_dict(obj), sort_keys=True)
