"""Canonical codec round-trips and message validation."""

import hashlib

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carnot.errors import InvalidInputError
from carnot.messages import (
    AggregatedQc,
    Block,
    NewView,
    Qc,
    Timeout,
    TimeoutQc,
    Vote,
    canonical_encode,
    decode,
    genesis_block,
    genesis_qc,
    make_block,
    new_view_payload,
    timeout_payload,
    validate,
    vote_payload,
)
from carnot.overlay import OverlayParams, form_overlay
from carnot.sigs import AggSignature, HashedTagScheme, Signature

# ---------------------------------------------------------------------------
# strategies

views = st.integers(min_value=0, max_value=2**40)
node_ids = st.integers(min_value=0, max_value=2**32)
hashes = st.binary(min_size=32, max_size=32)
sigs = st.builds(Signature, st.binary(min_size=32, max_size=32))


@st.composite
def agg_sigs(draw):
    k = draw(st.integers(min_value=1, max_value=6))
    signers = tuple(sorted(draw(st.sets(node_ids, min_size=k, max_size=k))))
    tags = tuple(draw(st.binary(min_size=32, max_size=32)) for _ in signers)
    return AggSignature(signers=signers, tags=tags)


qcs = st.builds(
    Qc,
    view=views,
    block=hashes,
    voters=st.tuples(node_ids, node_ids),
    agg_sig=st.one_of(st.none(), agg_sigs()),
)


@st.composite
def agg_qcs(draw):
    k = draw(st.integers(min_value=1, max_value=5))
    return AggregatedQc(
        view=draw(views),
        qc_views=tuple(draw(views) for _ in range(k)),
        senders=tuple(sorted(draw(st.sets(node_ids, min_size=k, max_size=k)))),
        high_qc=draw(qcs),
        agg_sig=draw(agg_sigs()),
    )


@st.composite
def timeout_qcs(draw):
    k = draw(st.integers(min_value=1, max_value=5))
    return TimeoutQc(
        view=draw(views),
        high_qc=draw(qcs),
        senders=tuple(sorted(draw(st.sets(node_ids, min_size=k, max_size=k)))),
        sender_high_qc_views=tuple(draw(views) for _ in range(k)),
        agg_sig=draw(agg_sigs()),
    )


blocks = st.builds(
    make_block,
    view=views,
    qc=qcs,
    agg_qc=st.one_of(st.none(), agg_qcs()),
    txs=st.lists(st.binary(max_size=64), max_size=4).map(tuple),
)

votes = st.builds(
    Vote, view=views, block=hashes, voter=node_ids,
    qc=st.one_of(st.none(), qcs), sig=sigs,
)

timeouts = st.builds(Timeout, view=views, high_qc=qcs, sender=node_ids, sig=sigs)

new_views = st.builds(
    NewView,
    view=views,
    high_qc=qcs,
    sender=node_ids,
    timeout_qc=timeout_qcs(),
    agg_qc=st.one_of(st.none(), agg_qcs()),
    sig=sigs,
)

messages = st.one_of(qcs, agg_qcs().map(lambda a: a), blocks, votes, timeouts,
                     timeout_qcs(), new_views)


# ---------------------------------------------------------------------------
# codec properties


@settings(max_examples=300, deadline=None)
@given(st.one_of(qcs, blocks, votes, timeouts, timeout_qcs(), new_views))
def test_encode_decode_round_trip(obj):
    assert decode(canonical_encode(obj)) == obj


@settings(max_examples=200, deadline=None)
@given(st.one_of(blocks, votes, timeouts), st.one_of(blocks, votes, timeouts))
def test_encoding_injective(a, b):
    if a != b:
        assert canonical_encode(a) != canonical_encode(b)


@settings(max_examples=100, deadline=None)
@given(blocks)
def test_block_id_is_content_hash(block):
    assert block.id == hashlib.sha256(canonical_encode(block)).digest()


def test_decode_rejects_garbage():
    with pytest.raises(InvalidInputError):
        decode(b"\xff\x00\x01")
    with pytest.raises(InvalidInputError):
        decode(b"")
    with pytest.raises(InvalidInputError):
        decode(canonical_encode(genesis_block()) + b"\x00")  # trailing bytes


def test_payload_layouts_disjoint():
    # the three signing payloads can never collide across kinds
    assert vote_payload(5, b"\x01" * 32)[0] != timeout_payload(5, 4)[0]
    assert timeout_payload(5, 4)[0] != new_view_payload(5, 4)[0]
    assert timeout_payload(5, 4) != timeout_payload(5, 3)


def test_genesis_fixed_point():
    gen = genesis_block()
    assert gen.view == 0 and gen.txs == ()
    assert genesis_qc().block == gen.id
    assert genesis_block() == gen  # stable across calls


# ---------------------------------------------------------------------------
# validation against a real overlay + scheme


@pytest.fixture()
def env():
    nodes = list(range(12))
    tree = form_overlay(nodes, OverlayParams(n=4, xi=b"v"))
    scheme = HashedTagScheme(b"vseed", nodes)
    return tree, scheme


def _signed_vote(scheme, voter, view, block_id):
    sig = scheme.sign(scheme.keypair(voter).secret, vote_payload(view, block_id))
    return Vote(view=view, block=block_id, voter=voter, qc=None, sig=sig)


def _leader_qc(tree, scheme, view, block_id):
    cluster = tree.root_cluster()
    need = tree.leader_supermajority_threshold()
    voters = sorted(cluster)[:need]
    pairs = [
        (scheme.sign(scheme.keypair(v).secret, vote_payload(view, block_id)),
         scheme.index_of(v))
        for v in voters
    ]
    agg = scheme.aggregate(pairs)
    return Qc(view=view, block=block_id, voters=agg.signers, agg_sig=agg)


def test_valid_vote_passes(env):
    tree, scheme = env
    vote = _signed_vote(scheme, 3, 2, b"\x05" * 32)
    assert validate(vote, tree, scheme) == []


def test_vote_bad_signature_flagged(env):
    tree, scheme = env
    vote = _signed_vote(scheme, 3, 2, b"\x05" * 32)
    forged = Vote(view=vote.view, block=vote.block, voter=4, qc=None, sig=vote.sig)
    assert any("signature" in v for v in validate(forged, tree, scheme))


def test_valid_leader_qc_passes(env):
    tree, scheme = env
    qc = _leader_qc(tree, scheme, 3, b"\x06" * 32)
    assert validate(qc, tree, scheme) == []


def test_qc_below_threshold_flagged(env):
    tree, scheme = env
    qc = _leader_qc(tree, scheme, 3, b"\x06" * 32)
    short = Qc(view=qc.view, block=qc.block, voters=qc.voters[:2],
               agg_sig=AggSignature(signers=qc.agg_sig.signers[:2],
                                    tags=qc.agg_sig.tags[:2]))
    assert any("threshold" in v for v in validate(short, tree, scheme))


def test_qc_wrong_payload_flagged(env):
    tree, scheme = env
    qc = _leader_qc(tree, scheme, 3, b"\x06" * 32)
    # same signatures claimed for a different block
    moved = Qc(view=qc.view, block=b"\x07" * 32, voters=qc.voters, agg_sig=qc.agg_sig)
    assert any("aggregate signature invalid" in v for v in validate(moved, tree, scheme))


def test_block_tampered_id_flagged(env):
    tree, scheme = env
    qc = _leader_qc(tree, scheme, 3, b"\x06" * 32)
    block = make_block(4, qc)
    bad = Block(view=block.view, qc=block.qc, agg_qc=None, txs=(b"extra",),
                id=block.id)
    assert any("content hash" in v for v in validate(bad, tree, scheme))


def test_genesis_block_validates(env):
    tree, scheme = env
    assert validate(genesis_block(), tree, scheme) == []


def test_timeout_sign_and_validate(env):
    tree, scheme = env
    high = genesis_qc()
    sig = scheme.sign(scheme.keypair(2).secret, timeout_payload(7, high.view))
    msg = Timeout(view=7, high_qc=high, sender=2, sig=sig)
    assert validate(msg, tree, scheme) == []
    wrong = Timeout(view=8, high_qc=high, sender=2, sig=sig)
    assert any("signature" in v for v in validate(wrong, tree, scheme))
