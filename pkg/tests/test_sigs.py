"""Pluggable signature scheme: single tags, aggregates, tampering."""

import pytest

from carnot.errors import InvalidInputError
from carnot.sigs import HashedTagScheme, Signature


@pytest.fixture()
def scheme():
    return HashedTagScheme(b"seed", list(range(10)))


def test_keypairs_deterministic_and_distinct(scheme):
    again = HashedTagScheme(b"seed", list(range(10)))
    publics = {scheme.keypair(i).public for i in range(10)}
    assert len(publics) == 10
    assert all(scheme.keypair(i) == again.keypair(i) for i in range(10))
    other = HashedTagScheme(b"other", list(range(10)))
    assert other.keypair(0) != scheme.keypair(0)


def test_index_owner_round_trip(scheme):
    for owner in range(10):
        assert scheme.owner_of(scheme.index_of(owner)) == owner


def test_sign_verify(scheme):
    kp = scheme.keypair(3)
    sig = scheme.sign(kp.secret, b"payload")
    assert scheme.verify(kp.public, b"payload", sig)
    assert not scheme.verify(kp.public, b"other", sig)
    assert not scheme.verify(scheme.keypair(4).public, b"payload", sig)
    assert not scheme.verify(b"unknown-key", b"payload", sig)


def test_empty_payload_rejected(scheme):
    with pytest.raises(InvalidInputError):
        scheme.sign(scheme.keypair(0).secret, b"")


def test_aggregate_sorts_signers(scheme):
    pairs = []
    for owner in (7, 2, 5):
        idx = scheme.index_of(owner)
        pairs.append((scheme.sign(scheme.keypair(owner).secret, b"m"), idx))
    agg = scheme.aggregate(pairs)
    assert list(agg.signers) == sorted(agg.signers)
    assert len(agg.tags) == 3


def test_aggregate_rejects_duplicates(scheme):
    sig = scheme.sign(scheme.keypair(1).secret, b"m")
    with pytest.raises(InvalidInputError):
        scheme.aggregate([(sig, 1), (sig, 1)])
    with pytest.raises(InvalidInputError):
        scheme.aggregate([])


def test_verify_aggregate_same_payload(scheme):
    pairs = [
        (scheme.sign(scheme.keypair(o).secret, b"m"), scheme.index_of(o))
        for o in range(6)
    ]
    agg = scheme.aggregate(pairs)
    payloads = {idx: b"m" for _, idx in pairs}
    assert scheme.verify_aggregate(payloads, agg)


def test_verify_aggregate_distinct_payloads(scheme):
    # aggregated new_view tags can each cover a different payload
    pairs = []
    payloads = {}
    for o in range(4):
        idx = scheme.index_of(o)
        payloads[idx] = b"payload-%d" % o
        pairs.append((scheme.sign(scheme.keypair(o).secret, payloads[idx]), idx))
    agg = scheme.aggregate(pairs)
    assert scheme.verify_aggregate(payloads, agg)
    wrong = dict(payloads)
    wrong[0] = b"forged"
    assert not scheme.verify_aggregate(wrong, agg)


def test_verify_aggregate_signer_set_must_match(scheme):
    pairs = [
        (scheme.sign(scheme.keypair(o).secret, b"m"), scheme.index_of(o))
        for o in range(3)
    ]
    agg = scheme.aggregate(pairs)
    assert not scheme.verify_aggregate({0: b"m", 1: b"m"}, agg)
    assert not scheme.verify_aggregate({0: b"m", 1: b"m", 2: b"m", 3: b"m"}, agg)


def test_tampered_tag_fails(scheme):
    pairs = [
        (scheme.sign(scheme.keypair(o).secret, b"m"), scheme.index_of(o))
        for o in range(3)
    ]
    agg = scheme.aggregate(pairs)
    bad = type(agg)(signers=agg.signers, tags=(b"\x00" * 32,) + agg.tags[1:])
    assert not scheme.verify_aggregate({i: b"m" for i in agg.signers}, bad)


def test_forged_signature_fails(scheme):
    kp = scheme.keypair(0)
    assert not scheme.verify(kp.public, b"m", Signature(b"\x00" * 32))
