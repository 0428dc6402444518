"""Committee-tree overlay: shuffle, partition shape, navigation, thresholds."""

import json

import pytest

from carnot.errors import InvalidInputError, NotFoundError
from carnot.overlay import (
    CommitteeTree,
    OverlayParams,
    form_overlay,
    leader_for_view,
    next_beacon,
    shuffle,
    tree_queries,
)
from carnot.prng import derive_seed


def test_shuffle_is_permutation_and_deterministic():
    nodes = list(range(50))
    out = shuffle(nodes, b"xi")
    assert sorted(out) == nodes
    assert out == shuffle(nodes, b"xi")
    assert out != shuffle(nodes, b"xi2")


def test_shuffle_ignores_input_order():
    nodes = [9, 3, 7, 1, 5]
    assert shuffle(nodes, b"s") == shuffle(list(reversed(nodes)), b"s")


def test_shuffle_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        shuffle([], b"s")
    with pytest.raises(InvalidInputError):
        shuffle([1, 1, 2], b"s")


def test_shuffle_position_uniformity_chi_square():
    # node 0's landing position across seeds should be uniform over N slots
    from scipy.stats import chisquare

    n = 10
    counts = [0] * n
    for trial in range(5000):
        order = shuffle(list(range(n)), derive_seed("trial", trial))
        counts[order.index(0)] += 1
    assert chisquare(counts).pvalue > 1e-4


def test_partition_shape():
    # N=23, n=4: K=5 committees, r=3 largest-index committees get 5 nodes
    tree = form_overlay(list(range(23)), OverlayParams(n=4, xi=b"p"))
    sizes = [len(c) for c in tree.committees]
    assert tree.k == 5
    assert sizes == [4, 4, 5, 5, 5]
    assert sorted(x for c in tree.committees for x in c) == list(range(23))


def test_single_committee():
    tree = form_overlay(list(range(5)), OverlayParams(n=5, xi=b"p"))
    assert tree.k == 1
    assert tree.children(1) == ()
    assert tree.is_root(1) and tree.is_leaf(1)


def test_committee_size_must_fit():
    with pytest.raises(InvalidInputError):
        form_overlay(list(range(3)), OverlayParams(n=4, xi=b"p"))
    with pytest.raises(InvalidInputError):
        OverlayParams(n=0, xi=b"p")


def test_tree_navigation():
    tree = form_overlay(list(range(70)), OverlayParams(n=10, xi=b"nav"))
    assert tree.k == 7
    q = tree_queries(tree, 1)
    assert q["is_root"] and not q["is_leaf"] and q["children"] == [2, 3]
    assert tree.parent(2) == 1 and tree.parent(3) == 1
    assert tree.children(3) == (6, 7)
    assert tree.is_leaf(4) is True and tree.children(4) == ()  # child 8 > k
    for mu in range(2, 8):
        assert tree.parent(mu) == mu // 2
    for node in range(70):
        mu = tree.committee_of(node)
        assert node in tree.committee(mu)
    with pytest.raises(InvalidInputError):
        tree.committee(8)
    with pytest.raises(NotFoundError):
        tree.committee_of(999)


def test_root_cluster_is_root_plus_children():
    tree = form_overlay(list(range(70)), OverlayParams(n=10, xi=b"nav"))
    cluster = set(tree.root_cluster())
    expected = set(tree.committee(1)) | set(tree.committee(2)) | set(tree.committee(3))
    assert cluster == expected


def test_child_supermajority_thresholds():
    # two children of sizes 3+3: ceil(2*6/3) = 4
    tree = form_overlay(list(range(21)), OverlayParams(n=3, xi=b"t"))
    assert tree.k == 7
    assert tree.child_supermajority_threshold(1) == 4
    # leaves have no children: threshold 0
    assert tree.child_supermajority_threshold(7) == 0


def test_leader_supermajority_threshold():
    # root cluster of 3+3+3 = 9: floor(2*9/3)+1 = 7
    tree = form_overlay(list(range(21)), OverlayParams(n=3, xi=b"t"))
    assert tree.leader_supermajority_threshold() == 7
    # single committee of 4: floor(8/3)+1 = 3
    solo = form_overlay(list(range(4)), OverlayParams(n=4, xi=b"t"))
    assert solo.leader_supermajority_threshold() == 3


def test_json_round_trip():
    tree = form_overlay(list(range(23)), OverlayParams(n=4, xi=b"j"))
    text = tree.to_json()
    json.loads(text)  # valid JSON
    again = CommitteeTree.from_json(text)
    assert again.committees == tree.committees
    assert again.k == tree.k


def test_leader_for_view_deterministic_and_member():
    nodes = list(range(40))
    beacon = b"beacon"
    picks = [leader_for_view(v, beacon, nodes) for v in range(1, 200)]
    assert picks == [leader_for_view(v, beacon, nodes) for v in range(1, 200)]
    assert all(p in nodes for p in picks)
    with pytest.raises(InvalidInputError):
        leader_for_view(0, beacon, nodes)


def test_leader_concentration_chi_square():
    from scipy.stats import chisquare

    nodes = list(range(10))
    counts = [0] * 10
    for view in range(1, 5001):
        counts[leader_for_view(view, b"b", nodes)] += 1
    assert chisquare(counts).pvalue > 1e-4


def test_next_beacon_chains():
    b1 = next_beacon(b"genesis", 1)
    assert next_beacon(b"genesis", 1) == b1
    assert next_beacon(b"genesis", 2) != b1
    assert next_beacon(b1, 2) != b1
