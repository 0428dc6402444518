"""Committee-tree overlay: construction, navigation and thresholds.

A node set is shuffled deterministically (Fisher-Yates driven by the seeded
SHA-256 counter generator) and cut into K = floor(N / n) committees.  The
remainder r = N mod n is absorbed by giving one extra node to each of the r
highest-indexed committees.  Committee indices form an implicit binary tree:
committee 1 is the root and committee mu has children 2*mu and 2*mu + 1
(when those indices exist).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .errors import InvalidInputError, NotFoundError
from .prng import Sha256Counter, derive_seed

NodeId = int


@dataclass(frozen=True)
class OverlayParams:
    """Inputs of overlay formation: committee size and shuffle seed."""

    n: int
    xi: bytes

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInputError("committee size n must be >= 1")
        if not isinstance(self.xi, bytes):
            raise InvalidInputError("xi must be bytes")


def shuffle(nodes: list[NodeId], xi: bytes) -> list[NodeId]:
    """Deterministic Fisher-Yates permutation of `nodes` keyed by `xi`.

    Nodes are sorted first so the result is a pure function of the node *set*
    and the seed, independent of input order.
    """
    if not nodes:
        raise InvalidInputError("cannot shuffle an empty node list")
    if len(set(nodes)) != len(nodes):
        raise InvalidInputError("node ids must be distinct")
    out = sorted(nodes)
    rng = Sha256Counter(xi)
    for i in range(len(out) - 1, 0, -1):
        j = rng.randbelow(i + 1)
        out[i], out[j] = out[j], out[i]
    return out


@dataclass(frozen=True)
class CommitteeTree:
    """Binary tree of committees with 1-based index arithmetic."""

    committees: tuple[tuple[NodeId, ...], ...]
    k: int
    n: int
    r: int
    seed: bytes
    _index: dict[NodeId, int] = field(
        default=None, repr=False, compare=False, hash=False
    )

    def __post_init__(self):
        if self._index is None:
            idx = {}
            for mu, comm in enumerate(self.committees, start=1):
                for node in comm:
                    idx[node] = mu
            object.__setattr__(self, "_index", idx)

    # -- navigation ---------------------------------------------------------

    def _check_index(self, mu: int) -> None:
        if not 1 <= mu <= self.k:
            raise InvalidInputError(f"committee index {mu} outside [1, {self.k}]")

    def parent(self, mu: int) -> int | None:
        self._check_index(mu)
        return None if mu == 1 else mu // 2

    def children(self, mu: int) -> tuple[int, ...]:
        self._check_index(mu)
        return tuple(c for c in (2 * mu, 2 * mu + 1) if c <= self.k)

    def is_leaf(self, mu: int) -> bool:
        self._check_index(mu)
        return 2 * mu > self.k

    def is_root(self, mu: int) -> bool:
        self._check_index(mu)
        return mu == 1

    def committee(self, mu: int) -> tuple[NodeId, ...]:
        self._check_index(mu)
        return self.committees[mu - 1]

    def committee_of(self, node: NodeId) -> int:
        try:
            return self._index[node]
        except KeyError:
            raise NotFoundError(f"node {node!r} is not in the overlay") from None

    def all_nodes(self) -> tuple[NodeId, ...]:
        return tuple(sorted(self._index))

    # -- membership helpers used by the engine -------------------------------

    def root_committee(self) -> tuple[NodeId, ...]:
        return self.committees[0]

    def root_cluster(self) -> tuple[NodeId, ...]:
        """Members of the root committee and its direct children."""
        members = list(self.committees[0])
        for c in self.children(1):
            members.extend(self.committee(c))
        return tuple(members)

    def parent_committee_of(self, node: NodeId) -> tuple[NodeId, ...]:
        mu = self.committee_of(node)
        p = self.parent(mu)
        return () if p is None else self.committee(p)

    def child_committees_of(self, node: NodeId) -> tuple[NodeId, ...]:
        mu = self.committee_of(node)
        members: list[NodeId] = []
        for c in self.children(mu):
            members.extend(self.committee(c))
        return tuple(members)

    # -- thresholds ----------------------------------------------------------

    def child_supermajority_threshold(self, mu: int) -> int:
        """Votes required from the two child committees of `mu` combined.

        "At least two thirds": ceil(2*S/3) over existing children; 0 for a
        leaf, whose expected vote set is empty.
        """
        s = sum(len(self.committee(c)) for c in self.children(mu))
        return -((-2 * s) // 3)  # ceil(2s/3)

    def leader_supermajority_threshold(self) -> int:
        """Strictly more than two thirds of root committee plus its children."""
        s = len(self.committees[0]) + sum(
            len(self.committee(c)) for c in self.children(1)
        )
        return (2 * s) // 3 + 1

    # -- serialization -------------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "k": self.k,
            "n": self.n,
            "r": self.r,
            "xi_hex": self.seed.hex(),
            "committees": [list(c) for c in self.committees],
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CommitteeTree":
        doc = json.loads(text)
        return cls(
            committees=tuple(tuple(c) for c in doc["committees"]),
            k=doc["k"],
            n=doc["n"],
            r=doc["r"],
            seed=bytes.fromhex(doc["xi_hex"]),
        )


def form_overlay(nodes: list[NodeId], params: OverlayParams) -> CommitteeTree:
    """Partition `nodes` into a committee tree per the shuffle-and-cut rule.

    K = floor(N / n) committees; the last r = N mod n committees (highest
    indices) receive n + 1 nodes each.
    """
    n_nodes = len(nodes)
    if params.n > n_nodes:
        raise InvalidInputError(
            f"committee size {params.n} exceeds node count {n_nodes}"
        )
    k = n_nodes // params.n
    r = n_nodes % params.n
    order = shuffle(list(nodes), params.xi)
    committees: list[tuple[NodeId, ...]] = [()] * k
    pos = 0
    # Assignment walks mu = K down to 1, handing n+1 nodes to the first r
    # committees visited (i.e. the r highest indices).
    rem = r
    for mu in range(k, 0, -1):
        size = params.n + 1 if rem > 0 else params.n
        rem = max(rem - 1, 0)
        committees[mu - 1] = tuple(order[pos : pos + size])
        pos += size
    assert pos == n_nodes
    return CommitteeTree(
        committees=tuple(committees), k=k, n=params.n, r=r, seed=params.xi
    )


def tree_queries(tree: CommitteeTree, mu: int) -> dict:
    """Bundle of navigation answers for one committee index."""
    return {
        "parent": tree.parent(mu),
        "children": list(tree.children(mu)),
        "is_leaf": tree.is_leaf(mu),
        "is_root": tree.is_root(mu),
    }


def leader_for_view(view: int, beacon: bytes, nodes: list[NodeId]) -> NodeId:
    """Pseudo-random leader choice keyed by (beacon, view)."""
    if view < 1:
        raise InvalidInputError("view must be >= 1")
    if not nodes:
        raise InvalidInputError("node set is empty")
    ordered = sorted(nodes)
    digest = hashlib.sha256(derive_seed(beacon, "leader", view)).digest()
    return ordered[int.from_bytes(digest, "big") % len(ordered)]


def next_beacon(prev: bytes, view: int) -> bytes:
    """Stub beacon chain: each entry hashes the previous seed and the view."""
    return derive_seed(prev, "beacon", view)
