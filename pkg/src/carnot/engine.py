"""Per-node consensus state machine.

A :class:`CarnotNode` is a pure state machine: the transport (simulator or a
real network) feeds it delivered messages and timer expirations, and every
handler returns an :class:`EngineOutput` listing the messages to send, the
blocks newly committed and an optional view change.  Nothing here touches a
clock or a socket.

View bookkeeping: `current_view` is the largest of `local_high_qc.view + 1`,
`highest_voted_view` and `last_view_timeout_qc.view + 1`.  Advancing on the
high QC (rather than on the act of voting) keeps nodes that saw a proposal but
could not vote on it in the same view as nodes that voted, so timeout quorums
for a failed view can always form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

from .errors import InvalidInputError
from .messages import (
    AggregatedQc,
    Block,
    NewView,
    Qc,
    Timeout,
    TimeoutQc,
    Vote,
    genesis_block,
    genesis_qc,
    make_block,
    new_view_payload,
    timeout_payload,
    validate,
    vote_payload,
)
from .overlay import CommitteeTree, NodeId, OverlayParams, form_overlay, leader_for_view
from .prng import derive_seed
from .sigs import HashedTagScheme


@lru_cache(maxsize=256)
def _overlay_for(nodes: tuple[NodeId, ...], n: int, xi: bytes) -> CommitteeTree:
    # Every node reseeding on the same timeout ends up with the same tree;
    # memoizing saves recomputing one shuffle per node.
    return form_overlay(list(nodes), OverlayParams(n=n, xi=xi))

BROADCAST = "broadcast"

# how many views behind current_view buffered state is kept before pruning
_PRUNE_LAG = 4


@dataclass
class EngineOutput:
    """Result of one state transition."""

    outbound: list[tuple[object, tuple[NodeId, ...]]] = field(default_factory=list)
    commits: list[bytes] = field(default_factory=list)
    view_change: int | None = None
    events: list[dict] = field(default_factory=list)

    def merge(self, other: "EngineOutput") -> None:
        self.outbound.extend(other.outbound)
        self.commits.extend(other.commits)
        if other.view_change is not None:
            self.view_change = other.view_change
        self.events.extend(other.events)


class CarnotNode:
    """One validator: overlay position, block tree and voting state."""

    def __init__(
        self,
        node_id: NodeId,
        nodes: list[NodeId],
        committee_size: int,
        scheme: HashedTagScheme,
        beacon: bytes,
        overlay_seed: bytes,
    ):
        self.id = node_id
        self.nodes = sorted(nodes)
        self.n = committee_size
        self.scheme = scheme
        self.beacon = beacon
        self.overlay_seed = overlay_seed
        self.tree: CommitteeTree = _overlay_for(
            tuple(self.nodes), committee_size, overlay_seed
        )
        self.my_committee = self.tree.committee_of(node_id)

        gen = genesis_block()
        self.genesis_id = gen.id
        self.highest_voted_view = 0
        self.local_high_qc: Qc = genesis_qc()
        self.last_view_timeout_qc: TimeoutQc | None = None
        self.current_view = 1
        self.safe_blocks: dict[bytes, Block] = {gen.id: gen}
        self.committed: list[bytes] = [gen.id]
        self.committed_set: set[bytes] = {gen.id}

        # accumulators; dict insertion order doubles as arrival order
        self.pending_votes: dict[tuple[int, bytes], dict[NodeId, Vote]] = {}
        # distinct child-committee voters per (view, block): lets vote
        # ingestion skip the quorum scan until the threshold is reachable
        self.child_vote_count: dict[tuple[int, bytes], int] = {}
        self._children_cache: set[NodeId] | None = None
        self.pending_timeouts: dict[int, dict[NodeId, Timeout]] = {}
        self.pending_new_views: dict[int, dict[NodeId, NewView]] = {}

        self.orphans: dict[bytes, list[Block]] = {}
        self.orphan_count = 0
        self.orphan_limit = 1024

        self.vote_relay_views: set[int] = set()
        self.nv_relay_views: set[int] = set()
        self.forwarded_votes: set[tuple[int, bytes, NodeId]] = set()
        self.forwarded_nvs: set[tuple[int, NodeId]] = set()
        self.proposed_views: set[int] = set()
        self.built_tqc_views: set[int] = set()
        self.timed_out_views: set[int] = set()
        self.emitted_nv_views: set[int] = set()
        self.last_timeout_msg: Timeout | None = None
        self._leader_cache: dict[int, NodeId] = {}

        self.verifications = 0
        self.messages_sent = 0

    # ------------------------------------------------------------------
    # small helpers

    def leader(self, view: int) -> NodeId:
        got = self._leader_cache.get(view)
        if got is None:
            got = leader_for_view(view, self.beacon, self.nodes)
            self._leader_cache[view] = got
        return got

    def _is_root_member(self) -> bool:
        return self.my_committee == 1

    def _children_set(self) -> set[NodeId]:
        if self._children_cache is None:
            self._children_cache = set(self.tree.child_committees_of(self.id))
        return self._children_cache

    def _root_cluster_set(self) -> set[NodeId]:
        return set(self.tree.root_cluster())

    def _sign(self, payload: bytes):
        return self.scheme.sign(self.scheme.keypair(self.id).secret, payload)

    def _send(self, out: EngineOutput, msg, dests) -> None:
        out.outbound.append((msg, tuple(dests)))
        self.messages_sent += 1

    def _recompute_view(self, out: EngineOutput) -> None:
        view = max(
            self.current_view,
            self.local_high_qc.view + 1,
            self.highest_voted_view,
            (self.last_view_timeout_qc.view + 1 if self.last_view_timeout_qc else 0),
        )
        if view > self.current_view:
            self.current_view = view
            out.view_change = view
            self._prune()

    def _update_high_qc(self, qc: Qc, out: EngineOutput) -> None:
        if qc.view > self.local_high_qc.view:
            self.local_high_qc = qc
            self._recompute_view(out)

    def _prune(self) -> None:
        floor = self.current_view - _PRUNE_LAG
        for key in [k for k in self.pending_votes if k[0] < floor]:
            del self.pending_votes[key]
        for key in [k for k in self.child_vote_count if k[0] < floor]:
            del self.child_vote_count[key]
        for d in (self.pending_timeouts, self.pending_new_views):
            for view in [v for v in d if v < floor]:
                del d[view]
        self.forwarded_votes = {k for k in self.forwarded_votes if k[0] >= floor}
        self.forwarded_nvs = {k for k in self.forwarded_nvs if k[0] >= floor}

    # ------------------------------------------------------------------
    # safe-block and commit rules

    def _is_linked(self, block: Block) -> bool:
        """Structural rule: the block directly extends its certificate."""
        if block.agg_qc is not None:
            return (
                block.view == block.agg_qc.view + 1
                and block.qc == block.agg_qc.high_qc
            )
        return block.view == block.qc.view + 1

    def is_safe_block(self, block: Block) -> bool:
        """Voting rule: structurally linked and not behind the current view."""
        return block.view >= self.current_view and self._is_linked(block)

    def try_commit(self) -> list[bytes]:
        """Scan for two-chains b <- b' <- b'' whose first link is direct."""
        newly: list[bytes] = []
        for blk in list(self.safe_blocks.values()):
            newly.extend(self._commit_from(blk))
        return newly

    def _commit_from(self, b2: Block) -> list[bytes]:
        # b2 carries the qc for b1; commit b1's parent b0 when b1 = b0 + 1
        b1 = self.safe_blocks.get(b2.qc.block)
        if b1 is None or b1.view == 0:
            return []
        b0 = self.safe_blocks.get(b1.qc.block)
        if b0 is None or b1.view != b0.view + 1:
            return []
        if b0.id in self.committed_set:
            return []
        # commit b0 together with any uncommitted ancestors, oldest first
        chain: list[Block] = []
        cur = b0
        while cur is not None and cur.id not in self.committed_set:
            chain.append(cur)
            cur = self.safe_blocks.get(cur.qc.block)
        if cur is None or cur.id != self.committed[-1]:
            return []  # does not extend the committed prefix yet
        chain.reverse()
        ids = [b.id for b in chain]
        self.committed.extend(ids)
        self.committed_set.update(ids)
        return ids

    # ------------------------------------------------------------------
    # proposing (leader role)

    def propose_block(self, view: int, quorum: list, txs: tuple[bytes, ...] = ()) -> Block:
        """Build the proposal for `view` from a homogeneous quorum.

        A quorum of votes yields a block whose qc collects them; a quorum of
        new_view messages yields a block carrying an aggregated qc.
        """
        if not quorum:
            raise InvalidInputError("empty quorum")
        threshold = self.tree.leader_supermajority_threshold()
        if all(isinstance(m, Vote) for m in quorum):
            if self.leader(view) != self.id:
                raise InvalidInputError("caller is not the leader of this view")
            if len({v.voter for v in quorum}) < threshold:
                raise InvalidInputError(
                    f"vote quorum {len(quorum)} below threshold {threshold}"
                )
            blocks = {v.block for v in quorum}
            views = {v.view for v in quorum}
            if len(blocks) != 1 or views != {view - 1}:
                raise InvalidInputError("votes must agree on one (view, block)")
            agg = self.scheme.aggregate(
                [(v.sig, self.scheme.index_of(v.voter)) for v in quorum]
            )
            qc = Qc(
                view=view - 1,
                block=next(iter(blocks)),
                voters=agg.signers,
                agg_sig=agg,
            )
            return make_block(view, qc, txs=txs)
        if all(isinstance(m, NewView) for m in quorum):
            nv_view = quorum[0].view
            if any(nv.view != nv_view for nv in quorum):
                raise InvalidInputError("new_views must share one view")
            if view != nv_view + 1:
                raise InvalidInputError("proposal view must follow the new_views")
            if len({nv.sender for nv in quorum}) < threshold:
                raise InvalidInputError(
                    f"new_view quorum {len(quorum)} below threshold {threshold}"
                )
            if self.leader(view) != self.id:
                raise InvalidInputError("caller is not the leader of this view")
            ordered = sorted(quorum, key=lambda nv: nv.sender)
            agg_sig = self.scheme.aggregate(
                [(nv.sig, self.scheme.index_of(nv.sender)) for nv in ordered]
            )
            high = max((nv.high_qc for nv in ordered), key=lambda qc: qc.view)
            agg_qc = AggregatedQc(
                view=nv_view,
                qc_views=tuple(nv.high_qc.view for nv in ordered),
                senders=tuple(nv.sender for nv in ordered),
                high_qc=high,
                agg_sig=agg_sig,
            )
            return make_block(view, high, agg_qc=agg_qc, txs=txs)
        raise InvalidInputError("quorum mixes message types")

    def start(self) -> EngineOutput:
        """Bootstrap: the leader of view 1 proposes the genesis child."""
        out = EngineOutput()
        if self.leader(1) == self.id:
            block = make_block(1, genesis_qc())
            self.proposed_views.add(1)
            self._send(out, block, (BROADCAST,))
            out.events.append(
                {"kind": "proposal", "view": 1, "block": block.id.hex(), "from_votes": []}
            )
        return out

    # ------------------------------------------------------------------
    # block ingestion and voting

    def receive_block(self, block: Block) -> EngineOutput:
        out = EngineOutput()
        if block.id in self.safe_blocks or block.view == 0:
            return out
        violations = validate(block, self.tree, self.scheme)
        # one authenticator per aggregate: the qc, plus the agg_qc if present
        self.verifications += 1 + (block.agg_qc is not None)
        if violations:
            out.events.append(
                {"kind": "invalid_block", "block": block.id.hex(), "why": violations}
            )
            return out
        # stale-but-linked blocks still enter the tree (completing history for
        # the commit rule); the view-recency half of the safety rule only
        # gates voting, inside _maybe_vote
        linked = self._is_linked(block)
        self._update_high_qc(block.qc, out)
        if not linked:
            return out
        if block.qc.block not in self.safe_blocks:
            self._buffer_orphan(block)
            return out
        self._insert(block, out)
        return out

    def _buffer_orphan(self, block: Block) -> None:
        if self.orphan_count >= self.orphan_limit:
            # evict the lowest-view orphan
            low_parent = min(
                self.orphans, key=lambda p: min(b.view for b in self.orphans[p])
            )
            victims = self.orphans[low_parent]
            victim = min(victims, key=lambda b: b.view)
            victims.remove(victim)
            if not victims:
                del self.orphans[low_parent]
            self.orphan_count -= 1
        self.orphans.setdefault(block.qc.block, []).append(block)
        self.orphan_count += 1

    def _insert(self, block: Block, out: EngineOutput) -> None:
        self.safe_blocks[block.id] = block
        out.commits.extend(self._commit_from(block))
        self._maybe_vote(block, out)
        self._maybe_propose_from_votes(block.view, block.id, out)
        # adopted children waiting on this parent
        for child in self.orphans.pop(block.id, []):
            self.orphan_count -= 1
            if self._is_linked(child):
                self._insert(child, out)

    def approve_block(self, block: Block, votes: list[Vote]) -> EngineOutput:
        """Cast this node's vote for `block` given the required child votes."""
        out = EngineOutput()
        threshold = self.tree.child_supermajority_threshold(self.my_committee)
        children = set(self.tree.child_committees_of(self.id))
        if (
            block.id not in self.safe_blocks
            or not self.is_safe_block(block)
            or block.view <= self.highest_voted_view
            or len(votes) != threshold
            or len({v.voter for v in votes}) != len(votes)
            or any(v.block != block.id for v in votes)
            or any(v.voter not in children for v in votes)
        ):
            return out
        qc = None
        if self._is_root_member() and threshold > 0:
            agg = self.scheme.aggregate(
                [(v.sig, self.scheme.index_of(v.voter)) for v in votes]
            )
            qc = Qc(view=block.view, block=block.id, voters=agg.signers, agg_sig=agg)
        vote = Vote(
            view=block.view,
            block=block.id,
            voter=self.id,
            qc=qc,
            sig=self._sign(vote_payload(block.view, block.id)),
        )
        self.highest_voted_view = block.view
        self._update_high_qc(block.qc, out)
        self._recompute_view(out)
        if self._is_root_member():
            self._send(out, vote, (self.leader(block.view + 1),))
            self.vote_relay_views.add(block.view)
        else:
            self._send(out, vote, self.tree.parent_committee_of(self.id))
        out.events.append(
            {
                "kind": "vote",
                "view": block.view,
                "block": block.id.hex(),
                "voter": self.id,
                "consumed": [v.voter for v in votes],
            }
        )
        if self._is_root_member():
            self._flush_vote_relay(block.view, out)
        return out

    def _maybe_vote(self, block: Block, out: EngineOutput) -> None:
        if block.view <= self.highest_voted_view or not self.is_safe_block(block):
            return
        threshold = self.tree.child_supermajority_threshold(self.my_committee)
        if self.child_vote_count.get((block.view, block.id), 0) < threshold:
            return
        children = self._children_set()
        pool = self.pending_votes.get((block.view, block.id), {})
        usable = [v for voter, v in pool.items() if voter in children]
        if len(usable) < threshold:
            return
        out.merge(self.approve_block(block, usable[:threshold]))

    # ------------------------------------------------------------------
    # vote handling (parent / root / leader roles)

    def forward_extra_root_votes(self, vote: Vote) -> EngineOutput:
        """Relay a distinct child vote to the next leader (root members)."""
        out = EngineOutput()
        key = (vote.view, vote.block, vote.voter)
        if (
            self._is_root_member()
            and vote.view in self.vote_relay_views
            and key not in self.forwarded_votes
        ):
            self.forwarded_votes.add(key)
            self._send(out, vote, (self.leader(vote.view + 1),))
        return out

    def _flush_vote_relay(self, view: int, out: EngineOutput) -> None:
        for (v, block), pool in list(self.pending_votes.items()):
            if v != view:
                continue
            for vote in list(pool.values()):
                out.merge(self.forward_extra_root_votes(vote))

    def receive_vote(self, vote: Vote) -> EngineOutput:
        out = EngineOutput()
        pool = self.pending_votes.setdefault((vote.view, vote.block), {})
        if pool.get(vote.voter) == vote:
            return out  # an identical copy was already verified and pooled
        violations = validate(vote, self.tree, self.scheme)
        self.verifications += 1 + (vote.qc is not None)
        if violations:
            out.events.append({"kind": "invalid_vote", "why": violations})
            return out
        if vote.voter not in pool:
            pool[vote.voter] = vote
            if vote.voter in self._children_set():
                key = (vote.view, vote.block)
                self.child_vote_count[key] = self.child_vote_count.get(key, 0) + 1
        out.merge(self.forward_extra_root_votes(vote))
        block = self.safe_blocks.get(vote.block)
        if block is not None:
            self._maybe_vote(block, out)
        self._maybe_propose_from_votes(vote.view, vote.block, out)
        return out

    def _maybe_propose_from_votes(
        self, view: int, block_id: bytes, out: EngineOutput
    ) -> None:
        next_view = view + 1
        if self.leader(next_view) != self.id or next_view in self.proposed_views:
            return
        cluster = self._root_cluster_set()
        pool = self.pending_votes.get((view, block_id), {})
        quorum = [v for voter, v in pool.items() if voter in cluster]
        if len(quorum) < self.tree.leader_supermajority_threshold():
            return
        block = self.propose_block(next_view, quorum)
        self.proposed_views.add(next_view)
        self._send(out, block, (BROADCAST,))
        out.events.append(
            {
                "kind": "qc",
                "view": view,
                "block": block_id.hex(),
                "votes": sorted(v.voter for v in quorum),
            }
        )
        out.events.append(
            {
                "kind": "proposal",
                "view": next_view,
                "block": block.id.hex(),
                "from_votes": sorted(v.voter for v in quorum),
            }
        )

    # ------------------------------------------------------------------
    # timeouts

    def local_timeout(self) -> EngineOutput:
        out = EngineOutput()
        view = self.current_view
        in_root_cluster = self.id in self._root_cluster_set()
        if view in self.timed_out_views:
            # state already barred; retransmit so lossy pre-GST links recover
            if in_root_cluster and self.last_timeout_msg is not None:
                if self.last_timeout_msg.view == view:
                    self._send(out, self.last_timeout_msg, self.tree.root_committee())
            return out
        self.timed_out_views.add(view)
        self.highest_voted_view = max(self.highest_voted_view, view)
        out.events.append({"kind": "timeout", "view": view, "node": self.id})
        if in_root_cluster:
            msg = Timeout(
                view=view,
                high_qc=self.local_high_qc,
                sender=self.id,
                sig=self._sign(timeout_payload(view, self.local_high_qc.view)),
            )
            self.last_timeout_msg = msg
            self._send(out, msg, self.tree.root_committee())
        return out

    def on_timer(self, view: int) -> EngineOutput:
        """Timer for `view` expired; act only if the node is still there."""
        if view != self.current_view:
            return EngineOutput()
        return self.local_timeout()

    def timeout_detected(self, msgs: list[Timeout]) -> TimeoutQc | None:
        """Aggregate same-view timeouts into a TimeoutQc (root members)."""
        views = {m.view for m in msgs}
        if len(views) != 1:
            raise InvalidInputError("timeout messages span multiple views")
        if len({m.sender for m in msgs}) < self.tree.leader_supermajority_threshold():
            return None
        ordered = sorted(msgs, key=lambda m: m.sender)
        agg = self.scheme.aggregate(
            [(m.sig, self.scheme.index_of(m.sender)) for m in ordered]
        )
        high = max((m.high_qc for m in ordered), key=lambda qc: qc.view)
        return TimeoutQc(
            view=next(iter(views)),
            high_qc=high,
            senders=tuple(m.sender for m in ordered),
            sender_high_qc_views=tuple(m.high_qc.view for m in ordered),
            agg_sig=agg,
        )

    def receive_timeout(self, msg: Timeout) -> EngineOutput:
        out = EngineOutput()
        if not self._is_root_member() or msg.view < self.current_view:
            return out
        pool = self.pending_timeouts.setdefault(msg.view, {})
        if pool.get(msg.sender) == msg:
            return out  # retransmission of an already-verified timeout
        violations = validate(msg, self.tree, self.scheme)
        self.verifications += 1
        if violations or msg.sender not in self._root_cluster_set():
            return out
        if msg.sender not in pool:
            pool[msg.sender] = msg
        if msg.view in self.built_tqc_views:
            return out
        tqc = self.timeout_detected(list(pool.values()))
        if tqc is not None:
            self.built_tqc_views.add(msg.view)
            self._send(out, tqc, (BROADCAST,))
            out.events.append(
                {"kind": "timeout_qc", "view": tqc.view, "senders": list(tqc.senders)}
            )
        return out

    def receive_timeout_qc(self, tqc: TimeoutQc) -> EngineOutput:
        out = EngineOutput()
        if tqc.view < self.current_view:
            return out
        violations = validate(tqc, self.tree, self.scheme)
        self.verifications += 2  # the aggregate and the embedded high qc
        if violations:
            out.events.append({"kind": "invalid_timeout_qc", "why": violations})
            return out
        self._update_high_qc(tqc.high_qc, out)
        self.last_view_timeout_qc = tqc
        self._recompute_view(out)
        # fresh overlay keyed by shared randomness and the failed view: every
        # node derives the same tree even when root members aggregated
        # different (but equally valid) timeout subsets for that view
        xi = derive_seed(self.overlay_seed, "reseed", tqc.view)
        self.tree = _overlay_for(tuple(self.nodes), self.n, xi)
        self.my_committee = self.tree.committee_of(self.id)
        self._children_cache = None
        self.child_vote_count.clear()
        out.events.append(
            {"kind": "reseed", "view": self.current_view, "xi": xi.hex()}
        )
        self._try_new_view(out)
        self._maybe_propose_from_new_views(self.current_view, out)
        return out

    # ------------------------------------------------------------------
    # new views

    def approve_new_view(self, tqc: TimeoutQc, new_views: list[NewView]) -> EngineOutput:
        """Emit this node's NewView once its child quorum is in."""
        out = EngineOutput()
        view = tqc.view + 1
        threshold = self.tree.child_supermajority_threshold(self.my_committee)
        children = set(self.tree.child_committees_of(self.id))
        if (
            self.last_view_timeout_qc is None
            or self.last_view_timeout_qc.view != tqc.view
            or view in self.emitted_nv_views
            or self.highest_voted_view >= view
            or len(new_views) != threshold
            or len({nv.sender for nv in new_views}) != len(new_views)
            or any(nv.view != view for nv in new_views)
            or any(nv.timeout_qc.view != tqc.view for nv in new_views)
            or any(nv.sender not in children for nv in new_views)
        ):
            return out
        high = max(
            [tqc.high_qc] + [nv.high_qc for nv in new_views], key=lambda qc: qc.view
        )
        self._update_high_qc(high, out)
        agg_qc = None
        if self._is_root_member() and threshold > 0:
            ordered = sorted(new_views, key=lambda nv: nv.sender)
            agg_sig = self.scheme.aggregate(
                [(nv.sig, self.scheme.index_of(nv.sender)) for nv in ordered]
            )
            agg_qc = AggregatedQc(
                view=view,
                qc_views=tuple(nv.high_qc.view for nv in ordered),
                senders=tuple(nv.sender for nv in ordered),
                high_qc=max((nv.high_qc for nv in ordered), key=lambda qc: qc.view),
                agg_sig=agg_sig,
            )
        nv = NewView(
            view=view,
            high_qc=self.local_high_qc,
            sender=self.id,
            timeout_qc=tqc,
            agg_qc=agg_qc,
            sig=self._sign(new_view_payload(view, self.local_high_qc.view)),
        )
        self.emitted_nv_views.add(view)
        self.highest_voted_view = max(self.highest_voted_view, view)
        self._recompute_view(out)
        if self._is_root_member():
            self._send(out, nv, (self.leader(view + 1),))
            self.nv_relay_views.add(view)
            self._flush_nv_relay(view, out)
        else:
            self._send(out, nv, self.tree.parent_committee_of(self.id))
        out.events.append(
            {
                "kind": "new_view",
                "view": view,
                "sender": self.id,
                "high_qc_view": self.local_high_qc.view,
                "consumed": [m.sender for m in new_views],
            }
        )
        return out

    def _try_new_view(self, out: EngineOutput) -> None:
        tqc = self.last_view_timeout_qc
        if tqc is None:
            return
        view = tqc.view + 1
        if view != self.current_view or view in self.emitted_nv_views:
            return
        threshold = self.tree.child_supermajority_threshold(self.my_committee)
        children = set(self.tree.child_committees_of(self.id))
        pool = self.pending_new_views.get(view, {})
        usable = [
            nv
            for sender, nv in pool.items()
            if sender in children and nv.timeout_qc.view == tqc.view
        ]
        if len(usable) < threshold:
            return
        out.merge(self.approve_new_view(tqc, usable[:threshold]))

    def _flush_nv_relay(self, view: int, out: EngineOutput) -> None:
        for sender, nv in list(self.pending_new_views.get(view, {}).items()):
            self._relay_new_view(nv, out)

    def _relay_new_view(self, nv: NewView, out: EngineOutput) -> None:
        key = (nv.view, nv.sender)
        if (
            self._is_root_member()
            and nv.view in self.nv_relay_views
            and key not in self.forwarded_nvs
        ):
            self.forwarded_nvs.add(key)
            self._send(out, nv, (self.leader(nv.view + 1),))

    def receive_new_view(self, nv: NewView) -> EngineOutput:
        out = EngineOutput()
        if nv.view < self.current_view:
            return out
        pool = self.pending_new_views.setdefault(nv.view, {})
        if pool.get(nv.sender) == nv:
            return out  # identical copy already verified and pooled
        violations = validate(nv, self.tree, self.scheme)
        self.verifications += 1 + (nv.agg_qc is not None)
        if violations:
            out.events.append({"kind": "invalid_new_view", "why": violations})
            return out
        if nv.sender not in pool:
            pool[nv.sender] = nv
        self._relay_new_view(nv, out)
        self._try_new_view(out)
        self._maybe_propose_from_new_views(nv.view, out)
        return out

    def _maybe_propose_from_new_views(self, view: int, out: EngineOutput) -> None:
        if (
            self.leader(view + 1) != self.id
            or view + 1 in self.proposed_views
            or self.last_view_timeout_qc is None
            or self.last_view_timeout_qc.view + 1 != view
        ):
            return
        cluster = self._root_cluster_set()
        pool = self.pending_new_views.get(view, {})
        quorum = [nv for sender, nv in pool.items() if sender in cluster]
        if len(quorum) < self.tree.leader_supermajority_threshold():
            return
        block = self.propose_block(view + 1, quorum)
        self.proposed_views.add(view + 1)
        self._send(out, block, (BROADCAST,))
        out.events.append(
            {
                "kind": "proposal",
                "view": view + 1,
                "block": block.id.hex(),
                "from_new_views": sorted(nv.sender for nv in quorum),
            }
        )

    # ------------------------------------------------------------------
    # dispatch

    def handle(self, msg) -> EngineOutput:
        if isinstance(msg, Block):
            return self.receive_block(msg)
        if isinstance(msg, Vote):
            return self.receive_vote(msg)
        if isinstance(msg, Timeout):
            return self.receive_timeout(msg)
        if isinstance(msg, TimeoutQc):
            return self.receive_timeout_qc(msg)
        if isinstance(msg, NewView):
            return self.receive_new_view(msg)
        raise InvalidInputError(f"unroutable message {type(msg).__name__}")
