"""Deterministic adversarial discrete-event simulator.

`run` instantiates one :class:`~carnot.engine.CarnotNode` per node, schedules
message deliveries on an integer-tick clock under a partial-synchrony delay
model (arbitrary bounded delay and optional drops before ``gst``, delay of at
most ``delta`` after it) and injects Byzantine behaviors by filtering or
augmenting the outbound traffic of the corrupted nodes.  Everything — key
material, overlay, placement, link delays — is derived from the scenario's
``master_seed``, so a trace is a pure function of its scenario.

The recorded :class:`Trace` carries the full protocol-event log, per-node
commit histories and, for every leader-level QC, the transitive supporter set
(voters reachable through consumed-vote edges) plus the count of all nodes
that had cast a vote for the certified block by construction time.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import asdict, dataclass

from .engine import BROADCAST, CarnotNode
from .errors import InvalidInputError
from .messages import Block, NewView, Timeout, TimeoutQc, Vote, make_block, vote_payload
from .overlay import CommitteeTree, OverlayParams, form_overlay, leader_for_view
from .prng import Sha256Counter, derive_seed
from .sigs import HashedTagScheme

BEHAVIOR_KINDS = (
    "silent",
    "equivocate-leader",
    "withhold-votes",
    "rush-approve",
    "delay-max",
)


@dataclass(frozen=True)
class ByzantineBehavior:
    """One of the supported deviation strategies (same for all adversaries)."""

    kind: str

    def __post_init__(self):
        if self.kind not in BEHAVIOR_KINDS:
            raise InvalidInputError(
                f"unknown behavior {self.kind!r}; expected one of {BEHAVIOR_KINDS}"
            )


@dataclass(frozen=True)
class Scenario:
    """Complete, self-contained description of one simulation run."""

    n_nodes: int
    committee_size: int
    adversary_count: int = 0
    adversary_fraction: float | None = None  # overrides adversary_count when set
    clamp_safe: bool = True  # keep fraction-mode corruption below n/3
    behavior: str = "silent"
    delta: int = 10
    gst: int = 0
    pre_gst_delay_factor: int = 3
    pre_gst_drop: float = 0.0
    view_timeout: int = 80
    views_to_run: int = 20
    master_seed: int = 0
    max_events: int = 20_000_000

    def __post_init__(self):
        if self.n_nodes < 1:
            raise InvalidInputError("n_nodes must be >= 1")
        if not 1 <= self.committee_size <= self.n_nodes:
            raise InvalidInputError("committee_size must be in [1, n_nodes]")
        if not 0 <= self.adversary_count < self.n_nodes:
            raise InvalidInputError("adversary_count must satisfy 0 <= M < N")
        if self.adversary_fraction is not None and not (
            0.0 <= self.adversary_fraction < 1.0
        ):
            raise InvalidInputError("adversary_fraction must be in [0, 1)")
        if self.delta <= 0:
            raise InvalidInputError("delta must be a positive tick count")
        if self.gst < 0 or self.view_timeout <= 0 or self.views_to_run < 1:
            raise InvalidInputError("gst/view_timeout/views_to_run out of range")
        if not 0.0 <= self.pre_gst_drop < 1.0:
            raise InvalidInputError("pre_gst_drop must be in [0, 1)")
        if self.pre_gst_delay_factor < 1:
            raise InvalidInputError("pre_gst_delay_factor must be >= 1")
        ByzantineBehavior(self.behavior)  # validates the kind

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        return cls(**doc)


@dataclass
class Trace:
    """Replayable record of one run."""

    scenario: Scenario
    adversaries: tuple[int, ...]
    leaders: dict[int, int]
    events: list[dict]
    qcs: list[dict]
    commits: dict[int, list[dict]]
    final_state: dict[int, dict]
    stats: dict
    truncated: bool

    def to_jsonl(self) -> str:
        lines = [
            json.dumps({"type": "scenario", **self.scenario.to_dict()}, sort_keys=True),
            json.dumps(
                {"type": "adversaries", "nodes": list(self.adversaries)}, sort_keys=True
            ),
            json.dumps(
                {"type": "leaders", "by_view": {str(v): l for v, l in self.leaders.items()}},
                sort_keys=True,
            ),
        ]
        lines += [json.dumps({"type": "event", **e}, sort_keys=True) for e in self.events]
        lines += [json.dumps({"type": "qc", **q}, sort_keys=True) for q in self.qcs]
        lines.append(
            json.dumps(
                {"type": "commits", "by_node": {str(i): c for i, c in self.commits.items()}},
                sort_keys=True,
            )
        )
        lines.append(
            json.dumps(
                {
                    "type": "final_state",
                    "by_node": {str(i): s for i, s in self.final_state.items()},
                },
                sort_keys=True,
            )
        )
        lines.append(
            json.dumps(
                {"type": "stats", "truncated": self.truncated, **self.stats},
                sort_keys=True,
            )
        )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "Trace":
        scenario = None
        adversaries: tuple[int, ...] = ()
        leaders: dict[int, int] = {}
        events: list[dict] = []
        qcs: list[dict] = []
        commits: dict[int, list[dict]] = {}
        final_state: dict[int, dict] = {}
        stats: dict = {}
        truncated = False
        for line in text.splitlines():
            if not line.strip():
                continue
            doc = json.loads(line)
            kind = doc.pop("type")
            if kind == "scenario":
                scenario = Scenario.from_dict(doc)
            elif kind == "adversaries":
                adversaries = tuple(doc["nodes"])
            elif kind == "leaders":
                leaders = {int(v): l for v, l in doc["by_view"].items()}
            elif kind == "event":
                events.append(doc)
            elif kind == "qc":
                qcs.append(doc)
            elif kind == "commits":
                commits = {int(i): c for i, c in doc["by_node"].items()}
            elif kind == "final_state":
                final_state = {int(i): s for i, s in doc["by_node"].items()}
            elif kind == "stats":
                truncated = doc.pop("truncated")
                stats = doc
            else:
                raise InvalidInputError(f"unknown trace line type {kind!r}")
        if scenario is None:
            raise InvalidInputError("trace has no scenario line")
        return cls(
            scenario=scenario,
            adversaries=adversaries,
            leaders=leaders,
            events=events,
            qcs=qcs,
            commits=commits,
            final_state=final_state,
            stats=stats,
            truncated=truncated,
        )


# ---------------------------------------------------------------------------
# adversary placement


def place_adversaries(scenario: Scenario, nodes: list[int]) -> tuple[int, ...]:
    """Seeded corruption set: uniform M-subset or independent coin flips."""
    rng = Sha256Counter(derive_seed("carnot-sim", scenario.master_seed, "placement"))
    ordered = sorted(nodes)
    n = len(ordered)
    if scenario.adversary_fraction is None:
        m = scenario.adversary_count
        if m == 0:
            return ()
        # partial Fisher-Yates: the first m slots are a uniform m-subset
        pool = list(ordered)
        for i in range(m):
            j = i + rng.randbelow(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return tuple(sorted(pool[:m]))
    picked = [v for v in ordered if rng.uniform() < scenario.adversary_fraction]
    if scenario.clamp_safe:
        limit = (n - 1) // 3  # strictly fewer than n/3
        while len(picked) > limit:
            picked.pop(rng.randbelow(len(picked)))
    return tuple(sorted(picked))


def placement_child_robust(tree: CommitteeTree, adversaries: set[int]) -> bool:
    """True when every sibling-committee pair is at most one-third corrupted."""
    for mu in range(1, tree.k + 1):
        kids = tree.children(mu)
        if not kids:
            continue
        members = [m for c in kids for m in tree.committee(c)]
        bad = sum(1 for m in members if m in adversaries)
        if bad > len(members) // 3:
            return False
    return True


# ---------------------------------------------------------------------------
# the event loop


class _Run:
    """Mutable state of one simulation (kept off the public surface)."""

    def __init__(self, scenario: Scenario):
        self.sc = scenario
        self.nodes = list(range(scenario.n_nodes))
        seed = derive_seed("carnot-sim", scenario.master_seed)
        self.scheme = HashedTagScheme(derive_seed(seed, "keys"), self.nodes)
        self.beacon = derive_seed(seed, "beacon")
        xi = derive_seed(seed, "overlay")
        self.engines = {
            i: CarnotNode(
                i, self.nodes, scenario.committee_size, self.scheme, self.beacon, xi
            )
            for i in self.nodes
        }
        self.adversaries = set(place_adversaries(scenario, self.nodes))
        self.net_rng = Sha256Counter(derive_seed(seed, "net"))
        self.heap: list[tuple] = []
        self.seq = 0
        self.now = 0
        self.events: list[dict] = []
        self.qcs: list[dict] = []
        self.commits: dict[int, list[dict]] = {i: [] for i in self.nodes}
        # vote bookkeeping for supporter sets
        self.consumed: dict[tuple[int, str, int], list[int]] = {}
        self.cast: dict[tuple[int, str], set[int]] = {}
        self.rushed: dict[int, int] = {}
        self.deliveries = 0
        self.dropped = 0
        self.timeouts = 0
        self.last_progress = 0
        self.processed = 0
        self.truncated = False
        self.stalled = False
        self.honest_done: set[int] = set()

    # -- scheduling --------------------------------------------------------

    def _push(self, time: int, kind: str, a, b) -> None:
        self.seq += 1
        heapq.heappush(self.heap, (time, self.seq, kind, a, b))

    def _send(self, src: int, msg, dests) -> None:
        targets = self.nodes if dests == (BROADCAST,) else dests
        delay_max = src in self.adversaries and self.sc.behavior == "delay-max"
        for dst in targets:
            if self.now >= self.sc.gst:
                delay = self.sc.delta if delay_max else 1 + self.net_rng.randbelow(self.sc.delta)
            else:
                bound = self.sc.delta * self.sc.pre_gst_delay_factor
                if delay_max:
                    delay = bound
                else:
                    if (
                        self.sc.pre_gst_drop > 0.0
                        and self.net_rng.uniform() < self.sc.pre_gst_drop
                    ):
                        self.dropped += 1
                        continue
                    delay = 1 + self.net_rng.randbelow(bound)
            self._push(self.now + delay, "deliver", dst, (msg, self.now))

    # -- behavior filters ---------------------------------------------------

    def _filter_outbound(self, src: int, outbound: list) -> list:
        if src not in self.adversaries:
            return outbound
        kind = self.sc.behavior
        if kind == "silent":
            return []
        if kind == "withhold-votes":
            return [
                (m, d) for m, d in outbound if not isinstance(m, (Vote, NewView))
            ]
        if kind == "equivocate-leader":
            expanded = []
            for msg, dests in outbound:
                if isinstance(msg, Block):
                    variant = make_block(
                        msg.view, msg.qc, agg_qc=msg.agg_qc, txs=(b"equivocation",)
                    )
                    targets = list(self.nodes if dests == (BROADCAST,) else dests)
                    cut = (len(targets) + 1) // 2
                    expanded.append((msg, tuple(targets[:cut])))
                    if targets[cut:]:
                        expanded.append((variant, tuple(targets[cut:])))
                    self.events.append(
                        {
                            "t": self.now,
                            "node": src,
                            "kind": "equivocation",
                            "view": msg.view,
                            "blocks": [msg.id.hex(), variant.id.hex()],
                        }
                    )
                else:
                    expanded.append((msg, dests))
            return expanded
        # rush-approve and delay-max leave the organic traffic untouched
        return outbound

    def _maybe_rush(self, dst: int, msg) -> None:
        """rush-approve adversaries vote the instant a proposal arrives."""
        if (
            dst not in self.adversaries
            or self.sc.behavior != "rush-approve"
            or not isinstance(msg, Block)
            or msg.view < 1
            or msg.view <= self.rushed.get(dst, 0)
        ):
            return
        self.rushed[dst] = msg.view
        eng = self.engines[dst]
        sig = self.scheme.sign(
            self.scheme.keypair(dst).secret, vote_payload(msg.view, msg.id)
        )
        vote = Vote(view=msg.view, block=msg.id, voter=dst, qc=None, sig=sig)
        if eng.my_committee == 1:
            dests: tuple = (eng.leader(msg.view + 1),)
        else:
            dests = eng.tree.parent_committee_of(dst)
        self._record_vote(
            {
                "t": self.now,
                "node": dst,
                "kind": "vote",
                "rushed": True,
                "view": msg.view,
                "block": msg.id.hex(),
                "voter": dst,
                "consumed": [],
            }
        )
        if dests:
            self._send(dst, vote, dests)

    # -- event recording ----------------------------------------------------

    def _record_vote(self, ev: dict) -> None:
        self.events.append(ev)
        key = (ev["view"], ev["block"], ev["voter"])
        if key not in self.consumed:
            self.consumed[key] = list(ev["consumed"])
        self.cast.setdefault((ev["view"], ev["block"]), set()).add(ev["voter"])

    def _transitive_supporters(self, view: int, block: str, voters) -> set[int]:
        seen: set[int] = set()
        stack = list(voters)
        while stack:
            voter = stack.pop()
            if voter in seen:
                continue
            seen.add(voter)
            stack.extend(self.consumed.get((view, block, voter), ()))
        return seen

    def _record_qc(self, node: int, ev: dict) -> None:
        supporters = self._transitive_supporters(ev["view"], ev["block"], ev["votes"])
        tree = self.engines[node].tree
        self.qcs.append(
            {
                "t": self.now,
                "builder": node,
                "view": ev["view"],
                "block": ev["block"],
                "voters": ev["votes"],
                "supporters": sorted(supporters),
                "n_supporters": len(supporters),
                "n_voted": len(self.cast.get((ev["view"], ev["block"]), ())),
                "robust": placement_child_robust(tree, self.adversaries),
            }
        )

    def _process_output(self, node: int, out) -> None:
        for ev in out.events:
            if ev["kind"] == "vote":
                self._record_vote({"t": self.now, "node": node, **ev})
            else:
                self.events.append({"t": self.now, "node": node, **ev})
            if ev["kind"] == "qc":
                self._record_qc(node, ev)
            if ev["kind"] in ("qc", "proposal", "timeout_qc"):
                self.last_progress = self.now
            if ev["kind"] == "timeout":
                self.timeouts += 1
        eng = self.engines[node]
        for bid in out.commits:
            blk = eng.safe_blocks[bid]
            entry = {"block": bid.hex(), "view": blk.view}
            self.commits[node].append(entry)
            self.events.append(
                {
                    "t": self.now,
                    "node": node,
                    "kind": "commit",
                    "block": bid.hex(),
                    "view": blk.view,
                    "at_view": eng.current_view,
                }
            )
            self.last_progress = self.now
        if out.view_change is not None:
            self.events.append(
                {
                    "t": self.now,
                    "node": node,
                    "kind": "view_change",
                    "view": out.view_change,
                }
            )
            self.last_progress = self.now
            self._push(self.now + self.sc.view_timeout, "timer", node, out.view_change)
            if (
                out.view_change > self.sc.views_to_run
                and node not in self.adversaries
            ):
                self.honest_done.add(node)
        for msg, dests in self._filter_outbound(node, out.outbound):
            self._send(node, msg, dests)

    # -- main loop -----------------------------------------------------------

    def run(self) -> Trace:
        sc = self.sc
        for i in self.nodes:
            self._process_output(i, self.engines[i].start())
            self._push(sc.view_timeout, "timer", i, 1)
        honest = [i for i in self.nodes if i not in self.adversaries]
        stall_limit = 8 * sc.view_timeout
        max_ticks = sc.gst + 4 * (sc.views_to_run + 10) * sc.view_timeout
        while self.heap:
            time, _, kind, a, b = heapq.heappop(self.heap)
            self.now = time
            if self.processed >= sc.max_events:
                self.truncated = True
                break
            if self.now > max_ticks or self.now - self.last_progress > stall_limit:
                self.stalled = True
                break
            self.processed += 1
            if kind == "deliver":
                msg, sent_at = b
                # partial-synchrony contract: sends at or after gst arrive
                # within delta ticks
                assert sent_at < sc.gst or time - sent_at <= sc.delta
                self.deliveries += 1
                self._maybe_rush(a, msg)
                self._process_output(a, self.engines[a].handle(msg))
            else:  # timer
                eng = self.engines[a]
                if b == eng.current_view:
                    self._process_output(a, eng.on_timer(b))
                    self._push(self.now + sc.view_timeout, "timer", a, b)
            if len(self.honest_done) == len(honest):
                break
        return self._finish(honest)

    def _finish(self, honest: list[int]) -> Trace:
        sc = self.sc
        final_state = {}
        for i in self.nodes:
            eng = self.engines[i]
            final_state[i] = {
                "view": eng.current_view,
                "highest_voted_view": eng.highest_voted_view,
                "high_qc_view": eng.local_high_qc.view,
                "committed": len(self.commits[i]),
                "verifications": eng.verifications,
                "messages_sent": eng.messages_sent,
            }
        max_view = max(self.engines[i].current_view for i in honest) if honest else 0
        horizon = max(sc.views_to_run + 16, max_view + 8)
        leaders = {
            v: leader_for_view(v, self.beacon, self.nodes)
            for v in range(1, horizon + 1)
        }
        stats = {
            "max_honest_view": max_view,
            "events_processed": self.processed,
            "deliveries": self.deliveries,
            "dropped": self.dropped,
            "timeouts": self.timeouts,
            "qcs": len(self.qcs),
            "commits_total": sum(len(c) for c in self.commits.values()),
            "ticks": self.now,
            "stalled": self.stalled,
        }
        return Trace(
            scenario=sc,
            adversaries=tuple(sorted(self.adversaries)),
            leaders=leaders,
            events=self.events,
            qcs=self.qcs,
            commits=self.commits,
            final_state=final_state,
            stats=stats,
            truncated=self.truncated,
        )


def run(scenario: Scenario) -> Trace:
    """Execute one scenario to completion and return its trace."""
    return _Run(scenario).run()


# ---------------------------------------------------------------------------
# trace checking


def _check_commit_prefix(trace: Trace, honest: set[int], out: list) -> None:
    chains = [
        [c["block"] for c in trace.commits.get(i, [])] for i in sorted(honest)
    ]
    longest = max(chains, key=len, default=[])
    for i, chain in zip(sorted(honest), chains):
        if chain != longest[: len(chain)]:
            out.append({"check": "commit-prefix", "node": i})


def _check_double_votes(trace: Trace, honest: set[int], out: list) -> None:
    seen: set[tuple[str, int, int]] = set()
    for ev in trace.events:
        if ev["kind"] not in ("vote", "new_view") or ev.get("rushed"):
            continue
        node = ev["node"]
        if node not in honest:
            continue
        key = (ev["kind"], node, ev["view"])
        if key in seen:
            out.append({"check": "double-vote", "node": node, "view": ev["view"],
                        "kind": ev["kind"]})
        seen.add(key)


def _check_qc_supporters(trace: Trace, out: list) -> None:
    need = 2 * trace.scenario.n_nodes // 3 + 1
    for qc in trace.qcs:
        if qc["robust"] and qc["n_supporters"] < need:
            out.append(
                {
                    "check": "qc-supporters",
                    "view": qc["view"],
                    "n_supporters": qc["n_supporters"],
                    "needed": need,
                }
            )


def _check_single_qc_per_view(trace: Trace, out: list) -> None:
    blocks_by_view: dict[int, set[str]] = {}
    for qc in trace.qcs:
        blocks_by_view.setdefault(qc["view"], set()).add(qc["block"])
    for view, blocks in sorted(blocks_by_view.items()):
        if len(blocks) > 1:
            out.append({"check": "single-qc-per-view", "view": view,
                        "blocks": sorted(blocks)})


# liveness window: with honest leaders at v and v+1 a direct chain forms;
# the commit lands within `LIVENESS_WINDOW` further views provided at most
# one of the four follow-up leaders is Byzantine (a second faulty leader can
# push the next two-chain completion past the window) and the overlay stays
# vote-robust across the window — a merged committee pair that is more than
# one-third corrupted can starve its parent of child votes and stall a view
# even under an honest leader.
LIVENESS_WINDOW = 4
_WARMUP_VIEWS = 2


def _liveness_robust(tree: CommitteeTree, adversaries: set[int]) -> bool:
    """Child-vote thresholds and the leader quorum are honestly reachable."""
    if not placement_child_robust(tree, adversaries):
        return False
    cluster = tree.root_cluster()
    honest = sum(1 for m in cluster if m not in adversaries)
    return honest >= tree.leader_supermajority_threshold()


def _overlay_schedule(trace: Trace) -> list[tuple[int, bytes]]:
    """(first view, shuffle seed) pairs for every overlay the run used."""
    seed = derive_seed("carnot-sim", trace.scenario.master_seed)
    xis = {0: derive_seed(seed, "overlay")}
    for ev in trace.events:
        if ev["kind"] == "reseed":
            xis.setdefault(ev["view"], bytes.fromhex(ev["xi"]))
    return sorted(xis.items())


def _check_liveness(trace: Trace, honest: set[int], out: list) -> None:
    sc = trace.scenario
    committed_views: set[int] = set()
    commit_at: dict[str, int] = {}
    proposal_time: dict[tuple[int, str], int] = {}
    proposals: dict[int, set[str]] = {}
    for ev in trace.events:
        if ev["kind"] == "commit" and ev["node"] in honest:
            committed_views.add(ev["view"])
            prev = commit_at.get(ev["block"])
            if prev is None or ev["at_view"] < prev:
                commit_at[ev["block"]] = ev["at_view"]
        elif ev["kind"] == "proposal":
            proposals.setdefault(ev["view"], set()).add(ev["block"])
            proposal_time[(ev["view"], ev["block"])] = ev["t"]
    max_view = trace.stats.get("max_honest_view", 0)
    if not trace.adversaries:
        # a block commits in every view past the two-view pipeline warm-up
        top = max(committed_views, default=0)
        expect_top = sc.views_to_run - _WARMUP_VIEWS
        if not trace.truncated and top < expect_top:
            out.append({"check": "liveness", "why": "all-honest run stalled",
                        "top_committed_view": top, "expected": expect_top})
        missing = [v for v in range(1, top + 1) if v not in committed_views]
        # views whose proposal predates gst may legitimately fail
        missing = [
            v
            for v in missing
            if any(t >= sc.gst for (pv, _), t in proposal_time.items() if pv == v)
        ]
        if missing:
            out.append({"check": "liveness", "why": "missing committed views",
                        "views": missing})
        return
    schedule = _overlay_schedule(trace)
    adversaries = set(trace.adversaries)
    tree_cache: dict[bytes, CommitteeTree] = {}

    def window_robust(start: int) -> bool:
        for w in range(start, start + 2 + LIVENESS_WINDOW):
            xi = schedule[0][1]
            for first_view, candidate in schedule:
                if first_view > w:
                    break
                xi = candidate
            tree = tree_cache.get(xi)
            if tree is None:
                tree = form_overlay(
                    list(range(sc.n_nodes)),
                    OverlayParams(n=sc.committee_size, xi=xi),
                )
                tree_cache[xi] = tree
            if not _liveness_robust(tree, adversaries):
                return False
        return True

    for v in range(_WARMUP_VIEWS + 1, max_view):
        if trace.leaders.get(v) not in honest or trace.leaders.get(v + 1) not in honest:
            continue
        if v not in proposals or (v + 1) not in proposals:
            continue
        if min(proposal_time[(v, b)] for b in proposals[v]) < sc.gst:
            continue
        followers = [trace.leaders.get(v + d) for d in range(2, 2 + LIVENESS_WINDOW)]
        if sum(1 for l in followers if l not in honest) > 1:
            continue
        if max_view < v + 1 + LIVENESS_WINDOW + 1:
            continue  # the run ended before the window closed
        if not window_robust(v):
            continue  # a starved committee can stall views regardless of leaders
        block_v = sorted(proposals[v])[0]  # honest leader: unique proposal
        at = commit_at.get(block_v)
        if at is None or at > v + 1 + LIVENESS_WINDOW:
            out.append(
                {
                    "check": "liveness",
                    "why": "no commit within the window",
                    "view": v,
                    "committed_at_view": at,
                }
            )


def _check_auth_band(trace: Trace, honest: set[int], out: list) -> None:
    # The O(log N) band is a happy-path property of networks large enough
    # for the leader role to amortize; at tiny N every node talks to every
    # other node and the per-view constant dominates.
    if trace.adversaries or trace.scenario.n_nodes < 100:
        return
    limit = 4 * trace.scenario.committee_size
    for i in sorted(honest):
        state = trace.final_state[i]
        views = max(state["view"] - 1, 1)
        mean = state["verifications"] / views
        if mean > limit:
            out.append({"check": "auth-band", "node": i, "mean_per_view": mean,
                        "limit": limit})


def check_trace(trace: Trace) -> dict:
    """Evaluate the safety/liveness/scalability properties on one trace."""
    honest = set(range(trace.scenario.n_nodes)) - set(trace.adversaries)
    violations: list[dict] = []
    _check_commit_prefix(trace, honest, violations)
    _check_double_votes(trace, honest, violations)
    _check_qc_supporters(trace, violations)
    _check_single_qc_per_view(trace, violations)
    _check_liveness(trace, honest, violations)
    _check_auth_band(trace, honest, violations)
    return {
        "ok": not violations,
        "violations": violations,
        "n_events": len(trace.events),
        "n_qcs": len(trace.qcs),
        "stalled": trace.stats.get("stalled", False),
        "truncated": trace.truncated,
    }


def mean_verifications_per_view(trace: Trace) -> float:
    """Average over honest nodes of authenticators verified per view entered."""
    honest = [i for i in range(trace.scenario.n_nodes) if i not in trace.adversaries]
    per_node = []
    for i in honest:
        state = trace.final_state[i]
        views = max(state["view"] - 1, 1)
        per_node.append(state["verifications"] / views)
    return sum(per_node) / len(per_node)


def replay(trace: Trace) -> dict:
    """Re-execute the trace's scenario and diff the two runs."""
    fresh = run(trace.scenario)
    diffs = []
    if fresh.final_state != trace.final_state:
        diffs.append("final_state")
    if fresh.commits != trace.commits:
        diffs.append("commits")
    if fresh.to_jsonl() != trace.to_jsonl():
        diffs.append("serialized_trace")
    return {"identical": not diffs, "diffs": diffs}
