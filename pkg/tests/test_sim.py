"""Discrete-event simulator: behaviors, determinism, trace checking."""

import pytest

from carnot.engine import CarnotNode
from carnot.errors import InvalidInputError
from carnot.overlay import OverlayParams, form_overlay
from carnot.prng import derive_seed
from carnot.sim import (
    Scenario,
    Trace,
    check_trace,
    mean_verifications_per_view,
    place_adversaries,
    placement_child_robust,
    replay,
    run,
)


def _run(**kw):
    return run(Scenario(**kw))


# ---------------------------------------------------------------------------
# happy path


def test_all_honest_commits_every_view():
    trace = _run(n_nodes=10, committee_size=3, views_to_run=20, master_seed=1)
    report = check_trace(trace)
    assert report["ok"], report["violations"]
    assert not trace.stats["stalled"]
    committed_views = {
        c["view"] for commits in trace.commits.values() for c in commits
    }
    # every view up to the pipeline horizon commits
    assert set(range(1, 18)) <= committed_views


def test_all_honest_chains_agree():
    trace = _run(n_nodes=13, committee_size=4, views_to_run=15, master_seed=5)
    chains = [tuple(c["block"] for c in trace.commits[i]) for i in range(13)]
    shortest = min(chains, key=len)
    assert all(chain[: len(shortest)] == shortest for chain in chains)


def test_single_committee_network():
    trace = _run(n_nodes=4, committee_size=4, views_to_run=10, master_seed=2)
    assert check_trace(trace)["ok"]
    assert trace.stats["commits_total"] > 0


# ---------------------------------------------------------------------------
# unhappy path


def test_silent_leader_triggers_timeout_recovery():
    # a silent leader stalls its view; the view timeout produces a TimeoutQc
    # and the leader two views later proposes on an aggregated qc
    trace = _run(
        n_nodes=10,
        committee_size=3,
        adversary_count=2,
        behavior="silent",
        views_to_run=30,
        master_seed=4,
    )
    report = check_trace(trace)
    assert report["ok"], report["violations"]
    tqc_views = {e["view"] for e in trace.events if e["kind"] == "timeout_qc"}
    assert tqc_views, "a silent leader should eventually force a timeout qc"
    recoveries = {
        e["view"]
        for e in trace.events
        if e["kind"] == "proposal" and e.get("from_new_views")
    }
    # each recovery proposal lands two views after the failed one
    assert any(v + 2 in recoveries for v in tqc_views)
    assert trace.stats["commits_total"] > 0


@pytest.mark.parametrize(
    "behavior",
    ["silent", "equivocate-leader", "withhold-votes", "rush-approve", "delay-max"],
)
def test_each_behavior_safe_at_n31(behavior):
    trace = _run(
        n_nodes=31,
        committee_size=10,
        adversary_count=9,
        behavior=behavior,
        views_to_run=25,
        master_seed=3,
    )
    report = check_trace(trace)
    assert report["ok"], report["violations"]


def test_equivocation_never_double_certified():
    trace = _run(
        n_nodes=31,
        committee_size=10,
        adversary_count=10,
        behavior="equivocate-leader",
        views_to_run=25,
        master_seed=9,
    )
    assert any(e["kind"] == "equivocation" for e in trace.events)
    by_view = {}
    for qc in trace.qcs:
        by_view.setdefault(qc["view"], set()).add(qc["block"])
    assert all(len(blocks) == 1 for blocks in by_view.values())


def test_pre_gst_chaos_then_recovery():
    trace = _run(
        n_nodes=10,
        committee_size=3,
        views_to_run=15,
        gst=200,
        pre_gst_drop=0.2,
        master_seed=8,
    )
    report = check_trace(trace)
    assert report["ok"], report["violations"]
    assert trace.stats["commits_total"] > 0


# ---------------------------------------------------------------------------
# determinism / replay


def test_reruns_are_byte_identical():
    sc = dict(
        n_nodes=31, committee_size=10, adversary_count=9,
        behavior="withhold-votes", views_to_run=15, master_seed=6,
    )
    assert _run(**sc).to_jsonl() == _run(**sc).to_jsonl()


def test_different_seeds_differ():
    a = _run(n_nodes=10, committee_size=3, views_to_run=10, master_seed=1)
    b = _run(n_nodes=10, committee_size=3, views_to_run=10, master_seed=2)
    assert a.to_jsonl() != b.to_jsonl()


def test_trace_jsonl_round_trip():
    trace = _run(
        n_nodes=10, committee_size=3, adversary_count=2,
        behavior="rush-approve", views_to_run=10, master_seed=7,
    )
    again = Trace.from_jsonl(trace.to_jsonl())
    assert again.to_jsonl() == trace.to_jsonl()
    assert again.scenario == trace.scenario
    assert again.adversaries == trace.adversaries


def test_replay_reports_identical():
    trace = _run(
        n_nodes=10, committee_size=3, adversary_count=2,
        behavior="silent", views_to_run=10, master_seed=11,
    )
    res = replay(Trace.from_jsonl(trace.to_jsonl()))
    assert res == {"identical": True, "diffs": []}


# ---------------------------------------------------------------------------
# placement


def test_exact_count_placement():
    sc = Scenario(n_nodes=30, committee_size=10, adversary_count=9,
                  views_to_run=1)
    adv = place_adversaries(sc, list(range(30)))
    assert len(adv) == 9 and len(set(adv)) == 9
    assert all(0 <= a < 30 for a in adv)


def test_fraction_placement_clamped_below_third():
    for seed in range(40):
        sc = Scenario(n_nodes=30, committee_size=10, adversary_fraction=0.45,
                      views_to_run=1, master_seed=seed)
        adv = place_adversaries(sc, list(range(30)))
        assert len(adv) <= (30 - 1) // 3


def test_fraction_placement_unclamped_matches_rate():
    hits = 0
    trials = 200
    for seed in range(trials):
        sc = Scenario(n_nodes=50, committee_size=10, adversary_fraction=0.2,
                      clamp_safe=False, views_to_run=1, master_seed=seed)
        hits += len(place_adversaries(sc, list(range(50))))
    mean = hits / trials
    # Binomial(50, 0.2): mean 10, sd ~2.83; the 200-trial average has
    # sd ~0.2, so a band of +-1 is a 5-sigma check
    assert 9.0 < mean < 11.0


def test_placement_deterministic_per_seed():
    sc = Scenario(n_nodes=30, committee_size=10, adversary_count=7,
                  views_to_run=1, master_seed=13)
    assert place_adversaries(sc, list(range(30))) == place_adversaries(
        sc, list(range(30))
    )


def test_liveness_robustness_needs_honest_leader_quorum():
    from carnot.sim import _liveness_robust

    tree = form_overlay(list(range(21)), OverlayParams(n=3, xi=b"rob"))
    assert _liveness_robust(tree, set())
    # corrupt most of the root cluster: child pairs may stay light but the
    # leader can no longer assemble a quorum from honest cluster members
    cluster = tree.root_cluster()
    need = tree.leader_supermajority_threshold()
    byz = set(cluster[: len(cluster) - need + 1])
    assert not _liveness_robust(tree, byz)


def test_child_robustness_predicate():
    tree = form_overlay(list(range(21)), OverlayParams(n=3, xi=b"rob"))
    assert placement_child_robust(tree, set())
    # corrupt an entire sibling pair: 6 of 6 > floor(6/3)
    pair = set(tree.committee(2)) | set(tree.committee(3))
    assert not placement_child_robust(tree, pair)
    # two corruptions in one merged pair of 6 stay within floor(6/3) = 2
    light = set(list(tree.committee(2))[:2])
    assert placement_child_robust(tree, light)


# ---------------------------------------------------------------------------
# checker sensitivity (mutation test)


def test_checker_catches_double_votes(monkeypatch):
    # sabotage vote bookkeeping: a node that forgets its highest voted view
    # will vote again when further child votes arrive
    original = CarnotNode.approve_block

    def amnesiac(self, block, votes):
        before = self.highest_voted_view
        out = original(self, block, votes)
        self.highest_voted_view = before
        return out

    monkeypatch.setattr(CarnotNode, "approve_block", amnesiac)
    trace = _run(n_nodes=10, committee_size=3, views_to_run=6, master_seed=1)
    report = check_trace(trace)
    assert not report["ok"]
    assert any(v["check"] == "double-vote" for v in report["violations"])


def test_checker_catches_forged_commit():
    trace = _run(n_nodes=10, committee_size=3, views_to_run=10, master_seed=1)
    assert check_trace(trace)["ok"]
    # fork one node's history
    trace.commits[3][1]["block"] = "ff" * 32
    report = check_trace(trace)
    assert any(v["check"] == "commit-prefix" for v in report["violations"])


def test_checker_catches_conflicting_qcs():
    trace = _run(n_nodes=10, committee_size=3, views_to_run=10, master_seed=1)
    forged = dict(trace.qcs[0])
    forged["block"] = "ee" * 32
    trace.qcs.append(forged)
    report = check_trace(trace)
    assert any(v["check"] == "single-qc-per-view" for v in report["violations"])


# ---------------------------------------------------------------------------
# misc


def test_mean_verifications_positive():
    trace = _run(n_nodes=10, committee_size=3, views_to_run=10, master_seed=1)
    assert mean_verifications_per_view(trace) > 0


def test_scenario_validation():
    with pytest.raises(InvalidInputError):
        Scenario(n_nodes=0, committee_size=1)
    with pytest.raises(InvalidInputError):
        Scenario(n_nodes=10, committee_size=11)
    with pytest.raises(InvalidInputError):
        Scenario(n_nodes=10, committee_size=3, behavior="nope")
    with pytest.raises(InvalidInputError):
        Scenario(n_nodes=10, committee_size=3, adversary_count=10)
    with pytest.raises(InvalidInputError):
        Scenario(n_nodes=10, committee_size=3, views_to_run=0)


def test_scenario_round_trip():
    sc = Scenario(n_nodes=10, committee_size=3, adversary_fraction=0.1,
                  behavior="delay-max", gst=50, master_seed=99)
    assert Scenario.from_dict(sc.to_dict()) == sc


def test_seed_derivation_separates_domains():
    assert derive_seed("carnot-sim", 1) != derive_seed("carnot-sim", 2)
    assert derive_seed("carnot-sim", 1, "placement") != derive_seed(
        "carnot-sim", 1
    )
