"""Canned parameter sets: probability sweeps, sizing grids and scenario
matrices.

Each analysis preset returns plain row dictionaries (one per table line) plus
optional self-checks, so the CLI and the test suite consume the exact same
numbers.  Simulation presets return :class:`~carnot.sim.Scenario` lists; the
standard adversarial matrix is the safety-campaign workload (seeds x
behaviors x network sizes).
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

from .analysis import (
    E1,
    E2,
    Ek,
    ExactCount,
    Fraction,
    PartitionModel,
    SizingParams,
    committee_size_solver,
    committee_size_upper_bound,
    delta_e1,
    delta_e2,
    delta_ek,
    hoeffding_tail_bound,
    hyper_tail,
    hyper_tail_bound,
    sizes_for,
)
from .errors import InvalidInputError
from .sim import BEHAVIOR_KINDS, Scenario, check_trace, run

# ---------------------------------------------------------------------------
# analysis presets

# committee-failure sweep: exact hypergeometric tail vs the closed-form bound
# vs Hoeffding, one committee of size n_mu drawn from N=1000 with M=250
FIG_TAIL_N = 1000
FIG_TAIL_M = 250
FIG_TAIL_A = 1 / 3

# per-event sweeps over the committee count: N=10^4, adversary 1/4 exact
# (hypergeometric) and iid (binomial), odd K from 3 to 103
FIG_EVENTS_N = 10_000
FIG_EVENTS_K = tuple(range(3, 104, 2))
FIG_EVENTS_FRACTION = 1 / 4

# published ceiling on max-over-K of delta(E3(2/3)) in the hypergeometric
# model at N=10^4, M=N/4
E3_TWO_THIRDS_CEILING = 7.31e-53

# sizing grid: minimal committee sizes over a log-spaced node-count grid
FIG_SIZING_N = (10**3, 3 * 10**3, 10**4, 3 * 10**4, 10**5)
FIG_SIZING_DELTA = (1e-3, 1e-4, 1e-5, 1e-6)
FIG_SIZING_A = 1 / 3
FIG_SIZING_P = 1 / 4


def committee_tail_rows() -> list[dict]:
    """Exact tail vs closed-form bound vs Hoeffding over committee sizes."""
    import math

    rows = []
    n, m, a = FIG_TAIL_N, FIG_TAIL_M, FIG_TAIL_A
    for n_mu in range(1, n):
        threshold = math.floor(a * n_mu) + 1
        rows.append(
            {
                "n_mu": n_mu,
                "exact": hyper_tail(n, m, n_mu, threshold),
                "bound": hyper_tail_bound(n, m, n_mu, a),
                "hoeffding": hoeffding_tail_bound(n, m, n_mu, a),
            }
        )
    return rows


_EVENT_PANELS = {
    "e1-third": ("E1(1/3)", lambda model: delta_e1(model, 1 / 3)),
    "e2-third": ("E2(1/3)", lambda model: delta_e2(model, 1 / 3)),
    "e3-third": ("E3(1/3)", lambda model: delta_ek(model, 3, 1 / 3)),
    "e1-half": ("E1(1/2)", lambda model: delta_e1(model, 1 / 2)),
}


def event_probability_rows(panel: str) -> list[dict]:
    """delta(event) as a function of K for both adversary models."""
    if panel not in _EVENT_PANELS:
        raise InvalidInputError(
            f"unknown panel {panel!r}; expected one of {sorted(_EVENT_PANELS)}"
        )
    label, fn = _EVENT_PANELS[panel]
    n = FIG_EVENTS_N
    rows = []
    for model_name, adversary in (
        ("hypergeometric", ExactCount(n // 4)),
        ("binomial", Fraction(FIG_EVENTS_FRACTION)),
    ):
        for k in FIG_EVENTS_K:
            sizes = sizes_for(n, k)
            model = PartitionModel(n, sizes, adversary)
            res = fn(model)
            rows.append(
                {
                    "model": model_name,
                    "K": k,
                    "n": min(sizes),
                    "r": sum(1 for s in sizes if s != min(sizes)),
                    "event": label,
                    "exact": res["exact"],
                    "bound": res["bound"],
                }
            )
    return rows


def e3_two_thirds_ceiling() -> dict:
    """Max over the K sweep of delta(E3(2/3)), hypergeometric model."""
    n = FIG_EVENTS_N
    worst = 0.0
    for k in FIG_EVENTS_K:
        model = PartitionModel(n, sizes_for(n, k), ExactCount(n // 4))
        worst = max(worst, delta_ek(model, 3, 2 / 3)["bound"])
    return {
        "max_delta_e3_two_thirds": worst,
        "ceiling": E3_TWO_THIRDS_CEILING,
        "ok": worst <= E3_TWO_THIRDS_CEILING,
    }


def sizing_rows(
    n_grid=FIG_SIZING_N,
    deltas=FIG_SIZING_DELTA,
    a: float = FIG_SIZING_A,
    p: float = FIG_SIZING_P,
) -> list[dict]:
    """Solver output (K, n, r, achieved prob) plus the logarithmic cap."""
    rows = []
    for n_total in n_grid:
        for delta in deltas:
            res = committee_size_solver(SizingParams(n_total, delta, a, p))
            # The logarithmic cap is stated against the probability actually
            # achieved (the odd-K grid can land far below the budget).
            achieved = res["prob"] if res["prob"] > 0 else delta
            cap = committee_size_upper_bound(
                SizingParams(n_total, achieved, a, p, n_min=res["n"])
            )
            rows.append(
                {
                    "N": n_total,
                    "delta": delta,
                    "K": res["k"],
                    "n": res["n"],
                    "r": res["r"],
                    "prob": res["prob"],
                    "n_upper_bound": cap,
                }
            )
    return rows


ANALYSIS_PRESETS = (
    "committee-tail",
    "events-e1-third",
    "events-e2-third",
    "events-e3-third",
    "events-e1-half",
    "sizing",
)


def analysis_preset_rows(name: str) -> tuple[list[dict], dict]:
    """Rows plus a self-check summary for one named preset."""
    if name == "committee-tail":
        rows = committee_tail_rows()
        bad = sum(
            1
            for row in rows
            if row["bound"] < row["exact"] or row["bound"] > row["hoeffding"] * (1 + 1e-12)
        )
        return rows, {"dominance_violations": bad, "ok": bad == 0}
    if name.startswith("events-"):
        rows = event_probability_rows(name[len("events-") :])
        bad = sum(
            1
            for row in rows
            if row["exact"] is not None and row["bound"] < row["exact"] - 1e-15
        )
        checks = {"dominance_violations": bad, "ok": bad == 0}
        if name == "events-e3-third":
            checks.update(e3_two_thirds_ceiling())
        return rows, checks
    if name == "sizing":
        rows = sizing_rows()
        bad = sum(1 for row in rows if row["K"] > 1 and row["n"] > row["n_upper_bound"])
        return rows, {"cap_violations": bad, "ok": bad == 0}
    raise InvalidInputError(
        f"unknown preset {name!r}; expected one of {ANALYSIS_PRESETS}"
    )


# ---------------------------------------------------------------------------
# simulation presets

# safety-campaign sizes: (n_nodes, committee_size)
MATRIX_SIZES = ((4, 4), (10, 3), (31, 10), (100, 14))

# O(log N) authenticator study: solver-sized committees (delta=0.3, P=1/4)
# so that every network splits into several committees
SCALING_SIZES = ((100, 33), (1000, 111), (10_000, 181))


def happy_scenario(
    n_nodes: int = 10,
    committee_size: int = 3,
    views_to_run: int = 30,
    master_seed: int = 0,
) -> Scenario:
    return Scenario(
        n_nodes=n_nodes,
        committee_size=committee_size,
        views_to_run=views_to_run,
        master_seed=master_seed,
    )


def matrix_scenarios(
    seeds: int = 100,
    views_to_run: int = 50,
    behaviors=BEHAVIOR_KINDS,
    sizes=MATRIX_SIZES,
) -> list[Scenario]:
    """The standard adversarial campaign: seeds x behaviors x sizes."""
    out = []
    for n_nodes, committee_size in sizes:
        m = max(n_nodes // 3 - 1, 0)
        for behavior in behaviors:
            for seed in range(seeds):
                out.append(
                    Scenario(
                        n_nodes=n_nodes,
                        committee_size=committee_size,
                        adversary_count=m,
                        behavior=behavior,
                        views_to_run=views_to_run,
                        master_seed=seed,
                    )
                )
    return out


def scaling_scenarios(views_to_run: int = 12, master_seed: int = 0) -> list[Scenario]:
    """All-honest runs used for the authenticator-per-view regression."""
    out = []
    for n_nodes, committee_size in SCALING_SIZES:
        views = views_to_run if n_nodes < 10_000 else min(views_to_run, 4)
        out.append(
            Scenario(
                n_nodes=n_nodes,
                committee_size=committee_size,
                views_to_run=views,
                view_timeout=120,
                master_seed=master_seed,
            )
        )
    return out


def _run_one(scenario: Scenario) -> dict:
    trace = run(scenario)
    report = check_trace(trace)
    return {
        "n_nodes": scenario.n_nodes,
        "behavior": scenario.behavior,
        "master_seed": scenario.master_seed,
        "ok": report["ok"],
        "violations": report["violations"],
        "stalled": trace.stats["stalled"],
        "truncated": trace.truncated,
        "max_honest_view": trace.stats["max_honest_view"],
        "commits_total": trace.stats["commits_total"],
        "qcs": trace.stats["qcs"],
        "robust_qcs": sum(1 for qc in trace.qcs if qc["robust"]),
        "timeouts": trace.stats["timeouts"],
    }


def run_matrix(scenarios: list[Scenario], workers: int | None = None) -> list[dict]:
    """Run scenarios (optionally in parallel); results keep input order."""
    if workers is None:
        workers = int(os.environ.get("CARNOT_WORKERS", os.cpu_count() or 1))
    if workers <= 1 or len(scenarios) <= 1:
        return [_run_one(s) for s in scenarios]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunk = max(len(scenarios) // (8 * workers), 1)
        return list(pool.map(_run_one, scenarios, chunksize=chunk))
