"""Carnot BFT consensus kit.

A committee-tree consensus engineering toolbox: deterministic overlay
construction, a per-node protocol state machine, a seeded adversarial
simulator with trace checking, and numerical failure-probability analysis
for committee sizing.
"""

from .analysis import (
    E0,
    E1,
    E2,
    Ek,
    ExactCount,
    Fraction,
    PartitionModel,
    SizingParams,
    brute_force_delta,
    committee_size_solver,
    committee_size_upper_bound,
    delta_e0,
    delta_e1,
    delta_e2,
    delta_ek,
    hoeffding_tail_bound,
    hyper_tail,
    hyper_tail_bound,
    qc_necessary_condition_bound,
    safety_failure_bound,
    sizes_for,
)
from .engine import CarnotNode, EngineOutput
from .errors import InvalidInputError, NotFoundError
from .messages import (
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
)
from .overlay import (
    CommitteeTree,
    OverlayParams,
    form_overlay,
    leader_for_view,
    next_beacon,
    shuffle,
    tree_queries,
)
from .prng import Sha256Counter, derive_seed
from .sigs import AggSignature, HashedTagScheme, KeyPair, Signature
from .sim import (
    BEHAVIOR_KINDS,
    Scenario,
    Trace,
    check_trace,
    mean_verifications_per_view,
    place_adversaries,
    placement_child_robust,
    replay,
    run,
)

__version__ = "0.1.0"

__all__ = [
    "AggSignature",
    "AggregatedQc",
    "BEHAVIOR_KINDS",
    "Block",
    "CarnotNode",
    "CommitteeTree",
    "E0",
    "E1",
    "E2",
    "Ek",
    "ExactCount",
    "Fraction",
    "HashedTagScheme",
    "InvalidInputError",
    "KeyPair",
    "NewView",
    "NotFoundError",
    "EngineOutput",
    "OverlayParams",
    "PartitionModel",
    "Qc",
    "Scenario",
    "Sha256Counter",
    "Signature",
    "SizingParams",
    "Timeout",
    "TimeoutQc",
    "Trace",
    "Vote",
    "brute_force_delta",
    "canonical_encode",
    "check_trace",
    "committee_size_solver",
    "committee_size_upper_bound",
    "decode",
    "delta_e0",
    "delta_e1",
    "delta_e2",
    "delta_ek",
    "derive_seed",
    "form_overlay",
    "genesis_block",
    "genesis_qc",
    "hoeffding_tail_bound",
    "hyper_tail",
    "hyper_tail_bound",
    "leader_for_view",
    "make_block",
    "mean_verifications_per_view",
    "next_beacon",
    "place_adversaries",
    "placement_child_robust",
    "qc_necessary_condition_bound",
    "replay",
    "run",
    "safety_failure_bound",
    "shuffle",
    "sizes_for",
    "tree_queries",
]
