"""Election control through social influence.

An attacker seeds a message in a social network of voters; the message
spreads under the independent cascade model and moves a target candidate up
(constructive control) or down (destructive control) in every reached
voter's ranking. This package estimates margin-of-victory (MOV) and
probability-of-victory (POV) objectives, optimises them with greedy and
threshold-enumeration algorithms, and computes exact optima for checking.
"""

from .cascade import (
    ReverseReachSets,
    Scenario,
    ScenarioBatch,
    exhaustive_batch,
    reach_count,
    reach_indicator,
    reverse_reach_sets,
    sample_batch,
)
from .election import (
    TARGET,
    ControlProblem,
    Mode,
    Objective,
    PreferenceProfile,
    apply_message,
    initial_tally,
    margin_threshold,
    threshold,
    voter_set,
)
from .errors import (
    DuplicateEdgeError,
    ElectionControlError,
    EnumerationLimitError,
    ParseError,
    ValidationError,
)
from .exact import (
    MilpModel,
    OracleResult,
    branch_and_bound,
    brute_force,
    build_milp,
    export_lp,
    export_mps,
    read_lp,
    solve_enumerative,
)
from .graph import DirectedGraph, load_edge_list, out_neighbors, write_edge_list
from .greedy import (
    GreedyTrace,
    ThresholdSchedule,
    enumerate_threshold,
    lazy_greedy,
    mov_constructive,
    mov_destructive,
    pov_constructive,
    pov_destructive,
)
from .objectives import (
    ObjectiveEstimate,
    estimate_mov,
    estimate_pov,
    g_constructive,
    g_destructive,
    margin_constructive,
    margin_destructive,
)

__version__ = "0.1.0"
