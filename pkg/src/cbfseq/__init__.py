"""Barrier-function control for sequential reach-avoid tasks.

The package builds pointwise minimum-norm QP controllers from barrier
functions: finite-time rows drive the state into target regions,
invariance rows keep it out of obstacles, and a time-varying composite
row exchanges targets smoothly so the applied input never jumps between
tasks. A fixed-step harness simulates scenarios described as JSON files
and emits CSV/JSON/SVG artifacts.
"""
from .constraints import (
    ClassKappa,
    CompositeContext,
    FcbfParams,
    composite_row,
    fcbf_row,
    weighted_softmin,
    zcbf_row,
)
from .dynamics import (
    ControlAffineSystem,
    NidConfig,
    UnicycleState,
    integrate,
    nid_point,
    nid_to_unicycle,
    single_integrator,
    unicycle,
    wrap_angle,
)
from .geometry import (
    BarrierFunction,
    BarrierValue,
    EllipsoidBarrier,
    HalfplaneBarrier,
    SuperellipseObstacleBarrier,
    softmin,
)
from .harness import (
    ContinuityReport,
    Scenario,
    ScenarioError,
    TrajectoryLog,
    bundled_scenario_names,
    bundled_scenario_path,
    continuity_metric,
    emit_outputs,
    load_scenario,
    merge_reports,
    run,
    scenario_from_dict,
)
from .qp import (
    DEFAULT_TOLERANCES,
    HalfplaneConstraint,
    Infeasible,
    QpProblem,
    QpSolution,
    QpTolerances,
    oracle_grid,
    solve_min_norm,
)
from .scheduler import (
    DONE,
    REACHABILITY,
    TRANSITION,
    PhaseState,
    ReachabilityMap,
    SequenceError,
    Task,
    TaskSequence,
    TransitionFunctions,
    advance_phase,
    compute_alpha,
    indicator,
    transition_complete,
)

__version__ = "0.1.0"

__all__ = [
    "ClassKappa",
    "CompositeContext",
    "FcbfParams",
    "composite_row",
    "fcbf_row",
    "weighted_softmin",
    "zcbf_row",
    "ControlAffineSystem",
    "NidConfig",
    "UnicycleState",
    "integrate",
    "nid_point",
    "nid_to_unicycle",
    "single_integrator",
    "unicycle",
    "wrap_angle",
    "BarrierFunction",
    "BarrierValue",
    "EllipsoidBarrier",
    "HalfplaneBarrier",
    "SuperellipseObstacleBarrier",
    "softmin",
    "ContinuityReport",
    "Scenario",
    "ScenarioError",
    "TrajectoryLog",
    "bundled_scenario_names",
    "bundled_scenario_path",
    "continuity_metric",
    "emit_outputs",
    "load_scenario",
    "merge_reports",
    "run",
    "scenario_from_dict",
    "DEFAULT_TOLERANCES",
    "HalfplaneConstraint",
    "Infeasible",
    "QpProblem",
    "QpSolution",
    "QpTolerances",
    "oracle_grid",
    "solve_min_norm",
    "DONE",
    "REACHABILITY",
    "TRANSITION",
    "PhaseState",
    "ReachabilityMap",
    "SequenceError",
    "Task",
    "TaskSequence",
    "TransitionFunctions",
    "advance_phase",
    "compute_alpha",
    "indicator",
    "transition_complete",
    "__version__",
]
