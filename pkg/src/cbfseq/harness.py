"""Scenario files, the closed-loop simulation driver, and artifact emission.

A scenario bundles a system model, named barriers, an ordered task sequence
over target regions, controller parameters and simulation settings into one
strict JSON document. The driver replays it in one of two modes:

* ``smooth``: one composite reachability row whose weights are ramped by
  the phase machine, plus one invariance row per safety barrier. Control
  is continuous across task boundaries.
* ``discrete``: the switching baseline. One finite-time reachability row
  per barrier of the current target, swapped for the next target's rows at
  the first step after entry, plus the same safety rows. Control jumps at
  every switch.

Each step solves a minimum-norm QP over the input box, applies the input
with a zero-order hold and logs state, control, weights, barrier values and
solver diagnostics. Emission produces a deterministic trajectory CSV, an
events JSON and three SVG plots.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .constraints import (
    ClassKappa,
    CompositeContext,
    FcbfParams,
    composite_row,
    fcbf_row,
    weighted_softmin,
    zcbf_row,
)
from .dynamics import NidConfig, integrate, nid_point, single_integrator, unicycle
from .geometry import (
    BarrierFunction,
    EllipsoidBarrier,
    HalfplaneBarrier,
    SuperellipseObstacleBarrier,
)
from .qp import HalfplaneConstraint, Infeasible, QpProblem, solve_min_norm
from .scheduler import (
    DONE,
    REACHABILITY,
    TRANSITION,
    PhaseState,
    ReachabilityMap,
    Task,
    TaskSequence,
    TransitionFunctions,
    advance_phase,
    compute_alpha,
    indicator,
)

__all__ = [
    "SCHEMA_VERSION",
    "ScenarioError",
    "Scenario",
    "scenario_from_dict",
    "load_scenario",
    "bundled_scenario_path",
    "bundled_scenario_names",
    "TrajectoryLog",
    "ContinuityReport",
    "run",
    "continuity_metric",
    "merge_reports",
    "emit_outputs",
]

SCHEMA_VERSION = "scenario-v1"

# Discrete-mode arrival threshold, matched to the QP feasibility tolerance.
# The reachability forcing gamma |h|^rho vanishes as h -> 0, so once the
# demanded row offset drops below the solver's resolution the input is
# rounded to zero and h parks just short of the boundary (for rho = 0.8 at
# gamma = 0.5 the gap is ~1e-11). Requiring h >= 0 exactly would then never
# record the arrival. The smooth mode needs no such slack: its tanh forcing
# stays bounded away from zero at the boundary and pushes h through.
_ARRIVAL_TOL = 1e-9


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario data."""


# ---------------------------------------------------------------------------
# scenario model


@dataclass(frozen=True)
class Scenario:
    """Validated scenario data; build through scenario_from_dict or load_scenario."""

    name: str
    system_type: str
    control_mode: str  # "planar" | "nid" | "direct"
    nid_lookahead: float
    workspace_x: tuple[float, float]
    workspace_y: tuple[float, float]
    barrier_names: tuple[str, ...]
    barriers: tuple[BarrierFunction, ...]
    targets: dict[str, tuple[int, ...]]
    task_sequence: tuple[str, ...]
    safety_indices: tuple[int, ...]
    fcbf: FcbfParams
    safety_mu: ClassKappa | None
    composite_gamma: float
    box: float
    transition_duration: float
    softmin_active_only: bool
    slack_on_infeasible: bool
    dt: float
    t_max: float
    tail: float
    initial_state: tuple[float, ...]
    method: str

    def __post_init__(self):
        if self.dt <= 0.0 or not math.isfinite(self.dt):
            raise ScenarioError(f"dt must be positive, got {self.dt}")
        if self.t_max < self.dt or not math.isfinite(self.t_max):
            raise ScenarioError(f"t_max must be at least dt, got {self.t_max}")
        if self.tail < 0.0 or not math.isfinite(self.tail):
            raise ScenarioError(f"tail must be nonnegative, got {self.tail}")

    @property
    def reach_indices(self) -> tuple[int, ...]:
        """Barrier indices referenced by any target, in barrier-list order."""
        used = set()
        for idx in self.targets.values():
            used.update(idx)
        return tuple(i for i in range(len(self.barriers)) if i in used)

    def sequence(self) -> TaskSequence:
        """Scheduler view of the task list, indices relative to reach_indices."""
        reach = self.reach_indices
        pos = {g: p for p, g in enumerate(reach)}
        mapping = {name: tuple(pos[g] for g in idx) for name, idx in self.targets.items()}
        rm = ReachabilityMap(n_barriers=len(reach), mapping=mapping)
        tasks = tuple(Task(name, self.safety_indices) for name in self.task_sequence)
        return TaskSequence(tasks, rm)


def _check_keys(d: dict, where: str, required: set[str], optional: set[str] = frozenset()):
    if not isinstance(d, dict):
        raise ScenarioError(f"{where} must be an object, got {type(d).__name__}")
    unknown = sorted(set(d) - required - set(optional))
    if unknown:
        raise ScenarioError(f"{where} has unknown keys {unknown}")
    missing = sorted(required - set(d))
    if missing:
        raise ScenarioError(f"{where} is missing required keys {missing}")


def _pair(value, where: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in value)
    except (TypeError, ValueError):
        raise ScenarioError(f"{where} must be a pair of numbers") from None
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ScenarioError(f"{where} must be finite")
    return a, b


def _parse_barrier(entry, where: str) -> tuple[str, BarrierFunction]:
    _check_keys(
        entry,
        where,
        required={"name", "type"},
        optional={"center", "semi_axes", "sigma", "rotation", "exponent", "offset", "normal"},
    )
    name = entry["name"]
    if not isinstance(name, str) or not name:
        raise ScenarioError(f"{where}: barrier name must be a nonempty string")
    kind = entry["type"]
    try:
        if kind == "ellipsoid":
            _check_keys(entry, where, required={"name", "type", "center", "semi_axes"})
            return name, EllipsoidBarrier(entry["center"], entry["semi_axes"])
        if kind == "superellipse":
            _check_keys(
                entry,
                where,
                required={"name", "type", "center", "sigma", "rotation", "exponent", "offset"},
            )
            return name, SuperellipseObstacleBarrier(
                entry["center"], entry["sigma"], entry["rotation"], entry["exponent"], entry["offset"]
            )
        if kind == "halfplane":
            _check_keys(entry, where, required={"name", "type", "normal", "offset"})
            return name, HalfplaneBarrier(entry["normal"], entry["offset"])
    except ValueError as exc:
        raise ScenarioError(f"{where} ({name!r}): {exc}") from None
    raise ScenarioError(f"{where}: unknown barrier type {kind!r}")


def _parse_mu(entry, where: str) -> ClassKappa:
    _check_keys(entry, where, required={"kind", "gamma"}, optional={"exponent"})
    kind = entry["kind"]
    try:
        if kind == "linear":
            return ClassKappa.linear(entry["gamma"])
        if kind == "cubic":
            return ClassKappa.cubic(entry["gamma"])
        if kind == "power":
            if "exponent" not in entry:
                raise ScenarioError(f"{where}: power margin needs an exponent")
            return ClassKappa(entry["gamma"], entry["exponent"])
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from None
    raise ScenarioError(f"{where}: unknown margin kind {kind!r}")


def scenario_from_dict(data, source: str = "<dict>") -> Scenario:
    """Build a Scenario from parsed JSON; every key is checked, unknown keys fail."""
    _check_keys(
        data,
        source,
        required={
            "schema",
            "name",
            "system",
            "workspace",
            "barriers",
            "targets",
            "task_sequence",
            "control",
            "simulation",
        },
        optional={"safety"},
    )
    if data["schema"] != SCHEMA_VERSION:
        raise ScenarioError(
            f"{source}: schema is {data['schema']!r}, this build reads {SCHEMA_VERSION!r}"
        )
    name = data["name"]
    if not isinstance(name, str) or not name:
        raise ScenarioError(f"{source}: name must be a nonempty string")

    sysd = data["system"]
    _check_keys(sysd, f"{source}: system", required={"type"}, optional={"control", "lookahead"})
    system_type = sysd["type"]
    lookahead = 0.05
    if system_type == "single_integrator":
        if "control" in sysd or "lookahead" in sysd:
            raise ScenarioError(f"{source}: system: single integrator takes no control/lookahead keys")
        control_mode = "planar"
    elif system_type == "unicycle":
        control_mode = sysd.get("control")
        if control_mode not in ("nid", "direct"):
            raise ScenarioError(f"{source}: system: unicycle control must be 'nid' or 'direct'")
        if "lookahead" in sysd:
            if control_mode != "nid":
                raise ScenarioError(f"{source}: system: lookahead only applies to nid control")
            lookahead = float(sysd["lookahead"])
        if control_mode == "nid":
            try:
                NidConfig(lookahead)
            except ValueError as exc:
                raise ScenarioError(f"{source}: system: {exc}") from None
    else:
        raise ScenarioError(f"{source}: unknown system type {system_type!r}")

    wsd = data["workspace"]
    _check_keys(wsd, f"{source}: workspace", required={"x", "y"})
    wx = _pair(wsd["x"], f"{source}: workspace.x")
    wy = _pair(wsd["y"], f"{source}: workspace.y")
    if wx[0] >= wx[1] or wy[0] >= wy[1]:
        raise ScenarioError(f"{source}: workspace bounds must satisfy lo < hi")

    raw_barriers = data["barriers"]
    if not isinstance(raw_barriers, list) or not raw_barriers:
        raise ScenarioError(f"{source}: barriers must be a nonempty list")
    names: list[str] = []
    barrier_objs: list[BarrierFunction] = []
    for i, entry in enumerate(raw_barriers):
        bname, obj = _parse_barrier(entry, f"{source}: barriers[{i}]")
        if bname in names:
            raise ScenarioError(f"{source}: duplicate barrier name {bname!r}")
        center = getattr(obj, "center", None)
        if center is not None:
            cx, cy = float(center[0]), float(center[1])
            if not (wx[0] <= cx <= wx[1] and wy[0] <= cy <= wy[1]):
                raise ScenarioError(
                    f"{source}: barrier {bname!r} center ({cx}, {cy}) lies outside the workspace"
                )
        names.append(bname)
        barrier_objs.append(obj)
    index_of = {n: i for i, n in enumerate(names)}

    def resolve(seq, where):
        out = []
        for n in seq:
            if n not in index_of:
                raise ScenarioError(f"{where} references unknown barrier {n!r}")
            out.append(index_of[n])
        return tuple(out)

    raw_targets = data["targets"]
    if not isinstance(raw_targets, dict) or not raw_targets:
        raise ScenarioError(f"{source}: targets must be a nonempty object")
    targets = {}
    for tname, blist in raw_targets.items():
        if not isinstance(blist, list) or not blist:
            raise ScenarioError(f"{source}: target {tname!r} must list at least one barrier")
        targets[tname] = resolve(blist, f"{source}: target {tname!r}")

    task_sequence = data["task_sequence"]
    if not isinstance(task_sequence, list) or not task_sequence:
        raise ScenarioError(f"{source}: task_sequence must be a nonempty list")
    for tname in task_sequence:
        if tname not in targets:
            raise ScenarioError(f"{source}: task_sequence references unknown target {tname!r}")

    safety = resolve(data.get("safety", []), f"{source}: safety")

    ctl = data["control"]
    _check_keys(
        ctl,
        f"{source}: control",
        required={"fcbf", "composite_gamma", "box", "transition_duration"},
        optional={"safety_mu", "softmin_active_only", "slack_on_infeasible"},
    )
    fcbd = ctl["fcbf"]
    _check_keys(fcbd, f"{source}: control.fcbf", required={"gamma", "rho"})
    try:
        fcbf = FcbfParams(fcbd["gamma"], fcbd["rho"])
    except ValueError as exc:
        raise ScenarioError(f"{source}: control.fcbf: {exc}") from None
    safety_mu = None
    if "safety_mu" in ctl:
        safety_mu = _parse_mu(ctl["safety_mu"], f"{source}: control.safety_mu")
    if safety and safety_mu is None:
        raise ScenarioError(f"{source}: safety barriers listed but control.safety_mu missing")
    composite_gamma = float(ctl["composite_gamma"])
    if not (math.isfinite(composite_gamma) and composite_gamma > 0.0):
        raise ScenarioError(f"{source}: control.composite_gamma must be positive")
    box = float(ctl["box"])
    if not (math.isfinite(box) and box > 0.0):
        raise ScenarioError(f"{source}: control.box must be positive")
    duration = float(ctl["transition_duration"])
    if not (math.isfinite(duration) and duration > 0.0):
        raise ScenarioError(f"{source}: control.transition_duration must be positive")
    active_only = bool(ctl.get("softmin_active_only", False))
    slack = bool(ctl.get("slack_on_infeasible", False))

    sim = data["simulation"]
    _check_keys(
        sim,
        f"{source}: simulation",
        required={"dt", "t_max", "initial_state"},
        optional={"method", "tail"},
    )
    method = sim.get("method", "rk4")
    if method not in ("rk4", "euler"):
        raise ScenarioError(f"{source}: simulation.method must be 'rk4' or 'euler'")
    state_dim = 2 if system_type == "single_integrator" else 3
    init = sim["initial_state"]
    if not isinstance(init, list) or len(init) != state_dim:
        raise ScenarioError(
            f"{source}: simulation.initial_state must have {state_dim} entries for {system_type}"
        )
    initial_state = tuple(float(v) for v in init)
    if not all(math.isfinite(v) for v in initial_state):
        raise ScenarioError(f"{source}: simulation.initial_state must be finite")

    try:
        scenario = Scenario(
            name=name,
            system_type=system_type,
            control_mode=control_mode,
            nid_lookahead=float(lookahead),
            workspace_x=wx,
            workspace_y=wy,
            barrier_names=tuple(names),
            barriers=tuple(barrier_objs),
            targets=targets,
            task_sequence=tuple(task_sequence),
            safety_indices=safety,
            fcbf=fcbf,
            safety_mu=safety_mu,
            composite_gamma=composite_gamma,
            box=box,
            transition_duration=duration,
            softmin_active_only=active_only,
            slack_on_infeasible=slack,
            dt=float(sim["dt"]),
            t_max=float(sim["t_max"]),
            tail=float(sim.get("tail", 0.0)),
            initial_state=initial_state,
            method=method,
        )
        scenario.sequence()  # validates target resolution and consecutive distinctness
    except (ValueError, ScenarioError) as exc:
        raise ScenarioError(f"{source}: {exc}") from None
    return scenario


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario JSON file."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {p}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"{p}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    return scenario_from_dict(data, source=str(p))


def bundled_scenario_names() -> tuple[str, ...]:
    base = resources.files("cbfseq") / "scenarios"
    return tuple(sorted(p.name[: -len(".json")] for p in base.iterdir() if p.name.endswith(".json")))


def bundled_scenario_path(name: str) -> Path:
    """Filesystem path of a scenario shipped with the package."""
    fname = name if name.endswith(".json") else name + ".json"
    trav = resources.files("cbfseq") / "scenarios" / fname
    if not trav.is_file():
        raise ScenarioError(
            f"no bundled scenario named {name!r}; available: {', '.join(bundled_scenario_names())}"
        )
    return Path(str(trav))


# ---------------------------------------------------------------------------
# simulation driver


@dataclass
class TrajectoryLog:
    """Sampled closed-loop run: per-step records plus event lists."""

    scenario: Scenario
    mode: str
    t: np.ndarray
    state: np.ndarray
    control: np.ndarray
    alpha: np.ndarray
    h: np.ndarray
    softmin: np.ndarray
    qp_time_us: np.ndarray
    active_sets: list
    arrivals: list
    transition_ends: list
    infeasible_events: list
    completed: bool

    def __len__(self) -> int:
        return len(self.t)


def _nid_transform(row: HalfplaneConstraint, phi: float, lookahead: float) -> HalfplaneConstraint:
    """Re-express a planar-velocity row in (v, omega) coordinates.

    The controlled point moves at w = R(phi) (v, l omega), so a row a^T w >= b
    becomes (R(phi)^T a) . (v, l omega) >= b with the second coefficient
    scaled by the lookahead.
    """
    c = math.cos(phi)
    s = math.sin(phi)
    a = row.a
    return HalfplaneConstraint(
        a=np.array([a[0] * c + a[1] * s, lookahead * (-a[0] * s + a[1] * c)]),
        b=row.b,
        label=row.label,
    )


def _relaxed_solve(rows, n_reach, box):
    """Smallest common slack on the reachability rows that restores feasibility.

    Returns (solution, slack) or (None, None) when the safety rows and box
    are jointly infeasible on their own, in which case nothing may be
    relaxed. Bisection on the slack; each probe is an exact solve.
    """
    safe_rows = tuple(rows[n_reach:])
    try:
        base = solve_min_norm(QpProblem(safe_rows, box, 2))
    except Infeasible:
        return None, None
    hi = 0.0
    for row in rows[:n_reach]:
        hi = max(hi, row.b - float(row.a @ base.u))
    hi = max(hi, 0.0) + 1e-9

    def attempt(s):
        relaxed = tuple(
            HalfplaneConstraint(r.a, r.b - s, r.label) for r in rows[:n_reach]
        ) + safe_rows
        return solve_min_norm(QpProblem(relaxed, box, 2))

    lo = 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        try:
            attempt(mid)
            hi = mid
        except Infeasible:
            lo = mid
    # sit 0.1% above the bracket: solving exactly at the feasibility edge
    # leaves every candidate at the tolerance boundary, where last-ulp
    # rounding decides which ones survive
    slack = hi * 1.001 + 1e-12
    return attempt(slack), slack


def run(scenario: Scenario, mode: str = "smooth") -> TrajectoryLog:
    """Simulate a scenario and return the full per-step log.

    The loop runs on the fixed grid t_k = k dt until the final task
    completes (plus the configured tail) or t_max is reached. Each step
    evaluates every barrier at the planning state, advances the phase
    machine, assembles the constraint rows for the selected mode, solves
    the minimum-norm QP and integrates one zero-order-hold step. A QP
    infeasibility is recorded with its full step context and re-raised,
    unless the scenario enables the reachability-row slack fallback; safety
    rows are never relaxed.
    """
    if mode not in ("smooth", "discrete"):
        raise ValueError(f"mode must be 'smooth' or 'discrete', got {mode!r}")
    barriers = scenario.barriers
    n_b = len(barriers)
    reach_idx = scenario.reach_indices
    reach_arr = np.array(reach_idx, dtype=int)
    k_reach = len(reach_idx)
    reach_barriers = tuple(barriers[g] for g in reach_idx)
    seq = scenario.sequence()
    tf = TransitionFunctions.sin_cos_pair(scenario.transition_duration)
    mu = scenario.safety_mu
    dt = scenario.dt
    box = scenario.box
    active_only = scenario.softmin_active_only
    nid_mode = scenario.control_mode == "nid"
    direct = scenario.control_mode == "direct"
    system = unicycle() if scenario.system_type == "unicycle" else single_integrator()
    si = single_integrator()
    nid = NidConfig(scenario.nid_lookahead) if nid_mode else None
    row_system = system if direct else si

    n_cap = int(math.floor(scenario.t_max / dt + 1e-9)) + 2
    t_log = np.empty(n_cap)
    state_log = np.empty((n_cap, system.state_dim))
    u_log = np.empty((n_cap, system.input_dim))
    alpha_log = np.empty((n_cap, k_reach))
    h_log = np.empty((n_cap, n_b))
    sm_log = np.empty(n_cap)
    qp_log = np.empty(n_cap)
    active_sets: list = []
    arrivals: list = []
    transition_ends: list = []
    infeasible_events: list = []

    phase = PhaseState.initial(seq)
    disc_task = 0
    disc_done = False
    done_time: float | None = None
    completed = False
    state = np.array(scenario.initial_state, dtype=float)
    safety_labels = [f"safe[{scenario.barrier_names[g]}]" for g in scenario.safety_indices]

    def record_hop(old: PhaseState, new: PhaseState, t: float):
        if old.flag == REACHABILITY and new.flag in (TRANSITION, DONE):
            arrivals.append(
                {
                    "task": scenario.task_sequence[old.task_index],
                    "task_index": old.task_index,
                    "t": t,
                }
            )
        elif old.flag == TRANSITION and new.flag == REACHABILITY:
            transition_ends.append({"task_index": old.task_index, "t": t})

    def partial_log(n: int) -> TrajectoryLog:
        return TrajectoryLog(
            scenario=scenario,
            mode=mode,
            t=t_log[:n].copy(),
            state=state_log[:n].copy(),
            control=u_log[:n].copy(),
            alpha=alpha_log[:n].copy(),
            h=h_log[:n].copy(),
            softmin=sm_log[:n].copy(),
            qp_time_us=qp_log[:n].copy(),
            active_sets=list(active_sets),
            arrivals=list(arrivals),
            transition_ends=list(transition_ends),
            infeasible_events=list(infeasible_events),
            completed=completed,
        )

    step = 0
    while step < n_cap:
        t = step * dt
        plan = nid_point(state, nid) if nid_mode else state
        vals = np.empty(n_b)
        for ib in range(n_b):
            vals[ib] = barriers[ib].evaluate(plan).value

        if mode == "smooth":
            while True:
                new = advance_phase(phase, plan, t, seq, reach_barriers, tf)
                if new is phase:
                    break
                record_hop(phase, new, t)
                phase = new
            if phase.flag == DONE and done_time is None:
                done_time = t
                completed = True
            alpha, alpha_dot = compute_alpha(t, phase, seq, tf)
        else:
            while not disc_done and all(
                vals[g] >= -_ARRIVAL_TOL for g in (reach_idx[p] for p in seq.delta(disc_task))
            ):
                arrivals.append(
                    {
                        "task": scenario.task_sequence[disc_task],
                        "task_index": disc_task,
                        "t": t,
                    }
                )
                if disc_task == len(seq) - 1:
                    disc_done = True
                    done_time = t
                    completed = True
                else:
                    disc_task += 1
            alpha = indicator(seq.delta(disc_task), k_reach)
            alpha_dot = np.zeros(k_reach)

        row_state = plan if not direct else state
        rows: list[HalfplaneConstraint] = []
        if mode == "smooth":
            ctx = CompositeContext(reach_barriers, alpha, alpha_dot, scenario.composite_gamma)
            rows.append(composite_row(ctx, row_system, row_state, active_only=active_only))
        else:
            for p in seq.delta(disc_task):
                g = reach_idx[p]
                rows.append(
                    fcbf_row(
                        reach_barriers[p],
                        row_system,
                        row_state,
                        scenario.fcbf,
                        label=f"reach[{scenario.barrier_names[g]}]",
                    )
                )
        n_reach_rows = len(rows)
        for g, label in zip(scenario.safety_indices, safety_labels):
            rows.append(zcbf_row(barriers[g], row_system, row_state, mu, label=label))
        if nid_mode:
            phi = float(state[2])
            rows = [_nid_transform(r, phi, nid.lookahead) for r in rows]

        problem = QpProblem(tuple(rows), box, 2)
        t0 = time.perf_counter_ns()
        relaxed_by = None
        try:
            sol = solve_min_norm(problem)
        except Infeasible as exc:
            sol = None
            if scenario.slack_on_infeasible:
                sol, relaxed_by = _relaxed_solve(rows, n_reach_rows, box)
            if sol is None:
                qp_ns = time.perf_counter_ns() - t0
                t_log[step] = t
                state_log[step] = state
                u_log[step] = np.nan
                alpha_log[step] = alpha
                h_log[step] = vals
                sm_log[step] = weighted_softmin(alpha, vals[reach_arr], active_only=active_only)
                qp_log[step] = qp_ns / 1000.0
                active_sets.append(())
                event = {
                    "t": t,
                    "state": [float(v) for v in state],
                    "detail": str(exc),
                }
                infeasible_events.append(event)
                raise Infeasible(
                    f"QP infeasible at t = {t:.6g} in scenario {scenario.name!r}",
                    context={
                        "t": t,
                        "state": [float(v) for v in state],
                        "rows": [(r.a.tolist(), r.b, r.label) for r in rows],
                        "box": box,
                        "log": partial_log(step + 1),
                    },
                ) from exc
            infeasible_events.append(
                {
                    "t": t,
                    "state": [float(v) for v in state],
                    "relaxed_by": float(relaxed_by),
                    "detail": "reachability rows relaxed",
                }
            )
        qp_ns = time.perf_counter_ns() - t0
        u = sol.u

        t_log[step] = t
        state_log[step] = state
        u_log[step] = u
        alpha_log[step] = alpha
        h_log[step] = vals
        sm_log[step] = weighted_softmin(alpha, vals[reach_arr], active_only=active_only)
        qp_log[step] = qp_ns / 1000.0
        active_sets.append(sol.active_set)

        if done_time is not None and t >= done_time + scenario.tail - 1e-9:
            break
        if t >= scenario.t_max - 1e-9:
            break
        state = integrate(system, state, u, dt, scenario.method)
        step += 1

    return partial_log(step + 1)


# ---------------------------------------------------------------------------
# continuity metric


@dataclass(frozen=True)
class ContinuityReport:
    """Largest per-step control change, when it happened, and a per-mode table."""

    max_jump: float
    jump_times: tuple[float, ...]
    mode_table: dict[str, float]


def continuity_metric(log: TrajectoryLog, threshold: float | None = None) -> ContinuityReport:
    """Max over steps of ||u(t+dt) - u(t)||_inf plus the steps that carry it.

    jump_times lists the times whose step change reaches the threshold
    (half the maximum jump when not given).
    """
    if len(log) < 2:
        return ContinuityReport(0.0, (), {log.mode: 0.0})
    du = np.max(np.abs(np.diff(log.control, axis=0)), axis=1)
    max_jump = float(du.max())
    if max_jump == 0.0:
        return ContinuityReport(0.0, (), {log.mode: 0.0})
    thr = threshold if threshold is not None else 0.5 * max_jump
    times = tuple(float(tv) for tv in log.t[1:][du >= thr])
    return ContinuityReport(max_jump, times, {log.mode: max_jump})


def merge_reports(*reports: ContinuityReport) -> ContinuityReport:
    """Combine per-mode reports into one comparison table."""
    table: dict[str, float] = {}
    times: list[float] = []
    for r in reports:
        table.update(r.mode_table)
        times.extend(r.jump_times)
    return ContinuityReport(max(table.values()), tuple(sorted(times)), table)


# ---------------------------------------------------------------------------
# emission


def _fmt(v: float) -> str:
    return repr(float(v))


def _csv_header(log: TrajectoryLog) -> list[str]:
    s = log.scenario
    cols = ["t"]
    cols += ["x", "y"] if s.system_type == "single_integrator" else ["x", "y", "phi"]
    cols += [f"u_{j + 1}" for j in range(log.control.shape[1])]
    cols += [f"alpha_{j + 1}" for j in range(log.alpha.shape[1])]
    cols += [f"h_{j + 1}" for j in range(log.h.shape[1])]
    cols += ["softmin", "qp_us"]
    return cols


def _write_csv(log: TrajectoryLog, path: Path, timing_in_csv: bool):
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_csv_header(log))
        for i in range(len(log)):
            row = [_fmt(log.t[i])]
            row += [_fmt(v) for v in log.state[i]]
            row += [_fmt(v) for v in log.control[i]]
            row += [_fmt(v) for v in log.alpha[i]]
            row += [_fmt(v) for v in log.h[i]]
            row.append(_fmt(log.softmin[i]))
            row.append(_fmt(log.qp_time_us[i]) if timing_in_csv else _fmt(0.0))
            writer.writerow(row)


def _events_payload(log: TrajectoryLog, report: ContinuityReport | None) -> dict:
    payload = {
        "scenario": log.scenario.name,
        "mode": log.mode,
        "completed": log.completed,
        "final_time": float(log.t[-1]) if len(log) else None,
        "arrivals": log.arrivals,
        "transition_ends": log.transition_ends,
        "infeasible": log.infeasible_events,
        "qp_time_us": {
            "mean": float(np.mean(log.qp_time_us)) if len(log) else None,
            "max": float(np.max(log.qp_time_us)) if len(log) else None,
            "count": int(len(log)),
        },
    }
    if report is not None:
        payload["continuity"] = {
            "max_jump": report.max_jump,
            "jump_times": list(report.jump_times),
            "mode_table": report.mode_table,
        }
    return payload


def _superellipse_outline(b: SuperellipseObstacleBarrier, n: int = 400) -> np.ndarray:
    ts = np.linspace(0.0, 2.0 * math.pi, n)
    e = 2.0 / b.exponent
    cw = np.sign(np.cos(ts)) * np.abs(np.cos(ts)) ** e
    sw = np.sign(np.sin(ts)) * np.abs(np.sin(ts)) ** e
    w = b.offset * np.stack([cw, sw])
    z = b.sigma[:, None] * w
    c, s = math.cos(b.rotation), math.sin(b.rotation)
    rot = np.array([[c, -s], [s, c]])
    return b.center[:, None] + rot @ z


def _ellipse_outline(b: EllipsoidBarrier, n: int = 200) -> np.ndarray:
    ts = np.linspace(0.0, 2.0 * math.pi, n)
    return b.center[:, None] + np.stack(
        [b.semi_axes[0] * np.cos(ts), b.semi_axes[1] * np.sin(ts)]
    )


def _make_figure(figsize):
    from matplotlib.backends.backend_svg import FigureCanvasSVG
    from matplotlib.figure import Figure

    fig = Figure(figsize=figsize)
    FigureCanvasSVG(fig)
    return fig


def _plot_controls(log: TrajectoryLog, path: Path):
    fig = _make_figure((7.0, 4.0))
    ax = fig.subplots()
    labels = ["v", "omega"] if log.scenario.system_type == "unicycle" else ["u_x", "u_y"]
    for j in range(log.control.shape[1]):
        ax.plot(log.t, log.control[:, j], label=labels[j], lw=1.2)
    for ev in log.arrivals:
        ax.axvline(ev["t"], color="0.75", lw=0.8, ls="--")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("control input")
    ax.set_title(f"{log.scenario.name} ({log.mode})")
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, format="svg")


def _plot_workspace(log: TrajectoryLog, path: Path):
    s = log.scenario
    fig = _make_figure((6.4, 4.8))
    ax = fig.subplots()
    target_set = set()
    for idx in s.targets.values():
        target_set.update(idx)
    for i, b in enumerate(s.barriers):
        if isinstance(b, SuperellipseObstacleBarrier):
            pts = _superellipse_outline(b)
            ax.fill(pts[0], pts[1], color="0.8", zorder=1)
            ax.plot(pts[0], pts[1], color="0.3", lw=1.0, zorder=2)
            label_at = b.center
        elif isinstance(b, HalfplaneBarrier):
            # boundary line n . p = offset, drawn across the workspace
            n = b.normal / float(np.linalg.norm(b.normal))
            p0 = b.offset * b.normal / float(b.normal @ b.normal)
            span = max(
                s.workspace_x[1] - s.workspace_x[0], s.workspace_y[1] - s.workspace_y[0]
            )
            tangent = np.array([-n[1], n[0]])
            seg = np.stack([p0 - span * tangent, p0 + span * tangent])
            ax.plot(seg[:, 0], seg[:, 1], color="tab:green", lw=1.2, ls="--", zorder=2)
            label_at = p0 + 0.05 * span * n
        else:
            pts = _ellipse_outline(b)
            color = "tab:green" if i in target_set else "tab:orange"
            ax.plot(pts[0], pts[1], color=color, lw=1.2, zorder=2)
            label_at = b.center
        ax.annotate(
            s.barrier_names[i],
            xy=(float(label_at[0]), float(label_at[1])),
            ha="center",
            va="center",
            fontsize=9,
        )
    ax.plot(log.state[:, 0], log.state[:, 1], color="tab:blue", lw=1.3, zorder=3)
    ax.plot(log.state[0, 0], log.state[0, 1], "ko", ms=5, zorder=4)
    for ev in log.arrivals:
        i = int(round(ev["t"] / s.dt))
        if 0 <= i < len(log):
            ax.plot(log.state[i, 0], log.state[i, 1], "k^", ms=5, zorder=4)
    ax.set_xlim(*s.workspace_x)
    ax.set_ylim(*s.workspace_y)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(f"{s.name} ({log.mode})")
    fig.tight_layout()
    fig.savefig(path, format="svg")


def _plot_alpha(log: TrajectoryLog, path: Path):
    s = log.scenario
    fig = _make_figure((7.0, 3.2))
    ax = fig.subplots()
    for j, g in enumerate(s.reach_indices):
        ax.plot(log.t, log.alpha[:, j], label=f"alpha[{s.barrier_names[g]}]", lw=1.2)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("weight")
    ax.set_ylim(-0.05, 1.05)
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, format="svg")


def emit_outputs(
    log: TrajectoryLog,
    report: ContinuityReport | None,
    out_dir,
    timing_in_csv: bool = False,
) -> dict[str, Path]:
    """Write trajectory.csv, events.json and the three SVG plots.

    The CSV is byte-deterministic for identical runs: floats are written
    with repr and the qp_us column is zeroed unless timing_in_csv is set
    (wall-clock timings vary between runs; the events JSON always carries
    their aggregate).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "csv": out / "trajectory.csv",
        "events": out / "events.json",
        "controls": out / "control_vs_time.svg",
        "workspace": out / "trajectory.svg",
        "alpha": out / "alpha_vs_time.svg",
    }
    _write_csv(log, paths["csv"], timing_in_csv)
    with open(paths["events"], "w") as fh:
        json.dump(_events_payload(log, report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _plot_controls(log, paths["controls"])
    _plot_workspace(log, paths["workspace"])
    _plot_alpha(log, paths["alpha"])
    return paths
