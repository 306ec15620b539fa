"""Task bookkeeping and the two-phase machine producing the blend weights.

A run visits an ordered sequence of target regions. Each task alternates
between two phases: reachability, where the weights alpha are the 0/1
indicator of the current target's barriers and the controller drives the
state into the region, and transition, where the weights of the current
target ramp down while those of the next target ramp up along a smooth
pair kappa_down / kappa_up. Phase switches never jump alpha: the ramps
start from the indicator values and end on the next indicator exactly.
After the final target is reached the weights freeze.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

__all__ = [
    "REACHABILITY",
    "TRANSITION",
    "DONE",
    "SequenceError",
    "Task",
    "ReachabilityMap",
    "TaskSequence",
    "TransitionFunctions",
    "PhaseState",
    "indicator",
    "compute_alpha",
    "transition_complete",
    "advance_phase",
]

REACHABILITY = 0
TRANSITION = 1
DONE = 2

_COMPLETE_TOL = 1e-12


class SequenceError(RuntimeError):
    """Raised when the phase machine is driven outside its contract."""


@dataclass(frozen=True)
class Task:
    """One entry of the sequence: a target key plus the global safety rows."""

    target: str
    safety_indices: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "safety_indices", tuple(int(i) for i in self.safety_indices))


@dataclass(frozen=True)
class ReachabilityMap:
    """Map from target key to the indices of the barriers that define it."""

    n_barriers: int
    mapping: Mapping[str, tuple[int, ...]]

    def __post_init__(self):
        if self.n_barriers < 1:
            raise ValueError("need at least one barrier")
        cleaned = {}
        for key, idx in dict(self.mapping).items():
            idx = tuple(int(i) for i in idx)
            if not idx:
                raise ValueError(f"target {key!r} maps to no barriers")
            if len(set(idx)) != len(idx):
                raise ValueError(f"target {key!r} repeats a barrier index")
            for i in idx:
                if not 0 <= i < self.n_barriers:
                    raise ValueError(
                        f"target {key!r} references barrier {i}, valid range is 0..{self.n_barriers - 1}"
                    )
            cleaned[key] = idx
        object.__setattr__(self, "mapping", cleaned)

    def delta(self, target: str) -> tuple[int, ...]:
        try:
            return self.mapping[target]
        except KeyError:
            raise SequenceError(f"unknown target {target!r}") from None


@dataclass(frozen=True)
class TaskSequence:
    """Ordered tasks plus the target-to-barriers map they index into."""

    tasks: tuple[Task, ...]
    reach_map: ReachabilityMap

    def __post_init__(self):
        tasks = tuple(self.tasks)
        if not tasks:
            raise ValueError("task sequence must be nonempty")
        object.__setattr__(self, "tasks", tasks)
        deltas = [self.reach_map.delta(t.target) for t in tasks]
        for i in range(len(tasks) - 1):
            if set(deltas[i]) == set(deltas[i + 1]):
                raise ValueError(
                    f"tasks {i} and {i + 1} resolve to the same target set {sorted(deltas[i])}"
                )
        safety = tasks[0].safety_indices
        for t in tasks[1:]:
            if t.safety_indices != safety:
                raise ValueError("safety indices must be identical across tasks")

    def __len__(self) -> int:
        return len(self.tasks)

    def delta(self, task_index: int) -> tuple[int, ...]:
        """Barrier indices of task task_index's target."""
        if not 0 <= task_index < len(self.tasks):
            raise SequenceError(f"task index {task_index} out of range 0..{len(self.tasks) - 1}")
        return self.reach_map.delta(self.tasks[task_index].target)


class TransitionFunctions:
    """Ramp pair (kappa_up, kappa_down) with analytic rates on [0, duration].

    kappa_up rises from 0 to 1 and kappa_down falls from 1 to 0 over the
    ramp window. Outside the window the endpoint values are held with zero
    rate, so a sampled loop lands exactly on (1, 0) at completion instead
    of skipping past it. Endpoints and monotonicity are checked at
    construction on a coarse grid.
    """

    def __init__(
        self,
        kappa_up: Callable[[float], float],
        kappa_up_dot: Callable[[float], float],
        kappa_down: Callable[[float], float],
        kappa_down_dot: Callable[[float], float],
        duration: float,
    ):
        duration = float(duration)
        if not (math.isfinite(duration) and duration > 0.0):
            raise ValueError(f"duration must be positive and finite, got {duration}")
        tol = 1e-9
        if abs(kappa_up(0.0)) > tol or abs(kappa_up(duration) - 1.0) > tol:
            raise ValueError("kappa_up must rise from 0 to 1 over the duration")
        if abs(kappa_down(0.0) - 1.0) > tol or abs(kappa_down(duration)) > tol:
            raise ValueError("kappa_down must fall from 1 to 0 over the duration")
        grid = np.linspace(0.0, duration, 33)
        ups = [kappa_up(t) for t in grid]
        downs = [kappa_down(t) for t in grid]
        if any(b < a - tol for a, b in zip(ups, ups[1:])):
            raise ValueError("kappa_up must be nondecreasing on the ramp window")
        if any(b > a + tol for a, b in zip(downs, downs[1:])):
            raise ValueError("kappa_down must be nonincreasing on the ramp window")
        self._up = kappa_up
        self._up_dot = kappa_up_dot
        self._down = kappa_down
        self._down_dot = kappa_down_dot
        self.duration = duration

    @classmethod
    def sin_cos_pair(cls, duration: float = math.pi / 2.0) -> "TransitionFunctions":
        """Time-scaled sin^2 / cos^2 ramps; the canonical duration is pi/2."""
        duration = float(duration)
        if not (math.isfinite(duration) and duration > 0.0):
            raise ValueError(f"duration must be positive and finite, got {duration}")
        rate = math.pi / (2.0 * duration)
        return cls(
            kappa_up=lambda tau: math.sin(rate * tau) ** 2,
            kappa_up_dot=lambda tau: rate * math.sin(2.0 * rate * tau),
            kappa_down=lambda tau: math.cos(rate * tau) ** 2,
            kappa_down_dot=lambda tau: -rate * math.sin(2.0 * rate * tau),
            duration=duration,
        )

    def up(self, tau: float) -> float:
        if tau >= self.duration:
            return 1.0
        return float(self._up(tau))

    def up_dot(self, tau: float) -> float:
        if tau >= self.duration:
            return 0.0
        return float(self._up_dot(tau))

    def down(self, tau: float) -> float:
        if tau >= self.duration:
            return 0.0
        return float(self._down(tau))

    def down_dot(self, tau: float) -> float:
        if tau >= self.duration:
            return 0.0
        return float(self._down_dot(tau))


@dataclass(frozen=True)
class PhaseState:
    """Progress marker: task index, phase flag, and the entry-time weights.

    arrival_time is the instant the current target was reached (NaN during
    reachability). alpha and alpha_dot record the weights at the most
    recent phase change; instantaneous values come from compute_alpha.
    """

    task_index: int
    flag: int
    arrival_time: float
    alpha: np.ndarray
    alpha_dot: np.ndarray

    @classmethod
    def initial(cls, seq: TaskSequence) -> "PhaseState":
        m = seq.reach_map.n_barriers
        return cls(
            task_index=0,
            flag=REACHABILITY,
            arrival_time=math.nan,
            alpha=indicator(seq.delta(0), m),
            alpha_dot=np.zeros(m),
        )


def indicator(indices, m: int) -> np.ndarray:
    """0/1 vector of length m with ones at the given indices."""
    out = np.zeros(m)
    out[list(indices)] = 1.0
    return out


def compute_alpha(
    t: float,
    phase: PhaseState,
    seq: TaskSequence,
    tf: TransitionFunctions,
) -> tuple[np.ndarray, np.ndarray]:
    """Weights alpha(t) and rates for the given phase.

    Reachability holds the indicator of the current target with zero rate;
    a transition ramps indices exclusive to the current target down and
    indices exclusive to the next target up, while indices in both targets
    hold weight one with zero rate (they are already where the ramp would
    take them, and holding keeps alpha continuous at both ends of the
    window); after the last task the final indicator is frozen.
    """
    m = seq.reach_map.n_barriers
    i = phase.task_index
    if phase.flag == REACHABILITY:
        return indicator(seq.delta(i), m), np.zeros(m)
    if phase.flag == DONE:
        return indicator(seq.delta(len(seq) - 1), m), np.zeros(m)
    if phase.flag != TRANSITION:
        raise SequenceError(f"unknown phase flag {phase.flag}")
    if i + 1 >= len(seq):
        raise SequenceError(f"task {i} is last in the sequence but is in transition")
    tau = t - phase.arrival_time
    if not math.isfinite(tau) or tau < 0.0:
        raise SequenceError(f"transition time {t} precedes the arrival time {phase.arrival_time}")
    alpha = np.zeros(m)
    alpha_dot = np.zeros(m)
    current = seq.delta(i)
    incoming = seq.delta(i + 1)
    shared = set(current) & set(incoming)
    for j in current:
        if j not in shared:
            alpha[j] = tf.down(tau)
            alpha_dot[j] = tf.down_dot(tau)
    for j in incoming:
        if j in shared:
            alpha[j] = 1.0
        else:
            alpha[j] = tf.up(tau)
            alpha_dot[j] = tf.up_dot(tau)
    return alpha, alpha_dot


def transition_complete(alpha, current, next_, tol: float = _COMPLETE_TOL) -> bool:
    """True iff next-target weights reached one and retiring weights reached zero.

    Indices shared by both targets hold weight one through the ramp, so
    only indices exclusive to the current target are required to vanish.
    """
    alpha = np.asarray(alpha, dtype=float)
    nxt = set(int(i) for i in next_)
    for k in nxt:
        if alpha[k] < 1.0 - tol:
            return False
    for j in current:
        if int(j) not in nxt and alpha[int(j)] > tol:
            return False
    return True


def advance_phase(
    phase: PhaseState,
    x,
    t: float,
    seq: TaskSequence,
    barriers,
    tf: TransitionFunctions,
) -> PhaseState:
    """One guard evaluation of the phase machine; pure, at most one hop.

    In reachability, membership of x in the current target (every target
    barrier nonnegative) records the arrival time and starts the transition
    to the next task, or freezes the weights when the task was the last.
    In transition, ramp completion advances to the next task's reachability
    phase. When no guard fires the same PhaseState object is returned, so
    callers can iterate to a fixed point and observe every hop.
    """
    i = phase.task_index
    m = seq.reach_map.n_barriers
    if phase.flag == REACHABILITY:
        delta = seq.delta(i)
        if all(barriers[j].evaluate(x).value >= 0.0 for j in delta):
            if i == len(seq) - 1:
                return PhaseState(i, DONE, t, indicator(delta, m), np.zeros(m))
            return PhaseState(i, TRANSITION, t, indicator(delta, m), np.zeros(m))
        return phase
    if phase.flag == TRANSITION:
        alpha, alpha_dot = compute_alpha(t, phase, seq, tf)
        if transition_complete(alpha, seq.delta(i), seq.delta(i + 1)):
            return PhaseState(
                i + 1, REACHABILITY, math.nan, indicator(seq.delta(i + 1), m), np.zeros(m)
            )
        return phase
    return phase
