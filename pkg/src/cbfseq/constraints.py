"""Constraint-row builders turning barrier conditions into QP halfplanes.

Three row families are produced, all of the form a^T u >= b on the input:

* a finite-time reachability row, whose forcing term gamma sign(h) |h|^rho
  drives h to zero in finite time when h starts negative;
* an invariance row with a class-kappa margin mu(h), which keeps {h >= 0}
  forward invariant without forcing convergence;
* a composite row that blends several reachability barriers with
  time-varying weights alpha_i(t). Its right-hand side bounds the weighted
  sum through a tanh of the soft minimum of the weighted barrier values,

      sum_i alpha_i (Lf h_i + Lg h_i u) - sum_i h_i dalpha_i/dt
          >= -gamma tanh(softmin_i(alpha_i h_i)),

  so a single scalar row covers the whole blend while the weights move.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import BarrierFunction, softmin
from .qp import HalfplaneConstraint

__all__ = [
    "ClassKappa",
    "FcbfParams",
    "CompositeContext",
    "fcbf_row",
    "zcbf_row",
    "composite_row",
    "weighted_softmin",
]


@dataclass(frozen=True)
class ClassKappa:
    """Odd-power class-kappa margin mu(h) = gamma * h**exponent.

    Odd exponents keep mu strictly increasing on all of R with mu(0) = 0,
    which is what the invariance row needs on both sides of the boundary.
    """

    gamma: float
    exponent: int = 1

    def __post_init__(self):
        gamma = float(self.gamma)
        if not (math.isfinite(gamma) and gamma > 0.0):
            raise ValueError(f"gamma must be positive and finite, got {self.gamma}")
        if isinstance(self.exponent, bool) or not isinstance(self.exponent, (int, np.integer)):
            raise ValueError("exponent must be an integer")
        if self.exponent < 1 or self.exponent % 2 == 0:
            raise ValueError(f"exponent must be odd and >= 1, got {self.exponent}")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "exponent", int(self.exponent))

    def __call__(self, h: float) -> float:
        return self.gamma * h ** self.exponent

    @classmethod
    def linear(cls, gamma: float) -> "ClassKappa":
        return cls(gamma, 1)

    @classmethod
    def cubic(cls, gamma: float) -> "ClassKappa":
        return cls(gamma, 3)


@dataclass(frozen=True)
class FcbfParams:
    """Finite-time forcing parameters: strength gamma > 0 and exponent rho in [0, 1)."""

    gamma: float = 1.0
    rho: float = 0.5

    def __post_init__(self):
        gamma = float(self.gamma)
        rho = float(self.rho)
        if not (math.isfinite(gamma) and gamma > 0.0):
            raise ValueError(f"gamma must be positive and finite, got {self.gamma}")
        if not (0.0 <= rho < 1.0):
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "rho", rho)

    def forcing(self, h: float) -> float:
        """gamma * sign(h) * |h|**rho, with sign(0) = 0."""
        if h > 0.0:
            return self.gamma * h ** self.rho
        if h < 0.0:
            return -self.gamma * (-h) ** self.rho
        return 0.0


def _lie_terms(barrier: BarrierFunction, system, state):
    bv = barrier.evaluate(state)
    f = system.drift(state)
    g = system.control_matrix(state)
    lf = float(bv.gradient @ f)
    a = g.T @ bv.gradient
    return bv.value, lf, a


def fcbf_row(
    barrier: BarrierFunction,
    system,
    state,
    params: FcbfParams,
    label: str = "reach",
) -> HalfplaneConstraint:
    """Finite-time reachability row Lf h + Lg h u + gamma sign(h)|h|^rho >= 0."""
    h, lf, a = _lie_terms(barrier, system, state)
    return HalfplaneConstraint(a=a, b=-lf - params.forcing(h), label=label)


def zcbf_row(
    barrier: BarrierFunction,
    system,
    state,
    mu: Callable[[float], float],
    label: str = "safe",
) -> HalfplaneConstraint:
    """Invariance row Lf h + Lg h u + mu(h) >= 0 for a class-kappa margin mu.

    mu may be a ClassKappa or any callable that is continuous, strictly
    increasing and zero at zero; passing the finite-time forcing function
    here reproduces the reachability row exactly.
    """
    h, lf, a = _lie_terms(barrier, system, state)
    return HalfplaneConstraint(a=a, b=-lf - float(mu(h)), label=label)


@dataclass(frozen=True)
class CompositeContext:
    """Weighted blend of reachability barriers at one instant.

    alpha holds the current weights in [0, 1], alpha_dot their time
    derivatives, and gamma scales the tanh forcing of the composite row.
    """

    barriers: tuple[BarrierFunction, ...]
    alpha: np.ndarray
    alpha_dot: np.ndarray
    gamma: float

    def __post_init__(self):
        barriers = tuple(self.barriers)
        if not barriers:
            raise ValueError("composite context needs at least one barrier")
        alpha = np.asarray(self.alpha, dtype=float)
        alpha_dot = np.asarray(self.alpha_dot, dtype=float)
        m = len(barriers)
        if alpha.shape != (m,) or alpha_dot.shape != (m,):
            raise ValueError(
                f"alpha and alpha_dot must have shape ({m},), got {alpha.shape} and {alpha_dot.shape}"
            )
        if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(alpha_dot))):
            raise ValueError("alpha and alpha_dot must be finite")
        if np.any(alpha < 0.0) or np.any(alpha > 1.0):
            raise ValueError(f"alpha must lie in [0, 1], got {alpha.tolist()}")
        gamma = float(self.gamma)
        if not (math.isfinite(gamma) and gamma > 0.0):
            raise ValueError(f"gamma must be positive and finite, got {self.gamma}")
        object.__setattr__(self, "barriers", barriers)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "alpha_dot", alpha_dot)
        object.__setattr__(self, "gamma", gamma)


def weighted_softmin(alpha, values, active_only: bool = False) -> float:
    """softmin over alpha_i * h_i, either across every index or only alpha_i > 0.

    The full form keeps inactive indices in the sum, where exp(-0) = 1
    biases the soft minimum below zero; the active-only variant drops them.
    """
    alpha = np.asarray(alpha, dtype=float)
    values = np.asarray(values, dtype=float)
    weighted = alpha * values
    if active_only:
        weighted = weighted[alpha > 0.0]
        if weighted.size == 0:
            raise ValueError("active-only softmin needs at least one positive weight")
    return softmin(weighted)


def composite_row(
    ctx: CompositeContext,
    system,
    state,
    active_only: bool = False,
    label: str = "reach",
) -> HalfplaneConstraint:
    """Single halfplane enforcing the blended reachability condition.

    a = sum_i alpha_i Lg h_i and b collects the drift terms, the weight
    exchange credit sum_i h_i dalpha_i/dt, and the tanh soft-minimum
    forcing. The exchange credit relaxes the row while an unsatisfied
    barrier ramps in (h < 0 with a rising weight lowers b), so the
    handoff itself never demands control effort; once the weights settle
    the forcing term alone drives the newly weighted barrier up. With
    one barrier at weight one and a zero rate the row reduces exactly to
    a tanh-forced reachability row.
    """
    m = len(ctx.barriers)
    values = np.empty(m)
    lf_sum = 0.0
    a = None
    for i, barrier in enumerate(ctx.barriers):
        h, lf, ai = _lie_terms(barrier, system, state)
        values[i] = h
        w = float(ctx.alpha[i])
        lf_sum += w * lf
        a = w * ai if a is None else a + w * ai
    exchange = float(ctx.alpha_dot @ values)
    sm = weighted_softmin(ctx.alpha, values, active_only=active_only)
    b = -lf_sum + exchange - ctx.gamma * math.tanh(sm)
    return HalfplaneConstraint(a=a, b=b, label=label)
