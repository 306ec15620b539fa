"""Planar barrier functions and the log-sum-exp soft minimum.

A barrier is a scalar field h whose superlevel set {x : h(x) >= 0} marks a
region of interest, either a goal region or the safe complement of an
obstacle. Evaluation returns the value together with the exact analytic
gradient so constraint rows never rely on numerical differentiation.
Barriers depend only on the planar position (x, y); on a (x, y, phi) state
the heading component of the gradient is zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BarrierValue",
    "BarrierFunction",
    "EllipsoidBarrier",
    "HalfplaneBarrier",
    "SuperellipseObstacleBarrier",
    "softmin",
]


@dataclass(frozen=True)
class BarrierValue:
    """Value h(x) and gradient dh/dx; the gradient length equals the state length."""

    value: float
    gradient: np.ndarray


class BarrierFunction:
    """Base class for continuously differentiable planar barriers."""

    def evaluate(self, state) -> BarrierValue:
        raise NotImplementedError

    def in_superlevel_set(self, state) -> bool:
        """True iff h(state) >= 0 (the defining region is closed)."""
        return self.evaluate(state).value >= 0.0

    @staticmethod
    def _position(state) -> tuple[np.ndarray, int]:
        state = np.asarray(state, dtype=float)
        if state.ndim != 1 or state.shape[0] not in (2, 3):
            raise ValueError(
                f"barrier expects an (x, y) or (x, y, phi) state, got shape {state.shape}"
            )
        return state, state.shape[0]


class EllipsoidBarrier(BarrierFunction):
    """Ellipsoidal goal region h(x) = 1 - (p - c)^T P (p - c).

    P is diagonal with entries 1 / semi_axes_i**2, so h equals 1 at the
    center, 0 on the ellipse with the given semi-axes, and is negative
    outside. The region {h >= 0} is exactly the closed ellipse.
    """

    def __init__(self, center, semi_axes):
        center = np.asarray(center, dtype=float)
        semi_axes = np.asarray(semi_axes, dtype=float)
        if center.shape != (2,) or semi_axes.shape != (2,):
            raise ValueError("center and semi_axes must be 2-vectors")
        if not (np.all(np.isfinite(center)) and np.all(np.isfinite(semi_axes))):
            raise ValueError("center and semi_axes must be finite")
        if np.any(semi_axes <= 0.0):
            raise ValueError(f"semi_axes must be positive, got {semi_axes.tolist()}")
        self.center = center
        self.semi_axes = semi_axes
        self._cx = float(center[0])
        self._cy = float(center[1])
        self._px = 1.0 / float(semi_axes[0]) ** 2
        self._py = 1.0 / float(semi_axes[1]) ** 2

    def __repr__(self):
        return (
            f"EllipsoidBarrier(center={self.center.tolist()}, "
            f"semi_axes={self.semi_axes.tolist()})"
        )

    def evaluate(self, state) -> BarrierValue:
        state, n = self._position(state)
        dx = float(state[0]) - self._cx
        dy = float(state[1]) - self._cy
        value = 1.0 - (self._px * dx * dx + self._py * dy * dy)
        gradient = np.zeros(n)
        gradient[0] = -2.0 * self._px * dx
        gradient[1] = -2.0 * self._py * dy
        return BarrierValue(value, gradient)


class HalfplaneBarrier(BarrierFunction):
    """Affine barrier h(x) = n . p - offset with region {n . p >= offset}.

    Used by line-reaching scenarios; h = -x is normal (-1, 0), offset 0.
    """

    def __init__(self, normal, offset):
        normal = np.asarray(normal, dtype=float)
        if normal.shape != (2,):
            raise ValueError("normal must be a 2-vector")
        if not np.all(np.isfinite(normal)) or float(np.max(np.abs(normal))) == 0.0:
            raise ValueError("normal must be finite and nonzero")
        offset = float(offset)
        if not math.isfinite(offset):
            raise ValueError("offset must be finite")
        self.normal = normal
        self.offset = offset

    def __repr__(self):
        return f"HalfplaneBarrier(normal={self.normal.tolist()}, offset={self.offset})"

    def evaluate(self, state) -> BarrierValue:
        state, n = self._position(state)
        value = float(self.normal[0]) * float(state[0]) + float(self.normal[1]) * float(state[1])
        gradient = np.zeros(n)
        gradient[0] = self.normal[0]
        gradient[1] = self.normal[1]
        return BarrierValue(value - self.offset, gradient)


class SuperellipseObstacleBarrier(BarrierFunction):
    """Obstacle complement h(x) = ||diag(1/sigma) R(-rotation) (p - c)||_p - offset.

    The barrier is negative strictly inside the obstacle, zero on its
    boundary and positive outside, so {h >= 0} is the safe set. sigma holds
    the two obstacle semi-axes in the rotated body frame and the exponent
    selects how box-like the level sets are. For even exponents the p-norm
    is continuously differentiable everywhere except the obstacle center;
    that point sits deep inside the excluded region and its gradient is
    reported as zero.
    """

    def __init__(self, center, sigma, rotation, exponent, offset):
        center = np.asarray(center, dtype=float)
        sigma = np.asarray(sigma, dtype=float)
        if center.shape != (2,) or sigma.shape != (2,):
            raise ValueError("center and sigma must be 2-vectors")
        if not (np.all(np.isfinite(center)) and np.all(np.isfinite(sigma))):
            raise ValueError("center and sigma must be finite")
        if np.any(sigma <= 0.0):
            raise ValueError(f"sigma must be positive, got {sigma.tolist()}")
        if isinstance(exponent, bool) or not isinstance(exponent, (int, np.integer)):
            raise ValueError("exponent must be an integer")
        if exponent < 2 or exponent % 2 != 0:
            raise ValueError(f"exponent must be even and >= 2, got {exponent}")
        rotation = float(rotation)
        if not math.isfinite(rotation):
            raise ValueError("rotation must be finite")
        offset = float(offset)
        if not (math.isfinite(offset) and offset > 0.0):
            raise ValueError(f"offset must be positive, got {offset}")
        self.center = center
        self.sigma = sigma
        self.rotation = rotation
        self.exponent = int(exponent)
        self.offset = offset
        self._cos = math.cos(rotation)
        self._sin = math.sin(rotation)
        self._sx = float(sigma[0])
        self._sy = float(sigma[1])

    def __repr__(self):
        return (
            f"SuperellipseObstacleBarrier(center={self.center.tolist()}, "
            f"sigma={self.sigma.tolist()}, rotation={self.rotation}, "
            f"exponent={self.exponent}, offset={self.offset})"
        )

    def evaluate(self, state) -> BarrierValue:
        state, n = self._position(state)
        dx = float(state[0]) - float(self.center[0])
        dy = float(state[1]) - float(self.center[1])
        # body frame: z = R(-rotation) d, then scale by the semi-axes
        zx = self._cos * dx + self._sin * dy
        zy = -self._sin * dx + self._cos * dy
        wx = zx / self._sx
        wy = zy / self._sy
        ax = abs(wx)
        ay = abs(wy)
        mm = ax if ax >= ay else ay
        gradient = np.zeros(n)
        if mm == 0.0:
            return BarrierValue(-self.offset, gradient)
        p = self.exponent
        # factor out the largest component so w**p never overflows
        norm = mm * ((ax / mm) ** p + (ay / mm) ** p) ** (1.0 / p)
        # dN/dw_i = (w_i / N)**(p-1); exact for even p since |w|^(p-1) sign(w) = w^(p-1)
        gwx = (wx / norm) ** (p - 1)
        gwy = (wy / norm) ** (p - 1)
        fx = gwx / self._sx
        fy = gwy / self._sy
        # chain rule back through diag(1/sigma) and R(-rotation): dh/dd = R(rotation) f
        gradient[0] = self._cos * fx - self._sin * fy
        gradient[1] = self._sin * fx + self._cos * fy
        return BarrierValue(norm - self.offset, gradient)


def softmin(values) -> float:
    """Smooth minimum -ln(sum_i exp(-v_i)) of a nonempty collection.

    Lower-biased: min(v) - ln(k) <= softmin(v) <= min(v) for k values, with
    equality on singletons. The minimum is factored out before
    exponentiating so large-magnitude inputs cannot overflow.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("softmin needs a nonempty 1-d collection of values")
    if not np.all(np.isfinite(values)):
        raise ValueError("softmin values must be finite")
    lo = float(values.min())
    return lo - float(np.log(np.exp(lo - values).sum()))
