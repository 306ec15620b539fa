"""Exact minimum-norm solver for small quadratic programs.

The programs have the form

    minimize ||u||_2^2  subject to  a_i^T u >= b_i  and  ||u||_inf <= M

in dimension 1 to 3. The objective is strictly convex, so the optimum is the
minimum-norm point of the feasible polytope. At the optimum, the active
constraints pin u to the minimum-norm point of the affine subspace they
span; enumerating that point for every subset of at most dim rows (box
faces included as rows +-e_j^T u >= -M) and keeping the feasible candidate
of least norm is therefore exact, not approximate. Candidate norm ties are
broken toward the lexicographically smallest u so identical inputs always
give bit-identical outputs.

A lattice-scan oracle (`oracle_grid`) is provided for testing. It returns
the feasible lattice point of least norm over the box grid at a given
resolution, scanning outward in square rings so it can stop as soon as no
farther lattice point can beat the best feasible point found.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Infeasible",
    "HalfplaneConstraint",
    "QpProblem",
    "QpSolution",
    "QpTolerances",
    "DEFAULT_TOLERANCES",
    "solve_min_norm",
    "oracle_grid",
]


class Infeasible(Exception):
    """No input satisfies every constraint row inside the box."""

    def __init__(self, message: str = "infeasible QP", context: dict | None = None):
        super().__init__(message)
        self.context = context or {}


@dataclass(frozen=True)
class HalfplaneConstraint:
    """Single row a^T u >= b with a human-readable label."""

    a: np.ndarray
    b: float
    label: str = ""

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 1 or a.shape[0] not in (1, 2, 3):
            raise ValueError(f"constraint normal must be a 1/2/3-vector, got shape {a.shape}")
        b = float(self.b)
        if not (np.all(np.isfinite(a)) and math.isfinite(b)):
            raise ValueError("constraint coefficients must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)


@dataclass(frozen=True)
class QpProblem:
    """Minimum-norm program data: rows, box half-width and dimension."""

    constraints: tuple[HalfplaneConstraint, ...]
    box: float
    dim: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        box = float(self.box)
        if not (math.isfinite(box) and box > 0.0):
            raise ValueError(f"box bound must be positive and finite, got {self.box}")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "constraints", tuple(self.constraints))
        for c in self.constraints:
            if c.a.shape[0] != self.dim:
                raise ValueError(
                    f"constraint {c.label!r} has normal of length {c.a.shape[0]}, expected {self.dim}"
                )


@dataclass(frozen=True)
class QpSolution:
    """Optimal input, labels of the rows that generated it, and ||u||_2^2."""

    u: np.ndarray
    active_set: tuple[str, ...]
    objective: float


@dataclass(frozen=True)
class QpTolerances:
    """Numerical tolerances of the solver, fixed in one place.

    feasibility: allowed halfplane residual a^T u - b >= -feasibility.
    box: allowed slack on the hard input box.
    norm_tie: candidates whose norms agree within this are considered tied
        and resolved toward the lexicographically smallest point.
    degenerate: relative pivot threshold below which an active subset is
        treated as rank deficient and skipped.
    """

    feasibility: float = 1e-9
    box: float = 1e-12
    norm_tie: float = 1e-12
    degenerate: float = 1e-12


DEFAULT_TOLERANCES = QpTolerances()


def _box_rows(dim: int, box: float) -> list[tuple[tuple[float, ...], float, str]]:
    rows = []
    for j in range(dim):
        for sign, tag in ((1.0, "-"), (-1.0, "+")):
            # sign * u_j >= -M, i.e. u_j <= M for sign = -1 and u_j >= -M for sign = +1
            a = [0.0] * dim
            a[j] = sign
            rows.append((tuple(a), -box, f"box[{tag}u{j + 1}]"))
    return rows


def _opposing_pair_candidate(a1, b1, a2, b2, tol: QpTolerances):
    """Candidate for a rank-deficient pair whose normals point opposite ways.

    Such rows bound a slab along the shared direction n = a1 / ||a1||:
    positions s with b1/||a1|| <= s <= -b2/||a2||. When the slab is nonempty
    its minimum-norm point lies on span(n); when the bounds cross by no more
    than the feasibility tolerance of both rows, the midpoint of the
    tolerance window is returned so the solver can still report the point
    every row accepts within tolerance instead of wandering to a distant
    corner. Same-direction pairs are redundant and covered by single rows.
    """
    n1 = math.sqrt(sum(x * x for x in a1))
    n2 = math.sqrt(sum(x * x for x in a2))
    if n1 <= 0.0 or n2 <= 0.0:
        return None
    if sum(x * y for x, y in zip(a1, a2)) >= 0.0:
        return None
    lo = b1 / n1
    hi = -b2 / n2
    if lo <= hi:
        s = min(max(0.0, lo), hi)
    else:
        if lo - hi > tol.feasibility * (1.0 / n1 + 1.0 / n2):
            return None
        s = 0.5 * ((lo - tol.feasibility / n1) + (hi + tol.feasibility / n2))
    return tuple(s / n1 * x for x in a1)


def _min_norm_on_subset(subset, dim: int, tol: QpTolerances):
    """Minimum-norm point of {u : a_i^T u = b_i for rows i in subset}, or None.

    For k = dim rows this is the unique intersection point; for k < dim it is
    the least-squares minimum-norm solution A^T (A A^T)^-1 b. Rank-deficient
    subsets are skipped (smaller subsets cover their candidates), except for
    opposing parallel pairs, which contribute their slab candidate.
    """
    k = len(subset)
    if k == 1:
        a, b, _ = subset[0]
        nrm2 = sum(x * x for x in a)
        if nrm2 <= 0.0:
            return None
        s = b / nrm2
        return tuple(s * x for x in a)
    if k == 2 and dim == 2:
        (a1, b1, _), (a2, b2, _) = subset
        det = a1[0] * a2[1] - a1[1] * a2[0]
        scale = max(abs(a1[0]), abs(a1[1])) * max(abs(a2[0]), abs(a2[1]))
        if abs(det) <= tol.degenerate * max(scale, 1e-300):
            return _opposing_pair_candidate(a1, b1, a2, b2, tol)
        return (
            (b1 * a2[1] - b2 * a1[1]) / det,
            (a1[0] * b2 - a2[0] * b1) / det,
        )
    # general small case: A u = b with A of shape (k, dim), k <= dim <= 3
    A = np.array([row[0] for row in subset])
    b = np.array([row[1] for row in subset])
    G = A @ A.T
    scale = float(np.prod([max(np.max(np.abs(A[i])), 1e-300) for i in range(k)])) ** 2
    if abs(float(np.linalg.det(G))) <= tol.degenerate * scale:
        if k == 2:
            (a1, b1, _), (a2, b2, _) = subset
            return _opposing_pair_candidate(a1, b1, a2, b2, tol)
        return None
    y = np.linalg.solve(G, b)
    return tuple(A.T @ y)


def solve_min_norm(problem: QpProblem, tol: QpTolerances = DEFAULT_TOLERANCES) -> QpSolution:
    """Exact global optimum of the minimum-norm QP, or raise Infeasible.

    Enumerates u = 0, single-row projections u = (b/||a||^2) a, and the
    minimum-norm points of every subset of up to dim rows, box faces
    included. The returned point satisfies every row to within
    tol.feasibility and the box to within tol.box.
    """
    dim = problem.dim
    box = problem.box

    rows = []
    for c in problem.constraints:
        a = tuple(float(x) for x in c.a)
        if max(abs(x) for x in a) == 0.0:
            # a zero normal is either vacuous (b <= 0) or unsatisfiable
            if c.b > tol.feasibility:
                raise Infeasible(
                    f"constraint {c.label!r} demands 0 >= {c.b:.6g} with a zero normal",
                    context={"label": c.label, "b": c.b},
                )
            continue
        rows.append((a, c.b, c.label))
    all_rows = rows + _box_rows(dim, box)

    def feasible(u) -> bool:
        for j in range(dim):
            if abs(u[j]) > box + tol.box:
                return False
        for a, b, _ in rows:
            if sum(a[j] * u[j] for j in range(dim)) - b < -tol.feasibility:
                return False
        return True

    # Fast paths covering the control loop's usual shapes, both exact. The
    # origin is optimal whenever feasible. Otherwise every feasible u obeys
    # a^T u <= ||a|| ||u||, hence ||u|| >= b/||a|| for each row with b > 0,
    # and a point of norm exactly b/||a|| satisfying that row must be its
    # projection; if the projection of the most demanding row is feasible
    # it attains the bound and is the optimum.
    if feasible((0.0,) * dim):
        return QpSolution(u=np.zeros(dim), active_set=(), objective=0.0)
    demand = None
    for a, b, label in rows:
        if b > 0.0:
            nrm = math.sqrt(sum(x * x for x in a))
            if demand is None or b / nrm > demand[0]:
                demand = (b / nrm, a, b, label, nrm)
    if demand is not None:
        d, a, b, label, nrm = demand
        u = tuple(b / (nrm * nrm) * x for x in a)
        if feasible(u):
            return QpSolution(u=np.array(u), active_set=(label,), objective=float(d * d))

    best: list[tuple[tuple[float, ...], tuple[str, ...], float]] = []
    best_nrm = math.inf

    def consider(u, labels):
        nonlocal best_nrm
        if u is None or not all(math.isfinite(x) for x in u):
            return
        if not feasible(u):
            return
        nrm = math.sqrt(sum(x * x for x in u))
        if nrm < best_nrm - tol.norm_tie:
            best.clear()
        elif nrm > best_nrm + tol.norm_tie:
            return
        best.append((u, labels, nrm))
        best_nrm = min(best_nrm, nrm)

    consider(tuple(0.0 for _ in range(dim)), ())
    for size in range(1, dim + 1):
        for subset in itertools.combinations(all_rows, size):
            u = _min_norm_on_subset(subset, dim, tol)
            consider(u, tuple(row[2] for row in subset))

    if not best:
        raise Infeasible(
            "no candidate point satisfies every constraint inside the box",
            context={
                "rows": [(list(a), b, label) for a, b, label in rows],
                "box": box,
            },
        )
    # ties within norm_tie resolve to the lexicographically smallest point
    tied = [item for item in best if item[2] <= best_nrm + tol.norm_tie]
    chosen = min(tied, key=lambda item: item[0])
    u = np.array(chosen[0])
    return QpSolution(u=u, active_set=chosen[1], objective=float(chosen[2] ** 2))


# ---------------------------------------------------------------------------
# lattice oracle

_RING_BLOCK = 64  # rings per scan block
_CACHE_MAX_RING = 1024  # blocks beyond this radius are rebuilt on demand
_block_cache: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}


def _annulus_coords(dim: int, lo: int, hi: int) -> np.ndarray:
    """Integer lattice points with lo <= ||i||_inf < hi (duplicates allowed in 3-d)."""
    full = np.arange(-(hi - 1), hi, dtype=np.int32)
    if lo == 0:
        grids = np.meshgrid(*([full] * dim), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)
    inner = np.arange(-(lo - 1), lo, dtype=np.int32)
    shell = np.concatenate(
        [np.arange(-(hi - 1), -(lo - 1), dtype=np.int32), np.arange(lo, hi, dtype=np.int32)]
    )
    parts = []
    if dim == 1:
        return shell.reshape(-1, 1)
    if dim == 2:
        gx, gy = np.meshgrid(shell, full, indexing="ij")
        parts.append(np.stack([gx.ravel(), gy.ravel()], axis=1))
        gx, gy = np.meshgrid(inner, shell, indexing="ij")
        parts.append(np.stack([gx.ravel(), gy.ravel()], axis=1))
        return np.concatenate(parts, axis=0)
    # dim == 3: three slabs per axis pair; edge/corner duplicates are harmless
    gx, gy, gz = np.meshgrid(shell, full, full, indexing="ij")
    parts.append(np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1))
    gx, gy, gz = np.meshgrid(inner, shell, full, indexing="ij")
    parts.append(np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1))
    gx, gy, gz = np.meshgrid(inner, inner, shell, indexing="ij")
    parts.append(np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1))
    return np.concatenate(parts, axis=0)


def _lattice_block(dim: int, lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
    """Cached annulus lattice, sorted by squared norm then lexicographically."""
    key = (dim, lo, hi)
    hit = _block_cache.get(key)
    if hit is not None:
        return hit
    coords = _annulus_coords(dim, lo, hi)
    norms2 = np.sum(coords.astype(np.int64) ** 2, axis=1)
    order = np.lexsort(tuple(coords[:, j] for j in reversed(range(dim))) + (norms2,))
    coords = coords[order]
    norms2 = norms2[order]
    if lo <= _CACHE_MAX_RING:
        _block_cache[key] = (coords, norms2)
    return coords, norms2


def oracle_grid(problem: QpProblem, resolution: float) -> np.ndarray:
    """Feasible lattice point of least norm over the box grid, for testing.

    The lattice has the given spacing and spans the box exactly. Halfplanes
    are checked with slack resolution * max_i ||a_i|| so discretization
    never reports a feasible program as infeasible. The scan walks square
    rings outward and stops once no farther point can improve on the best
    feasible point found; when the whole grid is exhausted the program is
    declared Infeasible.
    """
    resolution = float(resolution)
    if not (math.isfinite(resolution) and resolution > 0.0):
        raise ValueError(f"resolution must be positive and finite, got {resolution}")
    if resolution > problem.box / 10.0:
        raise ValueError(
            f"resolution {resolution} too coarse for box {problem.box}; need <= box/10"
        )
    dim = problem.dim

    normals = []
    offsets = []
    max_norm = 0.0
    for c in problem.constraints:
        nrm = float(np.linalg.norm(c.a))
        max_norm = max(max_norm, nrm)
        normals.append(c.a)
        offsets.append(c.b)
    slack = resolution * max_norm

    # zero-normal rows cannot be helped by any lattice point
    keep = []
    for a, b in zip(normals, offsets):
        if float(np.max(np.abs(a))) == 0.0:
            if b - slack > 0.0:
                raise Infeasible("zero-normal constraint with positive offset")
            continue
        keep.append((a, b))

    n_max = int(math.floor(problem.box / resolution + 1e-9))
    if keep:
        A = np.array([a for a, _ in keep]).T  # (dim, k)
        b = np.array([bb for _, bb in keep])
    else:
        A = None

    best_norm2: int | None = None
    best_point: np.ndarray | None = None
    lo = 0
    while lo <= n_max:
        hi = min(lo + _RING_BLOCK, n_max + 1)
        coords, norms2 = _lattice_block(dim, lo, hi)
        pts = coords * resolution
        if A is None:
            feas = np.ones(len(pts), dtype=bool)
        else:
            feas = np.all(pts @ A >= b - slack, axis=1)
        hitidx = np.flatnonzero(feas)
        if hitidx.size:
            i0 = int(hitidx[0])
            if best_norm2 is None or int(norms2[i0]) < best_norm2:
                best_norm2 = int(norms2[i0])
                best_point = pts[i0].copy()
        lo = hi
        # nothing at ring >= lo can have squared norm below lo**2
        if best_norm2 is not None and best_norm2 <= lo * lo:
            break
    if best_point is None:
        raise Infeasible("no lattice point in the box satisfies every constraint")
    return best_point
