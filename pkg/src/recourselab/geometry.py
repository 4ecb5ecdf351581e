"""Polyhedral structure of the recourse value function.

The second-stage cost of moving the right-hand side to t is a piecewise
linear, positively homogeneous convex function: the maximum of t against
the vertices of the dual feasible polyhedron {z : W'z <= q}. This module
enumerates those vertices, builds the fan of linearity cones, and checks
the structural assumptions (complete recourse, strictly expensive
recourse, no vertex at the origin, nonnegative costs).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .lp import LE, LinearProgram, check_feasible, solve_lp
from .rng import substream

MERGE_TOL = 1e-9
TIGHT_TOL = 1e-8
TIE_TOL = 1e-9


class GeometryError(ValueError):
    """Recourse data violates the structural preconditions."""


@dataclass(frozen=True)
class RecourseData:
    """Second-stage matrix W (s x m) and cost q (m)."""

    W: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        if W.ndim == 1:
            W = W.reshape(1, -1)
        q = np.asarray(self.q, dtype=float).reshape(-1)
        if W.ndim != 2 or W.shape[0] < 1 or W.shape[1] < 1:
            raise GeometryError(f"W must be a nonempty 2-D matrix, got shape {W.shape}")
        if q.shape[0] != W.shape[1]:
            raise GeometryError("q length must equal the number of columns of W")
        if not (np.isfinite(W).all() and np.isfinite(q).all()):
            raise GeometryError("W and q must be finite")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "q", q)

    @property
    def s(self) -> int:
        return self.W.shape[0]

    @property
    def m(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True)
class DualVertexFan:
    """Vertices of the dual polyhedron with adjacency and cone data.

    cone_generators[i] holds the difference vectors to the neighbors of
    vertex i; they are the facet normals of the cone on which vertex i
    attains the maximum. tight_sets[i] lists the columns of W active at
    vertex i (their conic hull is that same cone).
    """

    vertices: np.ndarray  # (N, s)
    adjacency: tuple[tuple[int, int], ...]
    cone_generators: tuple[np.ndarray, ...]
    tight_sets: tuple[tuple[int, ...], ...]
    recourse: RecourseData

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def s(self) -> int:
        return self.vertices.shape[1]

    def neighbors(self, i: int) -> list[int]:
        out = [b for a, b in self.adjacency if a == i]
        out += [a for a, b in self.adjacency if b == i]
        return sorted(out)


def enumerate_dual_vertices(rd: RecourseData, merge_tol: float = MERGE_TOL,
                            tight_tol: float = TIGHT_TOL) -> DualVertexFan:
    """Enumerate all vertices of {z : W'z <= q} by s x s column bases.

    Exhaustive basis enumeration is exact at desk scale (m <= ~20,
    s <= ~4) and sidesteps double-description bookkeeping.
    """
    W, q = rd.W, rd.q
    s, m = rd.s, rd.m
    if np.linalg.matrix_rank(W) < s:
        raise GeometryError("A1 violated: rank(W) < s, recourse cannot be complete")
    scale = 1.0 + float(np.abs(q).max())
    candidates = []
    for subset in itertools.combinations(range(m), s):
        Wm = W[:, subset]
        if abs(np.linalg.det(Wm)) < 1e-12:
            continue
        z = np.linalg.solve(Wm.T, q[list(subset)])
        if np.max(W.T @ z - q) <= tight_tol * scale:
            candidates.append(z)
    vertices = _merge_points(candidates, merge_tol)
    if vertices.shape[0] == 0:
        if not check_feasible(W.T, [LE] * m, q, lb=np.full(s, -np.inf), ub=np.full(s, np.inf)):
            raise GeometryError("A2 violated: dual polyhedron is empty")
        raise GeometryError("dual polyhedron has no vertices despite full row rank")

    tight_sets = []
    for z in vertices:
        tight = tuple(int(j) for j in np.flatnonzero(np.abs(W.T @ z - q) <= tight_tol * scale))
        if np.linalg.matrix_rank(W[:, list(tight)]) < s:  # pragma: no cover - excluded by construction
            raise GeometryError("enumerated point is not a vertex (tight set rank deficient)")
        tight_sets.append(tight)

    # two vertices are adjacent iff their common tight rows pin down a line:
    # the face those rows define is convex, contains both vertices, and has
    # dimension one, so it is exactly the edge between them
    adjacency = []
    n = vertices.shape[0]
    for i, j in itertools.combinations(range(n), 2):
        common = sorted(set(tight_sets[i]) & set(tight_sets[j]))
        common_rank = np.linalg.matrix_rank(W[:, common]) if common else 0
        if common_rank == s - 1:
            adjacency.append((i, j))

    neighbor_map: dict[int, list[int]] = {i: [] for i in range(n)}
    for a, b in adjacency:
        neighbor_map[a].append(b)
        neighbor_map[b].append(a)
    generators = tuple(
        np.array([vertices[i] - vertices[j] for j in sorted(neighbor_map[i])]).reshape(-1, s)
        for i in range(n)
    )
    return DualVertexFan(vertices, tuple(adjacency), generators,
                         tuple(tight_sets), rd)


def _merge_points(points: list[np.ndarray], tol: float) -> np.ndarray:
    if not points:
        return np.zeros((0, 1))
    merged: list[np.ndarray] = []
    for p in points:
        if all(np.linalg.norm(p - v) > tol for v in merged):
            merged.append(p)
    order = np.lexsort(np.array(merged).T[::-1])
    return np.array([merged[i] for i in order]).reshape(len(merged), -1)


def phi(fan: DualVertexFan, t) -> float:
    """Recourse value at right-hand side t: max over dual vertices of d.t."""
    t = np.asarray(t, dtype=float).reshape(-1)
    return float(np.max(fan.vertices @ t))


def phi_many(fan: DualVertexFan, pts: np.ndarray) -> np.ndarray:
    """Vectorized recourse value over rows of pts (P, s)."""
    return np.max(pts @ fan.vertices.T, axis=1)


def active_cell(fan: DualVertexFan, t, tie_tol: float = TIE_TOL) -> tuple[int, ...]:
    """Indices of all vertices attaining the max at t, within tie tolerance."""
    t = np.asarray(t, dtype=float).reshape(-1)
    vals = fan.vertices @ t
    vmax = vals.max()
    thresh = vmax - tie_tol * (abs(vmax) + 1.0)
    return tuple(int(i) for i in np.flatnonzero(vals >= thresh))


def recourse_lp(rd: RecourseData, t) -> LinearProgram:
    """The primal second-stage program min{q.y : Wy = t, y >= 0}."""
    t = np.asarray(t, dtype=float).reshape(-1)
    return LinearProgram.minimize(rd.q, rd.W, ["=="] * rd.s, t)


@dataclass(frozen=True)
class AssumptionReport:
    a1: bool
    a1_witness: dict
    a2: bool
    a2_margin: float
    a5: bool
    a6: bool
    diagnostics: dict = field(default_factory=dict)

    def all_of(self, *names: str) -> bool:
        return all(getattr(self, n) for n in names)

    def to_json_dict(self) -> dict:
        return {
            "a1": self.a1,
            "a1_witness": self.a1_witness,
            "a2": self.a2,
            "a2_margin": self.a2_margin,
            "a5": self.a5,
            "a6": self.a6,
            "diagnostics": self.diagnostics,
        }


_A2_BOX = 1e6  # caps the margin LP when the dual polyhedron is unbounded


def check_assumptions(rd: RecourseData, fan: DualVertexFan) -> AssumptionReport:
    """Check A1 (complete recourse), A2 (strict dual feasibility margin),
    A5 (origin not a dual vertex) and A6 (componentwise q >= 0).

    Failures are reported, never raised.
    """
    W, q = rd.W, rd.q
    s, m = rd.s, rd.m
    failing = []
    for j in range(s):
        for sgn in (1.0, -1.0):
            target = np.zeros(s)
            target[j] = sgn
            if not check_feasible(W, ["=="] * s, target):
                failing.append([j, sgn])
    a1 = not failing

    # max eps s.t. W'xi + eps <= q, boxed to keep the LP bounded when A1 fails
    n = s + 1
    A = np.hstack([W.T, np.ones((m, 1))])
    lb = np.concatenate([np.full(s, -_A2_BOX), [-_A2_BOX]])
    ub = np.concatenate([np.full(s, _A2_BOX), [_A2_BOX]])
    c = np.zeros(n)
    c[-1] = 1.0
    out = solve_lp(LinearProgram.maximize(c, A, [LE] * m, q, lb=lb, ub=ub))
    margin = float(out.value) if out.status == "optimal" else -np.inf
    a2 = margin > 1e-9

    vertex_norms = np.linalg.norm(fan.vertices, axis=1)
    a5 = bool(np.all(vertex_norms > MERGE_TOL))
    a6 = bool(np.all(q >= 0.0))
    return AssumptionReport(
        a1=a1,
        a1_witness={"failing_directions": failing},
        a2=a2,
        a2_margin=margin,
        a5=a5,
        a6=a6,
        diagnostics={
            "n_vertices": fan.n_vertices,
            "min_vertex_norm": float(vertex_norms.min()),
            "a2_capped": bool(abs(margin) >= _A2_BOX * 0.99),
        },
    )


def estimate_cone_alpha(fan: DualVertexFan, i: int, n_samples: int, seed: int) -> float:
    """Sampled lower-envelope constant of cone i.

    For unit directions u in the cone of vertex i, the largest generator
    inner product max_j (d_i - d_j).u is bounded below by alpha * |u| for
    some alpha > 0 (pointed full-dimensional cone). Returns the minimum of
    that max over sampled unit u: an upper bound on the true alpha, since
    sampling under-covers the infimum. Sample 0 is the cone's symmetry
    axis (normalized sum of its extreme rays); the rest are random conic
    combinations.
    """
    if not 0 <= i < fan.n_vertices:
        raise GeometryError(f"vertex index {i} out of range")
    if n_samples < 1:
        raise GeometryError("n_samples must be >= 1")
    gens = fan.cone_generators[i]
    if gens.shape[0] == 0:
        raise GeometryError("cone has no facet generators (single-vertex fan is not pointed)")
    rays = fan.recourse.W[:, list(fan.tight_sets[i])]
    rays = rays / np.linalg.norm(rays, axis=0, keepdims=True)
    if not _cone_full_dimensional(gens, fan.s):
        raise GeometryError(f"cone of vertex {i} is lower-dimensional")

    axis = rays.sum(axis=1)
    axis_norm = np.linalg.norm(axis)
    if axis_norm < 1e-12:
        axis = rays[:, 0]
        axis_norm = np.linalg.norm(axis)
    axis = axis / axis_norm
    samples = [axis]
    rng = substream(seed, i)
    while len(samples) < n_samples:
        lam = rng.dirichlet(np.ones(rays.shape[1]))
        u = rays @ lam
        norm = np.linalg.norm(u)
        if norm > 1e-12:
            samples.append(u / norm)
    vals = [float(np.max(gens @ u)) for u in samples[:n_samples]]
    return min(vals)


def _cone_full_dimensional(gens: np.ndarray, s: int) -> bool:
    """Full-dimensional iff some u has all generator products strictly positive."""
    k = gens.shape[0]
    A = np.hstack([-gens, np.ones((k, 1))])  # -g.u + eps <= 0
    c = np.zeros(s + 1)
    c[-1] = 1.0
    lb = np.concatenate([np.full(s, -1.0), [0.0]])
    ub = np.concatenate([np.full(s, 1.0), [2.0]])
    out = solve_lp(LinearProgram.maximize(c, A, [LE] * k, np.zeros(k), lb=lb, ub=ub))
    return out.status == "optimal" and out.value > 1e-9


def fan_to_json_dict(fan: DualVertexFan) -> dict:
    return {
        "vertices": [list(map(float, v)) for v in fan.vertices],
        "adjacency": [list(pair) for pair in fan.adjacency],
    }
