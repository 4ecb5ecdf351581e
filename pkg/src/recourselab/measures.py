"""Probability measures on the right-hand-side space.

Two families: finitely supported measures and the uniform density on a
box. Those are exactly the families for which the density lower bound
needed by the certification region is checkable in closed form; anything
fancier would make that check vacuous. Includes the L1 optimal-transport
distance (dense LP over all atom pairs), box discretization, and seeded
perturbation plans for the stability experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lp import EQ, LinearProgram, solve_lp
from .rng import substream

WEIGHT_TOL = 1e-12
MAX_ATOMS = 10**7


class MeasureError(ValueError):
    """Invalid measure data or incompatible dimensions."""


@dataclass(frozen=True)
class DiscreteMeasure:
    atoms: np.ndarray  # (K, s)
    weights: np.ndarray  # (K,)

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms.reshape(-1, 1)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if atoms.shape[0] != weights.shape[0] or atoms.shape[0] == 0:
            raise MeasureError("atoms and weights must be nonempty and aligned")
        if not np.isfinite(atoms).all():
            raise MeasureError("atoms must be finite")
        if np.any(weights < 0):
            raise MeasureError("weights must be nonnegative")
        if abs(math.fsum(weights.tolist()) - 1.0) > WEIGHT_TOL:
            raise MeasureError("weights must sum to 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def s(self) -> int:
        return self.atoms.shape[1]

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[0]

    @staticmethod
    def point_mass(z) -> "DiscreteMeasure":
        z = np.atleast_1d(np.asarray(z, dtype=float))
        return DiscreteMeasure(z.reshape(1, -1), np.array([1.0]))


@dataclass(frozen=True)
class BoxDensityMeasure:
    """Uniform density 1/vol on the box [lo, hi]."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise MeasureError("lo and hi must be 1-D and aligned")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise MeasureError("box corners must be finite")
        if np.any(lo >= hi):
            raise MeasureError("need lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def s(self) -> int:
        return self.lo.shape[0]

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    @property
    def density(self) -> float:
        return 1.0 / self.volume


Measure = DiscreteMeasure | BoxDensityMeasure


@dataclass(frozen=True)
class RegionV:
    """Open box in transformed first-stage space plus the margin radius."""

    lo: np.ndarray
    hi: np.ndarray
    rho: float

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise MeasureError("region box must be nonempty")
        if not self.rho > 0:
            raise MeasureError("rho must be positive")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def s(self) -> int:
        return self.lo.shape[0]

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float).reshape(-1)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.lo + rng.uniform(size=self.s) * (self.hi - self.lo)


def wasserstein1(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """L1 optimal transport cost between two finitely supported measures.

    Dense formulation over all atom pairs; exact via the simplex kernel.
    The argument pair is put in a canonical order first so the result is
    bitwise symmetric.
    """
    if mu.s != nu.s:
        raise MeasureError(f"dimension mismatch: {mu.s} vs {nu.s}")
    if _measure_key(nu) < _measure_key(mu):
        mu, nu = nu, mu
    K, L = mu.n_atoms, nu.n_atoms
    cost = np.linalg.norm(mu.atoms[:, None, :] - nu.atoms[None, :, :], axis=2).reshape(-1)
    A = np.zeros((K + L, K * L))
    for k in range(K):
        A[k, k * L:(k + 1) * L] = 1.0
    for l in range(L):
        A[K + l, l::L] = 1.0
    b = np.concatenate([mu.weights, nu.weights])
    out = solve_lp(LinearProgram.minimize(cost, A, [EQ] * (K + L), b))
    if out.status != "optimal":  # pragma: no cover - marginals always match
        raise MeasureError(f"transport LP terminated with status {out.status}")
    return max(float(out.value), 0.0)


def _measure_key(m: DiscreteMeasure) -> bytes:
    return m.atoms.tobytes() + m.weights.tobytes()


def discretize(bm: BoxDensityMeasure, resolution: int) -> DiscreteMeasure:
    """Midpoint grid with resolution cells per axis, equal weights."""
    if resolution < 1:
        raise MeasureError("resolution must be >= 1")
    n_atoms = resolution ** bm.s
    if n_atoms > MAX_ATOMS:
        raise MeasureError(f"discretization would create {n_atoms} atoms (cap {MAX_ATOMS})")
    axes = [bm.lo[j] + (bm.hi[j] - bm.lo[j]) * (np.arange(resolution) + 0.5) / resolution
            for j in range(bm.s)]
    grids = np.meshgrid(*axes, indexing="ij")
    atoms = np.stack([g.reshape(-1) for g in grids], axis=1)
    return DiscreteMeasure(atoms, np.full(n_atoms, 1.0 / n_atoms))


@dataclass(frozen=True)
class A3A4Report:
    a3: bool
    a4: bool
    r: float | None
    diagnostics: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {"a3": self.a3, "a4": self.a4, "r": self.r, "diagnostics": self.diagnostics}


def check_a3_a4(measure: Measure, region: RegionV) -> A3A4Report:
    """A3 (finite first moment) holds for both supported families. A4
    (density bounded below on the region plus its margin) holds only for
    the box family when the inflated region stays inside the box."""
    if isinstance(measure, DiscreteMeasure):
        return A3A4Report(a3=True, a4=False, r=None,
                          diagnostics={"family": "discrete", "reason": "no density"})
    if measure.s != region.s:
        raise MeasureError("measure and region dimension mismatch")
    inner_lo = region.lo - region.rho
    inner_hi = region.hi + region.rho
    inside = bool(np.all(inner_lo >= measure.lo - 1e-12) and np.all(inner_hi <= measure.hi + 1e-12))
    return A3A4Report(
        a3=True,
        a4=inside,
        r=measure.density if inside else None,
        diagnostics={
            "family": "uniform_box",
            "inflated_region": [inner_lo.tolist(), inner_hi.tolist()],
            "box": [measure.lo.tolist(), measure.hi.tolist()],
        },
    )


# --- perturbation plans -------------------------------------------------------


@dataclass(frozen=True)
class ShiftPlan:
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "v", np.atleast_1d(np.asarray(self.v, dtype=float)))

    kind = "shift"

    @property
    def param(self) -> float:
        return float(np.linalg.norm(self.v))


@dataclass(frozen=True)
class JitterPlan:
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise MeasureError("jitter amplitude must be >= 0")

    kind = "jitter"

    @property
    def param(self) -> float:
        return float(self.sigma)


@dataclass(frozen=True)
class ResamplePlan:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise MeasureError("resample size must be >= 1")

    kind = "resample"

    @property
    def param(self) -> float:
        return float(self.n)


PerturbationPlan = ShiftPlan | JitterPlan | ResamplePlan


def perturb(mu: DiscreteMeasure, plan: PerturbationPlan, seed: int) -> DiscreteMeasure:
    """Apply a perturbation plan; all randomness comes from the seed."""
    if isinstance(plan, ShiftPlan):
        if plan.v.shape[0] != mu.s:
            raise MeasureError("shift vector dimension mismatch")
        return DiscreteMeasure(mu.atoms + plan.v, mu.weights)
    if isinstance(plan, JitterPlan):
        rng = substream(seed)
        noise = rng.uniform(-plan.sigma, plan.sigma, size=mu.atoms.shape) if plan.sigma > 0 else 0.0
        return DiscreteMeasure(mu.atoms + noise, mu.weights)
    if isinstance(plan, ResamplePlan):
        rng = substream(seed)
        idx = rng.choice(mu.n_atoms, size=plan.n, replace=True, p=mu.weights)
        return DiscreteMeasure(mu.atoms[idx], np.full(plan.n, 1.0 / plan.n))
    raise MeasureError(f"unknown perturbation plan {plan!r}")
