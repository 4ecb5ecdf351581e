"""Dense linear programming kernel.

Revised primal simplex with Bland's anti-cycling rule, dense basis inverse
with periodic refactorization, phase-1 artificials for equality/>= rows.
Variables with finite lower bounds are shifted to zero, variables bounded
only above are reflected, free variables are split into positive and
negative parts; finite upper bounds become explicit rows. Built for
desk-scale instances where exactness and determinism matter more than
speed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LE = "<="
EQ = "=="
GE = ">="
ROW_SENSES = (LE, EQ, GE)

MIN = "min"
MAX = "max"


class LpInputError(ValueError):
    """Malformed LP data (dimension mismatch, NaN entries, bad senses)."""


class LpNumericalError(RuntimeError):
    """Numerical breakdown: singular basis beyond pivot tolerance, iteration cap."""


@dataclass(frozen=True)
class SimplexOptions:
    feas_tol: float = 1e-8
    opt_tol: float = 1e-8
    pivot_tol: float = 1e-10
    refactor_every: int = 50
    max_iters: int = 0  # 0 -> automatic cap from problem size


DEFAULT_OPTIONS = SimplexOptions()


def _as_float_array(x, name: str, ndim: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != ndim:
        raise LpInputError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if np.isnan(arr).any():
        raise LpInputError(f"{name} contains NaN")
    return arr


@dataclass(frozen=True)
class LinearProgram:
    """min/max c.x subject to A x (<=|==|>=) b and lb <= x <= ub."""

    sense: str
    c: np.ndarray
    A: np.ndarray
    senses: tuple[str, ...]
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        if self.sense not in (MIN, MAX):
            raise LpInputError(f"sense must be '{MIN}' or '{MAX}'")
        c = _as_float_array(self.c, "c", 1)
        A = _as_float_array(self.A, "A", 2)
        b = _as_float_array(self.b, "b", 1)
        lb = _as_float_array(self.lb, "lb", 1)
        ub = _as_float_array(self.ub, "ub", 1)
        m, n = A.shape
        if c.shape != (n,) or lb.shape != (n,) or ub.shape != (n,):
            raise LpInputError("c/lb/ub length must match the number of columns of A")
        if b.shape != (m,) or len(self.senses) != m:
            raise LpInputError("b length and senses count must match the number of rows of A")
        for s in self.senses:
            if s not in ROW_SENSES:
                raise LpInputError(f"unknown row sense {s!r}")
        if np.isinf(c).any() or np.isinf(A).any() or np.isinf(b).any():
            raise LpInputError("c, A, b must be finite")
        if np.any(lb > ub):
            raise LpInputError("lb > ub for some variable")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "lb", lb)
        object.__setattr__(self, "ub", ub)
        object.__setattr__(self, "senses", tuple(self.senses))

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @staticmethod
    def minimize(c, A, senses, b, lb=None, ub=None) -> "LinearProgram":
        return LinearProgram._build(MIN, c, A, senses, b, lb, ub)

    @staticmethod
    def maximize(c, A, senses, b, lb=None, ub=None) -> "LinearProgram":
        return LinearProgram._build(MAX, c, A, senses, b, lb, ub)

    @staticmethod
    def _build(sense, c, A, senses, b, lb, ub) -> "LinearProgram":
        c = np.atleast_1d(np.asarray(c, dtype=float))
        n = c.shape[0]
        if lb is None:
            lb = np.zeros(n)
        if ub is None:
            ub = np.full(n, np.inf)
        lb = np.broadcast_to(np.asarray(lb, dtype=float), (n,)).copy()
        ub = np.broadcast_to(np.asarray(ub, dtype=float), (n,)).copy()
        try:
            A = np.asarray(A, dtype=float).reshape(len(senses) if np.size(A) else 0, n)
        except ValueError as exc:
            raise LpInputError(f"A cannot be shaped to {len(senses)} x {n}: {exc}") from exc
        b = np.atleast_1d(np.asarray(b, dtype=float))
        return LinearProgram(sense, c, A, tuple(senses), b, lb, ub)


@dataclass(frozen=True)
class LpOutcome:
    """Solve result. Duals are reported in minimization convention; for a
    max problem they refer to the equivalent min of -c (dual_objective
    handles the sign when recovering the dual bound)."""

    status: str  # "optimal" | "infeasible" | "unbounded"
    value: float | None
    x: np.ndarray | None
    y: np.ndarray | None  # one dual per original row
    basis: tuple[int, ...]  # original-variable indices basic at optimum
    dual_lb: np.ndarray | None = None
    dual_ub: np.ndarray | None = None
    iterations: int = 0


# --- standard-form transformation -------------------------------------------

_SHIFT = 0  # x = lb + xhat
_NEG = 1  # x = ub - xhat
_SPLIT = 2  # x = xplus - xminus


def _transform(lp: LinearProgram):
    """Rewrite variables to xhat >= 0; finite upper bounds become rows."""
    n = lp.n
    modes = []
    cols = []  # (orig_j, sign) per structural column
    shift = np.zeros(n)
    ub_rows = []  # (column index into structural cols, rhs)
    for j in range(n):
        lo, hi = lp.lb[j], lp.ub[j]
        if np.isfinite(lo):
            modes.append((_SHIFT, len(cols)))
            cols.append((j, 1.0))
            shift[j] = lo
            if np.isfinite(hi):
                ub_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            modes.append((_NEG, len(cols)))
            cols.append((j, -1.0))
            shift[j] = hi
        else:
            modes.append((_SPLIT, len(cols)))
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    nhat = len(cols)
    Ahat = np.zeros((lp.m + len(ub_rows), nhat))
    for k, (j, sgn) in enumerate(cols):
        Ahat[: lp.m, k] = sgn * lp.A[:, j]
    bhat = np.concatenate([lp.b - lp.A @ shift, np.array([r for _, r in ub_rows])]) if ub_rows else lp.b - lp.A @ shift
    senses = list(lp.senses)
    ub_row_of_col = {}
    for k, (col, rhs) in enumerate(ub_rows):
        Ahat[lp.m + k, col] = 1.0
        senses.append(LE)
        ub_row_of_col[col] = lp.m + k
    chat = np.array([sgn * lp.c[j] for j, sgn in cols])
    if lp.sense == MAX:
        chat = -chat
    return Ahat, np.asarray(bhat, dtype=float), senses, chat, modes, cols, shift, ub_row_of_col


# --- simplex core ------------------------------------------------------------


class _Tableau:
    """Revised simplex state over the augmented column matrix."""

    def __init__(self, A: np.ndarray, b: np.ndarray, basis: list[int], opts: SimplexOptions):
        self.A = A
        self.b = b
        self.basis = list(basis)
        self.opts = opts
        self.m = A.shape[0]
        self.pivots_since_refactor = 0
        self.iterations = 0
        self._refactor()

    def _refactor(self):
        if self.m == 0:
            self.Binv = np.zeros((0, 0))
            self.xB = np.zeros(0)
            self.pivots_since_refactor = 0
            return
        B = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise LpNumericalError(f"singular basis {self.basis}: {exc}") from exc
        resid = np.abs(self.Binv @ B - np.eye(self.m)).max()
        if not np.isfinite(resid) or resid > 1e-6:
            raise LpNumericalError(f"basis inverse residual {resid:.2e} beyond pivot tolerance")
        self.xB = self.Binv @ self.b
        self.pivots_since_refactor = 0

    def pivot(self, q: int, r: int, d: np.ndarray, theta: float):
        self.xB = self.xB - theta * d
        self.xB[r] = theta
        self.basis[r] = q
        piv = d[r]
        if abs(piv) <= self.opts.pivot_tol:
            raise LpNumericalError(f"pivot element {piv:.2e} below pivot tolerance")
        # product-form update of the inverse
        row = self.Binv[r, :] / piv
        self.Binv = self.Binv - np.outer(d, row)
        self.Binv[r, :] = row
        self.pivots_since_refactor += 1
        self.iterations += 1
        if self.pivots_since_refactor >= self.opts.refactor_every:
            self._refactor()

    def run(self, cost: np.ndarray, eligible: np.ndarray, is_artificial: np.ndarray | None = None) -> str:
        """Bland-rule primal simplex; returns 'optimal' or 'unbounded'.

        is_artificial marks artificial columns; when a row holding a
        zero-valued basic artificial can be pivoted on, the artificial is
        expelled first so it can never regrow.
        """
        opts = self.opts
        ncols = self.A.shape[1]
        cap = opts.max_iters or (10000 + 50 * (self.m + ncols))
        in_basis = np.zeros(ncols, dtype=bool)
        in_basis[self.basis] = True
        while True:
            if self.iterations > cap:
                raise LpNumericalError(f"iteration cap {cap} exceeded")
            cB = cost[self.basis] if self.m else np.zeros(0)
            y = cB @ self.Binv if self.m else np.zeros(0)
            reduced = cost - (y @ self.A if self.m else 0.0)
            candidates = np.flatnonzero((reduced < -opts.opt_tol) & eligible & ~in_basis)
            if candidates.size == 0:
                return "optimal"
            q = int(candidates[0])  # Bland: lowest index enters
            d = self.Binv @ self.A[:, q] if self.m else np.zeros(0)
            r = self._leaving_row(d, is_artificial)
            if r is None:
                return "unbounded"
            in_basis[self.basis[r]] = False
            in_basis[q] = True
            theta = max(self.xB[r] / d[r], 0.0) if abs(d[r]) > opts.pivot_tol else 0.0
            self.pivot(q, r, d, theta)

    def _leaving_row(self, d: np.ndarray, is_artificial: np.ndarray | None) -> int | None:
        opts = self.opts
        # expel a zero-valued basic artificial whenever its row moves at all
        if is_artificial is not None and self.m:
            art_rows = is_artificial[np.asarray(self.basis)]
            for r in np.flatnonzero(art_rows):
                if abs(d[r]) > opts.pivot_tol and self.xB[r] <= opts.feas_tol:
                    return int(r)
        pos = np.flatnonzero(d > opts.pivot_tol)
        if pos.size == 0:
            return None
        ratios = self.xB[pos] / d[pos]
        theta = ratios.min()
        ties = pos[ratios <= theta + 1e-12 * (1.0 + abs(theta))]
        # Bland: among ties, leave the row whose basic variable index is lowest
        basis = np.asarray(self.basis)
        return int(ties[np.argmin(basis[ties])])


def solve_lp(lp: LinearProgram, options: SimplexOptions = DEFAULT_OPTIONS) -> LpOutcome:
    """Solve a dense LP; classifies optimal / infeasible / unbounded."""
    Ahat, bhat, senses, chat, modes, cols, shift, ub_row_of_col = _transform(lp)
    mhat, nhat = Ahat.shape

    row_sign = np.ones(mhat)
    A = Ahat.copy()
    b = bhat.copy()
    eff_senses = list(senses)
    for i in range(mhat):
        if b[i] < 0:
            A[i, :] *= -1.0
            b[i] *= -1.0
            row_sign[i] = -1.0
            if eff_senses[i] == LE:
                eff_senses[i] = GE
            elif eff_senses[i] == GE:
                eff_senses[i] = LE

    # augment with slack/surplus and artificial columns
    slack_cols: dict[int, int] = {}
    art_cols: dict[int, int] = {}
    blocks = [A]
    col_ptr = nhat
    for i, s in enumerate(eff_senses):
        if s in (LE, GE):
            col = np.zeros((mhat, 1))
            col[i, 0] = 1.0 if s == LE else -1.0
            blocks.append(col)
            slack_cols[i] = col_ptr
            col_ptr += 1
    for i, s in enumerate(eff_senses):
        if s in (EQ, GE):
            col = np.zeros((mhat, 1))
            col[i, 0] = 1.0
            blocks.append(col)
            art_cols[i] = col_ptr
            col_ptr += 1
    Afull = np.hstack(blocks) if blocks else A
    ncols = Afull.shape[1]

    basis = [art_cols.get(i, slack_cols.get(i, -1)) for i in range(mhat)]
    if any(k < 0 for k in basis):  # pragma: no cover - every row gets a column above
        raise LpNumericalError("internal: row without starting column")

    tab = _Tableau(Afull, b, basis, options)
    is_artificial = np.zeros(ncols, dtype=bool)
    for c in art_cols.values():
        is_artificial[c] = True

    # phase 1
    if art_cols:
        cost1 = np.zeros(ncols)
        cost1[is_artificial] = 1.0
        status = tab.run(cost1, ~is_artificial, is_artificial=is_artificial)
        if status != "optimal":  # pragma: no cover - phase 1 is always bounded below
            raise LpNumericalError("phase 1 terminated abnormally")
        phase1_value = float(cost1[tab.basis] @ tab.xB)
        if phase1_value > options.feas_tol * (1.0 + float(np.abs(b).max(initial=0.0))):
            return LpOutcome("infeasible", None, None, None, (), iterations=tab.iterations)
        _expel_artificials(tab, is_artificial, options)

    # phase 2
    cost2 = np.zeros(ncols)
    cost2[:nhat] = chat
    status = tab.run(cost2, ~is_artificial, is_artificial=is_artificial)
    if status == "unbounded":
        return LpOutcome("unbounded", None, None, None, (), iterations=tab.iterations)

    # recover original-space solution
    xhat = np.zeros(ncols)
    if tab.m:
        xhat[tab.basis] = tab.xB
    x = shift.copy()
    for k, (j, sgn) in enumerate(cols):
        x[j] += sgn * xhat[k]
    value = float(lp.c @ x)

    y_t = (cost2[tab.basis] @ tab.Binv) if tab.m else np.zeros(0)
    y = np.array([row_sign[i] * y_t[i] for i in range(lp.m)]) if lp.m else np.zeros(0)
    reduced = cost2 - (y_t @ Afull if tab.m else 0.0)
    dual_lb = np.zeros(lp.n)
    dual_ub = np.zeros(lp.n)
    for mode, k in modes:
        j = cols[k][0]
        if mode == _SHIFT:
            dual_lb[j] = reduced[k]
            row = ub_row_of_col.get(k)
            if row is not None:
                dual_ub[j] = -row_sign[row] * y_t[row]
        elif mode == _NEG:
            dual_ub[j] = reduced[k]
    basic_orig = tuple(sorted({cols[k][0] for k in tab.basis if k < nhat}))
    return LpOutcome("optimal", value, x, y, basic_orig, dual_lb, dual_ub, tab.iterations)


def _expel_artificials(tab: _Tableau, is_artificial: np.ndarray, opts: SimplexOptions):
    """Pivot zero-valued basic artificials out where a non-artificial column
    has a nonzero tableau entry in their row; fully dependent rows keep their
    artificial pinned at zero (it can never re-enter or regrow)."""
    for r in range(tab.m):
        if not is_artificial[tab.basis[r]]:
            continue
        row = tab.Binv[r, :] @ tab.A
        row[is_artificial] = 0.0
        in_basis = np.zeros(row.size, dtype=bool)
        in_basis[tab.basis] = True
        row[in_basis] = 0.0
        cand = np.flatnonzero(np.abs(row) > opts.pivot_tol)
        if cand.size:
            q = int(cand[0])
            d = tab.Binv @ tab.A[:, q]
            tab.pivot(q, r, d, 0.0)


def dual_objective(lp: LinearProgram, out: LpOutcome) -> float:
    """Dual bound implied by the reported multipliers; equals the optimal
    value at an optimal outcome (strong duality)."""
    if out.status != "optimal":
        raise LpInputError("dual_objective requires an optimal outcome")
    val = float(out.y @ lp.b) if lp.m else 0.0
    for j in range(lp.n):
        if np.isfinite(lp.lb[j]):
            val += out.dual_lb[j] * lp.lb[j]
        if np.isfinite(lp.ub[j]):
            val -= out.dual_ub[j] * lp.ub[j]
    return -val if lp.sense == MAX else val


def verify_optimality(lp: LinearProgram, out: LpOutcome) -> float:
    """Max violation across primal feasibility, dual signs, complementary
    slackness and the duality gap; <= ~1e-8 on normalized optimal data."""
    if out.status != "optimal":
        raise LpInputError("verify_optimality requires an optimal outcome")
    x, y = out.x, out.y
    viol = 0.0
    scale = 1.0 + float(np.abs(lp.b).max(initial=0.0)) + float(np.abs(x).max(initial=0.0))
    r = lp.A @ x - lp.b if lp.m else np.zeros(0)
    for i, s in enumerate(lp.senses):
        if s == LE:
            viol = max(viol, r[i] / scale)
            viol = max(viol, y[i])  # min convention: <= rows carry y <= 0
            viol = max(viol, abs(y[i] * r[i]) / scale)  # y_i (A_i x - b_i) = 0
        elif s == GE:
            viol = max(viol, -r[i] / scale)
            viol = max(viol, -y[i])
            viol = max(viol, abs(y[i] * r[i]) / scale)
        else:
            viol = max(viol, abs(r[i]) / scale)
    viol = max(viol, float(np.max(-out.dual_lb, initial=0.0)))
    viol = max(viol, float(np.max(-out.dual_ub, initial=0.0)))
    viol = max(viol, float(np.max(lp.lb - x, initial=0.0)) / scale)
    viol = max(viol, float(np.max(x - lp.ub, initial=0.0)) / scale)
    for j in range(lp.n):
        if np.isfinite(lp.lb[j]):
            viol = max(viol, abs(out.dual_lb[j] * (x[j] - lp.lb[j])) / scale)
        if np.isfinite(lp.ub[j]):
            viol = max(viol, abs(out.dual_ub[j] * (lp.ub[j] - x[j])) / scale)
    gap = abs(out.value - dual_objective(lp, out))
    viol = max(viol, gap / (1.0 + abs(out.value)))
    return viol


def check_feasible(A, senses, b, lb=None, ub=None, options: SimplexOptions = DEFAULT_OPTIONS) -> bool:
    """True iff {x : A x (senses) b, lb <= x <= ub} admits a point (phase-1 test)."""
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A.reshape(len(tuple(senses)), -1)
    n = A.shape[1]
    lp = LinearProgram._build(MIN, np.zeros(n), A, tuple(senses), b, lb, ub)
    return solve_lp(lp, options).status == "optimal"
