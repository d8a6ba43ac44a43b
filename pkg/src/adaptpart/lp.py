"""Dense two-phase simplex kernel with dual recovery and right-hand-side ranging.

Problems are stated as  min q.y  subject to  M y (<=|=|>=) b  with per-variable
bounds (default y >= 0).  Reported duals follow the max-form convention: the
dual vector maximizes rhs.lam subject to M'.lam <= q, so duals of <= rows are
nonpositive and duals of >= rows are nonnegative at an optimum.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .errors import SolverFailure, ValidationError

FEAS_TOL = 1e-7
DUALITY_TOL = 1e-6
PIVOT_TOL = 1e-9
STALL_LIMIT = 50  # consecutive degenerate pivots before switching to Bland's rule

LE, EQ, GE = "<=", "=", ">="
_SENSES = (LE, EQ, GE)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_RC_TOL = 1e-9      # reduced-cost threshold for entering columns
_RATIO_TIE = 1e-9   # ratio-test tie tolerance
_MAX_PIVOTS = 50_000

_solve_calls = 0


def solve_call_count() -> int:
    """Total number of solve() invocations in this process (for run statistics)."""
    return _solve_calls


@dataclass(frozen=True, eq=False)
class StandardLp:
    """A dense linear program in row-sense form."""

    objective: np.ndarray
    matrix: np.ndarray
    rhs: np.ndarray
    senses: tuple[str, ...]
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        obj = np.atleast_1d(np.asarray(self.objective, dtype=float))
        mat = np.asarray(self.matrix, dtype=float)
        if mat.size == 0:
            mat = mat.reshape(0, obj.size)
        if mat.ndim != 2:
            raise ValidationError("constraint matrix must be two-dimensional")
        rhs = np.atleast_1d(np.asarray(self.rhs, dtype=float))
        senses = tuple(self.senses)
        m, n = mat.shape
        if obj.shape != (n,):
            raise ValidationError(f"objective has {obj.size} entries, matrix has {n} columns")
        if rhs.shape != (m,):
            raise ValidationError(f"rhs has {rhs.size} entries, matrix has {m} rows")
        if len(senses) != m:
            raise ValidationError(f"{len(senses)} senses for {m} rows")
        bad = [s for s in senses if s not in _SENSES]
        if bad:
            raise ValidationError(f"unknown row sense {bad[0]!r}")
        if not np.all(np.isfinite(obj)):
            raise ValidationError("objective entries must be finite")
        if not np.all(np.isfinite(mat)):
            raise ValidationError("matrix entries must be finite")
        if not np.all(np.isfinite(rhs)):
            raise ValidationError("rhs entries must be finite")
        lower = self.lower
        upper = self.upper
        lower = np.zeros(n) if lower is None else np.asarray(lower, dtype=float).copy()
        upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float).copy()
        if lower.shape != (n,) or upper.shape != (n,):
            raise ValidationError("bound vectors must have one entry per column")
        if np.any(lower == np.inf) or np.any(upper == -np.inf):
            raise ValidationError("lower bounds must be < +inf and upper bounds > -inf")
        if np.any(lower > upper):
            raise ValidationError("lower bound exceeds upper bound")
        object.__setattr__(self, "objective", obj)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "senses", senses)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_cols(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True, eq=False)
class LpSolution:
    """Solve outcome; primal/dual/basis fields are set only when optimal."""

    status: str
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective: float | None = None
    basis: tuple[int, ...] | None = None
    kept_rows: tuple[int, ...] | None = None


@dataclass(frozen=True, eq=False)
class RangingInterval:
    """Maximal rhs interval for one row over which the optimal basis (and its
    dual vector) stays optimal.  Endpoints may be infinite; width may be zero
    under degeneracy."""

    row: int
    lo: float
    hi: float
    duals: np.ndarray


@dataclass
class _Canonical:
    """Equality form  A z = b, z >= 0, b >= 0  with bookkeeping to map back."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    offset: float
    row_sign: np.ndarray      # +-1: row was negated during folding
    row_origin: np.ndarray    # original row index, -1 for synthetic bound rows
    col_kind: list[tuple[str, int, float]]  # ("var", j, sign) or ("slack", row, 0)
    shift: np.ndarray


def _canonicalize(lp: StandardLp) -> _Canonical:
    m, n = lp.matrix.shape
    lower, upper = lp.lower, lp.upper
    shift = np.where(np.isfinite(lower), lower, 0.0)

    col_kind: list[tuple[str, int, float]] = []
    for j in range(n):
        col_kind.append(("var", j, 1.0))
        if not np.isfinite(lower[j]):
            col_kind.append(("var", j, -1.0))
    n_var_cols = len(col_kind)

    bounded = [j for j in range(n) if np.isfinite(upper[j])]
    m_c = m + len(bounded)

    A = np.zeros((m_c, n_var_cols))
    for k, (_, j, sgn) in enumerate(col_kind):
        A[:m, k] = sgn * lp.matrix[:, j]
    b = np.empty(m_c)
    b[:m] = lp.rhs - lp.matrix @ shift
    senses = list(lp.senses)
    for t, j in enumerate(bounded):
        r = m + t
        for k, (_, jj, sgn) in enumerate(col_kind):
            if jj == j:
                A[r, k] = sgn
        b[r] = upper[j] - shift[j]
        senses.append(LE)

    ineq = [i for i in range(m_c) if senses[i] != EQ]
    S = np.zeros((m_c, len(ineq)))
    for t, i in enumerate(ineq):
        S[i, t] = 1.0 if senses[i] == LE else -1.0
        col_kind.append(("slack", i, 0.0))
    A = np.hstack([A, S]) if ineq else A

    c = np.zeros(A.shape[1])
    for k, (kind, j, sgn) in enumerate(col_kind):
        if kind == "var":
            c[k] = sgn * lp.objective[j]

    row_sign = np.ones(m_c)
    neg = b < 0
    row_sign[neg] = -1.0
    A[neg] *= -1.0
    b[neg] *= -1.0

    row_origin = np.concatenate([np.arange(m), -np.ones(len(bounded), dtype=int)]).astype(int)
    offset = float(lp.objective @ shift)
    return _Canonical(A, b, c, offset, row_sign, row_origin, col_kind, shift)


def _apply_pivot(tab: np.ndarray, row: int, col: int) -> None:
    piv = tab[row, col]
    if abs(piv) < PIVOT_TOL:
        raise SolverFailure("pivot element below tolerance")
    tab[row] = tab[row] / piv
    factors = tab[:, col].copy()
    factors[row] = 0.0
    tab -= np.outer(factors, tab[row])
    tab[:, col] = 0.0
    tab[row, col] = 1.0


def _pivot_loop(tab: np.ndarray, basis: list[int], trace: TextIO | None, label: str) -> str:
    scale = 1.0 + float(np.abs(tab[:-1, -1]).max(initial=0.0))
    stall = 0
    bland = False
    for _ in range(_MAX_PIVOTS):
        cost = tab[-1, :-1]
        elig = np.flatnonzero(cost < -_RC_TOL)
        if elig.size == 0:
            if trace is not None:
                trace.write(f"[{label}] optimal after basis {basis}\n")
            return OPTIMAL
        col = int(elig[0]) if bland else int(elig[np.argmin(cost[elig])])
        colvals = tab[:-1, col]
        rows = np.flatnonzero(colvals > PIVOT_TOL)
        if rows.size == 0:
            return UNBOUNDED
        ratios = tab[rows, -1] / colvals[rows]
        rmin = float(ratios.min())
        ties = rows[ratios <= rmin + _RATIO_TIE * (1.0 + abs(rmin))]
        row = int(ties[0])
        if rmin <= 1e-12 * scale:
            stall += 1
            if stall > STALL_LIMIT:
                bland = True
        else:
            stall = 0
        _apply_pivot(tab, row, col)
        basis[row] = col
    raise SolverFailure(f"pivot limit exceeded in {label}")


def _dump(tab: np.ndarray, basis: list[int], trace: TextIO | None, label: str) -> None:
    if trace is None:
        return
    trace.write(f"--- {label}: basis={basis}\n")
    trace.write(np.array2string(tab, precision=6, suppress_small=True, max_line_width=240))
    trace.write("\n")


def solve(lp: StandardLp, *, trace: TextIO | None = None) -> LpSolution:
    """Solve with a two-phase primal simplex.  Deterministic: fixed pivot rules
    (entering: largest reduced-cost violation, lowest-index ties, Bland's rule
    after a degeneracy stall; leaving: first row among ratio ties) yield
    identical bases on identical input."""
    global _solve_calls
    _solve_calls += 1

    canon = _canonicalize(lp)
    m_c, n_c = canon.A.shape

    if m_c == 0:
        if np.any(canon.c < -_RC_TOL):
            return LpSolution(UNBOUNDED)
        x = canon.shift.copy()
        return LpSolution(OPTIMAL, x, np.zeros(0), float(lp.objective @ x), (), ())

    # Phase 1: reuse +1 slack columns as the starting basis where possible,
    # otherwise add an artificial column for the row.
    basis: list[int] = [-1] * m_c
    for k, (kind, i, _) in enumerate(canon.col_kind):
        if kind == "slack" and canon.A[i, k] == 1.0:
            basis[i] = k
    art_rows = [i for i in range(m_c) if basis[i] < 0]
    n_art = len(art_rows)

    tab = np.zeros((m_c + 1, n_c + n_art + 1))
    tab[:m_c, :n_c] = canon.A
    tab[:m_c, -1] = canon.b
    for t, i in enumerate(art_rows):
        tab[i, n_c + t] = 1.0
        basis[i] = n_c + t
    if n_art:
        cost1 = np.zeros(n_c + n_art + 1)
        cost1[n_c:-1] = 1.0
        tab[-1] = cost1
        for i in art_rows:
            tab[-1] -= tab[i]
        _dump(tab, basis, trace, "phase-1 start")
        status = _pivot_loop(tab, basis, trace, "phase 1")
        if status != OPTIMAL:
            raise SolverFailure("phase 1 reported unbounded; artificial objective is bounded below")
        if -tab[-1, -1] > FEAS_TOL * (1.0 + float(np.abs(canon.b).max(initial=0.0))):
            return LpSolution(INFEASIBLE)
        # Drive leftover artificials out of the basis; drop redundant rows.
        keep = np.ones(m_c, dtype=bool)
        for i in range(m_c):
            if basis[i] >= n_c:
                cols = np.flatnonzero(np.abs(tab[i, :n_c]) > PIVOT_TOL)
                if cols.size:
                    _apply_pivot(tab, i, int(cols[0]))
                    basis[i] = int(cols[0])
                else:
                    keep[i] = False
        kept = np.flatnonzero(keep)
        tab = np.hstack([tab[np.append(kept, m_c), :n_c], tab[np.append(kept, m_c), -1:]])
        basis = [basis[i] for i in kept]
    else:
        kept = np.arange(m_c)
        tab = np.hstack([tab[:, :n_c], tab[:, -1:]])

    # Phase 2: rebuild the cost row for the true objective.
    cost2 = np.append(canon.c, 0.0)
    for pos, bc in enumerate(basis):
        if cost2[bc] != 0.0:
            cost2 = cost2 - cost2[bc] * tab[pos]
    tab[-1] = cost2
    _dump(tab, basis, trace, "phase-2 start")
    status = _pivot_loop(tab, basis, trace, "phase 2")
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED)

    n_k = len(basis)
    z = np.zeros(n_c)
    z[basis] = tab[:n_k, -1]
    x = canon.shift.copy()
    for k, (kind, j, sgn) in enumerate(canon.col_kind):
        if kind == "var" and z[k] != 0.0:
            x[j] += sgn * z[k]
    objective = float(lp.objective @ x)

    B = canon.A[np.ix_(kept, basis)]
    try:
        lam = np.linalg.solve(B.T, canon.c[np.asarray(basis, dtype=int)])
    except np.linalg.LinAlgError as exc:
        raise SolverFailure(f"singular basis during dual recovery: {exc}") from exc
    duals = np.zeros(lp.n_rows)
    for pos, ri in enumerate(kept):
        orig = canon.row_origin[ri]
        if orig >= 0:
            duals[orig] = canon.row_sign[ri] * lam[pos]

    _validate(lp, canon, kept, x, lam, objective)
    return LpSolution(OPTIMAL, x, duals, objective, tuple(int(v) for v in basis),
                      tuple(int(v) for v in kept))


def _validate(lp: StandardLp, canon: _Canonical, kept: np.ndarray, x: np.ndarray,
              lam: np.ndarray, objective: float) -> None:
    """Certify the reported optimum; raise SolverFailure on numerical breakdown."""
    resid = lp.matrix @ x - lp.rhs
    for i, sense in enumerate(lp.senses):
        tol = FEAS_TOL * (1.0 + abs(lp.rhs[i]))
        r = resid[i]
        if sense == EQ and abs(r) > tol:
            raise SolverFailure(f"equality row {i} violated by {r:.3e}")
        if sense == LE and r > tol:
            raise SolverFailure(f"<= row {i} violated by {r:.3e}")
        if sense == GE and r < -tol:
            raise SolverFailure(f">= row {i} violated by {-r:.3e}")
    if np.any(x < lp.lower - FEAS_TOL) or np.any(x > lp.upper + FEAS_TOL):
        raise SolverFailure("variable bound violated at reported optimum")
    rc = canon.c - canon.A[kept].T @ lam
    rc_tol = FEAS_TOL * (1.0 + float(np.abs(canon.c).max(initial=0.0)))
    if rc.min(initial=0.0) < -rc_tol:
        raise SolverFailure(f"dual infeasibility {rc.min():.3e} at reported optimum")
    gap = abs(float(canon.b[kept] @ lam) + canon.offset - objective)
    if gap > DUALITY_TOL * (1.0 + abs(objective)):
        raise SolverFailure(f"duality gap {gap:.3e} at reported optimum")


def rhs_ranging(lp: StandardLp, sol: LpSolution, row: int) -> RangingInterval:
    """Maximal interval for lp.rhs[row] over which sol's basis stays optimal.

    The dual vector is constant on the interval.  Under degeneracy the interval
    may have zero width.  Requires an optimal solution produced by solve(lp).
    """
    if not 0 <= row < lp.n_rows:
        raise ValidationError(f"row {row} out of range for {lp.n_rows} rows")
    if sol.status != OPTIMAL or sol.basis is None or sol.kept_rows is None:
        raise ValidationError("ranging requires an optimal solution with a stored basis")

    canon = _canonicalize(lp)
    kept = np.asarray(sol.kept_rows, dtype=int)
    basis = np.asarray(sol.basis, dtype=int)
    if kept.size != basis.size:
        raise ValidationError("basis descriptor does not match the problem")
    B = canon.A[np.ix_(kept, basis)]
    try:
        x_b = np.linalg.solve(B, canon.b[kept])
    except np.linalg.LinAlgError as exc:
        raise ValidationError(f"stored basis is singular for this problem: {exc}") from exc
    scale = 1.0 + float(np.abs(canon.b).max(initial=0.0))
    if x_b.min(initial=0.0) < -1e-6 * scale:
        raise ValidationError("stored basis is not primal feasible for this problem")

    pos = np.flatnonzero(canon.row_origin[kept] == row)
    base = float(lp.rhs[row])
    if pos.size == 0:
        # The row was dropped as redundant; any perturbation breaks consistency.
        return RangingInterval(row, base, base, np.array(sol.duals, dtype=float))
    k = int(pos[0])
    e = np.zeros(kept.size)
    e[k] = canon.row_sign[kept[k]]
    w = np.linalg.solve(B, e)

    tol_w = 1e-11 * max(1.0, float(np.abs(w).max(initial=0.0)))
    up = w > tol_w
    dn = w < -tol_w
    d_lo = float((-x_b[up] / w[up]).max()) if np.any(up) else -np.inf
    d_hi = float((-x_b[dn] / w[dn]).min()) if np.any(dn) else np.inf
    d_lo = min(d_lo, 0.0)
    d_hi = max(d_hi, 0.0)
    return RangingInterval(row, base + d_lo, base + d_hi, np.array(sol.duals, dtype=float))
