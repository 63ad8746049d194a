"""Self-contained dense LP and matrix-game solver.

Two-phase tableau simplex with Dantzig pricing and a Bland's-rule fallback
that kicks in after a run of degenerate pivots.  Determinism over speed:
identical input always produces the identical pivot sequence, solution, and
dual vector.  Matrix games are solved through the standard LP formulation
with the payoff shifted to be strictly positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

#: Centralized tolerances.
FEAS_TOL = 1e-7    # feasibility / optimality certificates
PIVOT_TOL = 1e-10  # pivot eligibility and reduced-cost threshold

#: Consecutive degenerate pivots tolerated before switching to Bland's rule.
DEGENERACY_THRESHOLD = 64

LESS, EQUAL, GREATER = "<=", "=", ">="


class LpError(Exception):
    pass


class NoConvergenceError(LpError):
    """Iteration budget exhausted; the solve is abandoned rather than
    reporting a possibly wrong 'optimal'."""


@dataclass
class LpProblem:
    """min/max  c.x  subject to  A x (<=,=,>=) b  and  lb <= x <= ub.

    Default bounds are [0, +inf).  Pass -inf/inf entries for free or
    one-sided variables.
    """

    sense: str
    c: np.ndarray
    a: np.ndarray
    relations: tuple
    b: np.ndarray
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.a = np.atleast_2d(np.asarray(self.a, dtype=float))
        self.b = np.asarray(self.b, dtype=float)
        n = self.c.size
        m = self.b.size
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")
        if self.a.shape != (m, n):
            raise ValueError(f"constraint matrix shape {self.a.shape} does not "
                             f"match {m} rhs entries and {n} costs")
        if len(self.relations) != m:
            raise ValueError("one relation per constraint row required")
        for rel in self.relations:
            if rel not in (LESS, EQUAL, GREATER):
                raise ValueError(f"unknown relation {rel!r}")
        self.lb = (np.zeros(n) if self.lb is None
                   else np.asarray(self.lb, dtype=float))
        self.ub = (np.full(n, np.inf) if self.ub is None
                   else np.asarray(self.ub, dtype=float))
        if self.lb.size != n or self.ub.size != n:
            raise ValueError("bound arrays must match the variable count")
        if np.any(self.lb > self.ub):
            raise ValueError("lower bound exceeds upper bound")


@dataclass
class LpSolution:
    status: str                      # optimal | infeasible | unbounded
    x: np.ndarray | None = None
    duals: np.ndarray | None = None  # one per original constraint row
    objective: float | None = None
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    duality_gap: float = 0.0
    iterations: int = 0


@dataclass
class MatrixGameResult:
    value: float
    row_mix: np.ndarray
    col_mix: np.ndarray
    shift: float = 0.0


def _pivot(tableau, basis, row, col):
    piv = tableau[row, col]
    tableau[row] /= piv
    colv = tableau[:, col].copy()
    colv[row] = 0.0
    tableau -= np.outer(colv, tableau[row])
    # keep the pivot column numerically exact
    tableau[:, col] = 0.0
    tableau[row, col] = 1.0
    basis[row] = col


def _run_simplex(tableau, basis, allowed, max_iter, start_iter=0):
    """Minimize over the tableau in place.

    tableau: (m+1, width) with rhs in the last column and the reduced-cost
    row last.  allowed marks columns eligible to enter. Returns
    (status, iterations); status is 'optimal' or 'unbounded'.
    """
    m = basis.size
    cost = tableau[m]
    rhs = tableau[:m, -1]
    it = start_iter
    degen_run = 0
    bland = False
    masked = np.empty(allowed.size)
    while True:
        if it >= max_iter:
            raise NoConvergenceError(
                f"simplex exceeded {max_iter} iterations without converging")
        np.copyto(masked, cost[:-1], where=allowed)
        masked[~allowed] = np.inf
        if bland:
            elig = np.nonzero(masked < -PIVOT_TOL)[0]
            if elig.size == 0:
                return "optimal", it
            col = int(elig[0])
        else:
            col = int(np.argmin(masked))
            if masked[col] >= -PIVOT_TOL:
                return "optimal", it
        column = tableau[:m, col]
        pos = column > PIVOT_TOL
        if not pos.any():
            return "unbounded", it
        ratios = np.full(m, np.inf)
        np.divide(rhs, column, out=ratios, where=pos)
        rmin = ratios.min()
        ties = np.nonzero(ratios <= rmin * (1 + 1e-9) + 1e-12)[0]
        if bland:
            row = int(ties[np.argmin(basis[ties])])
        else:
            row = int(ties[np.argmax(column[ties])])
        if rmin <= FEAS_TOL:
            degen_run += 1
            if degen_run >= DEGENERACY_THRESHOLD:
                bland = True
        else:
            degen_run = 0
            bland = False
        _pivot(tableau, basis, row, col)
        it += 1


@dataclass
class _StandardForm:
    """min c.x over A x = b, x >= 0, with provenance for mapping back."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    obj_offset: float
    n_struct: int            # structural columns (post variable transforms)
    var_map: list            # per original variable: ('shift', k, lb) etc.
    row_sign: np.ndarray     # +1 / -1 applied to each row
    slack_col: np.ndarray    # per row: its slack column or -1
    n_rows_original: int     # rows of the user problem (bound rows excluded)


def _standardize(p: LpProblem) -> _StandardForm:
    m, n = p.a.shape
    sign = 1.0 if p.sense == "min" else -1.0
    c_in = sign * p.c

    cols = []        # structural columns of A
    c_std = []
    var_map = []
    b = p.b.astype(float).copy()
    extra_rows = []  # (column index, rhs) for finite upper bounds
    obj_offset = 0.0
    for k in range(n):
        lo, hi = p.lb[k], p.ub[k]
        a_col = p.a[:, k]
        if math.isinf(lo) and math.isinf(hi):
            var_map.append(("free", len(cols)))
            cols.append(a_col)
            cols.append(-a_col)
            c_std.extend([c_in[k], -c_in[k]])
        elif not math.isinf(lo):
            if lo != 0.0:
                b -= a_col * lo
                obj_offset += c_in[k] * lo
            var_map.append(("shift", len(cols), lo))
            if not math.isinf(hi):
                extra_rows.append((len(cols), hi - lo))
            cols.append(a_col)
            c_std.append(c_in[k])
        else:
            # lo = -inf, hi finite: substitute x = hi - t, t >= 0
            b -= a_col * hi
            obj_offset += c_in[k] * hi
            var_map.append(("mirror", len(cols), hi))
            cols.append(-a_col)
            c_std.append(-c_in[k])

    n_struct = len(cols)
    a_std = np.column_stack(cols) if cols else np.zeros((m, 0))
    relations = list(p.relations)
    if extra_rows:
        pad = np.zeros((len(extra_rows), n_struct))
        rhs_extra = []
        for r, (col, ub_val) in enumerate(extra_rows):
            pad[r, col] = 1.0
            rhs_extra.append(ub_val)
        a_std = np.vstack([a_std, pad])
        b = np.concatenate([b, rhs_extra])
        relations += [LESS] * len(extra_rows)

    m_all = b.size
    slack_cols = np.full(m_all, -1, dtype=int)
    slack_blocks = []
    width = n_struct
    for i, rel in enumerate(relations):
        if rel == EQUAL:
            continue
        coeff = 1.0 if rel == LESS else -1.0
        col = np.zeros(m_all)
        col[i] = coeff
        slack_blocks.append(col)
        slack_cols[i] = width
        width += 1
    if slack_blocks:
        a_std = np.column_stack([a_std] + slack_blocks)
    c_full = np.concatenate([c_std, np.zeros(width - n_struct)])

    row_sign = np.ones(m_all)
    neg = b < 0
    row_sign[neg] = -1.0
    a_std[neg] *= -1.0
    b = np.abs(b)

    return _StandardForm(a=a_std, b=b, c=c_full, obj_offset=obj_offset,
                         n_struct=n_struct, var_map=var_map, row_sign=row_sign,
                         slack_col=slack_cols, n_rows_original=m)


def solve_lp(p: LpProblem, max_iter: int | None = None) -> LpSolution:
    """Solve the LP; deterministic for identical input.

    Raises NoConvergenceError when the iteration budget is exhausted.
    """
    sf = _standardize(p)
    a, b, c = sf.a, sf.b, sf.c
    m, width = a.shape
    if max_iter is None:
        max_iter = 40 * (m + width) + 2000

    # Initial basis: slack columns that survived row negation with +1;
    # everything else gets an artificial.
    basis = np.full(m, -1, dtype=int)
    need_artificial = []
    for i in range(m):
        s = sf.slack_col[i]
        if s >= 0 and a[i, s] > 0:
            basis[i] = s
        else:
            need_artificial.append(i)

    n_art = len(need_artificial)
    art_cols = np.zeros((m, n_art))
    for k, i in enumerate(need_artificial):
        art_cols[i, k] = 1.0
        basis[i] = width + k

    tableau = np.zeros((m + 1, width + n_art + 1))
    tableau[:m, :width] = a
    tableau[:m, width:width + n_art] = art_cols
    tableau[:m, -1] = b
    allowed = np.ones(width + n_art, dtype=bool)
    iterations = 0

    keep_rows = np.ones(m, dtype=bool)
    if n_art:
        # Phase 1: drive the artificial variables to zero.
        cost = tableau[m]
        cost[width:width + n_art] = 1.0
        for i in need_artificial:
            cost -= tableau[i]
        status, iterations = _run_simplex(tableau, basis, allowed, max_iter)
        if status == "unbounded" or -tableau[m, -1] > FEAS_TOL:
            if status == "unbounded":
                raise NoConvergenceError("phase 1 reported an unbounded "
                                         "auxiliary problem")
            return LpSolution(status="infeasible", iterations=iterations)
        # Pivot basic artificials out; rows that cannot be pivoted are
        # redundant and dropped.
        for i in range(m):
            if basis[i] >= width:
                structural = np.nonzero(np.abs(tableau[i, :width]) > PIVOT_TOL)[0]
                if structural.size:
                    _pivot(tableau, basis, i, int(structural[0]))
                else:
                    keep_rows[i] = False
        allowed[width:] = False
        if not keep_rows.all():
            sel = np.concatenate([np.nonzero(keep_rows)[0], [m]])
            tableau = tableau[sel]
            basis = basis[keep_rows]
            m = basis.size

    # Phase 2
    tableau[m] = 0.0
    tableau[m, :width] = c
    nz = np.nonzero(c[basis])[0]
    for i in nz:
        tableau[m] -= c[basis[i]] * tableau[i]
    status, iterations = _run_simplex(tableau, basis, allowed, max_iter,
                                      start_iter=iterations)
    if status == "unbounded":
        return LpSolution(status="unbounded", iterations=iterations)

    x_std = np.zeros(width + n_art)
    x_std[basis] = tableau[:m, -1]

    # Duals read from the reduced-cost row: a column that started as the
    # identity of row i prices to -y_i (cost-0 slack) or 1 - y_i (artificial).
    full_rows = sf.b.size
    y = np.zeros(full_rows)
    row_of = np.nonzero(keep_rows)[0] if not keep_rows.all() else np.arange(full_rows)
    cost_row = tableau[m]
    art_of_row = {}
    for k, i in enumerate(need_artificial):
        art_of_row[i] = width + k
    for i_full in range(full_rows):
        s = sf.slack_col[i_full]
        if i_full in art_of_row:
            # artificial columns carry cost 0 in phase 2, so they price to -y_i
            y[i_full] = -cost_row[art_of_row[i_full]]
        elif s >= 0:
            y[i_full] = -cost_row[s] * (1.0 if a[i_full, s] > 0 else -1.0)
    # rows dropped as redundant keep dual 0
    dropped = set(range(full_rows)) - set(row_of.tolist())
    for i_full in dropped:
        y[i_full] = 0.0

    obj_std = float(c @ x_std[:len(c)])
    dual_obj = float(sf.b @ y)
    gap = abs(obj_std - dual_obj) / (1.0 + abs(obj_std))
    reduced = c - y @ a
    dual_residual = float(max(0.0, -reduced.min())) if reduced.size else 0.0
    primal_residual = float(np.max(np.abs(a @ x_std[:width] - sf.b))) if m else 0.0

    # Map back to original variables.
    x = np.zeros(p.c.size)
    for k, spec in enumerate(sf.var_map):
        kind = spec[0]
        if kind == "free":
            x[k] = x_std[spec[1]] - x_std[spec[1] + 1]
        elif kind == "shift":
            x[k] = x_std[spec[1]] + spec[2]
        else:
            x[k] = spec[2] - x_std[spec[1]]

    sense = 1.0 if p.sense == "min" else -1.0
    objective = sense * (obj_std + sf.obj_offset)
    duals = sense * (sf.row_sign * y)[:sf.n_rows_original]
    return LpSolution(status="optimal", x=x, duals=duals, objective=objective,
                      primal_residual=primal_residual,
                      dual_residual=dual_residual,
                      duality_gap=gap, iterations=iterations)


#: Graded rhs perturbation used by the matrix-game LP.  Fine strategy grids
#: make these LPs massively degenerate (thousands of stalling pivots); a
#: deterministic ramp of this size breaks the ties while moving the value by
#: less than 1e-8, far inside the 1e-7 certificates.
GAME_PERTURBATION = 1e-11


def solve_matrix_game(payoff) -> MatrixGameResult:
    """Value and optimal mixed strategies of a zero-sum matrix game.

    The row player maximizes payoff[row, col]; the column player minimizes.
    The payoff is shifted to be strictly positive (shift recorded and
    subtracted back) so the classic normalized LP applies.
    """
    p = np.asarray(payoff, dtype=float)
    if p.ndim != 2 or p.size == 0:
        raise ValueError("payoff must be a nonempty 2-d matrix")
    if not np.all(np.isfinite(p)):
        raise ValueError("payoff entries must be finite")
    m, n = p.shape
    low = p.min()
    shift = 1.0 - low if low <= 0 else 0.0
    shifted = p + shift

    # Column mix scaled by the game value: max 1.w  s.t.  shifted @ w <= 1.
    rhs = 1.0 + GAME_PERTURBATION * np.arange(1, m + 1)
    prob = LpProblem(sense="max", c=np.ones(n), a=shifted,
                     relations=(LESS,) * m, b=rhs)
    sol = solve_lp(prob)
    if sol.status != "optimal":
        raise LpError(f"matrix game LP ended with status {sol.status}")
    total = sol.objective
    if total <= 0:
        raise LpError("matrix game LP returned a nonpositive normalizer")
    value_shifted = 1.0 / total
    col_mix = np.maximum(sol.x, 0.0)
    col_mix /= col_mix.sum()
    row_mix = np.maximum(sol.duals, 0.0)
    row_mix /= row_mix.sum()
    return MatrixGameResult(value=value_shifted - shift,
                            row_mix=row_mix, col_mix=col_mix, shift=shift)
