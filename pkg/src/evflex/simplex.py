"""Dense two-phase primal simplex with variable bounds and dual extraction.

Small, deterministic, and self-contained: a dense tableau over bounded
variables (nonbasic variables rest at a finite bound, free variables at
zero), phase-1 artificials only on the rows the initial point violates,
and Bland's rule engaged after a stretch of iterations without
objective progress.  Duals are recovered at the end from a clean solve
against the final basis, so ``duals[i]`` is the sensitivity of the
optimal value to the i-th right-hand side and ``reduced_costs[j]`` the
sensitivity to variable j's active bound.

Problem sizes here are a few thousand nonzeros at most; a dense tableau
with exact dual extraction beats sparse machinery at that scale.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, SolverStalledError

AT_LOWER, AT_UPPER, FREE, BASIC = 0, 1, 2, 3

_PIV_TOL = 1e-10
_DUAL_TOL = 1e-9
_RATIO_TIE = 1e-9


@dataclass
class LinearProgram:
    """min objective . x subject to row constraints and variable bounds.

    ``constraints`` is a list of ``(coefficients, sense, rhs)`` with
    sense one of ``"<="``, ``"=="`` (or ``"="``), ``">="``.  ``bounds``
    is one ``(lower, upper)`` pair per variable, ``None`` meaning
    unbounded on that side; omitting ``bounds`` defaults every variable
    to ``(0, +inf)``.
    """

    objective: np.ndarray
    constraints: list
    bounds: list = None

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise InvalidInputError("objective must be a nonempty 1-d vector")
        n = c.size
        rows, senses, rhs = [], [], []
        for k, (coeffs, sense, b) in enumerate(self.constraints):
            row = np.asarray(coeffs, dtype=float)
            if row.shape != (n,):
                raise InvalidInputError(f"constraint {k}: expected {n} coefficients")
            if sense not in ("<=", ">=", "=", "=="):
                raise InvalidInputError(f"constraint {k}: bad sense {sense!r}")
            rows.append(row)
            senses.append("==" if sense in ("=", "==") else sense)
            rhs.append(float(b))
        A = np.array(rows, dtype=float) if rows else np.zeros((0, n))
        b = np.array(rhs, dtype=float)
        lower, upper = self._parse_bounds(n)
        if np.any(np.isnan(A)) or np.any(np.isnan(b)) or np.any(np.isnan(c)):
            raise InvalidInputError("NaN coefficients are not allowed")
        if np.any(lower > upper):
            raise InvalidInputError("variable lower bound above upper bound")
        self.objective = c
        self._A = A
        self._senses = tuple(senses)
        self._rhs = b
        self._lower = lower
        self._upper = upper

    def _parse_bounds(self, n):
        if self.bounds is None:
            return np.zeros(n), np.full(n, np.inf)
        if len(self.bounds) != n:
            raise InvalidInputError("one (lower, upper) pair per variable required")
        lower = np.array([-np.inf if lo is None else float(lo) for lo, _ in self.bounds])
        upper = np.array([np.inf if hi is None else float(hi) for _, hi in self.bounds])
        return lower, upper

    @property
    def num_vars(self) -> int:
        return self.objective.size

    @property
    def num_rows(self) -> int:
        return self._rhs.size


@dataclass
class LpSolution:
    """Result of ``solve_lp``; vectors are ``None`` unless status is optimal.

    ``duals`` are right-hand-side sensitivities of the optimal value;
    ``reduced_costs`` are the matching sensitivities for the variable
    bounds.  ``basis``/``statuses`` can warm-start a later solve of a
    structurally identical program.
    """

    status: str
    x: np.ndarray = None
    objective: float = None
    duals: np.ndarray = None
    reduced_costs: np.ndarray = None
    iterations: int = 0
    basis: np.ndarray = field(default=None, repr=False)
    statuses: np.ndarray = field(default=None, repr=False)


class _Workspace:
    """Slack-extended column system for one solve."""

    def __init__(self, lp: LinearProgram):
        self.n = lp.num_vars
        self.m = lp.num_rows
        ineq_rows = [i for i, s in enumerate(lp._senses) if s != "=="]
        self.ncols = self.n + len(ineq_rows)
        A = np.zeros((self.m, self.ncols))
        A[:, : self.n] = lp._A
        lo = np.concatenate([lp._lower, np.zeros(len(ineq_rows))])
        hi = np.concatenate([lp._upper, np.zeros(len(ineq_rows))])
        self.row_slack = np.full(self.m, -1, dtype=int)
        for j, i in enumerate(ineq_rows):
            col = self.n + j
            A[i, col] = 1.0
            self.row_slack[i] = col
            if lp._senses[i] == "<=":
                lo[col], hi[col] = 0.0, np.inf
            else:  # ">=" becomes a.x + s = b with s <= 0
                lo[col], hi[col] = -np.inf, 0.0
        self.A = A
        self.b = lp._rhs.copy()
        self.lower = lo
        self.upper = hi
        self.cost = np.concatenate([lp.objective, np.zeros(len(ineq_rows))])
        self.b_scale = 1.0 + (float(np.abs(self.b).max()) if self.m else 0.0)

    def default_statuses(self):
        status = np.full(self.ncols, FREE, dtype=np.int8)
        status[np.isfinite(self.upper)] = AT_UPPER
        status[np.isfinite(self.lower)] = AT_LOWER
        return status

    def nonbasic_values(self, status):
        vals = np.zeros(self.ncols)
        at_lo = status == AT_LOWER
        at_hi = status == AT_UPPER
        vals[at_lo] = self.lower[at_lo]
        vals[at_hi] = self.upper[at_hi]
        return vals


def _try_warm_start(ws, basis, statuses):
    """Rebuild solver state from a previous basis; None when not reusable."""
    if basis is None or statuses is None:
        return None
    basis = np.asarray(basis, dtype=int)
    status = np.asarray(statuses, dtype=np.int8).copy()
    if basis.shape != (ws.m,) or status.shape != (ws.ncols,):
        return None
    if ws.m and (basis.min() < 0 or basis.max() >= ws.ncols):
        return None
    status[basis] = BASIC
    if int(np.count_nonzero(status == BASIC)) != ws.m:
        return None
    if not np.all(np.isfinite(ws.lower[status == AT_LOWER])):
        return None
    if not np.all(np.isfinite(ws.upper[status == AT_UPPER])):
        return None
    vals = ws.nonbasic_values(status)
    nonbasic = np.flatnonzero(status != BASIC)
    try:
        B = ws.A[:, basis]
        M = np.linalg.solve(B, ws.A)
        xB = np.linalg.solve(B, ws.b - ws.A[:, nonbasic] @ vals[nonbasic])
    except np.linalg.LinAlgError:
        return None
    slack = 1e-7 * ws.b_scale
    if np.any(xB < ws.lower[basis] - slack) or np.any(xB > ws.upper[basis] + slack):
        return None
    vals[basis] = xB
    return M, xB, vals, status, basis.copy()


def solve_lp(lp: LinearProgram, max_iterations: int = 1_000_000,
             basis=None, statuses=None) -> LpSolution:
    """Solve an LP; infeasible/unbounded are statuses, never exceptions.

    ``basis``/``statuses`` from a previous solution of a structurally
    identical LP (same rows and bounds, any objective or rhs) warm-start
    phase 2 directly; an unusable pair silently falls back to the cold
    two-phase start.

    Raises:
        SolverStalledError: the pivot cap was exceeded.
    """
    ws = _Workspace(lp)
    m, ncols = ws.m, ws.ncols
    iterations = 0

    warm = _try_warm_start(ws, basis, statuses)
    if warm is not None:
        M, xB, vals, status, basis_arr = warm
        A_ext, lower, upper = ws.A, ws.lower, ws.upper
        cost2 = ws.cost
        art_mask = np.zeros(ncols, dtype=bool)
    else:
        status = ws.default_statuses()
        vals = ws.nonbasic_values(status)
        resid = ws.b - ws.A @ vals
        basis_list = np.full(m, -1, dtype=int)
        art_rows, art_signs = [], []
        d_sign = np.ones(m)
        for i in range(m):
            s_col = ws.row_slack[i]
            if s_col >= 0:
                if ws.upper[s_col] == np.inf and resid[i] >= 0.0:  # "<=" slack
                    basis_list[i] = s_col
                elif ws.lower[s_col] == -np.inf and resid[i] <= 0.0:  # ">=" slack
                    basis_list[i] = s_col
            if basis_list[i] >= 0:
                status[basis_list[i]] = BASIC
            else:
                sign = 1.0 if resid[i] >= 0.0 else -1.0
                art_rows.append(i)
                art_signs.append(sign)
                d_sign[i] = sign
        n_art = len(art_rows)
        if n_art:
            A_ext = np.zeros((m, ncols + n_art))
            A_ext[:, :ncols] = ws.A
            for j, (i, sign) in enumerate(zip(art_rows, art_signs)):
                A_ext[i, ncols + j] = sign
                basis_list[i] = ncols + j
            lower = np.concatenate([ws.lower, np.zeros(n_art)])
            upper = np.concatenate([ws.upper, np.full(n_art, np.inf)])
            status = np.concatenate([status, np.full(n_art, BASIC, dtype=np.int8)])
            vals = np.concatenate([vals, np.zeros(n_art)])
        else:
            A_ext, lower, upper = ws.A, ws.lower, ws.upper
        basis_arr = basis_list
        art_mask = np.zeros(A_ext.shape[1], dtype=bool)
        art_mask[ncols:] = True
        # The initial basis is diagonal +-1, so B^-1 A is a row rescale.
        M = A_ext * d_sign[:, None]
        xB = np.where(basis_arr >= ncols, np.abs(resid), resid)
        vals[basis_arr] = xB

        if n_art:
            cost1 = np.zeros(A_ext.shape[1])
            cost1[ncols:] = 1.0
            iterations, _ = _iterate(
                M, xB, vals, status, basis_arr, lower, upper, cost1, art_mask,
                iterations, max_iterations,
            )
            if float(cost1[basis_arr] @ xB) > 1e-7 * ws.b_scale:
                return LpSolution(status="infeasible", iterations=iterations)
            upper[ncols:] = 0.0  # artificials may linger in the basis at zero
        cost2 = np.concatenate([ws.cost, np.zeros(A_ext.shape[1] - ncols)])

    iterations, bounded = _iterate(
        M, xB, vals, status, basis_arr, lower, upper, cost2, art_mask,
        iterations, max_iterations,
    )
    if not bounded:
        return LpSolution(status="unbounded", iterations=iterations)

    # Clean refresh of basic values and duals against the final basis.
    nonbasic = np.flatnonzero(status != BASIC)
    try:
        B = A_ext[:, basis_arr]
        xB_clean = np.linalg.solve(B, ws.b - A_ext[:, nonbasic] @ vals[nonbasic])
        y = np.linalg.solve(B.T, cost2[basis_arr])
    except np.linalg.LinAlgError:
        xB_clean, y = xB, np.full(m, np.nan)
    vals[basis_arr] = xB_clean
    x = vals[: ws.n].copy()
    reduced = lp.objective - ws.A[:, : ws.n].T @ y
    return LpSolution(
        status="optimal",
        x=x,
        objective=float(lp.objective @ x),
        duals=y,
        reduced_costs=reduced,
        iterations=iterations,
        basis=basis_arr.copy(),
        statuses=status[:ncols].copy(),
    )


def _iterate(M, xB, vals, status, basis, lower, upper, cost, art_mask,
             iterations, max_iterations):
    """Pivot until optimal (flag True) or unbounded (flag False)."""
    m, ncols = M.shape
    d = cost - cost[basis] @ M
    bland = False
    stall_limit = 5 * (m + ncols)
    stall = 0
    best = np.inf
    while True:
        movable = (status != BASIC) & ~(art_mask & (upper == lower))
        score = np.full(ncols, np.inf)
        at_lo = movable & (status == AT_LOWER) & (d < -_DUAL_TOL)
        at_hi = movable & (status == AT_UPPER) & (d > _DUAL_TOL)
        free = movable & (status == FREE) & (np.abs(d) > _DUAL_TOL)
        score[at_lo] = d[at_lo]
        score[at_hi] = -d[at_hi]
        score[free] = -np.abs(d[free])
        candidates = np.flatnonzero(score < 0)
        if candidates.size == 0:
            return iterations, True
        if iterations >= max_iterations:
            raise SolverStalledError(f"no optimum after {iterations} pivots")
        j = int(candidates[0]) if bland else int(candidates[np.argmin(score[candidates])])
        direction = -1.0 if (status[j] == AT_UPPER or (status[j] == FREE and d[j] > 0)) else 1.0

        ecol = direction * M[:, j]
        ratios = np.full(m, np.inf)
        dec = ecol > _PIV_TOL  # basic value falls toward its lower bound
        inc = ecol < -_PIV_TOL  # basic value rises toward its upper bound
        if np.any(dec):
            ratios[dec] = (xB[dec] - lower[basis[dec]]) / ecol[dec]
        if np.any(inc):
            ratios[inc] = (xB[inc] - upper[basis[inc]]) / ecol[inc]
        np.maximum(ratios, 0.0, out=ratios)
        row_min = float(ratios.min()) if m else np.inf
        own = np.inf if status[j] == FREE else upper[j] - lower[j]
        step = min(row_min, own)
        if not np.isfinite(step):
            return iterations, False
        iterations += 1

        if own <= row_min:
            # Bound flip: the entering variable crosses to its other bound.
            xB -= ecol * own
            vals[j] = upper[j] if status[j] == AT_LOWER else lower[j]
            status[j] = AT_UPPER if status[j] == AT_LOWER else AT_LOWER
        else:
            tie = np.flatnonzero(ratios <= row_min + _RATIO_TIE)
            r = int(tie[np.argmin(basis[tie])]) if bland else int(tie[0])
            leaving = basis[r]
            entering_val = vals[j] + direction * step
            xB -= ecol * step
            if ecol[r] > 0:
                vals[leaving] = lower[leaving]
                status[leaving] = AT_LOWER
            else:
                vals[leaving] = upper[leaving]
                status[leaving] = AT_UPPER
            if art_mask[leaving]:
                lower[leaving] = upper[leaving] = 0.0
                vals[leaving] = 0.0
                status[leaving] = AT_LOWER
            piv = M[r, j]
            Mr = M[r] / piv
            M[r] = Mr
            colv = M[:, j].copy()
            colv[r] = 0.0
            M -= np.outer(colv, Mr)
            d -= d[j] * Mr
            basis[r] = j
            status[j] = BASIC
            xB[r] = entering_val

        z = float(cost[basis] @ xB + cost @ vals - cost[basis] @ vals[basis])
        if z < best - 1e-12 * (1.0 + (abs(best) if np.isfinite(best) else 0.0)):
            best = z
            stall = 0
        else:
            stall += 1
            if stall > stall_limit:
                bland = True
