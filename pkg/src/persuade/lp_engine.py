"""Dense linear programming.

The default backend is a two-phase revised simplex on a dense explicit basis
inverse. Pricing is Dantzig's rule; after a run of degenerate pivots the
solver switches to Bland's rule until the objective moves again. Programs
that are too large for a dense basis are handed to HiGHS through scipy.

Programs are always posed as maximization::

    maximize    c @ x
    subject to  A_eq @ x == b_eq
                A_ub @ x <= b_ub
                lb <= x <= ub
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9
OPT_TOL = 1e-9

# beyond this the dense basis inverse gets expensive; see solve(backend="auto")
AUTO_MAX_ROWS = 1500
AUTO_MAX_ENTRIES = 6_000_000

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
FAILED = "failed"


class LpError(RuntimeError):
    pass


def _as_matrix(A, n):
    if A is None:
        return np.zeros((0, n))
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return np.zeros((0, n))
    return A


def _as_vector(b, m):
    if b is None:
        return np.zeros(m)
    return np.atleast_1d(np.asarray(b, dtype=float)).reshape(-1)


@dataclass
class LinearProgram:
    c: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        self.A_eq = _as_matrix(self.A_eq, n)
        self.b_eq = _as_vector(self.b_eq, self.A_eq.shape[0])
        self.A_ub = _as_matrix(self.A_ub, n)
        self.b_ub = _as_vector(self.b_ub, self.A_ub.shape[0])
        self.lb = np.zeros(n) if self.lb is None else np.asarray(self.lb, dtype=float).reshape(-1).copy()
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).reshape(-1).copy()
        for name, A, b in (("eq", self.A_eq, self.b_eq), ("ub", self.A_ub, self.b_ub)):
            if A.shape[1] != n:
                raise ValueError(f"A_{name} has {A.shape[1]} columns, expected {n}")
            if A.shape[0] != b.size:
                raise ValueError(f"A_{name} has {A.shape[0]} rows but b_{name} has {b.size} entries")
            if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
                raise ValueError(f"non-finite coefficient in {name} constraints")
        if self.lb.size != n or self.ub.size != n:
            raise ValueError("bound vectors must match the number of variables")
        if not np.all(np.isfinite(self.c)):
            raise ValueError("non-finite objective coefficient")
        if np.any(self.lb == np.inf) or np.any(self.ub == -np.inf) or np.any(self.lb > self.ub):
            raise ValueError("inconsistent variable bounds")

    @property
    def n_vars(self) -> int:
        return self.c.size


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None = None
    objective: float = float("nan")
    y_eq: np.ndarray | None = None
    y_ub: np.ndarray | None = None
    iterations: int = 0
    backend: str = "simplex"
    basis: tuple[int, ...] | None = None
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def reduced_costs(self, lp: LinearProgram) -> np.ndarray:
        return lp.c - lp.A_eq.T @ self.y_eq - lp.A_ub.T @ self.y_ub

    def dual_objective(self, lp: LinearProgram) -> float:
        """Objective of the dual program evaluated at the reported multipliers."""
        d = self.reduced_costs(lp)
        total = float(lp.b_eq @ self.y_eq + lp.b_ub @ self.y_ub)
        for dj, lo, hi in zip(d, lp.lb, lp.ub):
            if abs(dj) <= OPT_TOL:
                continue
            bound = hi if dj > 0 else lo
            if not np.isfinite(bound):
                return float("inf")
            total += dj * bound
        return total

    def residuals(self, lp: LinearProgram) -> dict:
        x = self.x
        d = self.reduced_costs(lp)
        ub_slack = lp.b_ub - lp.A_ub @ x
        at_lb = np.where(np.isfinite(lp.lb), x - lp.lb, np.inf)
        at_ub = np.where(np.isfinite(lp.ub), lp.ub - x, np.inf)
        cs = np.concatenate([
            np.abs(self.y_ub * ub_slack),
            np.abs(np.minimum(d, 0) * np.where(np.isfinite(at_lb), at_lb, 0.0)),
            np.abs(np.maximum(d, 0) * np.where(np.isfinite(at_ub), at_ub, 0.0)),
        ])
        primal = np.concatenate([
            np.abs(lp.A_eq @ x - lp.b_eq),
            np.maximum(-ub_slack, 0),
            np.maximum(lp.lb - x, 0),
            np.maximum(x - lp.ub, 0),
        ])
        return {
            "primal": float(primal.max(initial=0.0)),
            "complementary": float(cs.max(initial=0.0)),
        }


# --------------------------------------------------------------------------
# standard form

@dataclass
class _StandardForm:
    A: np.ndarray
    b: np.ndarray
    cost: np.ndarray          # minimize
    T: np.ndarray             # x = T @ x_std[:n_struct] + shift
    shift: np.ndarray
    n_struct: int
    n_eq: int
    n_ub: int                 # original ub rows (bound rows follow them)
    flip: np.ndarray
    slack_start: int
    const: float = 0.0


def _standardize(lp: LinearProgram) -> _StandardForm:
    n = lp.n_vars
    cols = []           # (orig var, sign)
    shift = np.zeros(n)
    bound_rows = []     # (std col, rhs)
    for j in range(n):
        lo, hi = lp.lb[j], lp.ub[j]
        if np.isfinite(lo):
            shift[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                bound_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            shift[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    ns = len(cols)
    T = np.zeros((n, ns))
    for k, (j, s) in enumerate(cols):
        T[j, k] = s

    A_eq = lp.A_eq @ T
    b_eq = lp.b_eq - lp.A_eq @ shift
    A_ub = lp.A_ub @ T
    b_ub = lp.b_ub - lp.A_ub @ shift
    if bound_rows:
        Bnd = np.zeros((len(bound_rows), ns))
        for r, (k, _) in enumerate(bound_rows):
            Bnd[r, k] = 1.0
        A_ub = np.vstack([A_ub, Bnd])
        b_ub = np.concatenate([b_ub, [rhs for _, rhs in bound_rows]])
    m_eq, m_ub = A_eq.shape[0], A_ub.shape[0]
    m = m_eq + m_ub
    A = np.zeros((m, ns + m_ub))
    A[:m_eq, :ns] = A_eq
    A[m_eq:, :ns] = A_ub
    A[m_eq:, ns:] = np.eye(m_ub)
    b = np.concatenate([b_eq, b_ub])
    flip = np.where(b < 0, -1.0, 1.0)
    A *= flip[:, None]
    b = b * flip
    cost = np.concatenate([-(T.T @ lp.c), np.zeros(m_ub)])
    return _StandardForm(A, b, cost, T, shift, ns, m_eq, lp.A_ub.shape[0], flip, ns,
                         const=float(lp.c @ shift))


# --------------------------------------------------------------------------
# revised simplex

class _Simplex:
    REFACTOR_EVERY = 64

    def __init__(self, A, b, basis, max_iter):
        self.A = A
        self.b = b
        self.basis = list(basis)
        self.max_iter = max_iter
        self.iterations = 0
        self.refactor()

    def refactor(self):
        B = self.A[:, self.basis]
        self.Binv = np.linalg.inv(B)
        self.xB = self.Binv @ self.b
        self.xB[np.abs(self.xB) < 1e-13] = 0.0
        self._since = 0

    def run(self, cost, allowed):
        """Minimize cost over columns flagged in ``allowed``. Returns a status."""
        A = self.A
        m = A.shape[0]
        degenerate_run = 0
        bland = False
        while True:
            if self.iterations >= self.max_iter:
                return FAILED
            if self._since >= self.REFACTOR_EVERY:
                self.refactor()
            y = cost[self.basis] @ self.Binv
            d = cost - y @ A
            d[~allowed] = 0.0
            d[self.basis] = 0.0
            if bland:
                cand = np.flatnonzero(d < -OPT_TOL)
                if cand.size == 0:
                    return OPTIMAL
                q = int(cand[0])
            else:
                q = int(np.argmin(d))
                if d[q] >= -OPT_TOL:
                    return OPTIMAL
            col = self.Binv @ A[:, q]
            rows = np.flatnonzero(col > PIVOT_TOL)
            if rows.size == 0:
                return UNBOUNDED
            ratios = np.maximum(self.xB[rows], 0.0) / col[rows]
            theta = ratios.min()
            ties = rows[ratios <= theta + 1e-12 * max(1.0, theta)]
            # lowest basic index among ties keeps Bland's guarantee
            r = int(min(ties, key=lambda i: self.basis[i]))
            self._pivot(r, q, col)
            if theta <= FEAS_TOL:
                degenerate_run += 1
                if degenerate_run > max(50, m):
                    if not bland:
                        log.debug("switching to Bland's rule after %d degenerate pivots", degenerate_run)
                    bland = True
            else:
                degenerate_run = 0
                bland = False

    def _pivot(self, r, q, col):
        piv = col[r]
        theta = self.xB[r] / piv
        self.xB -= theta * col
        self.xB[r] = theta
        self.xB[(self.xB < 0) & (self.xB > -FEAS_TOL)] = 0.0
        row = self.Binv[r] / piv
        self.Binv -= np.outer(col, row)
        self.Binv[r] = row
        self.basis[r] = q
        self.iterations += 1
        self._since += 1


def _solve_simplex(lp: LinearProgram, max_iter: int | None) -> LpSolution:
    sf = _standardize(lp)
    A, b = sf.A, sf.b
    m, nstd = A.shape
    if max_iter is None:
        max_iter = 50 * (m + nstd) + 1000

    if m == 0:
        # only bounds: each variable independently at its best bound
        if np.any(sf.cost < -OPT_TOL):
            return LpSolution(UNBOUNDED, backend="simplex")
        x = sf.shift.copy()
        return LpSolution(OPTIMAL, x=x, objective=float(lp.c @ x), y_eq=np.zeros(0),
                          y_ub=np.zeros(0), backend="simplex", basis=())

    # slack columns of unflipped ub rows start basic, the rest get artificials
    basis = [-1] * m
    for r in range(sf.n_eq, m):
        if sf.flip[r] > 0:
            basis[r] = sf.slack_start + (r - sf.n_eq)
    art_rows = [r for r in range(m) if basis[r] < 0]
    n_art = len(art_rows)
    A1 = np.hstack([A, np.zeros((m, n_art))])
    for k, r in enumerate(art_rows):
        A1[r, nstd + k] = 1.0
        basis[r] = nstd + k
    is_art = np.zeros(nstd + n_art, dtype=bool)
    is_art[nstd:] = True

    sx = _Simplex(A1, b, basis, max_iter)
    if n_art:
        cost1 = np.where(is_art, 1.0, 0.0)
        status = sx.run(cost1, np.ones(nstd + n_art, dtype=bool))
        if status == FAILED:
            return LpSolution(FAILED, iterations=sx.iterations, backend="simplex",
                              message="iteration limit in phase 1")
        sx.refactor()
        infeas = float(sum(sx.xB[i] for i, j in enumerate(sx.basis) if is_art[j]))
        if infeas > FEAS_TOL * max(1.0, float(np.abs(b).max(initial=0.0))):
            return LpSolution(INFEASIBLE, iterations=sx.iterations, backend="simplex")

    # drive zero-level artificials out of the basis; rows where that is
    # impossible are linearly dependent and get dropped
    keep_rows = list(range(m))
    changed = True
    while changed:
        changed = False
        for pos, j in enumerate(sx.basis):
            if not is_art[j]:
                continue
            row = sx.Binv[pos] @ sx.A
            row[is_art] = 0.0
            row[sx.basis] = 0.0
            cand = np.flatnonzero(np.abs(row) > 1e-7)
            if cand.size:
                q = int(cand[np.argmax(np.abs(row[cand]))])
                col = sx.Binv @ sx.A[:, q]
                sx._pivot(pos, q, col)
            else:
                keep = [i for i in range(len(sx.basis)) if i != pos]
                keep_rows = [keep_rows[i] for i in keep]
                sx.A = sx.A[keep]
                sx.b = sx.b[keep]
                sx.basis = [sx.basis[i] for i in keep]
                sx.refactor()
            changed = True
            break

    cost2 = np.concatenate([sf.cost, np.zeros(n_art)])
    status = sx.run(cost2, ~is_art)
    if status != OPTIMAL:
        return LpSolution(status, iterations=sx.iterations, backend="simplex")
    sx.refactor()

    xstd = np.zeros(nstd + n_art)
    xstd[sx.basis] = np.maximum(sx.xB, 0.0)
    x = sf.T @ xstd[: sf.n_struct] + sf.shift
    y_std = np.zeros(m)
    y_std[keep_rows] = cost2[sx.basis] @ sx.Binv
    y_rows = -sf.flip * y_std
    y_eq = y_rows[: sf.n_eq]
    y_ub = np.maximum(y_rows[sf.n_eq: sf.n_eq + sf.n_ub], 0.0)
    return LpSolution(OPTIMAL, x=x, objective=float(lp.c @ x), y_eq=y_eq, y_ub=y_ub,
                      iterations=sx.iterations, backend="simplex",
                      basis=tuple(sorted(int(j) for j in sx.basis)))


def _solve_highs(lp: LinearProgram) -> LpSolution:
    from scipy.optimize import linprog

    bounds = [(None if not np.isfinite(lo) else lo, None if not np.isfinite(hi) else hi)
              for lo, hi in zip(lp.lb, lp.ub)]
    res = linprog(
        -lp.c,
        A_ub=lp.A_ub if lp.A_ub.shape[0] else None,
        b_ub=lp.b_ub if lp.A_ub.shape[0] else None,
        A_eq=lp.A_eq if lp.A_eq.shape[0] else None,
        b_eq=lp.b_eq if lp.A_eq.shape[0] else None,
        bounds=bounds,
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    status = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED}.get(res.status, FAILED)
    if status != OPTIMAL:
        return LpSolution(status, backend="highs", message=res.message)
    y_eq = -np.asarray(res.eqlin.marginals) if lp.A_eq.shape[0] else np.zeros(0)
    y_ub = -np.asarray(res.ineqlin.marginals) if lp.A_ub.shape[0] else np.zeros(0)
    x = np.asarray(res.x)
    return LpSolution(OPTIMAL, x=x, objective=float(lp.c @ x), y_eq=y_eq,
                      y_ub=np.maximum(y_ub, 0.0), iterations=int(res.nit), backend="highs")


def _std_size(lp: LinearProgram) -> tuple[int, int]:
    n_bound_rows = int(np.sum(np.isfinite(lp.lb) & np.isfinite(lp.ub)))
    n_free = int(np.sum(~np.isfinite(lp.lb) & ~np.isfinite(lp.ub)))
    rows = lp.A_eq.shape[0] + lp.A_ub.shape[0] + n_bound_rows
    cols = lp.n_vars + n_free + lp.A_ub.shape[0] + n_bound_rows + rows
    return rows, cols


def solve(lp: LinearProgram, backend: str = "auto", max_iter: int | None = None) -> LpSolution:
    """Solve ``lp``; returns primal values, multipliers and status.

    ``backend`` is ``"simplex"`` (the built-in revised simplex), ``"highs"``
    or ``"auto"``, which uses the simplex unless the dense basis would be
    too large.
    """
    if backend == "auto":
        rows, cols = _std_size(lp)
        backend = "simplex" if rows <= AUTO_MAX_ROWS and rows * cols <= AUTO_MAX_ENTRIES else "highs"
    if backend == "simplex":
        try:
            sol = _solve_simplex(lp, max_iter)
        except np.linalg.LinAlgError as exc:
            sol = LpSolution(FAILED, backend="simplex", message=f"singular basis: {exc}")
    elif backend == "highs":
        sol = _solve_highs(lp)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    log.debug("LP %s via %s after %d iterations", sol.status, sol.backend, sol.iterations)
    return sol


def solve_or_raise(lp: LinearProgram, backend: str = "auto") -> LpSolution:
    sol = solve(lp, backend=backend)
    if not sol.optimal:
        raise LpError(f"LP {sol.status}: {sol.message}".rstrip(": "))
    return sol
