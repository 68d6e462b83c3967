"""Grid discretization of the persuasion problem.

The primal program chooses, per state, a distribution over grid belief
profiles whose one-receiver marginals are Bayes consistent. The dual program
chooses constants ``V[w]`` and per-receiver functions ``phi[i][w]`` on the
grid with ``v_w(profile) <= V[w] + sum_i phi[i][w](x_i)`` at every grid
profile and ``sum_w x(w) phi[i][w](x) = 0`` at every grid belief. The two
programs are LP duals of one another on the same grid, so their values agree.

Grid values are values of the discretized problem. The primal value is a
lower bound on the continuum value; the dual only certifies the grid problem.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from math import comb
from typing import Callable

import numpy as np

from .belief_core import (
    ConditionalBeliefFamily,
    PersuasionProblem,
    StateSpace,
    ValidationError,
    canonicalize,
)
from .lp_engine import LinearProgram, LpError, solve

log = logging.getLogger(__name__)

POINT_CAP = 100_000
VARIABLE_CAP = 200_000
DEFAULT_M = 50


class SizeError(ValueError):
    pass


# --------------------------------------------------------------------------
# grids

def _compositions(total: int, parts: int):
    """Nonnegative integer vectors of length ``parts`` summing to ``total``, lexicographic."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class GridSpec:
    n_states: int
    m: int
    points: np.ndarray = field(repr=False, compare=False)
    lattice: tuple = field(repr=False, compare=False)

    @property
    def size(self) -> int:
        return len(self.lattice)

    def index_of(self, integer_point) -> int:
        return self._lookup[tuple(int(v) for v in integer_point)]

    @property
    def _lookup(self):
        cache = self.__dict__.get("_lookup_cache")
        if cache is None:
            cache = {pt: k for k, pt in enumerate(self.lattice)}
            object.__setattr__(self, "_lookup_cache", cache)
        return cache


def make_grid(states: StateSpace | int, m: int, cap: int = POINT_CAP) -> GridSpec:
    S = states if isinstance(states, int) else states.size
    if m < 1:
        raise ValidationError("grid resolution must be a positive integer")
    count = comb(m + S - 1, S - 1)
    if count > cap:
        raise SizeError(f"grid has {count} points, cap is {cap}")
    lattice = tuple(_compositions(m, S))
    pts = np.array(lattice, dtype=float) / m
    return GridSpec(S, m, pts, lattice)


def _kuhn_weights(grid: GridSpec, X: np.ndarray):
    """Vertices and weights of the lattice simplex containing each belief in ``X``.

    Uses the Freudenthal-Kuhn triangulation in cumulative coordinates, which
    reduces to linear interpolation between neighbours for two states.
    Returns index array (N, S) and weight array (N, S).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m, S = grid.m, grid.n_states
    N = X.shape[0]
    c = np.cumsum(X * m, axis=1)[:, :-1]
    c = np.clip(c, 0.0, m)
    c = np.maximum.accumulate(c, axis=1)
    base = np.floor(c)
    base = np.minimum(base, m - 1) if m > 0 else base
    frac = c - base
    idx = np.empty((N, S), dtype=int)
    wts = np.empty((N, S))
    for r in range(N):
        f = frac[r]
        # descending fractions, later coordinate first on ties
        perm = sorted(range(S - 1), key=lambda k: (-f[k], -k))
        vert = base[r].copy()
        fs = [f[k] for k in perm]
        weights = [1.0 - fs[0]] + [fs[j] - fs[j + 1] for j in range(len(fs) - 1)] + [fs[-1]]
        verts = [vert.copy()]
        for k in perm:
            vert[k] += 1
            verts.append(vert.copy())
        for j, (v, w) in enumerate(zip(verts, weights)):
            full = np.concatenate([[0.0], v, [m]])
            pt = np.rint(np.diff(full)).astype(int)
            if np.any(pt < 0):
                # only reachable with zero weight on a tie; use the base vertex instead
                full = np.concatenate([[0.0], base[r], [m]])
                pt = np.rint(np.diff(full)).astype(int)
                w = 0.0 if j else w
            idx[r, j] = grid.index_of(pt)
            wts[r, j] = w
    return idx, wts


def interpolate(grid: GridSpec, values: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Piecewise-linear interpolation of grid ``values`` (K, ...) at beliefs ``X`` (..., S)."""
    X = np.asarray(X, dtype=float)
    lead = X.shape[:-1]
    flat = X.reshape(-1, grid.n_states)
    values = np.asarray(values, dtype=float)
    if grid.n_states == 2:
        xs = grid.points[:, 0]
        order = np.argsort(xs)
        if values.ndim == 1:
            out = np.interp(flat[:, 0], xs[order], values[order])
        else:
            out = np.stack([np.interp(flat[:, 0], xs[order], values[order, k])
                            for k in range(values.shape[1])], axis=-1)
    else:
        idx, w = _kuhn_weights(grid, flat)
        out = np.einsum("ns,ns...->n...", w, values[idx])
    return out.reshape(lead + values.shape[1:])


# --------------------------------------------------------------------------
# certificates

@dataclass
class DualCertificate:
    """Constants ``V[w]`` plus functions ``phi[i][w]`` over beliefs.

    ``phi_fn(i, X)`` maps beliefs of shape (..., S) to values of shape (..., S).
    ``kind`` is ``"grid"`` (values at grid points, linear interpolation in
    between), ``"alpha"`` (binary-state alpha form) or ``"closed"``.
    """

    V: np.ndarray
    n_receivers: int
    phi_fn: Callable[[int, np.ndarray], np.ndarray]
    kind: str = "closed"
    grid: GridSpec | None = None
    phi_values: np.ndarray | None = None      # (n, K, S) for grid certificates
    meta: dict = field(default_factory=dict)

    @property
    def n_states(self) -> int:
        return len(self.V)

    def phi(self, i: int, X) -> np.ndarray:
        return np.asarray(self.phi_fn(i, np.asarray(X, dtype=float)), dtype=float)

    def bound(self, prior) -> float:
        return float(np.dot(np.asarray(prior.weights if hasattr(prior, "weights") else prior), self.V))

    def orthogonality_residual(self, X=None) -> float:
        """Largest ``|sum_w x(w) phi[i][w](x)|`` over represented (or given) beliefs."""
        if X is None:
            if self.grid is None:
                raise ValueError("closed-form certificate needs sample beliefs")
            X = self.grid.points
        X = np.asarray(X, dtype=float)
        worst = 0.0
        for i in range(self.n_receivers):
            r = np.sum(X * self.phi(i, X), axis=-1)
            worst = max(worst, float(np.max(np.abs(r))))
        return worst


def grid_certificate(grid: GridSpec, V, phi_values) -> DualCertificate:
    phi_values = np.asarray(phi_values, dtype=float)

    def fn(i, X):
        return interpolate(grid, phi_values[i], X)

    return DualCertificate(np.asarray(V, dtype=float), phi_values.shape[0], fn, "grid", grid, phi_values)


# --------------------------------------------------------------------------
# reports

@dataclass
class GridSolveReport:
    value: float
    grid: GridSpec
    family: ConditionalBeliefFamily | None = None
    certificate: DualCertificate | None = None
    gap: float = float("nan")
    diagnostics: dict = field(default_factory=dict)

    label = "grid value"


def _profiles(grid: GridSpec, n: int, cap: int):
    K = grid.size
    count = K ** n
    if count > cap:
        raise SizeError(f"{count} grid profiles exceed the cap {cap}")
    idx = np.array(list(itertools.product(range(K), repeat=n)), dtype=int).reshape(-1, n)
    return idx, grid.points[idx]            # (P, n), (P, n, S)


def tabulate(problem: PersuasionProblem, grid: GridSpec, cap: int = VARIABLE_CAP):
    """Utility at every grid profile, lexicographic, shape (S, P)."""
    if grid.n_states != problem.n_states:
        raise ValidationError("grid and problem disagree on the number of states")
    idx, X = _profiles(grid, problem.n_receivers, cap)
    vals = np.stack([problem.evaluate(w, X) for w in range(problem.n_states)])
    if not np.all(np.isfinite(vals)):
        raise ValidationError("utility is not finite on the grid")
    return idx, X, vals


def _sup_norm(vals):
    return float(np.max(np.abs(vals))) if vals.size else 0.0


def solve_primal_grid(problem: PersuasionProblem, grid: GridSpec, cap: int = VARIABLE_CAP,
                      backend: str = "auto") -> GridSolveReport:
    S, n = problem.n_states, problem.n_receivers
    K = grid.size
    if S * K ** n > cap:
        raise SizeError(f"{S * K ** n} primal variables exceed the cap {cap}")
    idx, X, vals = tabulate(problem, grid, cap)
    P = idx.shape[0]
    p = problem.prior.array
    nv = S * P
    c = (p[:, None] * vals).ravel()
    rows = []
    rhs = []
    for w in range(S):
        r = np.zeros(nv)
        r[w * P:(w + 1) * P] = 1.0
        rows.append(r)
        rhs.append(1.0)
    # Bayes consistency of each receiver's marginal at each grid belief; the
    # last state's row is the negative sum of the others and is omitted
    for i in range(n):
        for k in range(K):
            mask = (idx[:, i] == k).astype(float)
            x = grid.points[k]
            for w in range(S - 1):
                r = np.zeros(nv)
                for w2 in range(S):
                    coef = -x[w] * p[w2] + (p[w] if w2 == w else 0.0)
                    r[w2 * P:(w2 + 1) * P] = coef * mask
                rows.append(r)
                rhs.append(0.0)
    lp = LinearProgram(c, A_eq=np.array(rows), b_eq=np.array(rhs))
    sol = solve(lp, backend=backend)
    if not sol.optimal:
        raise LpError(f"grid primal LP {sol.status}: {sol.message}")
    mu = np.maximum(sol.x.reshape(S, P), 0.0)
    per_state = []
    for w in range(S):
        keep = np.flatnonzero(mu[w] > 1e-12)
        pairs = [(tuple(tuple(float(v) for v in grid.points[j]) for j in idx[q]), float(mu[w, q]))
                 for q in keep]
        per_state.append(canonicalize(pairs, merge_tol=0.0))
    fam = ConditionalBeliefFamily(tuple(per_state))
    res = sol.residuals(lp)
    diag = {"backend": sol.backend, "iterations": sol.iterations, "variables": nv,
            "constraints": len(rows), "primal_residual": res["primal"],
            "dual_objective": sol.dual_objective(lp)}
    return GridSolveReport(float(sol.objective), grid, family=fam,
                           gap=abs(diag["dual_objective"] - sol.objective), diagnostics=diag)


def lemma_bounds(problem: PersuasionProblem, vals: np.ndarray):
    """Box bounds on V and phi that do not change the optimal dual value."""
    norm = _sup_norm(vals)
    p = problem.prior.array
    n = problem.n_receivers
    V_lo = -norm * np.ones_like(p)
    V_hi = (2 - p) / p * norm
    phi_lo = -2 * n / p * norm
    phi_hi = 2 / p * norm
    return V_lo, V_hi, phi_lo, phi_hi


def solve_dual_grid(problem: PersuasionProblem, grid: GridSpec, cap: int = VARIABLE_CAP,
                    box: bool = False, backend: str = "auto") -> GridSolveReport:
    S, n = problem.n_states, problem.n_receivers
    K = grid.size
    idx, X, vals = tabulate(problem, grid, cap)
    P = idx.shape[0]
    p = problem.prior.array
    # variables: V[w] (S), then phi[i, k, w] (n*K*S)
    nv = S + n * K * S

    def phi_col(i, k, w):
        return S + (i * K + k) * S + w

    c = np.zeros(nv)
    c[:S] = -p                         # maximize -sum p V
    A_ub = np.zeros((S * P, nv))
    b_ub = np.zeros(S * P)
    for w in range(S):
        blk = slice(w * P, (w + 1) * P)
        A_ub[blk, w] = -1.0
        for i in range(n):
            cols = S + (i * K + idx[:, i]) * S + w
            np.add.at(A_ub, (np.arange(w * P, (w + 1) * P), cols), -1.0)
        b_ub[blk] = -vals[w]
    A_eq = np.zeros((n * K, nv))
    for i in range(n):
        for k in range(K):
            for w in range(S):
                A_eq[i * K + k, phi_col(i, k, w)] = grid.points[k, w]
    lb = np.full(nv, -np.inf)
    ub = np.full(nv, np.inf)
    if box:
        V_lo, V_hi, phi_lo, phi_hi = lemma_bounds(problem, vals)
        lb[:S], ub[:S] = V_lo, V_hi
        for i in range(n):
            for k in range(K):
                for w in range(S):
                    lb[phi_col(i, k, w)] = phi_lo[w]
                    ub[phi_col(i, k, w)] = phi_hi[w]
    lp = LinearProgram(c, A_eq=A_eq, b_eq=np.zeros(n * K), A_ub=A_ub, b_ub=b_ub, lb=lb, ub=ub)
    sol = solve(lp, backend=backend)
    if not sol.optimal:
        raise LpError(f"grid dual LP {sol.status}: {sol.message}")
    V = sol.x[:S]
    phi = sol.x[S:].reshape(n, K, S)
    cert = grid_certificate(grid, V, phi)
    value = float(p @ V)
    viol = float(np.max(vals.ravel() + A_ub[:, S:] @ sol.x[S:] - np.repeat(V, P)))
    diag = {"backend": sol.backend, "iterations": sol.iterations, "variables": nv,
            "constraints": S * P + n * K, "max_constraint_violation": max(viol, 0.0),
            "orthogonality_residual": cert.orthogonality_residual(), "box": box}
    return GridSolveReport(value, grid, certificate=cert, diagnostics=diag)


def solve_dual_grid_binary(problem: PersuasionProblem, grid: GridSpec, cap: int = VARIABLE_CAP,
                           backend: str = "auto") -> GridSolveReport:
    """Two-receiver binary-state dual in the alpha parametrization.

    ``phi[i][low](x) = (1 - x) alpha_i(x)`` and ``phi[i][high](x) = -x alpha_i(x)``,
    so orthogonality holds by construction.
    """
    if problem.n_states != 2 or problem.n_receivers != 2:
        raise ValidationError("alpha form needs two states and two receivers")
    K = grid.size
    idx, X, vals = tabulate(problem, grid, cap)
    P = idx.shape[0]
    p = problem.prior.array
    x = grid.points[:, 0]
    nv = 2 + 2 * K
    c = np.zeros(nv)
    c[:2] = -p
    A_ub = np.zeros((2 * P, nv))
    b_ub = np.concatenate([-vals[0], -vals[1]])
    rows = np.arange(P)
    A_ub[rows, 0] = -1.0
    A_ub[P + rows, 1] = -1.0
    for i in range(2):
        k = idx[:, i]
        np.add.at(A_ub, (rows, 2 + i * K + k), -(1 - x[k]))
        np.add.at(A_ub, (P + rows, 2 + i * K + k), x[k])
    lp = LinearProgram(c, A_ub=A_ub, b_ub=b_ub, lb=np.full(nv, -np.inf))
    sol = solve(lp, backend=backend)
    if not sol.optimal:
        raise LpError(f"alpha dual LP {sol.status}: {sol.message}")
    V = sol.x[:2]
    alpha = sol.x[2:].reshape(2, K)
    phi = np.stack([np.stack([(1 - x) * alpha[i], -x * alpha[i]], axis=-1) for i in range(2)])
    cert = grid_certificate(grid, V, phi)
    cert.meta["alpha"] = alpha
    diag = {"backend": sol.backend, "iterations": sol.iterations, "variables": nv,
            "constraints": 2 * P}
    return GridSolveReport(float(p @ V), grid, certificate=cert, diagnostics=diag)


def refinement_sequence(problem: PersuasionProblem, m: int, method: str = "primal", **kw) -> list[tuple[int, float]]:
    """Grid values at ``m`` and ``2m`` for a rough convergence estimate."""
    out = []
    for mm in (m, 2 * m):
        g = make_grid(problem.states, mm)
        solver = solve_primal_grid if method == "primal" else solve_dual_grid
        out.append((mm, solver(problem, g, **kw).value))
    return out
