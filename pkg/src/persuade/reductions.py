"""Concavification and the reduction of symmetric supermodular problems to one receiver.

When ``v_w(x_1, ..., x_n) = G_w(a_w(x_1), ..., a_w(x_n))`` with ``G_w``
symmetric and supermodular and the same action map ``a_w`` for every
receiver, public signals are optimal and the value equals the concave
envelope at the prior of ``vbar(x) = sum_w x(w) G_w(a_w(x), ..., a_w(x))``.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .belief_core import (
    FiniteSupportDistribution,
    InformationStructure,
    PersuasionProblem,
    Prior,
    StateSpace,
    ValidationError,
    binary_belief,
    canonicalize,
)
from .lp_engine import LinearProgram, LpError, solve

log = logging.getLogger(__name__)

TOUCH_TOL = 1e-12
DEFAULT_SAMPLES = 1000


class SupermodularityWarning(UserWarning):
    pass


@dataclass
class ScalarFunctionTable:
    """Samples of a function on [0, 1] (``points`` shape (N,)) or a simplex grid ((N, S)).

    ``func`` optionally evaluates the exact function so that the envelope can
    be anchored at points that are not samples.
    """

    points: np.ndarray
    values: np.ndarray
    func: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if len(self.points) == 0:
            raise ValidationError("empty table")
        if len(self.points) != len(self.values):
            raise ValidationError("points and values differ in length")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("table values must be finite")


# --------------------------------------------------------------------------
# concave envelopes

def upper_hull(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Indices (into sorted order) of the upper convex hull, by monotone chain."""
    hull: list[int] = []
    for k in range(len(xs)):
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            cross = (xs[j] - xs[i]) * (ys[k] - ys[i]) - (ys[j] - ys[i]) * (xs[k] - xs[i])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(k)
    return np.array(hull, dtype=int)


def _sorted_samples(table: ScalarFunctionTable, extra=()):
    xs = table.points
    ys = table.values
    if xs.ndim != 1:
        raise ValidationError("cav_1d needs samples on [0, 1]")
    if table.func is not None and len(extra):
        ex = np.array([e for e in extra if not np.any(np.abs(xs - e) <= 1e-15)])
        if ex.size:
            xs = np.concatenate([xs, ex])
            ys = np.concatenate([ys, [float(table.func(e)) for e in ex]])
    order = np.lexsort((-ys, xs))
    xs, ys = xs[order], ys[order]
    # keep the largest value for duplicated abscissae
    keep = np.concatenate([[True], np.diff(xs) > 0])
    return xs[keep], ys[keep]


def envelope(table: ScalarFunctionTable) -> Callable[[np.ndarray], np.ndarray]:
    """Piecewise-linear concave envelope of the samples."""
    xs, ys = _sorted_samples(table)
    h = upper_hull(xs, ys)
    hx, hy = xs[h], ys[h]
    return lambda x: np.interp(x, hx, hy)


def cav_1d(table: ScalarFunctionTable, p: float) -> tuple[float, FiniteSupportDistribution]:
    """Concave envelope at ``p`` and the splitting of ``p`` that attains it.

    The splitting is a point mass when the function touches its envelope at
    ``p``; otherwise it is the pair of hull vertices around ``p``. Atoms are
    two-state beliefs ``(x, 1 - x)``.
    """
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValidationError("p must lie in [0, 1]")
    xs, ys = _sorted_samples(table, extra=(p,))
    if p < xs[0] - 1e-15 or p > xs[-1] + 1e-15:
        raise ValidationError("p lies outside the sampled range")
    h = upper_hull(xs, ys)
    hx, hy = xs[h], ys[h]
    value = float(np.interp(p, hx, hy))
    at = np.flatnonzero(np.abs(xs - p) <= 1e-15)
    if at.size and ys[at[0]] >= value - TOUCH_TOL:
        return max(value, float(ys[at[0]])), FiniteSupportDistribution.point(binary_belief(xs[at[0]]))
    r = int(np.searchsorted(hx, p, side="right"))
    r = min(max(r, 1), len(hx) - 1)
    a, b = hx[r - 1], hx[r]
    if b - a <= 0:
        return value, FiniteSupportDistribution.point(binary_belief(a))
    wb = (p - a) / (b - a)
    split = canonicalize([(binary_belief(a), 1 - wb), (binary_belief(b), wb)], merge_tol=0.0)
    return value, split


def cav_simplex(points: np.ndarray, values: np.ndarray, p) -> tuple[float, FiniteSupportDistribution]:
    """Concave envelope at a prior by LP over splittings supported on the given points."""
    X = np.asarray(points, dtype=float)
    f = np.asarray(values, dtype=float)
    pv = np.asarray(p.weights if isinstance(p, Prior) else p, dtype=float)
    if X.ndim != 2 or X.shape[1] != pv.size:
        raise ValidationError("points must be beliefs over the prior's states")
    lp = LinearProgram(f, A_eq=X.T, b_eq=pv)
    sol = solve(lp)
    if not sol.optimal:
        raise LpError(f"prior is not in the hull of the points ({sol.status})")
    w = np.maximum(sol.x, 0.0)
    keep = np.flatnonzero(w > 1e-12)
    split = canonicalize([(tuple(float(v) for v in X[k]), w[k]) for k in keep], merge_tol=0.0)
    return float(sol.objective), split


# --------------------------------------------------------------------------
# supermodular problems

@dataclass
class SupermodularProblem:
    """Per-state aggregator ``G[w]`` of ``n`` reals and action map ``a[w]`` over beliefs.

    ``G[w](Z)`` takes ``Z`` of shape (..., n); ``a[w](X)`` takes beliefs of
    shape (..., S). To describe receiver-specific action maps, pass
    ``a_by_receiver[i][w]``; the reduction then checks they coincide.
    """

    states: StateSpace
    prior: Prior
    receivers: int
    G: Sequence[Callable]
    a: Sequence[Callable] | None = None
    a_by_receiver: Sequence[Sequence[Callable]] | None = None
    strict: bool = False
    name: str = "supermodular"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.a is None and self.a_by_receiver is None:
            raise ValidationError("need an action map")
        if len(self.G) != self.states.size:
            raise ValidationError("need one aggregator per state")

    def action(self, i: int, w: int, X) -> np.ndarray:
        if self.a_by_receiver is not None:
            return np.asarray(self.a_by_receiver[i][w](X), dtype=float)
        return np.asarray(self.a[w](X), dtype=float)

    def to_problem(self) -> PersuasionProblem:
        n = self.receivers

        def u(w, X):
            Z = np.stack([self.action(i, w, X[..., i, :]) for i in range(n)], axis=-1)
            return np.asarray(self.G[w](Z), dtype=float)

        return PersuasionProblem(self.states, self.prior, n, u, name=self.name, params=self.params)


def _sample_beliefs(S: int, k: int, rng) -> np.ndarray:
    X = rng.dirichlet(np.ones(S), size=k)
    corners = np.eye(S)
    return np.vstack([X, corners, np.full((1, S), 1.0 / S)])


def check_structure(sp: SupermodularProblem, samples: int = 200, seed: int = 0) -> dict:
    """Spot checks: identical action maps (hard error), symmetry and supermodularity of G."""
    rng = np.random.default_rng(seed)
    S, n = sp.states.size, sp.receivers
    X = _sample_beliefs(S, samples, rng)
    if sp.a_by_receiver is not None:
        for w in range(S):
            ref = sp.action(0, w, X)
            for i in range(1, n):
                if not np.allclose(sp.action(i, w, X), ref, atol=1e-12, rtol=0):
                    raise ValidationError(f"receivers 0 and {i} use different action maps in state {w}")
    asym = 0.0
    worst_mixed = 0.0
    for w in range(S):
        acts = np.concatenate([sp.action(0, w, X), [0.0, 1.0]])
        lo, hi = acts.min(), acts.max()
        Z = rng.uniform(lo, hi, size=(samples, n))
        g = np.asarray(sp.G[w](Z), dtype=float)
        for perm in ([1, 0] + list(range(2, n)),) if n >= 2 else ():
            asym = max(asym, float(np.max(np.abs(np.asarray(sp.G[w](Z[:, perm])) - g))))
        if n >= 2:
            h = rng.uniform(0, (hi - lo) / 4 + 1e-9, size=(samples, 2))
            Z1 = Z.copy()
            Z1[:, 0] = np.minimum(Z1[:, 0], hi - h[:, 0])
            Z1[:, 1] = np.minimum(Z1[:, 1], hi - h[:, 1])
            e0 = np.zeros(n); e0[0] = 1
            e1 = np.zeros(n); e1[1] = 1
            A = sp.G[w](Z1 + h[:, :1] * e0 + h[:, 1:] * e1)
            B = sp.G[w](Z1 + h[:, :1] * e0)
            C = sp.G[w](Z1 + h[:, 1:] * e1)
            D = sp.G[w](Z1)
            mixed = np.asarray(A) - np.asarray(B) - np.asarray(C) + np.asarray(D)
            worst_mixed = min(worst_mixed, float(mixed.min()))
    issues = []
    if asym > 1e-12:
        issues.append(f"aggregator not symmetric on samples (max difference {asym:.3g})")
    if worst_mixed < -1e-12:
        issues.append(f"aggregator not supermodular on samples (mixed difference {worst_mixed:.3g})")
    for msg in issues:
        if sp.strict:
            raise ValidationError(msg)
        warnings.warn(msg, SupermodularityWarning, stacklevel=3)
    return {"asymmetry": asym, "min_mixed_difference": worst_mixed, "issues": issues}


def vbar_function(sp: SupermodularProblem) -> Callable:
    """``vbar`` as a function of beliefs (..., S); for two states also accepts scalars ``x(low)``."""
    S, n = sp.states.size, sp.receivers

    def f(X):
        X = np.asarray(X, dtype=float)
        if S == 2 and (X.ndim == 0 or X.shape[-1] != 2):
            X = np.stack([X, 1 - X], axis=-1)
        total = np.zeros(X.shape[:-1])
        for w in range(S):
            a = sp.action(0, w, X)
            Z = np.repeat(a[..., None], n, axis=-1)
            total = total + X[..., w] * np.asarray(sp.G[w](Z), dtype=float)
        return total

    return f


def supermodular_reduce(sp: SupermodularProblem, points=None, samples: int = DEFAULT_SAMPLES) -> ScalarFunctionTable:
    """Tabulate ``vbar``. Two states: ``points`` are values of ``x(low)``, default a
    uniform grid with ``samples`` intervals. More states: ``points`` are beliefs."""
    check_structure(sp)
    f = vbar_function(sp)
    if points is None:
        if sp.states.size != 2:
            raise ValidationError("pass belief points for more than two states")
        points = np.linspace(0.0, 1.0, samples + 1)
    pts = np.asarray(points, dtype=float)
    if sp.states.size == 2 and pts.ndim == 1:
        return ScalarFunctionTable(pts, f(pts), func=lambda x: float(f(np.asarray(x, dtype=float))))
    return ScalarFunctionTable(pts, f(pts), func=None)


def public_structure(split: FiniteSupportDistribution, prior: Prior, receivers: int) -> InformationStructure:
    """Every receiver sees the same signal; signal ``k`` induces the ``k``-th splitting belief."""
    p = prior.array
    X = split.atom_array()
    kernel = []
    for w in range(len(p)):
        pairs = [((k,) * receivers, split.weights[k] * X[k, w] / p[w]) for k in range(len(split))]
        pairs = [(s, v) for s, v in pairs if v > 0]
        kernel.append(canonicalize(pairs, merge_tol=0.0))
    sigs = tuple(range(len(split)))
    return InformationStructure((sigs,) * receivers, tuple(kernel))


def public_signal_value(sp: SupermodularProblem, p=None, samples: int = DEFAULT_SAMPLES):
    """Value of the best public signal and a structure attaining it.

    Returns ``(value, structure, splitting)``.
    """
    prior = sp.prior if p is None else (Prior.binary(p) if np.ndim(p) == 0 else Prior(tuple(p)))
    if sp.states.size == 2:
        table = supermodular_reduce(sp, samples=samples)
        value, split = cav_1d(table, prior[0])
    else:
        from .grid_persuasion import make_grid
        g = make_grid(sp.states, samples)
        table = supermodular_reduce(sp, points=g.points)
        value, split = cav_simplex(table.points, table.values, prior)
    return value, public_structure(split, prior, sp.receivers), split


# --------------------------------------------------------------------------
# builtin supermodular problems

def _const_action(f):
    return lambda X: f(np.asarray(X, dtype=float)[..., 0])


def public_option(alpha: float = 1.0, p: float = 0.5) -> SupermodularProblem:
    """Two markets with demand ``1 - x`` and cost ``k_w sqrt(q1 + q2)``, ``k = (1/3, 1)``."""
    def G(scale):
        return lambda Z: alpha * Z.sum(axis=-1) - scale * np.sqrt(np.maximum(Z.sum(axis=-1), 0.0))

    demand = _const_action(lambda x: 1.0 - x)
    return SupermodularProblem(StateSpace.binary(), Prior.binary(p), 2, [G(1.0 / 3.0), G(1.0)],
                               a=[demand, demand], name="public_option", params={"alpha": alpha})


def teams(p: float = 0.5) -> SupermodularProblem:
    """Product of efforts, effort equal to the belief in the high state."""
    effort = _const_action(lambda x: 1.0 - x)
    G = lambda Z: np.prod(Z, axis=-1)
    return SupermodularProblem(StateSpace.binary(), Prior.binary(p), 2, [G, G], a=[effort, effort],
                               name="teams")


SUPERMODULAR_BUILTINS = {"public_option": public_option, "teams": teams}
