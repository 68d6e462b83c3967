"""Multi-marginal transport: exact LP and the assortative (quantile) coupling."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .belief_core import FiniteSupportDistribution, ValidationError, canonicalize
from .lp_engine import LinearProgram, LpError, solve

PRODUCT_CAP = 200_000
SUPERMODULAR_TOL = 1e-12


class SizeError(ValueError):
    pass


class DualInfeasible(ValueError):
    pass


@dataclass
class TransportInstance:
    """Marginals plus a utility over tuples of atoms.

    ``utility`` takes a tuple with one atom per marginal and returns a float.
    """

    marginals: Sequence[FiniteSupportDistribution]
    utility: Callable[[tuple], float]

    def __post_init__(self):
        self.marginals = tuple(self.marginals)
        if len(self.marginals) < 2:
            raise ValidationError("transport needs at least two marginals")
        for m in self.marginals:
            if abs(sum(m.weights) - 1) > 1e-10:
                raise ValidationError("marginals must sum to 1")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(m) for m in self.marginals)

    def table(self) -> np.ndarray:
        """Utility tabulated on the product of supports, in lexicographic order."""
        T = np.empty(self.shape)
        for idx in itertools.product(*(range(k) for k in self.shape)):
            T[idx] = self.utility(tuple(m.atoms[j] for m, j in zip(self.marginals, idx)))
        return T


@dataclass
class TransportDual:
    V: float
    phi: list[dict]          # per marginal, atom -> value

    def evaluate(self, i: int, atom) -> float:
        return self.phi[i][atom]


@dataclass
class TransportResult:
    value: float
    plan: FiniteSupportDistribution
    dual: TransportDual | None = None


def solve_mk(instance: TransportInstance, cap: int = PRODUCT_CAP, backend: str = "auto") -> TransportResult:
    """Maximize the expected utility over couplings of the marginals."""
    shape = instance.shape
    size = int(np.prod(shape))
    if size > cap:
        raise SizeError(f"product support has {size} points, cap is {cap}")
    T = instance.table().ravel()
    n = len(shape)
    idx = np.array(list(itertools.product(*(range(k) for k in shape))))
    rows = []
    rhs = []
    for i, m in enumerate(instance.marginals):
        for j, w in enumerate(m.weights):
            rows.append((idx[:, i] == j).astype(float))
            rhs.append(w)
    lp = LinearProgram(T, A_eq=np.array(rows), b_eq=np.array(rhs))
    sol = solve(lp, backend=backend)
    if not sol.optimal:
        raise LpError(f"transport LP {sol.status}")
    pairs = [(tuple(m.atoms[j] for m, j in zip(instance.marginals, idx[k])), float(sol.x[k]))
             for k in range(size) if sol.x[k] > 1e-13]
    plan = canonicalize(pairs, merge_tol=0.0)
    # multipliers y_i(x) give sum_i y_i(x_i) >= v; center them to get (V, phi)
    y = sol.y_eq
    phis = []
    V = 0.0
    off = 0
    for m in instance.marginals:
        yi = y[off: off + len(m)]
        off += len(m)
        c = float(np.dot(yi, m.weights))
        V += c
        phis.append({a: float(v - c) for a, v in zip(m.atoms, yi)})
    return TransportResult(float(sol.objective), plan, TransportDual(V, phis))


def _quantile_blocks(marginals: Sequence[FiniteSupportDistribution]):
    """Blocks [t_k, t_{k+1}) of common cumulative breakpoints with the quantile atoms."""
    sorted_m = []
    for m in marginals:
        order = np.argsort(np.asarray(m.atoms, dtype=float), kind="stable")
        atoms = [m.atoms[k] for k in order]
        cdf = np.cumsum([m.weights[k] for k in order])
        cdf[-1] = 1.0
        sorted_m.append((atoms, cdf))
    cuts = np.unique(np.concatenate([[0.0]] + [c for _, c in sorted_m]))
    cuts = cuts[cuts <= 1.0]
    blocks = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        w = hi - lo
        if w <= 1e-15:
            continue
        # quantile is constant on [lo, hi); the smallest x with CDF(x) > lo
        tup = []
        for atoms, cdf in sorted_m:
            j = int(np.searchsorted(cdf, lo, side="right"))
            tup.append(atoms[min(j, len(atoms) - 1)])
        blocks.append((tuple(tup), w))
    return blocks


def assortative(marginals: Sequence[FiniteSupportDistribution]):
    """Comonotone coupling of real-valued marginals.

    Returns ``(value_of, plan)`` where ``value_of(G)`` is the expected value of
    ``G`` (taking a tuple) under the plan.
    """
    blocks = _quantile_blocks(marginals)
    plan = canonicalize(blocks, merge_tol=0.0)

    def value_of(G: Callable[[tuple], float]) -> float:
        return float(sum(w * G(t) for t, w in blocks))

    return value_of, plan


def is_supermodular(table: np.ndarray, tol: float = SUPERMODULAR_TOL) -> bool:
    """All adjacent mixed second differences of a tabulated function are >= -tol.

    Assumes every axis is indexed by increasing atom values.
    """
    T = np.asarray(table, dtype=float)
    for a, b in itertools.combinations(range(T.ndim), 2):
        d = np.diff(np.diff(T, axis=a), axis=b)
        if d.size and d.min() < -tol:
            return False
    return True


def solve_supermodular(instance: TransportInstance, **kw) -> TransportResult:
    """Assortative shortcut when the sorted utility table is supermodular, LP otherwise."""
    sorted_marg = []
    for m in instance.marginals:
        order = np.argsort(np.asarray(m.atoms, dtype=float), kind="stable")
        sorted_marg.append(FiniteSupportDistribution(tuple(m.atoms[k] for k in order),
                                                     tuple(m.weights[k] for k in order)))
    inst = TransportInstance(sorted_marg, instance.utility)
    if is_supermodular(inst.table()):
        value_of, plan = assortative(sorted_marg)
        return TransportResult(value_of(instance.utility), plan, None)
    return solve_mk(instance, **kw)


def plan_value(instance: TransportInstance, plan: FiniteSupportDistribution) -> float:
    return float(sum(w * instance.utility(t) for t, w in plan))


def plan_projections(plan: FiniteSupportDistribution, k: int) -> list[FiniteSupportDistribution]:
    return [canonicalize([(t[i], w) for t, w in plan], merge_tol=0.0) for i in range(k)]


def kantorovich_gap(instance: TransportInstance, plan: FiniteSupportDistribution,
                    dual: TransportDual | tuple, tol: float = 1e-9) -> float:
    """``V - value(plan)`` for a dual pair ``(V, phi)``, after checking dual feasibility."""
    if isinstance(dual, tuple):
        dual = TransportDual(dual[0], list(dual[1]))
    for i, m in enumerate(instance.marginals):
        centre = sum(w * dual.phi[i][a] for a, w in m)
        if abs(centre) > tol:
            raise DualInfeasible(f"phi_{i} integrates to {centre:.3g} against marginal {i}")
    for tup in itertools.product(*(m.atoms for m in instance.marginals)):
        bound = dual.V + sum(dual.phi[i][a] for i, a in enumerate(tup))
        v = instance.utility(tup)
        if v > bound + tol:
            raise DualInfeasible(f"utility {v:.12g} exceeds dual bound {bound:.12g} at {tup}")
    return dual.V - plan_value(instance, plan)


def product_plan(marginals: Sequence[FiniteSupportDistribution]) -> FiniteSupportDistribution:
    pairs = []
    for combo in itertools.product(*(list(m) for m in marginals)):
        pairs.append((tuple(a for a, _ in combo), float(np.prod([w for _, w in combo]))))
    return canonicalize(pairs, merge_tol=0.0)
