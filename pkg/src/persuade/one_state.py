"""One-state persuasion: the sender's utility is nonzero in a single state ``omega0``.

The value reduces to maximizing ``p(omega0) * E_pi[v]`` over distributions
``pi`` of belief profiles whose one-receiver marginals satisfy

    E_pi[ x_i(w) / x_i(omega0) ] <= p(w) / p(omega0)     for every i and w != omega0,

and an optimal ``pi`` with at most ``n (S - 1) + 1`` atoms exists. For fixed
atoms this is a small LP in the weights; the solver seeds atoms from a coarse
grid and then moves them by coordinate ascent, re-solving the weight LP.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .belief_core import (
    ConditionalBeliefFamily,
    FiniteSupportDistribution,
    InformationStructure,
    PersuasionProblem,
    PreconditionError,
    ValidationError,
    canonicalize,
    product_distribution,
)
from .feasibility import (
    FeasibilityReport,
    build_information_structure,
    check_one_state_marginal,
    complete_one_state_marginal,
)
from .grid_persuasion import make_grid
from .lp_engine import LinearProgram, solve

log = logging.getLogger(__name__)

BINDING_TOL = 1e-9


@dataclass
class OneStateInstance:
    problem: PersuasionProblem
    omega0: int = 0
    check_samples: int = 64

    def __post_init__(self):
        S = self.problem.n_states
        if not 0 <= self.omega0 < S:
            raise ValidationError("omega0 out of range")
        rng = np.random.default_rng(0)
        X = rng.dirichlet(np.ones(S), size=(self.check_samples, self.problem.n_receivers))
        for w in range(S):
            if w != self.omega0 and np.any(self.problem.evaluate(w, X) != 0):
                raise ValidationError(f"utility is nonzero in state {w}, not a one-state problem")

    @property
    def p0(self) -> float:
        return self.problem.prior[self.omega0]

    @property
    def natural_budget(self) -> int:
        return self.problem.n_receivers * (self.problem.n_states - 1) + 1

    def v(self, X) -> np.ndarray:
        return self.problem.evaluate(self.omega0, X)


@dataclass
class OneStateOptions:
    budget: int | None = None
    seed_grids: tuple[int, ...] = (12, 18)
    seed_cap: int = 20_000
    initial_step: float | None = None
    step_tol: float = 1e-8
    improve_tol: float = 1e-13
    max_moves: int = 20_000
    restarts: int = 3


@dataclass
class OneStateSolution:
    value: float
    pi: FiniteSupportDistribution
    binding: dict
    diagnostics: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# weight LP

def _ratios(inst: OneStateInstance, atoms: np.ndarray) -> np.ndarray:
    """``x_i(w) / x_i(omega0)`` for atoms (k, n, S) -> (k, n, S)."""
    return atoms / atoms[:, :, inst.omega0][:, :, None]


def _weight_lp(inst: OneStateInstance, atoms: np.ndarray, vals: np.ndarray):
    """Best weights on fixed atoms; returns (objective E[v], weights) or (None, None)."""
    k, n, S = atoms.shape
    p = inst.problem.prior.array
    R = _ratios(inst, atoms)
    rows, rhs = [], []
    for i in range(n):
        for w in range(S):
            if w == inst.omega0:
                continue
            rows.append(R[:, i, w])
            rhs.append(p[w] / p[inst.omega0])
    lp = LinearProgram(vals, A_eq=np.ones((1, k)), b_eq=[1.0], A_ub=np.array(rows), b_ub=np.array(rhs))
    sol = solve(lp, backend="simplex")
    if not sol.optimal:
        return None, None
    return float(sol.objective), np.maximum(sol.x, 0.0)


def _valid(inst: OneStateInstance, atom: np.ndarray) -> bool:
    return bool(np.all(atom >= -1e-15) and np.all(atom[:, inst.omega0] > 1e-15))


def _seed_atoms(inst: OneStateInstance, m: int, cap: int) -> np.ndarray:
    n, S = inst.problem.n_receivers, inst.problem.n_states
    while True:
        g = make_grid(S, m)
        pts = g.points[g.points[:, inst.omega0] > 0]
        if len(pts) ** n <= cap or m <= 2:
            break
        m -= 1
    idx = np.array(list(itertools.product(range(len(pts)), repeat=n)))
    return pts[idx]          # (P, n, S)


def _trim(atoms, weights, tol=1e-12):
    keep = weights > tol
    w = weights[keep]
    return atoms[keep], w / w.sum()


# --------------------------------------------------------------------------
# search

def _refine(inst: OneStateInstance, atoms: np.ndarray, budget: int, opts: OneStateOptions, h0: float):
    n, S = inst.problem.n_receivers, inst.problem.n_states
    vals = inst.v(atoms)
    best, w = _weight_lp(inst, atoms, vals)
    atoms, w = _trim(atoms, w)
    directions = [(a, b) for a in range(S) for b in range(S) if a != b]
    step = h0
    moves = 0
    lp_solves = 1
    while step >= opts.step_tol and moves < opts.max_moves:
        improved = False
        for j in range(len(atoms)):
            if j >= len(atoms):
                break
            for i in range(n):
                for a, b in directions:
                    cand = atoms[j].copy()
                    cand[i, a] += step
                    cand[i, b] -= step
                    if not _valid(inst, cand):
                        continue
                    cand[i] = np.clip(cand[i], 0.0, 1.0)
                    trials = [np.concatenate([atoms[:j], cand[None], atoms[j + 1:]])]
                    if len(atoms) < budget:
                        trials.append(np.concatenate([atoms, cand[None]]))
                    for tr in trials:
                        val, wt = _weight_lp(inst, tr, inst.v(tr))
                        lp_solves += 1
                        if val is not None and val > best + opts.improve_tol:
                            best = val
                            atoms, w = _trim(tr, wt)
                            improved = True
                            moves += 1
                            break
                    if improved:
                        break
                if improved:
                    break
            if improved:
                break
        if not improved:
            step /= 2
    return best, atoms, w, {"moves": moves, "lp_solves": lp_solves}


def _subset_seeds(inst, pool, budget):
    """Best weight LP over every ``budget``-subset of a small atom pool."""
    out = []
    for combo in itertools.combinations(range(len(pool)), budget):
        A = pool[list(combo)]
        val, w = _weight_lp(inst, A, inst.v(A))
        if val is not None:
            out.append((val, A))
    return out


def solve_one_state(instance: OneStateInstance, options: OneStateOptions | None = None) -> OneStateSolution:
    opts = options or OneStateOptions()
    inst = instance
    natural = inst.natural_budget
    budget = natural if opts.budget is None else int(opts.budget)
    if budget < 1:
        raise ValidationError("support budget must be at least 1")
    budget = min(budget, natural) if opts.budget is None else budget

    seeds = []     # (value, atoms)
    for m in opts.seed_grids:
        A = _seed_atoms(inst, m, opts.seed_cap)
        vals = inst.v(A)
        val, w = _weight_lp(inst, A, vals)
        if val is None:
            continue
        At, wt = _trim(A, w)
        if len(At) <= budget:
            seeds.append((val, At))
        else:
            # LP support exceeds the budget: try its subsets
            seeds.extend(_subset_seeds(inst, At, budget))
        # best feasible single atoms always enter as seeds
        R = _ratios(inst, A)
        p = inst.problem.prior.array
        bound = p / p[inst.omega0]
        ok = np.all(R <= bound[None, None, :] + 1e-12, axis=(1, 2))
        if np.any(ok):
            cand = np.flatnonzero(ok)
            top = cand[np.argsort(-vals[cand], kind="stable")[:opts.restarts]]
            seeds.extend((float(vals[t]), A[t:t + 1]) for t in top)
    if not seeds:
        raise RuntimeError("no feasible seed; the prior profile should always be feasible")
    seeds.sort(key=lambda s: -s[0])
    h0 = opts.initial_step or 1.0 / (2 * max(opts.seed_grids))

    best = None
    diag = {"seeds": len(seeds), "moves": 0, "lp_solves": 0}
    tried = []
    for val, A in seeds:
        if len(tried) >= opts.restarts:
            break
        if any(A.shape == T.shape and np.allclose(A, T) for T in tried):
            continue
        tried.append(A)
        v, At, wt, d = _refine(inst, A, budget, opts, h0)
        diag["moves"] += d["moves"]
        diag["lp_solves"] += d["lp_solves"]
        if best is None or v > best[0] + opts.improve_tol:
            best = (v, At, wt)
    v, At, wt = best

    # a single atom at the weighted mean is feasible for two states and wins for concave v
    mean = np.tensordot(wt, At, axes=1)[None]
    if _valid(inst, mean[0]):
        mv, mw = _weight_lp(inst, mean, inst.v(mean))
        if mv is not None and mv >= v - 1e-12:
            v, At, wt = mv, mean, mw

    pi = canonicalize(list(zip((_profile_tuple(a) for a in At), wt)))
    value, rep = evaluate_candidate(pi, inst)
    return OneStateSolution(value, pi, binding_flags(pi, inst), {**diag, "budget": budget,
                                                              "report": rep})


def _profile_tuple(atom: np.ndarray):
    return tuple(tuple(float(v) for v in row) for row in atom)


# --------------------------------------------------------------------------
# evaluation and realization

def receiver_marginal(pi: FiniteSupportDistribution, i: int) -> FiniteSupportDistribution:
    return canonicalize([(prof[i], w) for prof, w in pi])


def evaluate_candidate(pi: FiniteSupportDistribution, instance: OneStateInstance,
                       tol: float = 1e-9) -> tuple[float, FeasibilityReport]:
    """``p(omega0) E_pi[v]`` and the combined marginal check over receivers."""
    A = pi.atom_array()
    value = instance.p0 * float(pi.weight_array @ instance.v(A))
    worst = 0.0
    violated = []
    per = []
    for i in range(instance.problem.n_receivers):
        rep = check_one_state_marginal(receiver_marginal(pi, i), instance.problem.prior,
                                       instance.omega0, tol)
        worst = max(worst, rep.max_violation)
        violated.extend((i, s, d) for _, s, d in rep.violated_constraints)
        per.append(rep.details)
    return value, FeasibilityReport(worst <= tol, worst, violated, tol, {"per_receiver": per})


def binding_flags(pi: FiniteSupportDistribution, instance: OneStateInstance,
                  tol: float = BINDING_TOL) -> dict:
    flags = {}
    for i in range(instance.problem.n_receivers):
        rep = check_one_state_marginal(receiver_marginal(pi, i), instance.problem.prior,
                                       instance.omega0, tol)
        for s, b in rep.details["binding"].items():
            flags[(i, s)] = b
    return flags


def realize_one_state_family(pi: FiniteSupportDistribution, instance: OneStateInstance) -> ConditionalBeliefFamily:
    """Feasible family with ``pi`` in state ``omega0`` and independent beliefs elsewhere."""
    _, rep = evaluate_candidate(pi, instance)
    if not rep.feasible:
        raise PreconditionError("candidate is infeasible:\n" + rep.summary())
    prior = instance.problem.prior
    per_receiver = [complete_one_state_marginal(receiver_marginal(pi, i), prior, instance.omega0)
                    for i in range(instance.problem.n_receivers)]
    per_state = []
    for w in range(instance.problem.n_states):
        if w == instance.omega0:
            per_state.append(canonicalize(pi))
        else:
            per_state.append(canonicalize(product_distribution([pr[w] for pr in per_receiver])))
    return ConditionalBeliefFamily(tuple(per_state))


def realize_one_state(pi: FiniteSupportDistribution, instance: OneStateInstance) -> InformationStructure:
    fam = realize_one_state_family(pi, instance)
    return build_information_structure(fam, instance.problem.prior)
