"""Feasibility of conditional belief families.

A family of per-state distributions over belief profiles can be induced by
some information structure exactly when, for every receiver separately, the
per-state distributions of that receiver's belief are consistent with Bayes'
rule: ``lam_w(x) = x(w) / p(w) * lam(x)`` where ``lam = sum_w p(w) lam_w``.
No joint constraint across receivers is needed, and this module checks none.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .belief_core import (
    MERGE_TOL,
    ConditionalBeliefFamily,
    FiniteSupportDistribution,
    InformationStructure,
    PreconditionError,
    Prior,
    ValidationError,
    canonicalize,
    condition_single_receiver,
)

DEFAULT_TOL = 1e-9
SLACK_DROP = 1e-12


@dataclass
class FeasibilityReport:
    feasible: bool
    max_violation: float
    violated_constraints: list = field(default_factory=list)
    tol: float = DEFAULT_TOL
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return self.feasible

    def summary(self) -> str:
        head = "feasible" if self.feasible else "infeasible"
        lines = [f"{head} (max violation {self.max_violation:.3e}, tol {self.tol:.1e})"]
        for rec, state, desc in self.violated_constraints[:20]:
            who = "" if rec is None else f"receiver {rec}, "
            lines.append(f"  {who}state {state}: {desc}")
        if len(self.violated_constraints) > 20:
            lines.append(f"  ... {len(self.violated_constraints) - 20} more")
        return "\n".join(lines)


def _align(dists, merge_tol=MERGE_TOL):
    """Common support of several belief distributions.

    Returns an array of atoms (K, S) and a weight matrix (K, len(dists)).
    """
    pairs = []
    for k, d in enumerate(dists):
        for a, w in d:
            pairs.append((np.asarray(a, dtype=float), k, w))
    pairs.sort(key=lambda t: tuple(t[0]))
    reps: list[np.ndarray] = []
    W: list[np.ndarray] = []
    for x, k, w in pairs:
        hit = -1
        if reps:
            d = np.max(np.abs(np.array(reps) - x), axis=1)
            j = int(np.argmin(d))
            if d[j] <= merge_tol:
                hit = j
        if hit < 0:
            reps.append(x)
            W.append(np.zeros(len(dists)))
            hit = len(reps) - 1
        W[hit][k] += w
    return np.array(reps), np.array(W)


def marginal(family: ConditionalBeliefFamily, receiver: int) -> tuple[FiniteSupportDistribution, ...]:
    """Per-state distribution of one receiver's belief."""
    if not 0 <= receiver < family.n_receivers:
        raise IndexError(f"receiver {receiver} out of range for {family.n_receivers} receivers")
    return tuple(canonicalize([(prof[receiver], w) for prof, w in d]) for d in family.per_state)


def check_single_receiver(per_state, prior: Prior, tol: float = DEFAULT_TOL,
                          receiver: int | None = None) -> FeasibilityReport:
    per_state = tuple(per_state)
    p = prior.array
    if len(per_state) != len(p):
        raise ValidationError(f"{len(per_state)} conditional distributions for {len(p)} states")
    for d in per_state:
        if abs(sum(d.weights) - 1) > 1e-10:
            raise ValidationError("conditional distributions must sum to 1")
        for a in d.atoms:
            if len(a) != len(p):
                raise ValidationError(f"belief {a} has the wrong number of states")
    X, W = _align(per_state)
    lam = W @ p
    expected = X / p[None, :] * lam[:, None]
    err = np.abs(W - expected)
    worst = float(err.max(initial=0.0))
    violated = []
    for k, w in zip(*np.nonzero(err > tol)):
        violated.append((receiver, int(w),
                         f"belief {tuple(float(v) for v in np.round(X[k], 12))}: weight {W[k, w]:.12g} "
                         f"but Bayes consistency needs {expected[k, w]:.12g}"))
    return FeasibilityReport(worst <= tol, worst, violated, tol)


def check_family(family: ConditionalBeliefFamily, prior: Prior, tol: float = DEFAULT_TOL) -> FeasibilityReport:
    if family.n_states != len(prior):
        raise ValidationError("family and prior disagree on the number of states")
    worst = 0.0
    violated = []
    per_receiver = []
    for i in range(family.n_receivers):
        rep = check_single_receiver(marginal(family, i), prior, tol, receiver=i)
        worst = max(worst, rep.max_violation)
        violated.extend(rep.violated_constraints)
        per_receiver.append(rep.max_violation)
    return FeasibilityReport(worst <= tol, worst, violated, tol, {"per_receiver": per_receiver})


def one_state_integrals(lambda0: FiniteSupportDistribution, prior: Prior, omega0: int) -> np.ndarray:
    """``integral of x(w)/x(omega0)`` against ``lambda0`` for every state ``w``.

    Atoms with ``x(omega0) = 0`` contribute ``inf`` wherever ``x(w) > 0`` and
    nothing where ``x(w) = 0``.
    """
    X = lambda0.atom_array()
    w = lambda0.weight_array
    x0 = X[:, omega0]
    out = np.zeros(len(prior))
    for s in range(len(prior)):
        num = X[:, s]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(x0 > 0, num / np.where(x0 > 0, x0, 1.0),
                             np.where(num > 0, np.inf, 0.0))
        contrib = np.where(w > 0, w * ratio, 0.0)
        out[s] = float(contrib.sum())
    return out


def check_one_state_marginal(lambda0: FiniteSupportDistribution, prior: Prior, omega0: int,
                             tol: float = DEFAULT_TOL) -> FeasibilityReport:
    """Whether ``lambda0`` can be a receiver's belief distribution in state ``omega0``.

    The condition is ``integral x(w)/x(omega0) d lambda0 <= p(w)/p(omega0)`` for
    every ``w != omega0``. ``details`` carries the integrals, the bounds, and
    which constraints bind (slack at most ``tol``).
    """
    if abs(sum(lambda0.weights) - 1) > 1e-10:
        raise ValidationError("lambda0 must sum to 1")
    p = prior.array
    ints = one_state_integrals(lambda0, prior, omega0)
    bounds = p / p[omega0]
    worst = 0.0
    violated = []
    binding = {}
    for s in range(len(p)):
        if s == omega0:
            continue
        excess = ints[s] - bounds[s]
        worst = max(worst, excess)
        binding[s] = bool(abs(excess) <= tol)
        if excess > tol:
            violated.append((None, s, f"integral {ints[s]:.12g} exceeds {bounds[s]:.12g}"))
    return FeasibilityReport(worst <= tol, max(worst, 0.0), violated, tol,
                             {"integrals": ints.tolist(), "bounds": bounds.tolist(), "binding": binding})


def complete_one_state_marginal(lambda0: FiniteSupportDistribution, prior: Prior, omega0: int,
                                tol: float = DEFAULT_TOL) -> tuple[FiniteSupportDistribution, ...]:
    """Extend a state-``omega0`` belief distribution to a full Bayes-consistent set.

    Scale ``lambda0`` by ``p(omega0)/x(omega0)`` and put the remaining mass of
    each other state on the vertex belief of that state, so that the
    unconditional distribution averages to the prior.
    """
    rep = check_one_state_marginal(lambda0, prior, omega0, tol)
    if not rep.feasible:
        raise PreconditionError("marginal is not feasible at this state:\n" + rep.summary())
    p = prior.array
    S = len(p)
    pairs = []
    mass = np.zeros(S)
    for a, w in lambda0:
        x = np.asarray(a, dtype=float)
        if w <= 0:
            continue
        wt = p[omega0] / x[omega0] * w
        pairs.append((tuple(float(v) for v in x), wt))
        mass += wt * x
    for s in range(S):
        if s == omega0:
            continue
        slack = p[s] - mass[s]
        if slack > SLACK_DROP:
            vertex = tuple(1.0 if k == s else 0.0 for k in range(S))
            pairs.append((vertex, slack))
    lam = canonicalize(pairs)
    return condition_single_receiver(lam, prior, tol=max(tol, 1e-9))


def build_information_structure(family: ConditionalBeliefFamily, prior: Prior,
                                tol: float = 1e-7) -> InformationStructure:
    """Direct structure in which each receiver's signal is the belief it should induce.

    Receiver ``i``'s signals are labelled ``0..k-1`` following the sorted
    support of its unconditional belief distribution.
    """
    rep = check_family(family, prior, tol)
    if not rep.feasible:
        raise PreconditionError("family is not feasible:\n" + rep.summary())
    p = prior.array
    supports = []
    for i in range(family.n_receivers):
        lam = canonicalize([(a, pw * w) for d, pw in zip(marginal(family, i), p) for a, w in d])
        supports.append(lam.atom_array())
    kernel = []
    for d in family.per_state:
        pairs = []
        for prof, w in d:
            sig = []
            for i, x in enumerate(prof):
                dist = np.max(np.abs(supports[i] - np.asarray(x)), axis=1)
                sig.append(int(np.argmin(dist)))
            pairs.append((tuple(sig), w))
        kernel.append(canonicalize(pairs, merge_tol=0.0))
    signal_sets = tuple(tuple(range(len(s))) for s in supports)
    return InformationStructure(signal_sets, tuple(kernel))


# --------------------------------------------------------------------------
# symmetric two-receiver families with beliefs in {r, 1 - r}

def symmetric_family(r: float, a: float, b: float | None = None) -> ConditionalBeliefFamily:
    """Family with weight ``a`` (low state) and ``b`` (high state, default ``a``)
    on each disagreement profile ``(r, 1-r)``, ``(1-r, r)``.

    Diagonal weights are whatever keeps each receiver's marginal at
    ``{r: r, 1-r: 1-r}`` in the low state and ``{r: 1-r, 1-r: r}`` in the high
    state. Negative diagonal weights raise a validation error.
    """
    b = a if b is None else b
    hi, lo = (r, 1 - r)
    B = lambda x: (float(x), 1.0 - float(x))
    low = [((B(hi), B(hi)), r - a), ((B(hi), B(lo)), a), ((B(lo), B(hi)), a), ((B(lo), B(lo)), 1 - r - a)]
    high = [((B(hi), B(hi)), 1 - r - b), ((B(hi), B(lo)), b), ((B(lo), B(hi)), b), ((B(lo), B(lo)), r - b)]
    for _, w in low + high:
        if w < -1e-15:
            raise ValidationError("disagreement weight exceeds the marginal it comes from")
    clean = lambda pairs: [(x, max(w, 0.0)) for x, w in pairs if w > 0]
    return ConditionalBeliefFamily((FiniteSupportDistribution.from_pairs(clean(low)),
                                    FiniteSupportDistribution.from_pairs(clean(high))))


def max_disagreement(r: float) -> float:
    """Largest unconditional weight on the profile ``(r, 1-r)`` over symmetric
    couplings whose per-state receiver marginals are the conditionally
    independent ones, at prior 1/2. Solved as an LP over within-state couplings.
    """
    from .lp_engine import LinearProgram, solve

    # variables: per state the weights on (r,r), (r,1-r), (1-r,r), (1-r,1-r)
    m_low = {0: r, 1: 1 - r}           # receiver marginal, index 0 = belief r
    m_high = {0: 1 - r, 1: r}
    cells = [(0, 0), (0, 1), (1, 0), (1, 1)]
    rows, rhs = [], []
    for s, marg in enumerate((m_low, m_high)):
        for recv in range(2):
            for k in range(2):
                row = np.zeros(8)
                for c, cell in enumerate(cells):
                    if cell[recv] == k:
                        row[4 * s + c] = 1.0
                rows.append(row)
                rhs.append(marg[k])
        sym = np.zeros(8)
        sym[4 * s + 1], sym[4 * s + 2] = 1.0, -1.0
        rows.append(sym)
        rhs.append(0.0)
    c = np.zeros(8)
    c[1] = c[5] = 0.5
    sol = solve(LinearProgram(c, A_eq=np.array(rows), b_eq=np.array(rhs)))
    if not sol.optimal:
        raise RuntimeError(f"disagreement LP {sol.status}")
    return float(sol.objective)
