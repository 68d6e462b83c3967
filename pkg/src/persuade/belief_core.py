"""Beliefs, finitely supported distributions, information structures and
persuasion problems.

Conventions used across the package:

* a belief is a tuple of floats indexed by state;
* a belief profile is a tuple of beliefs, one per receiver;
* a utility is a vectorized callable ``u(state, X)`` where ``X`` has shape
  ``(..., n_receivers, n_states)`` and the result has shape ``(...)``;
* in binary-state problems state 0 is the "low" state and a scalar belief
  ``x`` means ``x(low)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Sequence

import numpy as np

log = logging.getLogger(__name__)

MERGE_TOL = 1e-9
PROB_TOL = 1e-12
DIST_TOL = 1e-10


class ValidationError(ValueError):
    """Raised when an input object violates its structural invariants."""


class PreconditionError(ValueError):
    """Raised when an operation is called outside its domain."""


# --------------------------------------------------------------------------
# states, priors, beliefs

@dataclass(frozen=True)
class StateSpace:
    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(s) for s in self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) < 2:
            raise ValidationError("a state space needs at least two states")
        if len(set(labels)) != len(labels):
            raise ValidationError(f"duplicate state labels in {labels}")

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, state) -> int:
        if isinstance(state, (int, np.integer)):
            if not 0 <= state < self.size:
                raise ValidationError(f"state index {state} out of range")
            return int(state)
        try:
            return self.labels.index(str(state))
        except ValueError:
            raise ValidationError(f"unknown state {state!r}") from None

    @classmethod
    def binary(cls) -> "StateSpace":
        return cls(("l", "h"))


@dataclass(frozen=True)
class Prior:
    weights: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        object.__setattr__(self, "weights", w)
        if len(w) < 2:
            raise ValidationError("prior needs at least two states")
        if any(not np.isfinite(v) or v <= 0 for v in w):
            raise ValidationError(f"prior must have full support, got {w}")
        if abs(sum(w) - 1.0) > PROB_TOL:
            raise ValidationError(f"prior weights sum to {sum(w)!r}, not 1")

    @property
    def array(self) -> np.ndarray:
        return np.array(self.weights)

    def __len__(self):
        return len(self.weights)

    def __getitem__(self, k):
        return self.weights[k]

    @classmethod
    def binary(cls, p_low: float) -> "Prior":
        return cls((p_low, 1.0 - p_low))


def make_belief(values: Sequence[float], tol: float = PROB_TOL) -> tuple[float, ...]:
    b = tuple(float(v) for v in values)
    if any(not np.isfinite(v) or v < -tol or v > 1 + tol for v in b):
        raise ValidationError(f"belief entries must lie in [0, 1]: {b}")
    if abs(sum(b) - 1.0) > tol:
        raise ValidationError(f"belief {b} does not sum to 1")
    return b


def binary_belief(x: float) -> tuple[float, float]:
    """Belief with probability ``x`` on the low state."""
    return (float(x), 1.0 - float(x))


def _flat(atom) -> np.ndarray:
    return np.asarray(atom, dtype=float).ravel()


# --------------------------------------------------------------------------
# distributions

@dataclass(frozen=True)
class FiniteSupportDistribution:
    """Weighted list of atoms. Atoms must be hashable (floats or nested tuples)."""

    atoms: tuple
    weights: tuple[float, ...]

    def __post_init__(self):
        atoms = tuple(self.atoms)
        weights = tuple(float(w) for w in self.weights)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)
        if len(atoms) != len(weights):
            raise ValidationError("atoms and weights differ in length")
        if any(not np.isfinite(w) or w < -PROB_TOL for w in weights):
            raise ValidationError("weights must be nonnegative")
        if atoms and abs(sum(weights) - 1.0) > DIST_TOL:
            raise ValidationError(f"weights sum to {sum(weights)!r}, not 1")

    @classmethod
    def point(cls, atom) -> "FiniteSupportDistribution":
        return cls((atom,), (1.0,))

    @classmethod
    def from_pairs(cls, pairs, normalize: bool = False) -> "FiniteSupportDistribution":
        pairs = list(pairs)
        atoms = tuple(a for a, _ in pairs)
        weights = np.array([w for _, w in pairs], dtype=float)
        if normalize:
            weights = weights / weights.sum()
        return cls(atoms, tuple(weights))

    def __len__(self):
        return len(self.atoms)

    def __iter__(self):
        return iter(zip(self.atoms, self.weights))

    @property
    def weight_array(self) -> np.ndarray:
        return np.array(self.weights)

    def atom_array(self) -> np.ndarray:
        return np.array([np.asarray(a, dtype=float) for a in self.atoms])

    def mean(self) -> np.ndarray:
        return np.tensordot(self.weight_array, self.atom_array(), axes=1)

    def expect(self, f: Callable[[Any], float]) -> float:
        return float(sum(w * f(a) for a, w in self))

    def weight_of(self, atom, tol: float = MERGE_TOL) -> float:
        target = _flat(atom)
        return float(sum(w for a, w in self
                         if _flat(a).shape == target.shape and np.max(np.abs(_flat(a) - target)) <= tol))

    def map(self, f: Callable[[Any], Hashable]) -> "FiniteSupportDistribution":
        return FiniteSupportDistribution(tuple(f(a) for a in self.atoms), self.weights)

    def max_distance(self, other: "FiniteSupportDistribution") -> float:
        """Largest weight discrepancy after matching atoms; inf if supports differ."""
        a = canonicalize(self)
        b = canonicalize(other)
        if len(a) != len(b):
            return float("inf")
        worst = 0.0
        for (xa, wa), (xb, wb) in zip(a, b):
            d = float(np.max(np.abs(_flat(xa) - _flat(xb))))
            worst = max(worst, d, abs(wa - wb))
        return worst


def canonicalize(dist: FiniteSupportDistribution | Sequence, merge_tol: float = MERGE_TOL,
                 drop_tol: float = 0.0) -> FiniteSupportDistribution:
    """Merge atoms within ``merge_tol`` in max-norm, drop zero weights, sort, renormalize.

    Accepts a distribution or a raw list of ``(atom, weight)`` pairs (which
    need not be normalized).
    """
    pairs = list(dist) if not isinstance(dist, FiniteSupportDistribution) else list(zip(dist.atoms, dist.weights))
    if any(w < -PROB_TOL for _, w in pairs):
        raise ValidationError("negative weight")
    pairs = [(a, float(w)) for a, w in pairs if w > drop_tol]
    total = sum(w for _, w in pairs)
    if total <= 0:
        raise ValidationError("distribution has zero total weight")
    if not pairs:
        raise ValidationError("empty distribution")
    flats = [_flat(a) for a, _ in pairs]
    dim = flats[0].size
    if any(f.size != dim for f in flats):
        raise ValidationError("atoms have inconsistent shapes")
    order = sorted(range(len(pairs)), key=lambda k: tuple(flats[k]))
    reps: list[np.ndarray] = []
    rep_atoms = []
    rep_w: list[float] = []
    rep_mat = np.empty((0, dim))
    for k in order:
        f = flats[k]
        hit = -1
        if reps:
            d = np.max(np.abs(rep_mat - f), axis=1)
            j = int(np.argmin(d))
            if d[j] <= merge_tol:
                hit = j
        if hit < 0:
            reps.append(f)
            rep_atoms.append(pairs[k][0])
            rep_w.append(pairs[k][1])
            rep_mat = np.vstack([rep_mat, f[None, :]])
        else:
            rep_w[hit] += pairs[k][1]
    idx = sorted(range(len(reps)), key=lambda j: tuple(reps[j]))
    atoms = tuple(rep_atoms[j] for j in idx)
    weights = np.array([rep_w[j] for j in idx]) / total
    return FiniteSupportDistribution(atoms, tuple(weights))


def mixture(dists: Sequence[FiniteSupportDistribution], coefs: Sequence[float],
            merge_tol: float = MERGE_TOL) -> FiniteSupportDistribution:
    pairs = []
    for d, c in zip(dists, coefs):
        pairs.extend((a, c * w) for a, w in d)
    return canonicalize(pairs, merge_tol)


def product_distribution(factors: Sequence[FiniteSupportDistribution]) -> FiniteSupportDistribution:
    """Independent product; atoms are tuples of factor atoms."""
    atoms = [()]
    weights = [1.0]
    for f in factors:
        atoms = [a + (x,) for a in atoms for x in f.atoms]
        weights = [w * v for w in weights for v in f.weights]
    return FiniteSupportDistribution(tuple(atoms), tuple(weights))


# --------------------------------------------------------------------------
# families and information structures

@dataclass(frozen=True)
class ConditionalBeliefFamily:
    """One distribution over belief profiles per state, ordered by state index."""

    per_state: tuple[FiniteSupportDistribution, ...]

    def __post_init__(self):
        per_state = tuple(self.per_state)
        object.__setattr__(self, "per_state", per_state)
        if len(per_state) < 2:
            raise ValidationError("family needs a distribution for every state")
        shapes = set()
        for d in per_state:
            if len(d) == 0:
                raise ValidationError("empty conditional distribution")
            for a in d.atoms:
                shapes.add(np.asarray(a, dtype=float).shape)
        if len(shapes) != 1 or len(next(iter(shapes))) != 2:
            raise ValidationError(f"profiles must share one (receivers, states) shape, got {shapes}")
        n, s = next(iter(shapes))
        if s != len(per_state):
            raise ValidationError("belief length does not match the number of states")

    @property
    def n_states(self) -> int:
        return len(self.per_state)

    @property
    def n_receivers(self) -> int:
        return len(self.per_state[0].atoms[0])

    def canonical(self, merge_tol: float = MERGE_TOL) -> "ConditionalBeliefFamily":
        return ConditionalBeliefFamily(tuple(canonicalize(d, merge_tol) for d in self.per_state))

    def max_distance(self, other: "ConditionalBeliefFamily") -> float:
        if self.n_states != other.n_states:
            return float("inf")
        return max(a.max_distance(b) for a, b in zip(self.per_state, other.per_state))

    @classmethod
    def from_binary(cls, per_state: Sequence[Sequence[tuple[Sequence[float], float]]]) -> "ConditionalBeliefFamily":
        """Build a binary-state family from scalar beliefs ``x(low)``.

        ``per_state[k]`` is a list of ``((x_1, ..., x_n), weight)`` pairs.
        """
        dists = []
        for pairs in per_state:
            dists.append(FiniteSupportDistribution.from_pairs(
                (tuple(binary_belief(x) for x in xs), w) for xs, w in pairs))
        return cls(tuple(dists))


@dataclass(frozen=True)
class InformationStructure:
    """Finite signal sets per receiver and, per state, a distribution over signal profiles."""

    signal_sets: tuple[tuple, ...]
    kernel: tuple[FiniteSupportDistribution, ...]

    def __post_init__(self):
        sets = tuple(tuple(s) for s in self.signal_sets)
        kernel = tuple(self.kernel)
        object.__setattr__(self, "signal_sets", sets)
        object.__setattr__(self, "kernel", kernel)
        lookup = [set(s) for s in sets]
        for d in kernel:
            if abs(sum(d.weights) - 1.0) > DIST_TOL:
                raise ValidationError("kernel weights must sum to 1 in every state")
            for prof in d.atoms:
                if len(prof) != len(sets):
                    raise ValidationError(f"signal profile {prof} has wrong length")
                for i, s in enumerate(prof):
                    if s not in lookup[i]:
                        raise ValidationError(f"signal {s!r} not in receiver {i}'s signal set")

    @property
    def n_receivers(self) -> int:
        return len(self.signal_sets)

    def signal_marginal(self, receiver: int, state: int) -> dict:
        out: dict = {}
        for prof, w in self.kernel[state]:
            out[prof[receiver]] = out.get(prof[receiver], 0.0) + w
        return out


UtilityFn = Callable[[int, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PersuasionProblem:
    states: StateSpace
    prior: Prior
    receivers: int
    utility: UtilityFn
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.receivers < 1:
            raise ValidationError("need at least one receiver")
        if len(self.prior) != self.states.size:
            raise ValidationError("prior length does not match the state space")

    @property
    def n_states(self) -> int:
        return self.states.size

    @property
    def n_receivers(self) -> int:
        return self.receivers

    @property
    def is_binary(self) -> bool:
        return self.states.size == 2

    def evaluate(self, state: int, profiles) -> np.ndarray:
        X = np.asarray(profiles, dtype=float)
        if X.shape[-2:] != (self.receivers, self.n_states):
            raise ValidationError(f"profile array has shape {X.shape}, expected (..., "
                                  f"{self.receivers}, {self.n_states})")
        return np.asarray(self.utility(int(state), X), dtype=float)

    def value_at(self, state: int, profile) -> float:
        return float(self.evaluate(state, np.asarray(profile, dtype=float)[None])[0])

    def expected_utility(self, family: ConditionalBeliefFamily) -> float:
        total = 0.0
        for k, (w, d) in enumerate(zip(self.prior.weights, family.per_state)):
            vals = self.evaluate(k, d.atom_array())
            total += w * float(d.weight_array @ vals)
        return total


# --------------------------------------------------------------------------
# conversions

def posterior_from_signals(info: InformationStructure, prior: Prior) -> ConditionalBeliefFamily:
    """Per state, the distribution of the receivers' posterior profile."""
    S = len(prior)
    if len(info.kernel) != S:
        raise ValidationError("kernel must have one distribution per state")
    p = prior.array
    posts = []
    dropped = 0
    for i in range(info.n_receivers):
        table = {}
        for s in info.signal_sets[i]:
            lik = np.array([info.signal_marginal(i, w).get(s, 0.0) for w in range(S)])
            joint = p * lik
            tot = joint.sum()
            if tot <= 0:
                dropped += 1
                continue
            table[s] = tuple(float(v) for v in joint / tot)
        posts.append(table)
    if dropped:
        log.debug("dropped %d zero-probability signals", dropped)
    per_state = []
    for w in range(S):
        pairs = [(tuple(posts[i][s] for i, s in enumerate(prof)), wt)
                 for prof, wt in info.kernel[w] if wt > 0]
        per_state.append(canonicalize(pairs))
    return ConditionalBeliefFamily(tuple(per_state))


def unconditional(family: ConditionalBeliefFamily, prior: Prior) -> FiniteSupportDistribution:
    if len(prior) != family.n_states:
        raise ValidationError("prior and family disagree on the number of states")
    return mixture(family.per_state, prior.weights)


def condition_single_receiver(lam: FiniteSupportDistribution, prior: Prior,
                              tol: float = 1e-9) -> tuple[FiniteSupportDistribution, ...]:
    """Split an unconditional belief distribution into its per-state conditionals.

    The conditional weight of atom ``x`` in state ``w`` is ``x(w)/p(w) * lam(x)``.
    """
    p = prior.array
    X = lam.atom_array()
    if X.ndim != 2 or X.shape[1] != len(p):
        raise ValidationError("atoms must be beliefs over the prior's states")
    gap = np.max(np.abs(lam.weight_array @ X - p))
    if gap > tol:
        raise PreconditionError(f"mean of the belief distribution misses the prior by {gap:.3g}")
    out = []
    for w in range(len(p)):
        cw = X[:, w] / p[w] * lam.weight_array
        out.append(canonicalize(list(zip(lam.atoms, cw))))
    return tuple(out)
