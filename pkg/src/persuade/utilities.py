"""Builtin sender utilities.

Every builtin is a two-state problem except ``constant`` and ``table``.
Receiver beliefs enter through ``x = x(low)`` (state index 0).
"""
from __future__ import annotations


import numpy as np

from .belief_core import PersuasionProblem, Prior, StateSpace, ValidationError


def _x(X, i):
    return X[..., i, 0]


def polarization_utility(beta: float):
    beta = float(beta)
    if beta < 0:
        raise ValidationError("beta must be nonnegative")

    def u(state, X):
        d = np.abs(_x(X, 0) - _x(X, 1))
        return np.power(d, beta) if beta > 0 else np.ones_like(d)

    return u


def retailer_utility(form: str = "polarization"):
    """``|x1 - x2|`` by default; ``form="profit"`` gives ``(x1 - x2) 1[x1 >= x2]``.

    Both have the same optimal structures at every prior; the profit form has
    half the value because of the symmetry between the two receivers.
    """
    if form == "polarization":
        def u(state, X):
            return np.abs(_x(X, 0) - _x(X, 1))
    elif form == "profit":
        def u(state, X):
            d = _x(X, 0) - _x(X, 1)
            return np.where(d >= 0, d, 0.0)
    else:
        raise ValidationError(f"unknown retailer form {form!r}")
    return u


def morale_utility():
    def u(state, X):
        if state != 0:
            return np.zeros(X.shape[:-2])
        return 1.0 - np.minimum(_x(X, 0), _x(X, 1))

    return u


def duopoly_quantity(a=21.0, b=2.0, c1=0.0, c2=0.0, d1=9.0, d2=3.0, gamma1=3.0, gamma2=12.0):
    """Firm 1's output as a function of both beliefs, from the linear best replies.

    ``(2b + c_i) q_i + b q_j = a - d_i - gamma_i x_i`` for both firms.
    """
    M = np.array([[2 * b + c1, b], [b, 2 * b + c2]], dtype=float)
    if abs(np.linalg.det(M)) < 1e-14:
        raise ValidationError("degenerate duopoly best-reply system")
    Minv = np.linalg.inv(M)

    def q1(x1, x2):
        r1 = a - d1 - gamma1 * x1
        r2 = a - d2 - gamma2 * x2
        return Minv[0, 0] * r1 + Minv[0, 1] * r2

    return q1


def duopoly_utility(a=21.0, b=2.0, c1=0.0, c2=0.0, d1=9.0, d2=3.0, gamma1=3.0, gamma2=12.0,
                    costScale=2.0):
    """Minus the pollution cost ``1 - exp(-costScale q1)`` in the low state, zero otherwise."""
    q1 = duopoly_quantity(a, b, c1, c2, d1, d2, gamma1, gamma2)

    def u(state, X):
        if state != 0:
            return np.zeros(X.shape[:-2])
        return np.exp(-costScale * q1(_x(X, 0), _x(X, 1))) - 1.0

    return u


def discord_utility():
    def u(state, X):
        x1, x2 = _x(X, 0), _x(X, 1)
        return np.abs(x1 - x2) * np.abs(x1 - 0.5) * np.abs(x2 - 0.5)

    return u


def public_option_utility(alpha: float = 1.0):
    """Price times total demand minus a state-dependent cost, demand ``1 - x`` per market."""
    def u(state, X):
        q = (1 - _x(X, 0)) + (1 - _x(X, 1))
        scale = 1.0 / 3.0 if state == 0 else 1.0
        return alpha * q - scale * np.sqrt(np.maximum(q, 0.0))

    return u


def teams_utility():
    """Product of efforts, each receiver's effort equal to its belief in the high state."""
    def u(state, X):
        return (1 - _x(X, 0)) * (1 - _x(X, 1))

    return u


def constant_utility(c: float = 0.0):
    def u(state, X):
        return np.full(X.shape[:-2], float(c))

    return u


def table_utility(m: int, values, n_receivers: int, n_states: int):
    """Utility given at every grid profile of resolution ``m``.

    ``values[w]`` lists the utility in state ``w`` at the grid profiles in
    lexicographic order (the order used by the grid solvers). Off-grid
    beliefs are rounded to the nearest grid belief.
    """
    from .grid_persuasion import make_grid

    grid = make_grid(n_states, m)
    K = grid.size
    vals = np.asarray(values, dtype=float)
    if vals.shape != (n_states, K ** n_receivers):
        raise ValidationError(f"table needs shape {(n_states, K ** n_receivers)}, got {vals.shape}")
    strides = K ** np.arange(n_receivers - 1, -1, -1)

    def nearest(Xi):
        # round to the lattice keeping coordinates summing to m (largest remainder)
        y = Xi * m
        base = np.floor(y)
        short = (m - base.sum(axis=-1)).astype(int)
        rem = y - base
        order = np.argsort(-rem, axis=-1, kind="stable")
        rank = np.argsort(order, axis=-1, kind="stable")
        base = base + (rank < short[..., None])
        pts = base.astype(int)
        flat = pts.reshape(-1, n_states)
        return np.array([grid.index_of(p) for p in flat]).reshape(pts.shape[:-1])

    def u(state, X):
        idx = sum(nearest(X[..., i, :]) * strides[i] for i in range(n_receivers))
        return vals[state][idx]

    return u


BUILTINS = ("polarization", "retailer", "morale", "duopoly", "discord", "public_option",
            "teams", "constant", "table")


def builtin_problem(name: str, prior=0.5, params: dict | None = None, receivers: int = 2,
                    states=None) -> PersuasionProblem:
    """Assemble a :class:`PersuasionProblem` for a builtin utility.

    ``prior`` is the low-state probability for two-state builtins or a full
    prior vector.
    """
    params = dict(params or {})
    if np.ndim(prior) == 0:
        pr = Prior.binary(float(prior))
    else:
        pr = Prior(tuple(prior))
    S = len(pr)
    ss = StateSpace(tuple(states)) if states is not None else (
        StateSpace.binary() if S == 2 else StateSpace(tuple(f"s{k}" for k in range(S))))
    binary_only = {
        "polarization": lambda: polarization_utility(params.get("beta", 1.0)),
        "retailer": lambda: retailer_utility(params.get("form", "polarization")),
        "morale": morale_utility,
        "duopoly": lambda: duopoly_utility(**params),
        "discord": discord_utility,
        "public_option": lambda: public_option_utility(params.get("alpha", 1.0)),
        "teams": teams_utility,
    }
    if name in binary_only:
        if S != 2 or receivers != 2:
            raise ValidationError(f"builtin {name!r} needs two states and two receivers")
        allowed = {"polarization": {"beta"}, "retailer": {"form"}, "public_option": {"alpha"},
                   "duopoly": {"a", "b", "c1", "c2", "d1", "d2", "gamma1", "gamma2", "costScale"}}
        extra = set(params) - allowed.get(name, set())
        if extra:
            raise ValidationError(f"unknown parameters for {name!r}: {sorted(extra)}")
        u = binary_only[name]()
    elif name == "constant":
        u = constant_utility(params.get("c", 0.0))
    elif name == "table":
        u = table_utility(int(params["m"]), params["values"], receivers, S)
    else:
        raise ValidationError(f"unknown builtin utility {name!r}")
    return PersuasionProblem(ss, pr, receivers, u, name=name, params=params)

