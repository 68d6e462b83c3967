import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from persuade.belief_core import FiniteSupportDistribution as D
from persuade.transport import (
    DualInfeasible,
    SizeError,
    TransportInstance,
    assortative,
    is_supermodular,
    kantorovich_gap,
    plan_projections,
    plan_value,
    product_plan,
    solve_mk,
    solve_supermodular,
)

prod = lambda t: float(np.prod(t))


def test_point_mass_marginal():
    a = D((2.0,), (1.0,))
    b = D((0.0, 1.0, 3.0), (0.2, 0.5, 0.3))
    res = solve_mk(TransportInstance([a, b], prod))
    assert res.value == pytest.approx(2.0 * (0.5 + 0.9))


def test_product_of_two_coins():
    # couplings of two fair coins: weight s on (1, 1), value s <= 1/2
    u = D((0.0, 1.0), (0.5, 0.5))
    res = solve_mk(TransportInstance([u, u], prod))
    assert res.value == pytest.approx(0.5)
    assert res.plan.weight_of((1.0, 1.0)) == pytest.approx(0.5)


def test_assortative_quantile_plan():
    a = D((0.0, 1.0), (0.5, 0.5))
    b = D((0.0, 1.0), (0.25, 0.75))
    _, plan = assortative([a, b])
    assert dict(plan) == pytest.approx({(0.0, 0.0): 0.25, (0.0, 1.0): 0.25, (1.0, 1.0): 0.5})


def test_identical_marginals_on_diagonal():
    a = D((0.1, 0.4, 0.9), (0.2, 0.3, 0.5))
    _, plan = assortative([a, a, a])
    assert all(len(set(t)) == 1 for t in plan.atoms)


def test_point_masses_give_point_plan():
    _, plan = assortative([D((1.0,), (1.0,)), D((2.0,), (1.0,))])
    assert plan.atoms == ((1.0, 2.0),)


def test_lp_duals_close_the_gap(rng):
    margs = [D(tuple(rng.uniform(size=3)), tuple(rng.dirichlet(np.ones(3)))) for _ in range(2)]
    inst = TransportInstance(margs, lambda t: float(np.sin(3 * t[0]) * t[1] + t[0] ** 2))
    res = solve_mk(inst)
    assert abs(kantorovich_gap(inst, res.plan, res.dual)) <= 1e-7


def test_constant_utility_dual():
    margs = [D((0.0, 1.0), (0.5, 0.5))] * 2
    inst = TransportInstance(margs, lambda t: 4.0)
    res = solve_mk(inst)
    assert res.dual.V == pytest.approx(4.0)
    assert all(abs(v) < 1e-9 for phi in res.dual.phi for v in phi.values())
    assert kantorovich_gap(inst, res.plan, res.dual) == pytest.approx(0.0, abs=1e-12)


def test_product_plan_has_positive_gap():
    margs = [D((0.0, 1.0), (0.5, 0.5))] * 2
    inst = TransportInstance(margs, prod)
    res = solve_mk(inst)
    assert kantorovich_gap(inst, product_plan(margs), res.dual) == pytest.approx(0.25)


def test_gap_rejects_infeasible_dual():
    margs = [D((0.0, 1.0), (0.5, 0.5))] * 2
    inst = TransportInstance(margs, prod)
    with pytest.raises(DualInfeasible):
        kantorovich_gap(inst, product_plan(margs), (0.0, [{0.0: 0.0, 1.0: 0.0}] * 2))


def test_size_cap():
    m = D(tuple(float(k) for k in range(50)), tuple([0.02] * 50))
    with pytest.raises(SizeError):
        solve_mk(TransportInstance([m, m, m, m], prod))


def test_projections_recover_marginals():
    a = D((0.0, 1.0, 2.0), (0.2, 0.3, 0.5))
    b = D((5.0, 6.0), (0.6, 0.4))
    _, plan = assortative([a, b])
    pa, pb = plan_projections(plan, 2)
    assert dict(pa) == pytest.approx(dict(a))
    assert dict(pb) == pytest.approx(dict(b))


def test_supermodularity_test():
    assert is_supermodular(np.array([[0.0, 0.0], [0.0, 1.0]]))
    assert not is_supermodular(np.array([[0.0, 1.0], [1.0, 0.0]]))


def random_supermodular(rng, n):
    a, b, c = rng.uniform(0.0, 1.0, size=3)
    w = rng.normal(size=n)
    return lambda t: float(a * sum(t) ** 2 + b * np.prod(t) + c * min(t) + np.dot(w, t))


@given(st.integers(0, 2**31 - 1), st.sampled_from([2, 3]))
@settings(max_examples=100, deadline=None)
def test_assortative_matches_lp(seed, n):
    rng = np.random.default_rng(seed)
    margs = []
    for _ in range(n):
        k = int(rng.integers(1, 5))
        margs.append(D(tuple(np.round(rng.uniform(size=k), 6)), tuple(rng.dirichlet(np.ones(k)))))
    G = random_supermodular(rng, n)
    inst = TransportInstance(margs, G)
    value_of, plan = assortative(margs)
    assert value_of(G) == pytest.approx(solve_mk(inst).value, abs=1e-8)
    assert plan_value(inst, plan) == pytest.approx(value_of(G), abs=1e-12)
    assert solve_supermodular(inst).value == pytest.approx(value_of(G), abs=1e-8)
