import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from persuade.belief_core import PersuasionProblem, Prior, StateSpace, ValidationError
from persuade.feasibility import check_family
from persuade.grid_persuasion import (
    SizeError,
    grid_certificate,
    interpolate,
    make_grid,
    solve_dual_grid,
    solve_dual_grid_binary,
    solve_primal_grid,
)
from persuade.reductions import ScalarFunctionTable, cav_1d
from persuade.utilities import builtin_problem


def test_grid_sizes():
    assert sorted(make_grid(2, 2).points[:, 0].tolist()) == [0.0, 0.5, 1.0]
    assert make_grid(3, 2).size == 6
    assert make_grid(2, 100).size == 101
    with pytest.raises(SizeError):
        make_grid(6, 200, cap=1000)


def test_interpolation_is_exact_on_linear_functions(rng):
    g = make_grid(3, 5)
    coef = rng.normal(size=3)
    vals = g.points @ coef
    X = rng.dirichlet(np.ones(3), size=50)
    assert np.allclose(interpolate(g, vals, X), X @ coef, atol=1e-12)


def test_interpolation_reproduces_grid_values(rng):
    g = make_grid(3, 4)
    vals = rng.normal(size=g.size)
    assert np.allclose(interpolate(g, vals, g.points), vals, atol=1e-12)


@pytest.mark.parametrize("p", [0.3, 0.5])
def test_retailer_primal_and_dual(p):
    prob = builtin_problem("retailer", p)
    g = make_grid(2, 50)
    primal = solve_primal_grid(prob, g)
    dual = solve_dual_grid(prob, g)
    assert primal.value == pytest.approx(2 * p * (1 - p), abs=1e-6)
    assert dual.value == pytest.approx(2 * p * (1 - p), abs=1e-6)
    assert check_family(primal.family, prob.prior, tol=1e-8).feasible
    assert prob.expected_utility(primal.family) == pytest.approx(primal.value, abs=1e-8)


def test_profit_form_has_half_the_value():
    prob = builtin_problem("retailer", 0.5, {"form": "profit"})
    assert solve_primal_grid(prob, make_grid(2, 50)).value == pytest.approx(0.25, abs=1e-6)


def test_polarization_values():
    prob = builtin_problem("polarization", 0.5, {"beta": 2})
    assert solve_primal_grid(prob, make_grid(2, 50)).value == pytest.approx(0.25, abs=1e-6)
    prob1 = builtin_problem("polarization", 0.5, {"beta": 1})
    assert solve_dual_grid(prob1, make_grid(2, 20)).value == pytest.approx(0.5, abs=1e-6)


def test_constant_utility_three_states():
    prob = builtin_problem("constant", (0.2, 0.3, 0.5), {"c": 1.5})
    g = make_grid(3, 3)
    assert solve_primal_grid(prob, g).value == pytest.approx(1.5)
    assert solve_dual_grid(prob, g).value == pytest.approx(1.5)


def test_alpha_dual_retailer_and_zero():
    g = make_grid(2, 50)
    assert solve_dual_grid_binary(builtin_problem("retailer", 0.5), g).value == pytest.approx(0.5, abs=1e-6)
    zero = solve_dual_grid_binary(builtin_problem("constant", 0.5, {"c": 0.0}), make_grid(2, 10))
    assert zero.value == pytest.approx(0.0, abs=1e-9)
    assert np.allclose(zero.certificate.meta["alpha"], 0.0, atol=1e-9)


def test_alpha_dual_discord_near_cav():
    prob = builtin_problem("discord", 0.5)
    res = solve_dual_grid_binary(prob, make_grid(2, 60))
    xs = np.linspace(0, 1, 4001)
    vbar = xs * np.abs(xs - 1) * np.abs(xs - 0.5) * 0.5 + (1 - xs) * xs * np.abs(xs - 0.5) * 0.5
    cav, _ = cav_1d(ScalarFunctionTable(xs, vbar), 0.5)
    assert res.value == pytest.approx(cav, abs=2e-3)


def test_dual_certificate_is_orthogonal():
    prob = builtin_problem("discord", 0.5)
    res = solve_dual_grid(prob, make_grid(2, 20))
    assert res.certificate.orthogonality_residual() <= 1e-9
    assert res.certificate.bound(prob.prior) == pytest.approx(res.value)


def test_grid_mismatch():
    prob = builtin_problem("retailer", 0.5)
    with pytest.raises(ValidationError):
        solve_primal_grid(prob, make_grid(3, 2))


def random_problem(rng):
    C = rng.normal(size=(2, 3, 3))
    p = float(rng.uniform(0.1, 0.9))

    def u(w, X):
        x1, x2 = X[..., 0, 0], X[..., 1, 0]
        return sum(C[w, j, k] * x1 ** j * x2 ** k for j in range(3) for k in range(3))

    return PersuasionProblem(StateSpace.binary(), Prior.binary(p), 2, u)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=20, deadline=None)
def test_grid_monotone_under_refinement(seed):
    prob = random_problem(np.random.default_rng(seed))
    v4 = solve_primal_grid(prob, make_grid(2, 4)).value
    v8 = solve_primal_grid(prob, make_grid(2, 8)).value
    assert v4 <= v8 + 1e-9


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=15, deadline=None)
def test_primal_dual_agree(seed):
    prob = random_problem(np.random.default_rng(seed))
    g = make_grid(2, 6)
    assert abs(solve_primal_grid(prob, g).value - solve_dual_grid(prob, g).value) <= 1e-6
