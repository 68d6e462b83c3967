"""Every builtin, loaded through the problem-file reader, against formulas written out here."""
import numpy as np
import pytest

from persuade.belief_core import ValidationError
from persuade.grid_persuasion import make_grid
from persuade.io import SCHEMA_VERSION, problem_from_dict
from persuade.utilities import builtin_problem


def load(name, params=None, prior=0.5, receivers=2):
    doc = {"schema_version": SCHEMA_VERSION, "prior": prior, "receivers": receivers,
           "utility": {"builtin": name, "params": params or {}}}
    return problem_from_dict(doc)[0]


@pytest.fixture(scope="module")
def points():
    rng = np.random.default_rng(2024)
    x = rng.uniform(size=(1000, 2))
    X = np.stack([x, 1 - x], axis=-1)
    return x[:, 0], x[:, 1], X


CLOSED = {
    ("polarization", 1.7): (lambda x1, x2: np.abs(x1 - x2) ** 1.7, lambda x1, x2: np.abs(x1 - x2) ** 1.7),
    ("retailer", "polarization"): (lambda x1, x2: np.abs(x1 - x2), lambda x1, x2: np.abs(x1 - x2)),
    ("retailer", "profit"): (lambda x1, x2: np.maximum(x1 - x2, 0), lambda x1, x2: np.maximum(x1 - x2, 0)),
    ("morale", None): (lambda x1, x2: 1 - np.minimum(x1, x2), lambda x1, x2: 0 * x1),
    ("duopoly", None): (lambda x1, x2: np.exp(-2 * (1 - x1 + 2 * x2)) - 1, lambda x1, x2: 0 * x1),
    ("discord", None): (lambda x1, x2: np.abs(x1 - x2) * np.abs(x1 - .5) * np.abs(x2 - .5),
                        lambda x1, x2: np.abs(x1 - x2) * np.abs(x1 - .5) * np.abs(x2 - .5)),
    ("public_option", 1.0): (lambda x1, x2: (2 - x1 - x2) - np.sqrt(2 - x1 - x2) / 3,
                             lambda x1, x2: (2 - x1 - x2) - np.sqrt(2 - x1 - x2)),
    ("teams", None): (lambda x1, x2: (1 - x1) * (1 - x2), lambda x1, x2: (1 - x1) * (1 - x2)),
    ("constant", 0.3): (lambda x1, x2: 0 * x1 + 0.3, lambda x1, x2: 0 * x1 + 0.3),
}
PARAMS = {"polarization": "beta", "retailer": "form", "public_option": "alpha", "constant": "c"}


@pytest.mark.parametrize("key", list(CLOSED), ids=[f"{k[0]}-{k[1]}" for k in CLOSED])
def test_builtin_matches_closed_form(key, points):
    name, arg = key
    params = {PARAMS[name]: arg} if name in PARAMS else {}
    prob = load(name, params)
    x1, x2, X = points
    for w, f in enumerate(CLOSED[key]):
        assert np.max(np.abs(prob.evaluate(w, X) - f(x1, x2))) <= 1e-12


def test_table_utility_on_and_off_grid():
    m = 4
    g = make_grid(2, m)
    K = g.size
    xs = g.points[:, 0]
    idx = np.array(list(np.ndindex(K, K)))
    low = xs[idx[:, 0]] * 2 + xs[idx[:, 1]]
    high = -xs[idx[:, 0]]
    prob = load("table", {"m": m, "values": [low.tolist(), high.tolist()]})
    X = g.points[idx]
    assert np.allclose(prob.evaluate(0, X), low)
    # off-grid beliefs round to the nearest lattice point
    near = np.array([[[0.26, 0.74], [0.49, 0.51]]])
    assert prob.evaluate(0, near)[0] == pytest.approx(0.25 * 2 + 0.5)


def test_unknown_parameter_rejected():
    with pytest.raises(ValidationError):
        builtin_problem("polarization", 0.5, {"gamma": 1})


def test_binary_builtin_needs_two_states():
    with pytest.raises(ValidationError):
        builtin_problem("morale", (0.2, 0.3, 0.5))


def test_negative_beta_rejected():
    with pytest.raises(ValidationError):
        builtin_problem("polarization", 0.5, {"beta": -1})
