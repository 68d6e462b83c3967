import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from persuade.belief_core import Prior
from persuade.certificates import polarization_alpha, retailer_alpha
from persuade.grid_persuasion import make_grid, solve_dual_grid
from persuade.io import (
    SCHEMA_VERSION,
    FormatError,
    certificate_from_dict,
    certificate_to_dict,
    dumps,
    family_from_dict,
    family_to_dict,
    problem_from_dict,
    problem_to_dict,
    read_json,
    transport_from_dict,
    write_points_csv,
)
from persuade.utilities import builtin_problem
from conftest import fig2_family, random_family


def test_problem_roundtrip():
    prob = builtin_problem("polarization", 0.3, {"beta": 2.5})
    again, opts = problem_from_dict(json.loads(dumps(problem_to_dict(prob, {"grid": 20}))))
    assert again.name == "polarization" and again.params == {"beta": 2.5}
    assert again.prior.weights == prob.prior.weights
    assert opts == {"grid": 20}


def test_unknown_builtin():
    with pytest.raises(FormatError):
        problem_from_dict({"schema_version": 1, "prior": 0.5, "utility": {"builtin": "nope"}})


def test_schema_version_checked(tmp_path):
    p = tmp_path / "x.json"
    p.write_text(json.dumps({"schema_version": 99}))
    with pytest.raises(FormatError):
        read_json(p)
    p.write_text("{not json")
    with pytest.raises(FormatError):
        read_json(p)


def test_fig2_family_file():
    doc = json.loads(dumps(family_to_dict(fig2_family(), Prior.binary(0.5))))
    fam, prior = family_from_dict(doc)
    assert fam.max_distance(fig2_family()) == 0.0
    assert prior.weights == (0.5, 0.5)


def test_scalar_profiles_are_binary_beliefs():
    fam, _ = family_from_dict({"prior": 0.5, "family": [[{"profile": [0.25], "weight": 1}],
                                                         [{"profile": [0.25], "weight": 1}]]})
    assert fam.per_state[0].atoms[0] == ((0.25, 0.75),)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_family_roundtrip_is_exact(seed):
    fam, prior = random_family(np.random.default_rng(seed), 2, 3)
    again, prior2 = family_from_dict(json.loads(dumps(family_to_dict(fam, prior))))
    assert again == fam
    assert prior2 == prior


def test_alpha_certificate_roundtrip():
    for cert in (polarization_alpha(2.0), retailer_alpha(0.3)):
        back = certificate_from_dict(json.loads(dumps(certificate_to_dict(cert))))
        xs = np.linspace(0, 1, 17)
        assert np.array_equal(back.alpha[0](xs), cert.alpha[0](xs))
        assert back.V_low == cert.V_low


def test_grid_certificate_roundtrip():
    res = solve_dual_grid(builtin_problem("retailer", 0.5), make_grid(2, 6))
    back = certificate_from_dict(json.loads(dumps(certificate_to_dict(res.certificate))))
    assert np.array_equal(back.phi_values, res.certificate.phi_values)
    assert np.array_equal(back.V, res.certificate.V)


def test_dumps_is_deterministic_and_exact():
    x = 0.1 + 0.2
    s = dumps({"b": x, "a": [np.float64(1 / 3)]})
    assert s == dumps({"a": [1 / 3], "b": x})
    assert json.loads(s)["b"] == x


def test_transport_table_utility():
    inst = transport_from_dict({"marginals": [{"atoms": [0, 1], "weights": [0.5, 0.5]}] * 2,
                                "utility": {"name": "table", "values": [[0, 0], [0, 1]]}})
    assert inst.utility((1.0, 1.0)) == 1.0


def test_points_csv(tmp_path):
    p = tmp_path / "pts.csv"
    write_points_csv(p, [{"x1": 1 / 3, "x2": 1.0, "weight": 0.25, "color": "red"}])
    lines = p.read_text().splitlines()
    assert lines[0] == "x1,x2,weight,color"
    assert float(lines[1].split(",")[0]) == 1 / 3
