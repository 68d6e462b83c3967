"""JSON and CSV formats for problems, families, certificates and reports.

Every JSON document carries ``schema_version``. Floats are written with
``repr``, the shortest string that parses back to the same double, so files
roundtrip exactly. Output is key-sorted so identical inputs give identical
bytes.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any

import numpy as np

from .belief_core import (
    ConditionalBeliefFamily,
    FiniteSupportDistribution,
    InformationStructure,
    PersuasionProblem,
    Prior,
    ValidationError,
    binary_belief,
)
from .utilities import BUILTINS, builtin_problem

SCHEMA_VERSION = 1


class FormatError(ValidationError):
    pass


def _plain(obj: Any):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(obj: Any, path: str | Path) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def read_json(path: str | Path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise FormatError(f"{path}: expected a JSON object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise FormatError(f"{path}: unsupported schema_version {version!r}")
    return data


# --------------------------------------------------------------------------
# problems

def problem_from_dict(d: dict) -> tuple[PersuasionProblem, dict]:
    """Returns the problem and the solver options stored with it."""
    try:
        prior = d["prior"]
        util = d["utility"]
    except KeyError as exc:
        raise FormatError(f"problem file lacks {exc}") from None
    name = util.get("builtin")
    if name not in BUILTINS:
        raise FormatError(f"unknown builtin utility {name!r}")
    receivers = int(d.get("receivers", 2))
    states = d.get("states")
    prior_arg = prior if isinstance(prior, (list, tuple)) else float(prior)
    problem = builtin_problem(name, prior_arg, util.get("params", {}), receivers, states)
    return problem, dict(d.get("options", {}))


def problem_to_dict(problem: PersuasionProblem, options: dict | None = None) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "states": list(problem.states.labels),
        "prior": list(problem.prior.weights),
        "receivers": problem.receivers,
        "utility": {"builtin": problem.name, "params": dict(problem.params)},
        "options": dict(options or {}),
    }


# --------------------------------------------------------------------------
# families

def _profile_from_json(obj) -> tuple:
    prof = []
    for b in obj:
        if isinstance(b, (int, float)):
            prof.append(binary_belief(b))
        else:
            prof.append(tuple(float(v) for v in b))
    return tuple(prof)


def family_from_dict(d: dict) -> tuple[ConditionalBeliefFamily, Prior]:
    """``family`` is a list (one entry per state) of ``{"profile": ..., "weight": ...}``.

    A profile lists one belief per receiver; a bare number ``x`` stands for
    the two-state belief ``(x, 1 - x)``.
    """
    try:
        prior = d["prior"]
        fam = d["family"]
    except KeyError as exc:
        raise FormatError(f"family file lacks {exc}") from None
    pr = Prior.binary(float(prior)) if isinstance(prior, (int, float)) else Prior(tuple(prior))
    per_state = []
    for entries in fam:
        per_state.append(FiniteSupportDistribution.from_pairs(
            (_profile_from_json(e["profile"]), float(e["weight"])) for e in entries))
    return ConditionalBeliefFamily(tuple(per_state)), pr


def family_to_dict(family: ConditionalBeliefFamily, prior: Prior | None = None) -> dict:
    out = {"schema_version": SCHEMA_VERSION,
           "family": [[{"profile": [list(b) for b in prof], "weight": w} for prof, w in d]
                      for d in family.per_state]}
    if prior is not None:
        out["prior"] = list(prior.weights)
    return out


def distribution_to_list(dist: FiniteSupportDistribution) -> list:
    return [{"atom": _plain(a), "weight": w} for a, w in dist]


def structure_to_dict(info: InformationStructure) -> dict:
    return {"signal_sets": [list(s) for s in info.signal_sets],
            "kernel": [[{"signals": list(s), "weight": w} for s, w in d] for d in info.kernel]}


# --------------------------------------------------------------------------
# certificates

def certificate_from_dict(d: dict):
    """Closed-form alpha families by name, or grid values."""
    from .certificates import polarization_alpha, retailer_alpha, zero_alpha
    from .grid_persuasion import grid_certificate, make_grid

    c = d.get("certificate", d)
    kind = c.get("kind")
    if kind == "alpha":
        fam = c.get("family")
        if fam == "polarization":
            return polarization_alpha(float(c["beta"]))
        if fam == "retailer":
            return retailer_alpha(float(c["p"]))
        if fam == "zero":
            return zero_alpha()
        raise FormatError(f"unknown alpha family {fam!r}")
    if kind == "zero":
        return zero_alpha()
    if kind == "grid":
        g = make_grid(int(c["n_states"]), int(c["m"]))
        return grid_certificate(g, c["V"], c["phi"])
    raise FormatError(f"unknown certificate kind {kind!r}")


def certificate_to_dict(cert) -> dict:
    from .certificates import AlphaCertificate

    if isinstance(cert, AlphaCertificate):
        if cert.name in ("polarization", "retailer", "zero"):
            body = {"kind": "alpha", "family": cert.name, **cert.params}
        else:
            body = {"kind": "alpha", "family": cert.name, "V": [cert.V_low, cert.V_high],
                    "params": cert.params}
    elif cert.kind == "grid":
        body = {"kind": "grid", "m": cert.grid.m, "n_states": cert.grid.n_states,
                "V": cert.V, "phi": cert.phi_values}
    else:
        body = {"kind": cert.kind, "V": cert.V}
    return {"schema_version": SCHEMA_VERSION, "certificate": body}


# --------------------------------------------------------------------------
# transport instances

def transport_from_dict(d: dict):
    """Marginals over reals plus a named utility: ``product``, ``min``, ``sum_sq`` or ``table``."""
    from .transport import TransportInstance

    margs = []
    for m in d["marginals"]:
        margs.append(FiniteSupportDistribution(tuple(float(a) for a in m["atoms"]),
                                               tuple(float(w) for w in m["weights"])))
    u = d.get("utility", {"name": "product"})
    name = u.get("name")
    if name == "product":
        fn = lambda t: float(np.prod(t))
    elif name == "min":
        fn = lambda t: float(min(t))
    elif name == "sum_sq":
        fn = lambda t: float(sum(t) ** 2)
    elif name == "table":
        T = np.asarray(u["values"], dtype=float)
        index = [{a: k for k, a in enumerate(m.atoms)} for m in margs]
        fn = lambda t: float(T[tuple(ix[a] for ix, a in zip(index, t))])
    else:
        raise FormatError(f"unknown transport utility {name!r}")
    return TransportInstance(margs, fn)


# --------------------------------------------------------------------------
# plot data

def write_points_csv(path: str | Path, rows: list[dict]) -> None:
    if not rows:
        return
    fields = list(rows[0].keys())
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})
