"""``persuade`` command-line entry point.

Exit codes: 0 success or feasible, 1 negative verdict, 2 input error,
3 solver failure. Reports are JSON (to ``--out`` or stdout); a short human
summary goes to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .belief_core import ValidationError
from .certificates import (
    VerificationOptions,
    beta_bracket,
    verify_certificate,
)
from .feasibility import check_family
from .grid_persuasion import SizeError as GridSizeError
from .grid_persuasion import make_grid, solve_dual_grid, solve_dual_grid_binary, solve_primal_grid
from .io import (
    SCHEMA_VERSION,
    FormatError,
    certificate_from_dict,
    certificate_to_dict,
    distribution_to_list,
    dumps,
    family_from_dict,
    family_to_dict,
    problem_from_dict,
    problem_to_dict,
    read_json,
    structure_to_dict,
    transport_from_dict,
)
from .lp_engine import LpError
from .one_state import OneStateInstance, OneStateOptions, realize_one_state, solve_one_state
from .reductions import public_option, public_signal_value, teams
from .transport import SizeError as TransportSizeError
from .transport import assortative, solve_mk

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3

log = logging.getLogger("persuade")


class InputError(Exception):
    pass


def _emit(report: dict, out: str | None, summary: str) -> None:
    text = dumps(report)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    sys.stderr.write(summary.rstrip() + "\n")


def _load(path: str) -> dict:
    try:
        return read_json(path)
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None


# --------------------------------------------------------------------------
# commands

def cmd_solve(args) -> int:
    problem, opts = problem_from_dict(_load(args.problem))
    method = args.method or opts.get("method", "primal")
    m = int(args.grid or opts.get("grid", 50))
    report = {"schema_version": SCHEMA_VERSION, "command": "solve", "method": method,
              "problem": problem_to_dict(problem, opts)}
    if method in ("primal", "dual", "dual-alpha"):
        grid = make_grid(problem.states, m)
        report["grid"] = m
        if method == "primal":
            res = solve_primal_grid(problem, grid)
            report["family"] = family_to_dict(res.family)["family"]
        elif method == "dual":
            res = solve_dual_grid(problem, grid)
            report["certificate"] = certificate_to_dict(res.certificate)["certificate"]
        else:
            res = solve_dual_grid_binary(problem, grid)
            report["certificate"] = certificate_to_dict(res.certificate)["certificate"]
            report["alpha"] = res.certificate.meta["alpha"]
        report["value"] = res.value
        report["diagnostics"] = res.diagnostics
        summary = f"{method} grid value at m={m}: {res.value:.12g}"
    elif method == "one-state":
        inst = OneStateInstance(problem, omega0=int(opts.get("omega0", 0)))
        budget = args.budget if args.budget is not None else opts.get("budget")
        sol = solve_one_state(inst, OneStateOptions(budget=budget))
        report["value"] = sol.value
        report["support"] = [{"profile": [list(b) for b in prof], "weight": w} for prof, w in sol.pi]
        report["binding"] = [{"receiver": i, "state": s, "binding": b} for (i, s), b in sol.binding.items()]
        report["structure"] = structure_to_dict(realize_one_state(sol.pi, inst))
        report["diagnostics"] = {k: v for k, v in sol.diagnostics.items() if k != "report"}
        summary = f"one-state value: {sol.value:.12g} with {len(sol.pi)} atoms"
    elif method == "supermodular":
        if problem.name == "public_option":
            sp = public_option(float(problem.params.get("alpha", 1.0)), problem.prior[0])
        elif problem.name == "teams":
            sp = teams(problem.prior[0])
        else:
            raise InputError(f"builtin {problem.name!r} has no supermodular form")
        value, info, split = public_signal_value(sp)
        report["value"] = value
        report["split"] = distribution_to_list(split)
        report["structure"] = structure_to_dict(info)
        summary = f"public-signal value: {value:.12g}, split over {len(split)} beliefs"
    else:
        raise InputError(f"unknown method {method!r}")
    _emit(report, args.out, summary)
    return EXIT_OK


def cmd_feasible(args) -> int:
    fam, prior = family_from_dict(_load(args.family))
    rep = check_family(fam, prior, tol=args.tol)
    report = {"schema_version": SCHEMA_VERSION, "command": "feasible", "feasible": rep.feasible,
              "max_violation": rep.max_violation, "tol": rep.tol,
              "violated_constraints": [{"receiver": r, "state": s, "detail": d}
                                       for r, s, d in rep.violated_constraints]}
    _emit(report, args.out, rep.summary())
    return EXIT_OK if rep.feasible else EXIT_NEGATIVE


def cmd_certify(args) -> int:
    problem, _ = problem_from_dict(_load(args.problem))
    cert = certificate_from_dict(_load(args.certificate))
    opts = VerificationOptions(samples=args.samples, tol=args.tol, lipschitz_bound=args.lipschitz)
    ver = verify_certificate(problem, cert, opts)
    report = {"schema_version": SCHEMA_VERSION, "command": "certify", "feasible": ver.feasible,
              "max_violation": ver.max_violation, "bound": ver.bound, "qualifier": ver.qualifier,
              "argmax": ver.argmax, "samples": ver.samples, "margin": ver.margin}
    verdict = "feasible" if ver.feasible else "infeasible"
    _emit(report, args.out, f"certificate {verdict} ({ver.qualifier}); max violation "
                            f"{ver.max_violation:.3e}; bound {ver.bound:.12g}")
    return EXIT_OK if ver.feasible else EXIT_NEGATIVE


def cmd_transport(args) -> int:
    inst = transport_from_dict(_load(args.problem))
    report = {"schema_version": SCHEMA_VERSION, "command": "transport", "method": args.method}
    if args.method == "lp":
        res = solve_mk(inst)
        report["value"] = res.value
        report["plan"] = distribution_to_list(res.plan)
        report["dual"] = {"V": res.dual.V,
                          "phi": [[{"atom": a, "value": v} for a, v in sorted(d.items())] for d in res.dual.phi]}
        value = res.value
    else:
        value_of, plan = assortative(inst.marginals)
        value = value_of(inst.utility)
        report["value"] = value
        report["plan"] = distribution_to_list(plan)
    _emit(report, args.out, f"transport value ({args.method}): {value:.12g}")
    return EXIT_OK


def cmd_beta_max(args) -> int:
    opts = VerificationOptions(samples=args.samples)
    lo, hi, history = beta_bracket(args.precision, opts)
    beta = 0.5 * (lo + hi)
    report = {"schema_version": SCHEMA_VERSION, "command": "beta-max", "beta_max": beta,
              "bracket": [lo, hi], "history": [{"beta": b, "passes": ok} for b, ok in history]}
    _emit(report, args.out, f"beta_max = {beta:.6f} (bracket [{lo:.6f}, {hi:.6f}])")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    from .reproduce import CASES, format_table, run

    cases = CASES if args.case == "all" else (args.case,)
    if any(c not in CASES for c in cases):
        raise InputError(f"unknown case {args.case!r}; choose from {', '.join(CASES)} or all")
    checks = run(cases, out_dir=args.out)
    table = format_table(checks)
    print(table)
    failed = [c for c in checks if c.status == "FAIL"]
    if args.out:
        Path(args.out, "reproduce.json").write_text(
            dumps({"schema_version": SCHEMA_VERSION, "command": "reproduce",
                   "checks": [c.as_dict() for c in checks]}), encoding="utf-8")
    print(f"\n{len(checks) - len(failed)} of {len(checks)} rows without FAIL")
    return EXIT_NEGATIVE if failed else EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="persuade", description="Multi-receiver Bayesian persuasion toolkit")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="grid LP, one-state or supermodular solve")
    s.add_argument("--problem", required=True)
    s.add_argument("--method", choices=["primal", "dual", "dual-alpha", "one-state", "supermodular"])
    s.add_argument("--grid", type=int)
    s.add_argument("--budget", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    f = sub.add_parser("feasible", help="check a conditional belief family")
    f.add_argument("--family", required=True)
    f.add_argument("--tol", type=float, default=1e-9)
    f.add_argument("--out")
    f.set_defaults(func=cmd_feasible)

    c = sub.add_parser("certify", help="verify a dual certificate")
    c.add_argument("--problem", required=True)
    c.add_argument("--certificate", required=True)
    c.add_argument("--samples", type=int, default=2001)
    c.add_argument("--tol", type=float, default=1e-9)
    c.add_argument("--lipschitz", type=float)
    c.add_argument("--out")
    c.set_defaults(func=cmd_certify)

    t = sub.add_parser("transport", help="multi-marginal transport")
    t.add_argument("--problem", required=True)
    t.add_argument("--method", choices=["lp", "assortative"], default="lp")
    t.add_argument("--out")
    t.set_defaults(func=cmd_transport)

    b = sub.add_parser("beta-max", help="largest beta passing the full-info/no-info test")
    b.add_argument("--precision", type=float, default=1e-4)
    b.add_argument("--samples", type=int, default=2001)
    b.add_argument("--out")
    b.set_defaults(func=cmd_beta_max)

    r = sub.add_parser("reproduce", help="run reproduction cases")
    r.add_argument("--case", default="all")
    r.add_argument("--out", help="directory for CSV plot data and reproduce.json")
    r.set_defaults(func=cmd_reproduce)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, FormatError, ValidationError, KeyError, TypeError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"input error: {exc}\n")
        return EXIT_INPUT
    except (LpError, GridSizeError, TransportSizeError, RuntimeError) as exc:
        sys.stderr.write(f"solver failure: {exc}\n")
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
