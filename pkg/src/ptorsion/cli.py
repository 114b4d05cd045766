"""Command-line front end.

Domain descriptions (JSON files or inline JSON) in; solution CSVs, solve
metadata, diagnostic reports, and sweep aggregates out.  JSON on stdout is
the machine-readable result of every command; progress and error messages
go to stderr.

Exit codes: 0 success, 1 configuration/input error, 2 solver failure,
3 diagnostic chain violation beyond tolerance, 4 sweep completed with
failed grid points.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .closed_forms import AnnulusTorsion, RadialTorsion
from .diagnostics import DELTA_CRIT_DEFAULT, analyze
from .errors import (
    InvalidDomainError,
    MeshFormatError,
    PTorsionError,
    SolverError,
)
from .geometry import DomainSpec, build_boundary
from .kernels import backend_name
from .meshing import load_mesh, save_mesh, triangulate
from .solver import (
    P_RANGE_MESSAGE,
    FemSpace,
    SolveConfig,
    SolveInfo,
    Solution,
    energy_gradient,
    load_solution,
    save_solution,
    solve_json_doc,
    solve_torsion,
    write_solve_json,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_CHAIN = 3
EXIT_PARTIAL = 4

_NUM = (int, float)
REPORT_SCHEMA = {
    "p": _NUM, "domain": dict, "h": _NUM, "I_p": _NUM,
    "excluded_area": _NUM, "identity": dict, "bound_ii": _NUM,
    "bound_iii": _NUM, "stability_bound": _NUM, "H0": _NUM, "R0": _NUM,
    "H_L1_dev": _NUM, "grad_bounds": dict, "sbt": (dict, str), "status": str,
}


class UsageError(Exception):
    """Bad flags or config; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse would sys.exit(2); route everything through UsageError so
    # the config exit code stays 1
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _err(*parts) -> None:
    print(*parts, file=sys.stderr)


def _emit(doc: dict) -> None:
    json.dump(doc, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _load_domain(text: str) -> DomainSpec:
    """Inline JSON (starts with '{') or a path to a JSON file."""
    if text.lstrip().startswith("{"):
        return DomainSpec.from_json(text)
    try:
        with open(text) as f:
            return DomainSpec.from_json(f.read())
    except OSError as e:
        raise UsageError(f"cannot read domain file {text!r}: {e.strerror}") from None


def _check_p(p: float) -> float:
    if p is None:
        raise UsageError("--p is required")
    if not (1.0 < p <= 2.0):
        raise UsageError(P_RANGE_MESSAGE + f", got {p}")
    return p


def _check_h(h: float) -> float:
    if h is None:
        raise UsageError("--h is required")
    if not h > 0:
        raise UsageError(f"h must be positive, got {h}")
    return h


def _ensure_out(path: str) -> str:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise UsageError(f"output directory {path!r} is not writable: {e.strerror}")
    return path


def _solve_config(args, p: float | None = None) -> SolveConfig:
    over = {}
    if getattr(args, "eps_min", None) is not None:
        over["eps_min"] = args.eps_min
    if getattr(args, "tol_grad", None) is not None:
        over["tol_grad"] = args.tol_grad
    if getattr(args, "max_newton", None) is not None:
        over["max_newton"] = args.max_newton
    return SolveConfig(p=(args.p if p is None else p), **over)


def _solution_from_files(mesh_path: str, solution_path: str,
                         spec: DomainSpec, config: SolveConfig) -> tuple:
    curve = build_boundary(spec)
    mesh = load_mesh(mesh_path, curve)
    values = load_solution(solution_path, mesh)
    fem = FemSpace.build(mesh)
    g = energy_gradient(fem, values, config.p, config.eps_min)
    grad_rel = float(np.linalg.norm(g[fem.interior])
                     / np.linalg.norm(fem.load[fem.interior]))
    info = SolveInfo(stages=[], iterations=0, energy=math.nan,
                     grad_rel=grad_rel, eps_floor=config.eps_min,
                     backend=backend_name())
    return Solution(mesh=mesh, fem=fem, config=config, values=values,
                    info=info), curve


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args) -> int:
    if args.domain is None:
        raise UsageError("--domain is required")
    spec = _load_domain(args.domain)
    _check_p(args.p)
    _check_h(args.h)
    out = _ensure_out(args.out or ".")

    curve = build_boundary(spec)
    mesh = triangulate(curve, args.h)
    _err(f"mesh: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles, "
         f"h={mesh.h:.4g}")
    sol = solve_torsion(mesh, _solve_config(args))
    _err(f"solve: {sol.info.iterations} Newton steps over "
         f"{len(sol.info.stages)} stages, grad_rel={sol.info.grad_rel:.3e}, "
         f"backend={sol.info.backend}")

    save_solution(os.path.join(out, "u.csv"), mesh, sol.values)
    save_mesh(mesh, os.path.join(out, "mesh.csv"))
    write_solve_json(os.path.join(out, "solve.json"), sol, spec.label())

    doc = solve_json_doc(sol, spec.label())
    doc["outputs"] = {"solution": os.path.join(out, "u.csv"),
                      "mesh": os.path.join(out, "mesh.csv"),
                      "solve": os.path.join(out, "solve.json")}
    if args.seed is not None:
        doc["seed"] = args.seed
    _emit(doc)
    return EXIT_OK


def cmd_oracle(args) -> int:
    p = _check_p(args.p)
    if args.n < 2:
        raise UsageError(f"--n must be an integer >= 2, got {args.n}")
    if args.kind == "ball":
        ball = RadialTorsion(p, args.n, args.r)
        doc = {
            "kind": "ball", "p": p, "n": args.n, "r": args.r,
            "u_center": ball.max_value,
            "grad_boundary": float(ball.gradient_mag_radial(args.r)),
            "p_function": ball.p_function_value(),
        }
    else:
        if not (0 < args.r1 < args.r2):
            raise UsageError(
                f"annulus radii must satisfy 0 < r1 < r2, got {args.r1}, {args.r2}")
        ann = AnnulusTorsion(p, args.n, args.r1, args.r2)
        doc = {
            "kind": "annulus", "p": p, "n": args.n,
            "r1": args.r1, "r2": args.r2,
            "rbar": ann.rbar,
            "u_max": ann.max_value,
            "grad_inner": float(abs(ann.slope_radial(args.r1))),
            "grad_outer": float(abs(ann.slope_radial(args.r2))),
        }
    if args.seed is not None:
        doc["seed"] = args.seed
    _emit(doc)
    return EXIT_OK


def cmd_deficit(args) -> int:
    if args.domain is None:
        raise UsageError("--domain is required")
    spec = _load_domain(args.domain)
    _check_p(args.p)
    delta = args.delta_crit if args.delta_crit is not None else DELTA_CRIT_DEFAULT
    if not delta > 0:
        raise UsageError(f"--delta-crit must be positive, got {delta}")

    if args.solution is not None:
        if args.mesh is None:
            raise UsageError("--solution needs --mesh for the matching mesh CSV")
        sol, curve = _solution_from_files(args.mesh, args.solution, spec,
                                          _solve_config(args))
        _err(f"loaded {args.solution} on {sol.mesh.n_vertices} vertices, "
             f"grad_rel={sol.info.grad_rel:.3e}")
    else:
        _check_h(args.h)
        curve = build_boundary(spec)
        mesh = triangulate(curve, args.h)
        sol = solve_torsion(mesh, _solve_config(args))
        _err(f"solve: grad_rel={sol.info.grad_rel:.3e}, "
             f"backend={sol.info.backend}")

    rep = analyze(sol, curve, delta_crit=delta, tol=args.tol_deficit)
    doc = rep.to_json_dict()
    if args.seed is not None:
        doc["seed"] = args.seed

    if args.out is not None:
        out = _ensure_out(args.out)
        path = os.path.join(out, "report.json")
        with open(path, "w") as f:
            json.dump(doc, f, indent=2)
            f.write("\n")
        _err(f"report written to {path}")
    _emit(doc)

    if rep.violations:
        _err("chain violations beyond tolerance:", "; ".join(rep.violations))
        return EXIT_CHAIN
    return EXIT_OK


def _parse_values(text: str) -> list:
    try:
        vals = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise UsageError(f"--values must be a comma-separated float list, got {text!r}")
    if not vals:
        raise UsageError("--values is empty")
    return vals


def _ellipse_fixed_area(e: float) -> DomainSpec:
    """Eccentricity-e ellipse of area 2*pi (the e=0 member is disk(sqrt 2))."""
    if not (0.0 <= e < 1.0):
        raise UsageError(f"eccentricity must lie in [0, 1), got {e}")
    w = math.sqrt(1.0 - e * e)
    return DomainSpec.ellipse(math.sqrt(2.0 / w), math.sqrt(2.0 * w))


def cmd_sweep(args) -> int:
    values = _parse_values(args.values)
    _check_h(args.h)
    out = _ensure_out(args.out or ".")
    delta = args.delta_crit if args.delta_crit is not None else DELTA_CRIT_DEFAULT

    if args.family == "eccentricity":
        _check_p(args.p)
        points = [(e, _ellipse_fixed_area(e), args.p, f"e{e:g}") for e in values]
        param_name = "eccentricity"
    else:
        if args.domain is None:
            raise UsageError("--domain is required for a p sweep")
        spec = _load_domain(args.domain)
        for v in values:
            if not (1.0 < v <= 2.0):
                raise UsageError(P_RANGE_MESSAGE + f", got {v} in --values")
        points = [(p, spec, p, f"p{p:g}") for p in values]
        param_name = "p"

    rows, failures = [], []
    for param, spec, p, tag in points:
        try:
            curve = build_boundary(spec)
            mesh = triangulate(curve, args.h)
            sol = solve_torsion(mesh, _solve_config(args, p))
            rep = analyze(sol, curve, delta_crit=delta, tol=args.tol_deficit)
        except (PTorsionError, OSError) as e:
            _err(f"{param_name}={param:g}: FAILED: {e}")
            failures.append({"param": param, "error": str(e)})
            continue
        doc = rep.to_json_dict()
        path = os.path.join(out, f"report_{tag}.json")
        with open(path, "w") as f:
            json.dump(doc, f, indent=2)
            f.write("\n")
        rows.append({"param": param, "I_p": rep.I_p,
                     "bound_iii": rep.bounds.bound_iii,
                     "H_L1_dev": rep.bounds.h_l1_dev,
                     "report": path, "status": rep.status})
        _err(f"{param_name}={param:g}: I_p={rep.I_p:.6g} "
             f"bound_iii={rep.bounds.bound_iii:.6g} "
             f"H_L1_dev={rep.bounds.h_l1_dev:.6g}")

    csv_path = os.path.join(out, "sweep.csv")
    with open(csv_path, "w") as f:
        f.write(f"{param_name},I_p,bound_iii,H_L1_dev\n")
        for r in rows:
            f.write(f"{r['param']:.17g},{r['I_p']:.17g},"
                    f"{r['bound_iii']:.17g},{r['H_L1_dev']:.17g}\n")

    monotone = {}
    for key in ("I_p", "bound_iii", "H_L1_dev"):
        seq = [r[key] for r in rows]
        monotone[key] = all(b >= a for a, b in zip(seq, seq[1:]))
    _err("monotone non-decreasing:",
         ", ".join(f"{k}={'yes' if v else 'NO'}" for k, v in monotone.items()))

    doc = {"family": args.family, "values": values, "rows": rows,
           "monotone": monotone, "failures": failures,
           "aggregate_csv": csv_path}
    if args.seed is not None:
        doc["seed"] = args.seed
    _emit(doc)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_report(args) -> int:
    try:
        with open(args.path) as f:
            doc = json.load(f)
    except OSError as e:
        raise UsageError(f"cannot read report {args.path!r}: {e.strerror}")
    except json.JSONDecodeError as e:
        raise UsageError(f"report {args.path!r} does not parse: {e}")

    for key, want in REPORT_SCHEMA.items():
        if key not in doc:
            raise UsageError(f"report is missing required field {key!r}")
        if not isinstance(doc[key], want):
            raise UsageError(f"report field {key!r} has the wrong type")
    for key in ("lhs", "rhs", "rel_gap"):
        if key not in doc["identity"]:
            raise UsageError(f"report identity block is missing {key!r}")

    dom = doc["domain"]
    _err(f"domain {json.dumps(dom, separators=(',', ':'))}  "
         f"p={doc['p']:g}  h={doc['h']:g}  status={doc['status']}")
    _err(f"  I_p            = {doc['I_p']:.6g}")
    _err(f"  excluded area  = {doc['excluded_area']:.6g}")
    ident = doc["identity"]
    _err(f"  identity       = lhs {ident['lhs']:.6g}, rhs {ident['rhs']:.6g}, "
         f"rel gap {ident['rel_gap']:.3%}")
    _err(f"  chain          = I_p {doc['I_p']:.6g} | bound_ii "
         f"{doc['bound_ii']:.6g} | bound_iii {doc['bound_iii']:.6g} | "
         f"stability {doc['stability_bound']:.6g}")
    _err(f"  H0={doc['H0']:.6g}  R0={doc['R0']:.6g}  "
         f"H_L1_dev={doc['H_L1_dev']:.6g}")
    g = doc["grad_bounds"]
    _err(f"  boundary |grad u| in [{g['min_observed']:.6g}, "
         f"{g['max_observed']:.6g}], bounds [{g['lower']:.6g}, {g['upper']:.6g}]")
    if isinstance(doc["sbt"], dict):
        devs = ", ".join(f"{k}={v:.4g}" for k, v in sorted(doc["sbt"].items()))
        _err(f"  sbt deviations: {devs}")
    else:
        _err("  sbt deviations: unsupported domain")
    _emit(doc)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument wiring


def _add_common(sp) -> None:
    sp.add_argument("--domain", help="domain spec: JSON file path or inline JSON")
    sp.add_argument("--p", type=float, help="exponent in (1, 2]")
    sp.add_argument("--h", type=float, help="target mesh spacing")
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--tol-deficit", type=float, default=None,
                    help="override the mesh-derived chain tolerance")
    sp.add_argument("--delta-crit", type=float, default=None,
                    help="gradient cutoff for the deficit critical set "
                         f"(default {DELTA_CRIT_DEFAULT:g})")
    sp.add_argument("--seed", type=int, default=None,
                    help="recorded in outputs; the pipeline is deterministic")
    sp.add_argument("--eps-min", type=float, default=None,
                    help="regularization floor override")
    sp.add_argument("--tol-grad", type=float, default=None,
                    help="relative residual target override")
    sp.add_argument("--max-newton", type=int, default=None,
                    help="Newton iteration cap per continuation stage")


def build_parser() -> _Parser:
    ap = _Parser(prog="ptorsion", description=__doc__,
                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="mesh a domain and solve the torsion problem")
    _add_common(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("oracle", help="closed-form ball/annulus reference values")
    sp.add_argument("kind", choices=["ball", "annulus"])
    sp.add_argument("--n", type=int, default=2, help="space dimension (default 2)")
    sp.add_argument("--r", type=float, default=1.0, help="ball radius")
    sp.add_argument("--r1", type=float, default=1.0, help="annulus inner radius")
    sp.add_argument("--r2", type=float, default=2.0, help="annulus outer radius")
    _add_common(sp)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("deficit", help="solve (or load) and run every diagnostic")
    sp.add_argument("--solution", help="existing solution CSV (needs --mesh)")
    sp.add_argument("--mesh", help="mesh CSV matching --solution")
    _add_common(sp)
    sp.set_defaults(func=cmd_deficit)

    sp = sub.add_parser("sweep", help="family sweep with per-point reports")
    sp.add_argument("--family", choices=["eccentricity", "p"], required=True)
    sp.add_argument("--values", required=True,
                    help="comma-separated grid, e.g. 0,0.2,0.4,0.6")
    _add_common(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("report", help="validate and pretty-print a report JSON")
    sp.add_argument("path", help="report JSON file")
    _add_common(sp)
    sp.set_defaults(func=cmd_report)

    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as e:
        _err(str(e))
        return EXIT_CONFIG
    except (InvalidDomainError, MeshFormatError) as e:
        _err(str(e))
        return EXIT_CONFIG
    except PTorsionError as e:
        _err(str(e))
        return EXIT_SOLVER
    except OSError as e:
        _err(str(e))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
