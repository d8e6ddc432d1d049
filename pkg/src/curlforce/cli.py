"""Command-line front end: ``curlforce {verify,simulate,classify,build}``.

Exit status is 0 when every check passes, 1 for a failed check or a
computation error, and 2 for usage, config or expression-parse errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import config as cfg
from . import verify
from .errors import CurlForceError, DomainError, ParseError
from .hamiltonian import PhasePoint, energy, momentum_of_velocity
from .integrate import conservation_report, export_csv, integrate

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

ISOTROPIC_NOTE = (
    "isotropic force F = a x + b: every T is a multiple of the identity, a case the "
    "two-dimensional classification leaves out, since any such force is generated by "
    "an isotropic quadratic Hamiltonian"
)


class UsageError(Exception):
    pass


def _vector(text, name):
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise UsageError(f"--{name} expects comma-separated numbers, got {text!r}")


def _dump(data, out):
    text = json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return str(obj)


def _load(args):
    doc = cfg.load(args.config)
    name = doc.entry_name(args.entry)
    return doc, name


def _grid(doc, name, H, args):
    opts = doc.grid_for(name)
    per_axis = args.grid if args.grid is not None else int(opts["per_axis"])
    seed = args.seed if args.seed is not None else doc.seed
    return verify.SampleGrid.regular(H, per_axis=per_axis, p_range=tuple(opts["p_range"]),
                                     jitter=float(opts["jitter"]), seed=seed)


def _tolerances(doc, name, args):
    tols = doc.tolerances_for(name)
    if args.tol is not None:
        tols = {k: args.tol for k in verify.DEFAULT_TOLERANCES}
    return tols


def cmd_verify(args) -> int:
    doc, name = _load(args)
    H = doc.build(name)
    grid = _grid(doc, name, H, args)
    report = verify.run_all(H, grid, _tolerances(doc, name, args))
    groups = {}
    for check_name, res in report.checks.items():
        group = groups.setdefault(verify.group_of(check_name), {"pass": True, "checks": []})
        group["checks"].append(res.to_dict())
        group["pass"] = group["pass"] and res.passed
    data = {"entry": name, "config": doc.source, "pass": report.passed,
            "groups": {g: groups[g] for g in verify.GROUPS if g in groups}}
    _dump(data, args.out)
    for g in verify.GROUPS:
        if g in groups:
            print(f"{g}: {'pass' if groups[g]['pass'] else 'FAIL'}", file=sys.stderr)
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_simulate(args) -> int:
    doc, name = _load(args)
    H = doc.build(name)
    if args.x0 is None:
        raise UsageError("simulate needs --x0")
    x0 = _vector(args.x0, "x0")
    if x0.size != H.n:
        raise UsageError(f"--x0 needs {H.n} components")
    if args.p0 is not None and args.v0 is not None:
        raise UsageError("give either --v0 or --p0, not both")
    if not H.contains(x0):
        raise DomainError(f"start x = {x0} lies outside the domain")
    if args.p0 is not None:
        p0 = _vector(args.p0, "p0")
    else:
        v0 = _vector(args.v0, "v0") if args.v0 is not None else np.zeros(H.n)
        p0 = momentum_of_velocity(H, x0, v0)
    if p0.size != H.n:
        raise UsageError(f"initial momentum/velocity needs {H.n} components")
    tol = args.tol if args.tol is not None else 1e-10
    traj = integrate(H, PhasePoint(x0, p0), args.t_end, tol)
    if args.out:
        export_csv(traj, args.out)
    summary = {"entry": name, "termination": traj.termination, "samples": len(traj),
               "final_x": traj.states[-1].x, "final_p": traj.states[-1].p,
               **conservation_report(traj)}
    _dump(summary, None)
    return EXIT_PASS


def cmd_classify(args) -> int:
    doc, name = _load(args)
    H = doc.build(name)
    grid = _grid(doc, name, H, args)
    cls = verify.classify_T(H, grid.x_points)
    data = {"entry": name, "case": cls.case, "histogram": dict(sorted(cls.histogram.items()))}
    tol = args.tol if args.tol is not None else verify.DEFAULT_TOLERANCES["pseudo_metric"]
    if cls.case == 4:
        data["note"] = ISOTROPIC_NOTE
    report, metric = verify.check_pseudo_metric(H, grid, {"pseudo_metric": tol})
    F = verify.force_field(H)
    origin = grid.x_points.min(axis=0)
    result = report["pseudo_metric"]
    data.update(
        M=metric.M, c=metric.c, residual=result.max_residual, tolerance=tol, origin=origin,
        potential=[{"x": x, "U": verify.recover_potential(F, metric.c, origin, x)}
                   for x in grid.x_points[:: max(1, len(grid.x_points) // 5)]],
    )
    data["pass"] = result.passed
    _dump(data, args.out)
    if cls.case == 4:
        print(ISOTROPIC_NOTE, file=sys.stderr)
    return EXIT_PASS if result.passed else EXIT_FAIL


def cmd_build(args) -> int:
    doc, name = _load(args)
    H = doc.build(name)
    grid = verify.SampleGrid.regular(H, per_axis=3, p_range=(-1.0, 1.0))
    samples = []
    for x, p in grid.pairs():
        samples.append({"x": x, "p": p, "H": energy(H, (x, p))})
    tols = _tolerances(doc, name, args)
    report = verify.check_velocity_independence(H, grid, tols).merge(verify.check_regular(H, grid, tols))
    data = {"entry": name, "kind": doc.entries[name]["kind"], "label": H.label, "dimension": H.n,
            "domain": H.domain, "samples": samples, "verification": report.to_dict(),
            "pass": report.passed}
    if "g_term_force_diff" in H.meta:
        data["note"] = (f"force identical to the G = 0 build: max difference "
                        f"{H.meta['g_term_force_diff']:.3g}")
        data["g_term_force_diff"] = H.meta["g_term_force_diff"]
    _dump(data, args.out)
    return EXIT_PASS if report.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True,
                        help="config file, or a bundled name such as 'separable' or 'examples/separable'")
    common.add_argument("--entry", help="entry name within the config (default: the config's default)")
    common.add_argument("--tol", type=float, help="tolerance override")
    common.add_argument("--grid", type=int, help="grid points per axis")
    common.add_argument("--seed", type=int, help="seed for grid jitter")
    common.add_argument("--out", help="output file (default: standard output)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="curlforce", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="run every check on an entry")
    sim = sub.add_parser("simulate", parents=[common], help="integrate a trajectory")
    sim.add_argument("--x0", help="initial position, comma separated")
    sim.add_argument("--v0", help="initial velocity, comma separated (default 0)")
    sim.add_argument("--p0", help="initial momentum, comma separated")
    sim.add_argument("--t-end", type=float, default=2 * np.pi, dest="t_end")
    sub.add_parser("classify", parents=[common], help="eigen-case of T and the pseudo-metric")
    sub.add_parser("build", parents=[common], help="build a family entry and summarize it")
    return parser


COMMANDS = {"verify": cmd_verify, "simulate": cmd_simulate, "classify": cmd_classify, "build": cmd_build}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ParseError, cfg.ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CurlForceError, ArithmeticError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
