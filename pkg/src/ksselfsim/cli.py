"""Command-line front end.

Every command emits ``csv``, ``json`` or ``table``. JSON output is one object
with ``config``, ``result`` and ``diagnostics`` keys. Exit status: 0 on
success, 1 when a check fails (``verify``, ``crosscheck``), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import __version__, analysis, backend
from .bounds import I, check_all, j
from .cumulated import CumulatedParams, derive, mass_identity_residual, solve
from .integrator import IntegrationConfig
from .io import dumps_csv, dumps_json, dumps_table
from .wmodel import WParams, crosscheck, derive_w, solve_w

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class Outcome:
    result: object
    header: tuple
    rows: list
    diagnostics: dict = field(default_factory=dict)
    table: str = ""
    status: int = EXIT_OK


# argument types -------------------------------------------------------------


def _positive(text):
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not (x > 0 and math.isfinite(x)):
        raise argparse.ArgumentTypeError(f"must be positive and finite: {text!r}")
    return x


def _finite(text):
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not math.isfinite(x):
        raise argparse.ArgumentTypeError(f"must be finite: {text!r}")
    return x


def _count(text):
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1: {text!r}")
    return n


def _integration(args):
    return IntegrationConfig(abs_tol=args.abs_tol, rel_tol=args.rel_tol)


def _cumulated(args, a=1.0):
    return CumulatedParams(
        a=a, tau=args.tau, eps=args.eps, y_max=args.ymax, seed_order=args.seed_order,
        integration=_integration(args),
    )


def _wparams(args, s=0.0):
    return WParams(s=s, tau=args.tau, eps=args.eps_w, r_max=args.rmax, integration=_integration(args))


# commands -------------------------------------------------------------------


def cmd_solve(args):
    prm = _cumulated(args, args.a)
    prof = solve(prm)
    d = derive(prof)
    result = {
        "mass_over_2pi": d.mass_over_2pi,
        "sigma": d.sigma,
        "l": d.l,
        "v0": d.v0,
        "mass_from_S": d.mass_from_S,
        "params": prm.to_dict(),
    }
    diag = {
        "nodes": int(prof.grid.size),
        "mass": d.mass,
        "consistency": d.consistency,
        "mass_identity_residual": mass_identity_residual(prof, d),
        "mass_tail": d.mass_tail,
        "v0_tail": d.v0_tail,
    }
    table = dumps_table(("quantity", "value"), [(k, v) for k, v in result.items() if k != "params"])
    return Outcome(result, ("y", "phi", "dphi", "S"), list(prof.to_csv_rows()), diag, table)


def cmd_solve_w(args):
    prm = _wparams(args, args.s)
    prof = solve_w(prm)
    d = derive_w(prof)
    result = {k: getattr(d, k) for k in ("s", "tau", "w_inf", "sigma", "mass", "v0")}
    diag = {
        "nodes": int(prof.grid.size),
        "mass_over_2pi": d.mass_over_2pi,
        "mass_tail": d.mass_tail,
        "w_tail_bound": d.w_tail_bound,
        "params": prm.to_dict(),
    }
    table = dumps_table(("quantity", "value"), list(result.items()))
    return Outcome(result, ("r", "w", "dw", "M"), list(prof.to_csv_rows()), diag, table)


def cmd_sweep(args):
    grid = np.geomspace(args.a_min, args.a_max, args.n)
    curve = analysis.mass_curve(args.tau, grid, jobs=args.jobs, template=_cumulated(args))
    result = {
        "tau": curve.tau,
        "argmax_a": curve.argmax_a,
        "max_mass_over_2pi": curve.max_mass_over_2pi,
        "samples": [dict(zip(("a", "mass_over_2pi", "sigma", "v0"), r)) for r in curve.rows()],
    }
    diag = {
        "refined": curve.refined,
        "failures": [{"a": s.a, "error": s.error} for s in curve.failures],
        "envelope_violations": [s.a for s in curve.envelope_violations()],
    }
    header = ("a", "mass_over_2pi", "sigma", "v0")
    return Outcome(result, header, curve.rows(), diag, dumps_table(header, curve.rows()))


def cmd_mstar(args):
    rows, results = [], []
    for tau in args.tau:
        args_tau = argparse.Namespace(**{**vars(args), "tau": tau})
        r = analysis.m_star(
            tau, window=(args.a_min, args.a_max), samples=args.n, jobs=args.jobs,
            template=_cumulated(args_tau),
        )
        results.append(r.to_dict())
        rows.append((tau, r.mass_over_2pi, r.argmax_a, r.window_max, r.window_argmax, r.attained))
    header = ("tau", "m_star", "argmax_a", "window_max", "window_argmax", "attained")
    result = results[0] if len(results) == 1 else results
    return Outcome(result, header, rows, {}, dumps_table(header, rows))


def cmd_taustar(args):
    args.tau = 1.0  # placeholder, replaced per probe
    lo, hi, history = analysis.tau_star(
        args.lo, args.hi, args.width, tol=args.tol, jobs=args.jobs,
        template=_cumulated(args), window=(args.a_min, args.a_max), samples=args.n,
    )
    result = {"lo": lo, "hi": hi, "threshold": 4.0 + args.tol}
    diag = {"probes": [{"tau": t, "m_star": m} for t, m in history]}
    header = ("tau", "m_star")
    return Outcome(result, header, history, diag,
                   f"tau_star in ({lo:.12g}, {hi:.12g})\n" + dumps_table(header, history))


def cmd_multiplicity(args):
    r = analysis.multiplicity(args.tau, args.target, samples=args.n, jobs=args.jobs,
                              template=_cumulated(args))
    rows = list(zip(r.roots, r.residuals))
    result = {"tau": r.tau, "target_mass_over_2pi": r.target_mass_over_2pi, "roots": r.roots}
    diag = {"residuals": r.residuals, "m_star": r.m_star,
            "grid": {"a_lo": r.grid[0], "a_hi": r.grid[1], "samples": r.grid[2]}}
    header = ("a", "residual")
    return Outcome(result, header, rows, diag, dumps_table(header, rows))


def cmd_verify(args):
    prof = solve(_cumulated(args, args.a))
    d = derive(prof)
    rep = check_all(prof, d)
    rows = [
        (e.name, e.kind, e.applicable, e.enforced, e.passed, e.worst_slack, e.location)
        for e in rep.entries
    ]
    status = EXIT_OK if rep.passed else EXIT_FAILED
    diag = {
        "passed": rep.passed,
        "failures": [e.name for e in rep.failures()],
        "header": rep.header,
        "j_tau": j(args.tau),
        "I_tau": I(args.tau),
    }
    if status != EXIT_OK:
        for e in rep.failures():
            print(f"FAILED {e.name}: worst slack {e.worst_slack:.12g} at {e.location}", file=sys.stderr)
    header = ("name", "kind", "applicable", "enforced", "passed", "worst_slack", "location")
    return Outcome([e.to_dict() for e in rep.entries], header, rows, diag, rep.to_table() + "\n", status)


def cmd_crosscheck(args):
    rep = crosscheck(args.a, args.tau, _cumulated(args, args.a),
                     _wparams(args, math.log(2.0 * args.a)))
    rows = [(k, rep[k]) for k in ("rel_mass", "rel_sigma", "rel_v0")]
    status = EXIT_OK if rep["passed"] else EXIT_FAILED
    header = ("discrepancy", "relative")
    return Outcome(rep, header, rows, {"tolerance": rep["tolerance"]},
                   dumps_table(header, rows), status)


def cmd_dirac(args):
    rep = analysis.dirac_diagnostic(args.tau, sorted(args.a), jobs=args.jobs, template=_cumulated(args))
    header = ("a", "mass_over_2pi", "v0", "v0_lower", "identity_residual", "inner_fraction")
    rows = [tuple(getattr(r, k) for k in header) for r in rep.rows]
    result = {"tau": rep.tau, "rows": [dict(zip(header, r)) for r in rows]}
    return Outcome(result, header, rows, rep.summary(), dumps_table(header, rows))


def cmd_sdiagram(args):
    grid = np.linspace(args.s_min, args.s_max, args.n)
    out = analysis.s_diagram(args.tau, grid, jobs=args.jobs, template=_wparams(args))
    header = ("s", "log_sigma", "log_v0", "mass", "log1p_mass")
    rows = [tuple(getattr(r, k) for k in header) for r in out]
    diag = {"failures": [{"s": r.s, "error": r.error} for r in out if r.error]}
    return Outcome({"tau": args.tau, "rows": [dict(zip(header, r)) for r in rows]},
                   header, rows, diag, dumps_table(header, rows))


# parser ---------------------------------------------------------------------


def _add_numerics(p, cumulated=True, w=False):
    g = p.add_argument_group("numerics")
    if cumulated:
        g.add_argument("--eps", type=_positive, default=1e-6, help="seed offset (default 1e-6)")
        g.add_argument("--ymax", type=_positive, default=None,
                       help="truncation in y (default max(30, 120/min(1,tau)))")
        g.add_argument("--seed-order", type=int, choices=(1, 2), default=2)
    if w:
        g.add_argument("--eps-w", type=_positive, default=1e-8, help="radial seed offset (default 1e-8)")
        g.add_argument("--rmax", type=_positive, default=None,
                       help="truncation in r (default max(10, sqrt(120/min(1,tau))))")
    g.add_argument("--abs-tol", type=_positive, default=1e-10)
    g.add_argument("--rel-tol", type=_positive, default=1e-10)


def _add_window(p, n_default):
    p.add_argument("--a-min", type=_positive, default=analysis.MSTAR_WINDOW[0])
    p.add_argument("--a-max", type=_positive, default=analysis.MSTAR_WINDOW[1])
    p.add_argument("--n", type=_count, default=n_default, help="log-spaced samples")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "json", "table"), default=None)
    common.add_argument("--output", "-o", default=None, help="write to file instead of stdout")
    common.add_argument("--jobs", type=_count, default=1, help="parallel worker processes")
    common.add_argument("--backend", choices=("compiled", "python"), default=None)

    parser = argparse.ArgumentParser(prog="ksselfsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("solve", parents=[common], help="profile in the (a, tau) form")
    p.add_argument("--a", type=_positive, required=True)
    p.add_argument("--tau", type=_positive, required=True)
    _add_numerics(p)
    p.set_defaults(func=cmd_solve, default_format="json")

    p = sub.add_parser("solve-w", parents=[common], help="profile in the (s, tau) form")
    p.add_argument("--s", type=_finite, required=True)
    p.add_argument("--tau", type=_positive, required=True)
    _add_numerics(p, cumulated=False, w=True)
    p.set_defaults(func=cmd_solve_w, default_format="json")

    p = sub.add_parser("sweep", parents=[common], help="mass curve a -> M(a,tau)/2pi")
    p.add_argument("--tau", type=_positive, required=True)
    _add_window(p, 200)
    _add_numerics(p)
    p.set_defaults(func=cmd_sweep, default_format="csv")

    p = sub.add_parser("mstar", parents=[common], help="maximal mass over a, per tau")
    p.add_argument("--tau", type=_positive, nargs="+", required=True)
    _add_window(p, analysis.MSTAR_SAMPLES)
    _add_numerics(p)
    p.set_defaults(func=cmd_mstar, default_format="json")

    p = sub.add_parser("taustar", parents=[common], help="bracket the critical tau")
    p.add_argument("--lo", type=_positive, required=True)
    p.add_argument("--hi", type=_positive, required=True)
    p.add_argument("--width", type=_positive, default=0.02)
    p.add_argument("--tol", type=_positive, default=analysis.TAU_STAR_TOL)
    _add_window(p, analysis.MSTAR_SAMPLES)
    _add_numerics(p)
    p.set_defaults(func=cmd_taustar, default_format="json")

    p = sub.add_parser("multiplicity", parents=[common], help="all a with M(a,tau)/2pi = target")
    p.add_argument("--tau", type=_positive, required=True)
    p.add_argument("--target", type=_positive, required=True, help="target M/2pi")
    p.add_argument("--n", type=_count, default=analysis.MULTIPLICITY_SAMPLES)
    _add_numerics(p)
    p.set_defaults(func=cmd_multiplicity, default_format="json")

    p = sub.add_parser("verify", parents=[common], help="check every a-priori bound")
    p.add_argument("--a", type=_positive, required=True)
    p.add_argument("--tau", type=_positive, required=True)
    _add_numerics(p)
    p.set_defaults(func=cmd_verify, default_format="table")

    p = sub.add_parser("crosscheck", parents=[common], help="compare both formulations")
    p.add_argument("--a", type=_positive, required=True)
    p.add_argument("--tau", type=_positive, required=True)
    _add_numerics(p, w=True)
    p.set_defaults(func=cmd_crosscheck, default_format="json")

    p = sub.add_parser("dirac", parents=[common], help="large-a concentration diagnostics")
    p.add_argument("--tau", type=_positive, required=True)
    p.add_argument("--a", type=_positive, nargs="+", default=[10.0, 100.0, 1e3, 1e4])
    _add_numerics(p)
    p.set_defaults(func=cmd_dirac, default_format="json")

    p = sub.add_parser("sdiagram", parents=[common], help="s -> (log sigma, log v0, M) table")
    p.add_argument("--tau", type=_positive, required=True)
    p.add_argument("--s-min", type=_finite, default=analysis.S_GRID_DEFAULT[0])
    p.add_argument("--s-max", type=_finite, default=analysis.S_GRID_DEFAULT[1])
    p.add_argument("--n", type=_count, default=301)
    _add_numerics(p, cumulated=False, w=True)
    p.set_defaults(func=cmd_sdiagram, default_format="csv")
    return parser


def _validate(args):
    """Build every parameter object once so bad values fail before solving."""
    cmd = args.command
    if cmd in ("solve", "verify", "crosscheck"):
        _cumulated(args, args.a)
    if cmd in ("sweep", "multiplicity", "dirac"):
        _cumulated(args)
    if cmd == "mstar":
        for tau in args.tau:
            _cumulated(argparse.Namespace(**{**vars(args), "tau": tau}))
    if cmd in ("solve-w", "sdiagram", "crosscheck"):
        _wparams(args)
    if cmd in ("sweep", "mstar", "taustar") and not args.a_min < args.a_max:
        raise UsageError("--a-min must be smaller than --a-max")
    if cmd == "sweep" and args.n < 3:
        raise UsageError("--n must be at least 3")
    if cmd == "taustar" and not args.lo < args.hi:
        raise UsageError("--lo must be smaller than --hi")
    if cmd == "sdiagram" and not args.s_min < args.s_max:
        raise UsageError("--s-min must be smaller than --s-max")
    if args.output is not None:
        parent = os.path.dirname(os.path.abspath(args.output))
        if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
            raise UsageError(f"cannot write to {args.output}")


def _output_format(args):
    if args.format:
        return args.format
    if args.output:
        ext = os.path.splitext(args.output)[1].lower().lstrip(".")
        if ext in ("csv", "json"):
            return ext
    return args.default_format


def _render(args, outcome):
    fmt = _output_format(args)
    if fmt == "csv":
        return dumps_csv(outcome.header, outcome.rows)
    if fmt == "table":
        return outcome.table
    config = {k: v for k, v in vars(args).items() if k not in ("func", "default_format")}
    config["format"] = fmt
    config["backend"] = backend.active_backend()
    config["version"] = __version__
    return dumps_json({"config": config, "result": outcome.result, "diagnostics": outcome.diagnostics})


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        _validate(args)
    except (ValueError, UsageError) as exc:
        print(f"ksselfsim {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.backend:
        backend.set_backend(args.backend)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            outcome = args.func(args)
    except ValueError as exc:
        # operation preconditions, e.g. no transition inside a tau bracket
        print(f"ksselfsim {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = _render(args, outcome)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return outcome.status


if __name__ == "__main__":
    sys.exit(main())
