"""Command-line interface: ``eigenbound bound|sweep|verify|flow``.

Single bounds and verification reports are JSON on stdout, sweeps are CSV.
Every float is written with 17 significant digits so values round-trip.
Exit codes: 0 success, 1 failed verification, 2 invalid input or domain,
3 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import flow, model, oracle, shoot, verify
from .errors import DomainError, SolverError, ValidationError

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2, 3
CERT_POINTS = 129
SWEEP_HEADER = ("theorem", "m", "p", "kappa", "lambda", "length", "method",
                "eigenvalue", "residual", "error")
THEOREMS = ("neumann", "dirichlet", "classical")


class RequestError(ValueError):
    """Inconsistent command-line request."""


def fmt(x):
    return format(float(x), ".17g")


def dumps(obj, indent=2, _level=0):
    """JSON with floats at 17 significant digits and non-finite floats as null."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in seq) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    return json.dumps(str(obj))


def build_problem(theorem, p, length, m=None, kappa=0.0, lam=None, profile=None):
    """Model problem for one request.

    ``m`` is the quaternionic dimension for ``neumann``/``dirichlet`` and the
    real dimension for ``classical``.  ``profile`` (``"a:k,..."``) replaces the
    named constructor.
    """
    if theorem not in THEOREMS:
        raise RequestError(f"unknown theorem {theorem!r}")
    if lam is not None and theorem != "dirichlet":
        raise RequestError("--lambda applies to the dirichlet bound only")
    boundary = (0.0 if lam is None else lam) if theorem == "dirichlet" else None
    if profile is not None:
        prof = model.parse_profile(profile, boundary)
    elif m is None:
        raise RequestError("--n is required" if theorem == "classical" else "--m is required")
    elif theorem == "classical":
        prof = model.riemannian_profile(int(m), kappa, boundary)
    else:
        prof = model.quaternionic_profile(int(m), kappa, boundary)
    if theorem == "dirichlet":
        return model.dirichlet_problem(prof, p, length)
    return model.neumann_problem(prof, p, length)


def closed_form_value(problem):
    """Zero-drift closed form, or None when the drift does not vanish."""
    if any(k != 0 for _, k in problem.profile.terms) or problem.lam != 0:
        return None
    if problem.kind is model.Kind.DIRICHLET:
        return verify.closed_form(problem.p, 2 * problem.length)
    return verify.closed_form(problem.p, problem.length)


def _oracle_certificate(problem, res, s):
    nodes = np.linspace(0.0, problem.end, res.phi.size)
    return np.interp(s, nodes, res.phi)


def compute_bound(problem, method="shoot", rel_tol=shoot.DEFAULT_REL_TOL, cells=8192):
    """Run the requested method(s); return the report body without the request."""
    model.validate(problem)
    sing = model.singular_end(problem)
    eigenvalues = {"shoot": None, "oracle": None}
    s = np.linspace(0.0, problem.end, CERT_POINTS)
    res = ores = None
    if method in ("shoot", "both"):
        res = shoot.solve(problem, rel_tol)
        eigenvalues["shoot"] = res.eigenvalue
    if method in ("oracle", "both"):
        ores = oracle.solve(problem, cells)
        eigenvalues["oracle"] = ores.extrapolated
    if res is not None:
        value = res.eigenvalue
        phi, _ = res.trajectory(s)
    else:
        value = ores.extrapolated
        phi = _oracle_certificate(problem, ores, s)
    disagreement = None
    if res is not None and ores is not None:
        disagreement = abs(ores.extrapolated - res.eigenvalue) / res.eigenvalue
    return {
        "method": method,
        "eigenvalue": value,
        "eigenvalues": eigenvalues,
        "disagreement": disagreement,
        "closed_form": closed_form_value(problem),
        "residual": None if res is None else res.residual,
        "iterations": None if res is None else res.iterations,
        "bracket": None if res is None else list(res.bracket),
        "oracle_cells": None if ores is None else cells,
        "validation": {"ok": True, "singular_end": None if sing is None else sing[0]},
        "certificate": {"s": s, "phi": phi},
    }


def _request(args):
    return {
        "theorem": args.theorem,
        "m": args.m if args.theorem != "classical" else None,
        "n": args.m if args.theorem == "classical" else None,
        "p": args.p,
        "kappa": args.kappa,
        "lambda": args.lam,
        "diameter": args.length if args.theorem != "dirichlet" else None,
        "inradius": args.length if args.theorem == "dirichlet" else None,
        "profile": args.profile,
        "rel_tol": args.rel_tol,
        "method": args.method,
    }


def _problem_from_args(args):
    if args.length is None:
        which = "--inradius" if args.theorem == "dirichlet" else "--diameter"
        raise RequestError(f"{which} is required")
    return build_problem(args.theorem, args.p, args.length, args.m, args.kappa, args.lam,
                         args.profile)


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_bound(args):
    problem = _problem_from_args(args)
    report = {"request": _request(args)}
    report.update(compute_bound(problem, args.method, args.rel_tol, args.cells))
    _emit(dumps(report) + "\n", args.out)
    return EXIT_OK


def _parse_values(key, text):
    if key in ("theorem", "method"):
        return [v.strip() for v in text.split(",")]
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise RequestError(f"range for {key!r} must be start:stop:count")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise RequestError(f"range for {key!r} needs a positive count")
        values = list(np.linspace(start, stop, count))
    else:
        values = [float(v) for v in text.split(",")]
    if key in ("m", "n"):
        if any(v != int(v) for v in values):
            raise RequestError(f"{key} takes integers")
        return [int(v) for v in values]
    return [float(v) for v in values]


GRID_KEYS = {"theorem": "theorem", "method": "method", "m": "m", "n": "m", "p": "p",
             "kappa": "kappa", "lambda": "lambda", "D": "length", "R": "length",
             "diameter": "length", "inradius": "length", "length": "length"}


def parse_grid(text):
    """``"m=2,3;p=1.5,2;D=1:2:3"`` -> ordered list of ``(field, values)``."""
    axes = []
    seen = set()
    for chunk in filter(None, (c.strip() for c in text.split(";"))):
        key, sep, values = chunk.partition("=")
        key = key.strip()
        if not sep or key not in GRID_KEYS:
            raise RequestError(f"bad grid entry {chunk!r}")
        name = GRID_KEYS[key]
        if name in seen:
            raise RequestError(f"grid sets {name!r} twice")
        seen.add(name)
        axes.append((name, _parse_values(key, values)))
    if "p" not in seen or "length" not in seen:
        raise RequestError("grid needs p and a length (D or R)")
    return axes


def grid_points(axes, defaults):
    names = [n for n, _ in axes]
    for combo in itertools.product(*(v for _, v in axes)):
        point = dict(defaults)
        point.update(zip(names, combo))
        yield point


def sweep_row(point):
    """Evaluate one grid point; failures become a row with an error column."""
    row = {"theorem": point["theorem"], "m": point.get("m", ""), "p": fmt(point["p"]),
           "kappa": fmt(point["kappa"]),
           "lambda": fmt(point["lambda"]) if point.get("lambda") is not None else "",
           "length": fmt(point["length"]), "method": point["method"],
           "eigenvalue": "", "residual": "", "error": ""}
    try:
        problem = build_problem(point["theorem"], point["p"], point["length"], point.get("m"),
                                point["kappa"], point.get("lambda"), point.get("profile"))
        model.validate(problem)
        if point["method"] == "oracle":
            row["eigenvalue"] = fmt(oracle.solve(problem, point["cells"]).extrapolated)
        elif point["method"] == "shoot":
            res = shoot.solve(problem, point["rel_tol"])
            row["eigenvalue"] = fmt(res.eigenvalue)
            row["residual"] = fmt(res.residual)
        else:
            raise RequestError(f"sweep method must be shoot or oracle, got {point['method']!r}")
    except (ValidationError, DomainError, RequestError, SolverError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def sweep_workers(n_points):
    env = os.environ.get("EIGENBOUND_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            raise RequestError(f"EIGENBOUND_THREADS must be an integer, got {env!r}")
    return max(1, min(cap, n_points))


def run_sweep(points):
    workers = sweep_workers(len(points))
    if workers == 1:
        return [sweep_row(pt) for pt in points]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map() yields in submission order, which is the grid order.
        return list(pool.map(sweep_row, points))


def rows_to_csv(rows):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_HEADER, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def cmd_sweep(args):
    axes = parse_grid(args.grid)
    defaults = {"theorem": args.theorem, "kappa": args.kappa, "lambda": args.lam,
                "m": args.m, "method": args.method, "rel_tol": args.rel_tol,
                "cells": args.cells, "profile": args.profile}
    points = list(grid_points(axes, defaults))
    for pt in points:
        if pt["theorem"] == "dirichlet" and pt.get("lambda") is None:
            pt["lambda"] = 0.0
    rows = run_sweep(points)
    _emit(rows_to_csv(rows), args.out)
    if rows and all(r["error"] for r in rows):
        return EXIT_INVALID if all(r["error"].startswith("ValidationError") for r in rows) \
            else EXIT_SOLVER
    return EXIT_OK


def _parse_ids(text):
    if text is None:
        return None
    ids = sorted({int(x) for x in text.split(",") if x.strip()})
    bad = [i for i in ids if i not in verify.CHECKS]
    if bad:
        raise RequestError(f"unknown criteria {bad}; choose from {sorted(verify.CHECKS)}")
    return ids


def cmd_verify(args):
    report, timings, _ = verify.run(_parse_ids(args.criteria))
    report["timing"] = {"seconds": timings}
    _emit(dumps(report) + "\n", args.out)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_flow(args):
    problem = _problem_from_args(args)
    model.validate(problem)
    res = shoot.solve(problem, args.rel_tol)
    expected = res.eigenvalue ** (1 / (problem.p - 1))
    if args.initial == "eigen":
        state = flow.eigen_state(problem, args.cells, res)
    else:
        mesh = np.linspace(0.0, problem.end, args.cells + 1)
        state = flow.FlowState(mesh, np.sin(0.5 * math.pi * mesh / problem.end))
    T = args.time if args.time is not None else 4.0 / expected
    dt = args.dt if args.dt is not None else flow.stable_dt(problem, state)
    times, norms, _ = flow.evolve(problem, state, T, dt)
    rate = flow.fit_rate(times, norms, 0.5 * T)
    report = {
        "request": _request(args),
        "initial": args.initial,
        "cells": args.cells,
        "dt": dt,
        "time": T,
        "eigenvalue": res.eigenvalue,
        "expected_rate": expected,
        "rate": rate,
        "relative_error": abs(rate - expected) / expected,
        "decay": {"t": times, "max_norm": norms},
    }
    _emit(dumps(report) + "\n", args.out)
    return EXIT_OK


def _add_problem_args(sp, with_theorem=True):
    if with_theorem:
        sp.add_argument("theorem", choices=THEOREMS)
    sp.add_argument("--m", "--n", dest="m", type=int,
                    help="quaternionic dimension (neumann/dirichlet) or dimension (classical)")
    sp.add_argument("--p", type=float, required=with_theorem)
    sp.add_argument("--kappa", type=float, default=0.0)
    sp.add_argument("--lambda", dest="lam", type=float, default=None)
    sp.add_argument("--diameter", "--inradius", "-L", dest="length", type=float)
    sp.add_argument("--profile", nargs=2, metavar=("custom", "TERMS"),
                    help="custom multiplicity:curvature terms, e.g. --profile custom 4:1,3:4")
    sp.add_argument("--rel-tol", type=float, default=shoot.DEFAULT_REL_TOL)
    sp.add_argument("--cells", type=int, default=8192, help="oracle mesh cells")
    sp.add_argument("--out", help="write to this file instead of stdout")


def build_parser():
    parser = argparse.ArgumentParser(prog="eigenbound", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("bound", help="compute one model eigenvalue")
    _add_problem_args(sp)
    sp.add_argument("--method", choices=("shoot", "oracle", "both"), default="shoot")
    sp.set_defaults(func=cmd_bound)

    sp = sub.add_parser("sweep", help="evaluate a parameter grid to CSV")
    sp.add_argument("grid", help='e.g. "m=2,3;p=1.5,2;kappa=0;D=1:2:3"')
    sp.add_argument("--theorem", choices=THEOREMS, default="neumann")
    _add_problem_args(sp, with_theorem=False)
    sp.add_argument("--method", choices=("shoot", "oracle"), default="shoot")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("verify", help="run the acceptance checks")
    sp.add_argument("--criteria", help="comma-separated subset, e.g. 1,3,9")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("flow", help="decay rate of the model heat flow")
    _add_problem_args(sp)
    sp.add_argument("--method", default="shoot", help=argparse.SUPPRESS)
    sp.add_argument("--initial", choices=("eigen", "sine"), default="eigen")
    sp.add_argument("--time", type=float)
    sp.add_argument("--dt", type=float)
    sp.set_defaults(func=cmd_flow)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "profile", None) is not None:
        kind, terms = args.profile
        if kind != "custom":
            print(f"eigenbound: --profile expects 'custom', got {kind!r}", file=sys.stderr)
            return EXIT_INVALID
        args.profile = terms
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"eigenbound: validation error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (DomainError, RequestError) as exc:
        print(f"eigenbound: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolverError as exc:
        print(f"eigenbound: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
