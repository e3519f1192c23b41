"""Acceptance checks, shared by ``eigenbound verify`` and the test-suite.

Every check returns a :class:`Check`; wall-clock seconds are kept apart
from the verdict so that two runs produce the same report apart from the
``seconds`` fields.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import compfun, flow, model, oracle, shoot
from .errors import ValidationError
from .model import (dirichlet_problem, neumann_problem, quaternionic_profile,
                    riemannian_profile)


@dataclass
class Check:
    id: int
    name: str
    passed: bool
    metric: float
    tolerance: float
    details: dict = field(default_factory=dict)
    seconds: float = 0.0
    time_limit: float | None = None

    def report(self):
        return {"id": self.id, "name": self.name, "passed": bool(self.passed),
                "metric": float(self.metric), "tolerance": self.tolerance,
                "time_limit": self.time_limit, "details": self.details}


def closed_form(p, length):
    """Zero-drift eigenvalue ``(p-1)(pi_p/length)^p`` (length ``D`` or ``2R``)."""
    return (p - 1) * (compfun.pi_p(p) / length) ** p


def _rel(a, b):
    return abs(a - b) / abs(b)


def matrix_problems(ps=(1.5, 2.0, 3.0)):
    """Quaternionic cross-validation matrix: Neumann ``D=1`` and Dirichlet ``R=0.8``."""
    out = []
    for m in (2, 3):
        for kappa in (-1.0, 0.2):
            for p in ps:
                out.append(neumann_problem(quaternionic_profile(m, kappa), p, 1.0))
                for lam in (-0.5, 0.0, 0.5):
                    out.append(dirichlet_problem(quaternionic_profile(m, kappa, lam), p, 0.8))
    return out


def describe(problem):
    return {"kind": problem.kind.value, "terms": [list(t) for t in problem.profile.terms],
            "lambda": problem.lam, "p": problem.p, "length": problem.length}


def check_neumann_closed_form():
    worst = 0.0
    for p in (1.2, 1.5, 2.0):
        for D in (1.0, math.pi, 5.0):
            for m in (2, 5):
                mu = shoot.solve(neumann_problem(quaternionic_profile(m, 0.0), p, D)).eigenvalue
                worst = max(worst, _rel(mu, closed_form(p, D)))
    return Check(1, "neumann closed form, zero curvature", worst <= 1e-6, worst, 1e-6,
                 {"cases": 18}, time_limit=5.0)


def check_dirichlet_closed_form(n=8192):
    worst_shoot = worst_oracle = 0.0
    for p in (1.5, 2.0, 3.0, 4.0):
        for R in (0.5, 1.0, 2.0):
            problem = dirichlet_problem(quaternionic_profile(2, 0.0, 0.0), p, R)
            exact = closed_form(p, 2 * R)
            worst_shoot = max(worst_shoot, _rel(shoot.solve(problem).eigenvalue, exact))
            worst_oracle = max(worst_oracle, _rel(oracle.solve(problem, n).extrapolated, exact))
    passed = worst_shoot <= 1e-6 and worst_oracle <= 1e-3
    return Check(2, "dirichlet closed form, zero curvature and boundary term", passed,
                 worst_shoot, 1e-6, {"oracle_rel_error": worst_oracle, "oracle_tolerance": 1e-3,
                                     "cells": n})


def check_classical_sphere():
    worst_mu = worst_cert = 0.0
    for m in (2, 3, 5):
        res = shoot.solve(neumann_problem(riemannian_profile(m, 1.0), 2.0, math.pi))
        worst_mu = max(worst_mu, _rel(res.eigenvalue, m))
        worst_cert = max(worst_cert, float(np.max(np.abs(res.phi - np.sin(res.s)))))
    passed = worst_mu <= 1e-6 and worst_cert <= 1e-5
    return Check(3, "classical round-sphere case", passed, worst_mu, 1e-6,
                 {"certificate_sup_error": worst_cert, "certificate_tolerance": 1e-5})


def check_cross_validation(n=8192):
    worst = 0.0
    worst_case = None
    for problem in matrix_problems():
        mu = shoot.solve(problem).eigenvalue
        lam, _ = oracle.minimize(oracle.discretize(problem, n))
        err = _rel(lam, mu)
        if err >= worst:
            worst, worst_case = err, describe(problem)
    return Check(4, "shoot vs oracle on the quaternionic matrix", worst <= 1e-3, worst, 1e-3,
                 {"cases": len(matrix_problems()), "cells": n, "worst_case": worst_case},
                 time_limit=60.0)


def check_reduction(rel_tol=1e-10):
    worst = 0.0
    cases = [pr for pr in matrix_problems((1.5, 2.0)) if pr.kind is model.Kind.NEUMANN]
    for problem in cases:
        half = shoot.solve(problem, rel_tol).eigenvalue
        full = shoot.solve_neumann_full(problem, rel_tol).eigenvalue
        worst = max(worst, _rel(full, half))
    return Check(5, "full interval vs odd reduction", worst <= 1e-8, worst, 1e-8,
                 {"cases": len(cases)})


FLOW_CASES = ((2.0, 0.0, 64), (1.5, 0.0, 32), (2.0, -1.0, 64))


def flow_case(p, kappa, cells):
    problem = neumann_problem(quaternionic_profile(2, kappa), p, 1.0)
    res = shoot.solve(problem)
    target = res.eigenvalue ** (1 / (p - 1))
    rate = flow.decay_rate(problem, flow.eigen_state(problem, cells, res), 4.0 / target)
    return rate, target


def check_flow():
    worst = 0.0
    slowest = 0.0
    rows = []
    for p, kappa, cells in FLOW_CASES:
        t0 = time.perf_counter()
        rate, target = flow_case(p, kappa, cells)
        slowest = max(slowest, time.perf_counter() - t0)
        err = _rel(rate, target)
        worst = max(worst, err)
        rows.append({"p": p, "kappa": kappa, "cells": cells, "rate": rate, "expected": target})
    chk = Check(6, "flow decay rate", worst <= 1e-2, worst, 1e-2, {"cases": rows},
                time_limit=30.0)
    chk.details["slowest_case_within_limit"] = slowest < 30.0
    return chk, slowest


def _fd(f, t, h=1e-5):
    return (f(t + h) - f(t - h)) / (2 * h)


def riccati_residuals(samples=1000, seed=20240611):
    """Worst relative Riccati residuals of ``T_k`` and ``T_{k,L}`` over random samples."""
    rng = np.random.default_rng(seed)
    worst_t = worst_tl = 0.0
    for _ in range(samples):
        kappa = rng.uniform(-4.0, 4.0)
        lam = rng.uniform(-2.0, 2.0)
        pole = compfun.first_zero(kappa)
        t = rng.uniform(-1.0, 1.0) * 0.9 * min(pole, 3.0)
        rhs = kappa + compfun.t_kappa(kappa, t) ** 2
        fd = _fd(lambda s: compfun.t_kappa(kappa, s), t)
        worst_t = max(worst_t, abs(fd - rhs) / max(1.0, abs(rhs)))
        zero = compfun.first_zero(kappa, lam)
        s = 1e-5 + rng.uniform(0.0, 1.0) * 0.9 * min(zero, 3.0)
        rhs = kappa + compfun.t_kl(kappa, lam, s) ** 2
        fd = _fd(lambda x: compfun.t_kl(kappa, lam, x), s)
        worst_tl = max(worst_tl, abs(fd - rhs) / max(1.0, abs(rhs)))
    return worst_t, worst_tl


SIN_P_EXPONENTS = (1.2, 1.5, 2.0, 3.0, 4.0)


def check_special_functions():
    worst_t, worst_tl = riccati_residuals()
    drift = max(compfun.sin_p_drift(p) for p in SIN_P_EXPONENTS)
    quarter = max(abs(compfun.sin_p_quarter(p) - compfun.pi_p(p) / 2) for p in SIN_P_EXPONENTS)
    passed = max(worst_t, worst_tl) <= 1e-6 and drift <= 1e-8 and quarter <= 1e-7
    return Check(7, "special-function invariants", passed, max(worst_t, worst_tl), 1e-6,
                 {"riccati_t_kappa": worst_t, "riccati_t_kl": worst_tl,
                  "pythagorean_drift": drift, "drift_tolerance": 1e-8,
                  "quarter_error": quarter, "quarter_tolerance": 1e-7})


def monotone_sweeps():
    """Four 20-point sweeps: two profiles, in ``D`` and in ``R``."""
    sweeps = []
    for profile, p in ((quaternionic_profile(2, -1.0), 1.5), (quaternionic_profile(3, 0.2), 3.0)):
        lengths = np.linspace(0.4, 2.0, 20)
        sweeps.append(("neumann", [neumann_problem(profile, p, D) for D in lengths]))
        lengths = np.linspace(0.2, 1.0, 20)
        sweeps.append(("dirichlet", [dirichlet_problem(profile, p, R) for R in lengths]))
    return sweeps


def duality_residual(problem, points=100, h=1e-5):
    """Worst ``|d/ds log w + drift|`` relative to ``max(1, |drift|)``."""
    end = model.working_end(problem)
    worst = 0.0
    for s in np.linspace(0.0, end, points + 2)[1:-1]:
        s = float(s)
        step = min(h, 0.5 * (end - s), 0.5 * s)
        dlog = (math.log(model.weight(problem, s + step))
                - math.log(model.weight(problem, s - step))) / (2 * step)
        d = model.drift(problem, s)
        worst = max(worst, abs(dlog + d) / max(1.0, abs(d)))
    return worst


def check_monotonicity():
    strict = True
    duality = 0.0
    problems = matrix_problems()
    for _, sweep in monotone_sweeps():
        values = [shoot.solve(pr).eigenvalue for pr in sweep]
        strict = strict and bool(np.all(np.diff(values) < 0))
        problems.extend(sweep)
    for pr in problems:
        duality = max(duality, duality_residual(pr))
    return Check(8, "monotonicity and drift/weight duality", strict and duality <= 1e-6,
                 duality, 1e-6, {"strictly_decreasing": strict, "sweeps": 4,
                                 "duality_problems": len(problems)})


def check_validation():
    ok = True
    notes = {}
    try:
        model.validate(neumann_problem(quaternionic_profile(2, 1.0), 2.0, math.pi))
        ok = False
        notes["neumann"] = "accepted"
    except ValidationError as exc:
        good = "c_{4κ}" in str(exc) and abs(exc.location - math.pi / 4) < 1e-12
        ok = ok and good
        notes["neumann"] = str(exc)
    try:
        model.validate(dirichlet_problem(quaternionic_profile(2, 0.0, 1.0), 2.0, 2.0))
        ok = False
        notes["dirichlet"] = "accepted"
    except ValidationError as exc:
        good = abs(exc.location - 1.0) < 1e-12 and "s=1.0" in str(exc)
        ok = ok and good
        notes["dirichlet"] = str(exc)
    return Check(9, "validation of singular domains", ok, 0.0 if ok else 1.0, 0.0, notes)


CHECKS = {
    1: check_neumann_closed_form,
    2: check_dirichlet_closed_form,
    3: check_classical_sphere,
    4: check_cross_validation,
    5: check_reduction,
    6: check_flow,
    7: check_special_functions,
    8: check_monotonicity,
    9: check_validation,
}


def run(ids=None):
    """Run the selected checks; return ``(report, timings, checks)``."""
    ids = sorted(CHECKS) if ids is None else sorted(set(ids))
    results = []
    timings = {}
    for i in ids:
        t0 = time.perf_counter()
        out = CHECKS[i]()
        elapsed = time.perf_counter() - t0
        if isinstance(out, tuple):
            chk, limited = out
        else:
            chk, limited = out, elapsed
        if chk.time_limit is not None and "slowest_case_within_limit" not in chk.details:
            chk.details["within_time_limit"] = limited < chk.time_limit
        if chk.time_limit is not None and not limited < chk.time_limit:
            chk.passed = False
        chk.seconds = elapsed
        timings[str(i)] = elapsed
        results.append(chk)
    report = {"passed": all(c.passed for c in results),
              "criteria": [c.report() for c in results]}
    return report, timings, results
