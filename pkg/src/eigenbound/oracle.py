"""Discrete variational oracle: minimise the weighted Rayleigh quotient

    R(phi) = sum_i w_{i+1/2} |(phi_{i+1} - phi_i)/h|^p h / sum_i tau_i w_i |phi_i|^p h

over nodal vectors with ``phi_0 = 0`` on a uniform mesh of ``[0, end]``
(``tau`` are the trapezoid factors).  Weights come straight from the
comparison functions, so nothing here shares code with the shooting path
beyond ``compfun``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from . import compfun
from .errors import DomainError, NoConvergence
from .model import Kind, validate


@dataclass(frozen=True)
class DiscreteProblem:
    n: int
    h: float
    p: float
    node_w: np.ndarray
    mid_w: np.ndarray

    def __post_init__(self):
        if self.n < 16:
            raise DomainError(f"need at least 16 cells, got {self.n}")
        if self.node_w.shape != (self.n + 1,) or self.mid_w.shape != (self.n,):
            raise DomainError("weight arrays do not match the mesh")
        if np.any(self.mid_w <= 0) or np.any(self.node_w < 0):
            raise DomainError("weights must be positive")

    @property
    def nodes(self):
        return self.h * np.arange(self.n + 1)

    @property
    def trapezoid(self):
        tau = np.ones(self.n + 1)
        tau[0] = tau[-1] = 0.5
        return tau


def _weight(problem, s):
    lam = problem.lam
    w = np.ones_like(s)
    for a, k in problem.profile.terms:
        if problem.kind is Kind.NEUMANN:
            c = compfun.c_kappa(k, s)
        else:
            c = compfun.c_kl(k, lam, s)
        # A factor may vanish on a singular end node; rounding must not flip it.
        w = w * np.maximum(c, 0.0) ** a
    return w


def discretize(problem, n):
    """Sample the weight at nodes and midpoints of an ``n``-cell mesh."""
    validate(problem)
    h = problem.end / n
    nodes = h * np.arange(n + 1)
    mids = h * (np.arange(n) + 0.5)
    return DiscreteProblem(n, h, problem.p, _weight(problem, nodes), _weight(problem, mids))


def rayleigh(dp, phi):
    phi = np.asarray(phi, dtype=float)
    num = np.sum(dp.mid_w * np.abs(np.diff(phi) / dp.h) ** dp.p) * dp.h
    den = np.sum(dp.trapezoid * dp.node_w * np.abs(phi) ** dp.p) * dp.h
    if den == 0:
        raise DomainError("Rayleigh quotient of a vector with zero weighted norm")
    return num / den


def _stiffness_banded(dp):
    """Upper banded form of the p=2 stiffness matrix on nodes 1..n."""
    w = dp.mid_w / dp.h
    diag = np.empty(dp.n)
    diag[:-1] = w[:-1] + w[1:]
    diag[-1] = w[-1]
    ab = np.zeros((2, dp.n))
    ab[0, 1:] = -w[1:]
    ab[1] = diag
    return ab


def _minimize_quadratic(dp, max_iters, tol=1e-12):
    factor = cholesky_banded(_stiffness_banded(dp))
    mass = (dp.trapezoid * dp.node_w * dp.h)[1:]
    x = (dp.h * np.arange(1, dp.n + 1)) * (dp.n * dp.h * 2 - dp.h * np.arange(1, dp.n + 1))
    lam_old = np.inf
    for it in range(1, max_iters + 1):
        x = cho_solve_banded((factor, False), mass * x)
        x /= np.sqrt(np.sum(mass * x * x))
        phi = np.concatenate([[0.0], x])
        lam = rayleigh(dp, phi)
        if abs(lam_old - lam) <= tol * lam:
            return lam, phi, it
        lam_old = lam
    raise NoConvergence("inverse iteration did not settle", iterations=max_iters, value=lam)


def _quotient_parts(dp, d):
    p, h = dp.p, dp.h
    phi = np.concatenate([[0.0], h * np.cumsum(d)])
    tw = dp.trapezoid * dp.node_w
    num = h * np.sum(dp.mid_w * np.abs(d) ** p)
    den = h * np.sum(tw * np.abs(phi) ** p)
    return num, den, phi


def _gradient(dp, d, num, den, phi):
    p, h = dp.p, dp.h
    tw = dp.trapezoid * dp.node_w
    gnum = p * h * dp.mid_w * np.abs(d) ** (p - 2) * d
    gphi = p * h * tw[1:] * np.abs(phi[1:]) ** (p - 2) * phi[1:]
    gden = h * np.cumsum(gphi[::-1])[::-1]
    return (gnum - (num / den) * gden) / den


def _minimize_descent(dp, d, max_iters, tol=1e-12):
    """Projected gradient descent on the quotient in the variables
    ``d_i = (phi_{i+1} - phi_i)/h``, scaled by the inverse diagonal of the
    numerator's Hessian, with Armijo backtracking and renormalisation."""
    p = dp.p
    num, den, phi = _quotient_parts(dp, d)
    d = d / den ** (1 / p)
    num, den, phi = _quotient_parts(dp, d)
    r = num / den
    for it in range(1, max_iters + 1):
        g = _gradient(dp, d, num, den, phi)
        floor = 1e-8 * np.max(np.abs(d))
        curv = p * (p - 1) * dp.h * dp.mid_w * np.maximum(np.abs(d), floor) ** (p - 2) / den
        direction = -g / curv
        slope = np.dot(g, direction)
        alpha = 1.0
        while True:
            trial = d + alpha * direction
            tn, td, tphi = _quotient_parts(dp, trial)
            if td > 0 and tn / td <= r + 1e-4 * alpha * slope:
                break
            alpha *= 0.5
            if alpha < 1e-12:
                return r, phi, it
        scale = td ** (-1 / p)
        d = trial * scale
        num, den, phi = tn * scale ** p, td * scale ** p, tphi * scale
        r_new = num / den
        if (r - r_new) <= tol * r:
            return r_new, phi, it
        r = r_new
    raise NoConvergence("descent did not settle", iterations=max_iters, value=r)


def minimize(dp, max_iters=20000):
    """Return ``(lambda, phi)`` minimising the discrete quotient.

    ``phi`` is nonnegative and normalised to unit weighted p-norm.
    """
    lam, phi, _ = _minimize_quadratic(dp, max_iters)
    if dp.p != 2.0:
        lam, phi, _ = _minimize_descent(dp, np.diff(phi) / dp.h, max_iters)
    if phi[np.argmax(np.abs(phi))] < 0:
        phi = -phi
    return lam, phi


@dataclass
class OracleResult:
    raw: float
    fine: float
    extrapolated: float
    n: int
    phi: np.ndarray

    @property
    def eigenvalue(self):
        return self.extrapolated


def solve(problem, n=8192, max_iters=20000):
    """Minimise on ``n`` and ``2n`` cells and Richardson-extrapolate (order 2)."""
    lam_n, phi = minimize(discretize(problem, n), max_iters)
    lam_2n, _ = minimize(discretize(problem, 2 * n), max_iters)
    return OracleResult(lam_n, lam_2n, (4 * lam_2n - lam_n) / 3, n, phi)
