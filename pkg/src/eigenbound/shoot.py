"""Shooting solver for the first eigenvalue of the weighted 1-D p-Laplacian.

The eigen-equation is written for ``(phi, q)`` with ``q = |phi'|^(p-2) phi'``::

    phi' = sign(q) |q|^(1/(p-1))
    q'   = drift(s) q - mu |phi|^(p-2) phi

which stays regular where ``phi' = 0``.  Starting from ``(0, 1)`` at
``s = 0``, the first eigenvalue is the ``mu`` whose first zero of ``q``
lands on the end of the interval.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import compfun
from .errors import BracketFailure, DomainError
from .model import Kind, drift_function, singular_end, validate, working_end
from .rk import integrate as _rk_integrate

RTOL = 1e-11
ATOL = 1e-11
DEFAULT_REL_TOL = 1e-9
MAX_DOUBLINGS = 60
# Certificates are integrated with steps no longer than end / CERT_STEPS so
# that the interpolant, not just the step endpoints, meets the tolerance.
CERT_STEPS = 512


@dataclass
class Trajectory:
    """IVP solution for one trial eigenvalue.

    ``samples`` holds the accepted step endpoints as ``(s, phi, q)`` rows;
    calling the trajectory evaluates the dense output.
    """

    samples: np.ndarray
    flux_zero: float | None
    dense: object = field(repr=False, default=None)

    @property
    def terminal_event(self):
        return "ReachedEnd" if self.flux_zero is None else "FluxZero"

    @property
    def end(self):
        return self.samples[-1, 0]

    def __call__(self, s):
        return self.dense(s)


@dataclass
class EigenResult:
    eigenvalue: float
    samples: np.ndarray
    bracket: tuple
    iterations: int
    residual: float
    trajectory: Trajectory | None = field(repr=False, default=None)
    method: str = "shoot"

    @property
    def s(self):
        return self.samples[:, 0]

    @property
    def phi(self):
        return self.samples[:, 1]

    @property
    def q(self):
        return self.samples[:, 2]


def _rhs(problem, mu):
    p = problem.p
    dr = drift_function(problem)
    if p == 2.0:
        def rhs(s, phi, q):
            return q, dr(s) * q - mu * phi
        return rhs
    e = 1.0 / (p - 1.0)
    pm1 = p - 1.0
    copysign = math.copysign

    def rhs(s, phi, q):
        return copysign(abs(q) ** e, q), dr(s) * q - mu * copysign(abs(phi) ** pm1, phi)
    return rhs


def _flux(s, phi, q):
    return q


def _integrate_span(problem, mu, s0, y0, s1, event=None, dense=True, certificate=False):
    if not certificate:
        return _rk_integrate(_rhs(problem, mu), s0, y0, s1, rtol=RTOL, atol=ATOL,
                             event=event, dense=dense)
    # For p < 2 the right side behaves like sqrt-type powers of s - s0, which
    # the quartic interpolant only follows on a geometrically graded mesh.
    floor = 1e-6 * problem.end

    def graded(t0, y0_, t1, y1_):
        return abs(t1 - t0) <= max(0.25 * abs(t0 - s0), floor)
    return _rk_integrate(_rhs(problem, mu), s0, y0, s1, rtol=RTOL, atol=ATOL,
                         event=event, dense=dense, accept=graded,
                         max_step=problem.end / CERT_STEPS)


def _trajectory(sol):
    return Trajectory(np.array([(t, a, b) for t, (a, b) in zip(sol.t, sol.y)]),
                      sol.event_t, sol.dense)


def integrate(problem, mu, dense=True, certificate=False):
    """Integrate from ``(phi, q) = (0, 1)`` until ``s = end`` or ``q = 0``.

    ``certificate=True`` bounds and grades the steps so that the dense
    output can be differentiated; bisection probes leave it off.
    """
    if not mu > 0:
        raise DomainError(f"trial eigenvalue must be positive, got {mu}")
    sol = _integrate_span(problem, mu, 0.0, (0.0, 1.0), working_end(problem),
                          event=_flux, dense=dense, certificate=certificate)
    return _trajectory(sol)


def first_flux_zero(problem, mu):
    """Location of the first zero of ``q``, or None if ``q > 0`` up to the end."""
    if not mu > 0:
        raise DomainError(f"trial eigenvalue must be positive, got {mu}")
    return _integrate_span(problem, mu, 0.0, (0.0, 1.0), working_end(problem),
                           event=_flux, dense=False).event_t


def initial_guess(problem):
    """Zero-drift eigenvalue of an interval of the same length."""
    p = problem.p
    return (p - 1) * (compfun.pi_p(p) / (2 * problem.end)) ** p


def _sample(traj, end, n=257):
    s = np.linspace(0.0, end, n)
    phi, q = traj(s)
    return np.column_stack([s, phi, q])


def solve(problem, rel_tol=DEFAULT_REL_TOL):
    """First eigenvalue of the half-interval problem by bracketing and bisection.

    The bracket is built by doubling ``mu`` from the zero-drift guess until
    ``q`` vanishes before the end and halving until it does not; bisection
    then runs until the bracket is ``rel_tol`` wide relative to its top.
    The certificate is the trajectory at the bracket's lower end, which
    reaches the end of the interval with a small positive flux. When the end
    is a zero of the weight, the certificate is matched from both ends and
    the eigenvalue is refined inside the bracket to make the flux continuous.
    """
    if rel_tol < 1e-12:
        raise DomainError(f"rel_tol below 1e-12 is not supported, got {rel_tol}")
    validate(problem)
    mu0 = initial_guess(problem)

    def hits(mu):
        return first_flux_zero(problem, mu) is not None

    hi = mu0
    k = 0
    while not hits(hi):
        hi *= 2
        k += 1
        if k > MAX_DOUBLINGS:
            raise BracketFailure("no flux zero below 2^60 times the initial guess",
                                 initial=mu0, reached=hi)
    if k > 0:
        lo = hi / 2
    else:
        lo = mu0 / 2
        k = 0
        while hits(lo):
            lo /= 2
            k += 1
            if k > MAX_DOUBLINGS:
                raise BracketFailure("flux zero persists at 2^-60 times the initial guess",
                                     initial=mu0, reached=lo)
        hi = min(hi, 2 * lo)

    iterations = 0
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if hits(mid):
            hi = mid
        else:
            lo = mid
        iterations += 1

    mu = 0.5 * (lo + hi)
    if singular_end(problem) is None:
        cert = integrate(problem, lo, certificate=True)
        residual = abs(cert.samples[-1, 2]) if cert.flux_zero is None else 0.0
    else:
        mu, cert, residual = _matched_certificate(problem, lo, hi)
    return EigenResult(mu, _sample(cert, problem.end), (lo, hi), iterations,
                       residual, cert)


def regular_end_state(problem, mu, offset=1e-6):
    """Start ``(s, phi, q)`` for integrating backwards from the right end.

    At a regular end this is ``(end, 1, 0)``.  At a singular end where the
    weight behaves like ``x^a`` (``x`` the distance to the end), the
    solution that stays bounded has ``q ~ mu x / (a + 1)`` with ``phi``
    normalised to 1 at the end; the integration starts at ``x = offset*end``.
    """
    sing = singular_end(problem)
    if sing is None:
        return problem.end, 1.0, 0.0
    zero, a = sing
    p = problem.p
    x0 = offset * zero
    e = p / (p - 1)
    phi = 1.0 - (mu / (a + 1)) ** (1 / (p - 1)) * x0 ** e / e
    return zero - x0, phi, mu * x0 / (a + 1)


class _Matched:
    """Forward piece on ``[0, s_m]`` joined to a rescaled backward piece."""

    def __init__(self, fwd, bwd, s_m, scale, p):
        self.fwd, self.bwd, self.s_m = fwd, bwd, s_m
        self.scale, self.qscale = scale, scale ** (p - 1)

    def eval(self, s):
        if s <= self.s_m:
            return self.fwd.eval(s)
        a, b = self.bwd.eval(s)
        return self.scale * a, self.qscale * b

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = [self.eval(float(x)) for x in s.ravel()]
        v0 = np.array([o[0] for o in out]).reshape(s.shape)
        v1 = np.array([o[1] for o in out]).reshape(s.shape)
        return v0, v1


def _matched_pieces(problem, mu):
    s_m = 0.5 * problem.end
    fwd = _integrate_span(problem, mu, 0.0, (0.0, 1.0), s_m, certificate=True)
    s0, phi0, q0 = regular_end_state(problem, mu)
    bwd = _integrate_span(problem, mu, s0, (phi0, q0), s_m, certificate=True)
    (pf, qf), (pb, qb) = fwd.y[-1], bwd.y[-1]
    scale = pf / pb
    return fwd, bwd, scale, (qf - scale ** (problem.p - 1) * qb) / abs(qf)


def _matched_certificate(problem, lo, hi):
    """Certificate for a singular end, where forward shooting amplifies the
    unbounded mode.

    A forward piece and a backward piece from the regular end data are
    joined at the midpoint with ``phi`` continuous; inside the bisection
    bracket ``mu`` is then refined so that the flux is continuous too.
    Returns ``(mu, trajectory, relative flux jump)``.
    """
    jump_lo = _matched_pieces(problem, lo)[3]
    jump_hi = _matched_pieces(problem, hi)[3]
    if jump_lo * jump_hi < 0:
        mu = brentq(lambda x: _matched_pieces(problem, x)[3], lo, hi,
                    xtol=4 * np.finfo(float).eps * hi, rtol=4 * np.finfo(float).eps)
    else:
        mu = lo if abs(jump_lo) <= abs(jump_hi) else hi
    fwd, bwd, scale, jump = _matched_pieces(problem, mu)
    s_m = 0.5 * problem.end
    joined = _Matched(fwd.dense, bwd.dense, s_m, scale, problem.p)
    rows = [(t, a, b) for t, (a, b) in zip(fwd.t, fwd.y)]
    rows += [(t, scale * a, joined.qscale * b) for t, (a, b) in zip(bwd.t[::-1], bwd.y[::-1])][1:]
    return mu, Trajectory(np.array(rows), None, joined), abs(jump)


def _odd_power(x, e):
    return math.copysign(abs(x) ** e, x)


def _node(s, phi, q):
    return phi


def solve_neumann_full(problem, rel_tol=DEFAULT_REL_TOL):
    """First nonzero Neumann eigenvalue on ``[-D/2, D/2]`` without symmetry.

    Integrates from ``(-1, 0)`` at ``-D/2`` forwards and from ``(1, 0)`` at
    ``D/2`` backwards and matches at ``s = 0``.  The mismatch
    ``q_L |phi_R|^(p-2) phi_R - q_R |phi_L|^(p-2) phi_L`` is invariant
    under the scaling ``(phi, q) -> (c phi, c^(p-1) q)`` of either side.
    """
    if problem.kind is not Kind.NEUMANN:
        raise DomainError("full-interval shooting applies to Neumann problems only")
    validate(problem)
    half = problem.end
    p = problem.p
    pm1 = p - 1.0

    def halves(mu, dense=False):
        s0, phi0, q0 = regular_end_state(problem, mu)
        left = _integrate_span(problem, mu, -s0, (-phi0, q0), 0.0, dense=dense)
        right = _integrate_span(problem, mu, s0, (phi0, q0), 0.0, dense=dense)
        return left, right

    def mismatch(mu):
        left, right = halves(mu)
        (pl, ql), (pr, qr) = left.y[-1], right.y[-1]
        return ql * _odd_power(pr, pm1) - qr * _odd_power(pl, pm1)

    def below_first(mu):
        # No sign change of phi on either half means mu is under the first root.
        s0, phi0, q0 = regular_end_state(problem, mu)
        left = _integrate_span(problem, mu, -s0, (-phi0, q0), 0.0, event=_node,
                               dense=False)
        right = _integrate_span(problem, mu, s0, (phi0, q0), 0.0, event=_node,
                                dense=False)
        return left.event_t is None and right.event_t is None

    lo = initial_guess(problem)
    k = 0
    while not below_first(lo) or mismatch(lo) <= 0:
        lo /= 2
        k += 1
        if k > MAX_DOUBLINGS:
            raise BracketFailure("could not get below the first root", reached=lo)
    hi = lo * 1.25
    k = 0
    while mismatch(hi) > 0:
        lo = hi
        hi *= 1.25
        k += 1
        if k > 4 * MAX_DOUBLINGS:
            raise BracketFailure("mismatch never changes sign", reached=hi)

    mu, info = brentq(mismatch, lo, hi, xtol=0.25 * rel_tol * lo,
                      rtol=max(0.25 * rel_tol, 4 * np.finfo(float).eps), full_output=True)

    left, right = halves(mu, dense=True)
    s_right = np.linspace(0.0, half, 129)
    phi_r, q_r = right.dense(s_right)
    s_left = np.linspace(-half, 0.0, 129)[:-1]
    phi_l, q_l = left.dense(s_left)
    samples = np.vstack([np.column_stack([s_left, phi_l, q_l]),
                         np.column_stack([s_right, phi_r, q_r])])
    residual = abs(right.y[-1][0])
    return EigenResult(mu, samples, (lo, hi), info.iterations, residual, None,
                       method="shoot-full")
