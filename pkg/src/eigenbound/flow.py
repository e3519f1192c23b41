"""Explicit 1-D flow ``phi_t = |F phi|^(1/(p-1)) sign(F phi)`` for the model operator

    F phi = (p-1)|phi'|^(p-2) phi'' - drift |phi'|^(p-2) phi' = (w q)' / w.

With eigenfunction data the solution stays separable and its max-norm
decays like ``exp(-mu^(1/(p-1)) t)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import shoot
from .errors import DomainError, StabilityError
from .oracle import _weight

POWER_FLOOR = 1e-300


@dataclass(frozen=True)
class FlowState:
    mesh: np.ndarray
    values: np.ndarray
    time: float = 0.0

    @property
    def h(self):
        return self.mesh[1] - self.mesh[0]


def uniform_state(problem, values, time=0.0):
    values = np.asarray(values, dtype=float)
    mesh = np.linspace(0.0, problem.end, values.size)
    return FlowState(mesh, values, time)


def eigen_state(problem, n, result=None):
    """Shooting certificate sampled on ``n`` cells, scaled to max 1."""
    result = result or shoot.solve(problem)
    mesh = np.linspace(0.0, problem.end, n + 1)
    phi, _ = result.trajectory(mesh)
    phi[0] = 0.0
    return FlowState(mesh, phi / np.max(np.abs(phi)), 0.0)


class _Operator:
    """Mesh weights cached for repeated evaluation."""

    def __init__(self, problem, mesh):
        self.p = problem.p
        self.h = mesh[1] - mesh[0]
        self.node_w = _weight(problem, mesh)
        self.mid_w = _weight(problem, 0.5 * (mesh[1:] + mesh[:-1]))
        cell = np.full(mesh.size, self.h)
        cell[-1] = 0.5 * self.h
        self.scale = 1.0 / (cell * self.node_w)
        self.scale[0] = 0.0

    def __call__(self, values):
        d = np.diff(values) / self.h
        flux = self.mid_w * np.sign(d) * np.abs(d) ** (self.p - 1)
        out = np.empty_like(values)
        out[0] = 0.0
        out[1:-1] = flux[1:] - flux[:-1]
        out[-1] = -flux[-1]
        return out * self.scale


def apply_F(problem, state):
    """Finite-volume ``(w q)'/w`` at every node; zero flux beyond the right end."""
    return _Operator(problem, state.mesh)(state.values)


def default_dt(problem, h):
    """Nominal step ``0.2 h^p / (p-1)``."""
    return 0.2 * h ** problem.p / (problem.p - 1)


def stable_dt(problem, state, safety=0.5):
    """Step limited by the linearised Euler update at every node.

    The local rate is ``|G'(F)| |dF_i/dphi_i|`` with ``G(F) = sign(F)|F|^(1/(p-1))``.
    It is invariant under ``phi -> c phi``, so one evaluation on the initial
    data covers a separable decay.  For ``p < 2`` the rate near a Neumann end
    grows like ``h^(-p/(p-1))``, faster than the nominal ``h^(-p)``.
    """
    p = problem.p
    op = _Operator(problem, state.mesh)
    h = op.h
    dt = default_dt(problem, h)
    f = op(state.values)
    d = np.abs(np.diff(state.values) / h)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        g = op.mid_w * (p - 1) * d ** (p - 2) / h
        diag = np.zeros_like(state.values)
        diag[1:] += g
        diag[1:-1] += g[1:]
        diag *= op.scale
        gprime = np.abs(f) ** ((2 - p) / (p - 1)) / (p - 1)
        rate = gprime * diag
    rate = rate[np.isfinite(rate) & (rate > 0)]
    if rate.size:
        dt = min(dt, safety / rate.max())
    return dt


def _sign_changes(v):
    s = np.sign(v[v != 0])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def _advance(op, values, dt, p):
    f = op(values)
    rate = np.sign(f) * np.maximum(np.abs(f), POWER_FLOOR) ** (1 / (p - 1))
    rate[f == 0] = 0.0
    new = values + dt * rate
    new[0] = 0.0
    return new


def step(problem, state, dt):
    """One forward-Euler step; raises StabilityError on a new sign change."""
    new = _advance(_Operator(problem, state.mesh), state.values, dt, problem.p)
    if _sign_changes(new) > _sign_changes(state.values):
        raise StabilityError("flow overshoot created a new sign change",
                             time=state.time + dt)
    return replace(state, values=new, time=state.time + dt)


def evolve(problem, initial, T, dt=None, samples=200):
    """Run to time ``T``; return ``(times, max_norms, final_state)``."""
    op = _Operator(problem, initial.mesh)
    dt = dt or stable_dt(problem, initial)
    nsteps = max(1, math.ceil(T / dt))
    dt = T / nsteps
    every = max(1, nsteps // samples)
    values = initial.values.copy()
    changes = _sign_changes(values)
    times = [initial.time]
    norms = [np.max(np.abs(values))]
    for k in range(1, nsteps + 1):
        values = _advance(op, values, dt, problem.p)
        if k % every == 0 or k == nsteps:
            if _sign_changes(values) > changes:
                raise StabilityError("flow overshoot created a new sign change",
                                     time=initial.time + k * dt)
            times.append(initial.time + k * dt)
            norms.append(np.max(np.abs(values)))
    return np.array(times), np.array(norms), FlowState(initial.mesh, values, initial.time + T)


def decay_rate(problem, initial, T, dt=None):
    """Least-squares exponential rate of the max-norm over ``[T/2, T]``."""
    if not np.any(initial.values):
        raise DomainError("zero initial data has no decay rate")
    times, norms, _ = evolve(problem, initial, T, dt)
    return fit_rate(times, norms, initial.time + 0.5 * T)


def fit_rate(times, norms, start):
    """Negated least-squares slope of ``log(norms)`` over ``times >= start``."""
    window = times >= start
    if np.any(norms[window] < 1e-280) or not np.all(np.isfinite(norms[window])):
        raise DomainError("max-norm underflowed before the fit window")
    slope = np.polyfit(times[window], np.log(norms[window]), 1)[0]
    return -slope
