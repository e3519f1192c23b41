"""Comparison functions for the curvature model ODE and p-trigonometry.

``c_kappa``, ``s_kappa`` and ``c_kl`` solve ``phi'' + kappa*phi = 0``;
``t_kappa`` and ``t_kl`` are their negated logarithmic derivatives.  All
of them accept floats or numpy arrays.  ``sin_p`` is the generalized sine
with ``|u'|^p + |u|^p = 1``, computed by integrating the flux form.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import DomainError
from .rk import integrate

EPS_SING = 1e-9


def _lib(t):
    return np if isinstance(t, np.ndarray) else math


def t_kappa(kappa, t):
    """``sqrt(k) tan(sqrt(k) t)``, ``0`` or ``-sqrt(-k) tanh(sqrt(-k) t)``."""
    xp = _lib(t)
    if kappa > 0:
        r = math.sqrt(kappa)
        edge = math.pi / 2 - EPS_SING
        if (r * abs(t) >= edge) if xp is math else np.any(r * np.abs(t) >= edge):
            raise DomainError(f"t_kappa: t={t} reaches the pole at {math.pi / (2 * r)!r}")
        return r * xp.tan(r * t)
    if kappa == 0:
        return 0.0 * t
    r = math.sqrt(-kappa)
    return -r * xp.tanh(r * t)


def c_kappa(kappa, t):
    xp = _lib(t)
    if kappa > 0:
        return xp.cos(math.sqrt(kappa) * t)
    if kappa == 0:
        return 1.0 + 0.0 * t
    return xp.cosh(math.sqrt(-kappa) * t)


def s_kappa(kappa, t):
    """Solution of ``phi'' + kappa*phi = 0`` with ``phi(0)=0, phi'(0)=1``."""
    xp = _lib(t)
    if kappa > 0:
        r = math.sqrt(kappa)
        return xp.sin(r * t) / r
    if kappa == 0:
        return 1.0 * t
    r = math.sqrt(-kappa)
    return xp.sinh(r * t) / r


def c_kl(kappa, lam, t):
    """``C_{kappa,Lambda}``: initial data ``phi(0)=1``, ``phi'(0)=-lam``."""
    return c_kappa(kappa, t) - lam * s_kappa(kappa, t)


def c_kl_prime(kappa, lam, t):
    return -kappa * s_kappa(kappa, t) - lam * c_kappa(kappa, t)


def t_kl(kappa, lam, t):
    c = c_kl(kappa, lam, t)
    if (c <= EPS_SING) if _lib(t) is math else np.any(c <= EPS_SING):
        raise DomainError(f"t_kl: C_(kappa={kappa}, lambda={lam}) vanishes near t={t}")
    return -c_kl_prime(kappa, lam, t) / c


def first_zero(kappa, lam=0.0):
    """First ``t > 0`` where ``C_{kappa,lam}`` vanishes, or ``inf``."""
    if kappa > 0:
        r = math.sqrt(kappa)
        # atan2(r, lam) = pi/2 - atan(lam/r) without cancellation for small kappa.
        return math.atan2(r, lam) / r
    if kappa == 0:
        return 1.0 / lam if lam > 0 else math.inf
    r = math.sqrt(-kappa)
    if lam > r:
        return math.atanh(r / lam) / r
    return math.inf


def min_on(kappa, lam, length):
    """Minimum of ``C_{kappa,lam}`` over ``[0, length]`` (before its first zero).

    For ``kappa > 0`` the function is a cosine arc, concave while positive,
    so the minimum sits at an endpoint; for ``kappa < 0`` it is convex and
    may dip at the critical point ``tanh(r t) = lam / r``.
    """
    vals = [1.0, c_kl(kappa, lam, length)]
    if kappa < 0:
        r = math.sqrt(-kappa)
        if 0 < lam < r:
            tc = math.atanh(lam / r) / r
            if tc < length:
                vals.append(c_kl(kappa, lam, tc))
    return min(vals)


def pi_p(p):
    if p <= 1:
        raise DomainError(f"pi_p requires p > 1, got {p}")
    return 2 * math.pi / (p * math.sin(math.pi / p))


def signed_power(x, e):
    """``sign(x) |x|^e`` for floats."""
    return math.copysign(abs(x) ** e, x)


class _SinP:
    """Quarter wave of sin_p with its dense output."""

    def __init__(self, p):
        self.p = p
        e = 1 / (p - 1)
        c = -(p - 1)
        qe = p / (p - 1)

        def rhs(t, u, q):
            return signed_power(q, e), c * signed_power(u, p - 1)

        def energy(u, q):
            return abs(u) ** p + abs(q) ** qe

        def accept(t0, y0, t1, y1):
            return abs(energy(*y1) - energy(*y0)) <= 1e-10

        sol = integrate(rhs, 0.0, (0.0, 1.0), 2 * pi_p(p), event=lambda t, u, q: q,
                        accept=accept)
        if sol.event_t is None:
            raise DomainError(f"sin_p: no quarter period found for p={p}")
        self.quarter = sol.event_t
        # Stretch so the flux zero sits on the closed form; u' ~ sqrt(q)
        # there for p > 2, so a 1e-12 offset would cost 1e-6 in u'.
        self.exact_quarter = pi_p(p) / 2
        self.stretch = self.quarter / self.exact_quarter
        self.dense = sol.dense
        self.sol = sol
        self.drift = max(abs(energy(u, q) - 1.0) for u, q in sol.y)

    def __call__(self, t):
        if t >= self.exact_quarter:
            return self.sol.y[-1][0], 0.0
        u, q = self.dense.eval(t * self.stretch)
        return u, signed_power(q, 1 / (self.p - 1))


@lru_cache(maxsize=64)
def _sin_p_wave(p):
    return _SinP(p)


def sin_p_quarter(p):
    """IVP-computed first zero of ``sin_p'`` (equals ``pi_p(p)/2``)."""
    if p <= 1:
        raise DomainError(f"sin_p requires p > 1, got {p}")
    return _sin_p_wave(float(p)).quarter


def sin_p_drift(p):
    """Largest deviation of ``|u|^p + |u'|^p`` from 1 over the stored steps."""
    return _sin_p_wave(float(p)).drift


def sin_p(p, t):
    """Return ``(sin_p(t), sin_p'(t))``.

    Normalised by ``|u'|^(p-2) u'' = -|u|^(p-2) u``, ``u(0)=0``, ``u'(0)=1``;
    odd, ``2 pi_p``-periodic and symmetric about ``pi_p / 2``.
    """
    if p <= 1:
        raise DomainError(f"sin_p requires p > 1, got {p}")
    wave = _sin_p_wave(float(p))
    quarter = wave.exact_quarter
    half = 2 * quarter
    sign = 1.0
    if t < 0:
        t, sign = -t, -1.0
    t = math.fmod(t, 2 * half)
    if t > half:
        t -= half
        sign = -sign
    if t <= quarter:
        u, du = wave(t)
    else:
        u, du = wave(half - t)
        du = -du
    return sign * u, sign * du
