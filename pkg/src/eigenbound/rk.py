"""Dormand-Prince 5(4) integrator for two-component scalar systems.

The shooting solver integrates the same planar system dozens of times per
eigenvalue, so this works on plain floats rather than numpy arrays.  Dense
output uses the standard quartic continuous extension; terminal events are
located by Brent's method on that interpolant.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import StepFailure

C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (-71 / 57600, 71 / 16695, -71 / 1920, 17253 / 339200,
                          -22 / 525, 1 / 40)

# Continuous extension, one row per stage (stage 2 has zero weight).
P = (
    (1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432),
    (0.0, 0.0, 0.0, 0.0),
    (0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799),
    (0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072),
    (0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632),
    (0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844),
    (0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423),
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
SNAP = 1e-13


def _dense_coeffs(h, ks):
    """Polynomial coefficients (in theta) of one component over a step."""
    out = []
    for j in range(4):
        acc = 0.0
        for k, row in zip(ks, P):
            acc += k * row[j]
        out.append(h * acc)
    return out


@dataclass
class DenseOutput:
    """Piecewise quartic interpolant through the accepted steps."""

    t_old: list = field(default_factory=list)
    h: list = field(default_factory=list)
    y0: list = field(default_factory=list)
    y1: list = field(default_factory=list)
    c0: list = field(default_factory=list)
    c1: list = field(default_factory=list)

    def append(self, t, h, y0, y1, k0, k1):
        self.t_old.append(t)
        self.h.append(h)
        self.y0.append(y0)
        self.y1.append(y1)
        self.c0.append(_dense_coeffs(h, k0))
        self.c1.append(_dense_coeffs(h, k1))

    def _index(self, s):
        # Steps may run backwards; search on the oriented step starts.
        if self.h and self.h[0] < 0:
            starts = [-t for t in self.t_old]
            i = bisect_right(starts, -s) - 1
        else:
            i = bisect_right(self.t_old, s) - 1
        return min(max(i, 0), len(self.t_old) - 1)

    def eval(self, s):
        """Return ``(y0, y1)`` at a scalar ``s``."""
        i = self._index(s)
        th = (s - self.t_old[i]) / self.h[i]
        a = self.c0[i]
        b = self.c1[i]
        return (self.y0[i] + th * (a[0] + th * (a[1] + th * (a[2] + th * a[3]))),
                self.y1[i] + th * (b[0] + th * (b[1] + th * (b[2] + th * b[3]))))

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        flat = s.ravel()
        v0 = np.empty_like(flat)
        v1 = np.empty_like(flat)
        for j, sj in enumerate(flat):
            v0[j], v1[j] = self.eval(float(sj))
        return v0.reshape(s.shape), v1.reshape(s.shape)


@dataclass
class Solution:
    t: list
    y: list
    event_t: float | None = None
    dense: DenseOutput | None = None
    nfev: int = 0
    rejected: int = 0


def _rms(e0, e1, sc0, sc1):
    return math.sqrt(0.5 * ((e0 / sc0) ** 2 + (e1 / sc1) ** 2))


def _initial_step(fun, t0, y0, y1, f0, f1, direction, rtol, atol, span):
    sc0 = atol + abs(y0) * rtol
    sc1 = atol + abs(y1) * rtol
    d0 = _rms(y0, y1, sc0, sc1)
    d1 = _rms(f0, f1, sc0, sc1)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    g0, g1 = fun(t0 + direction * h0, y0 + direction * h0 * f0, y1 + direction * h0 * f1)
    d2 = _rms(g0 - f0, g1 - f1, sc0, sc1) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


def integrate(fun, t0, y0, t_end, *, rtol=1e-11, atol=1e-11, event=None,
              accept=None, dense=True, max_step=math.inf, max_steps=500_000):
    """Integrate ``y' = fun(t, y0, y1)`` from ``t0`` towards ``t_end``.

    Parameters
    ----------
    fun : callable
        ``fun(t, a, b) -> (da, db)`` on floats.
    y0 : pair of float
        Initial state.
    event : callable, optional
        ``event(t, a, b) -> float``.  Integration stops at the first sign
        change of this function (measured from its first nonzero value).
    accept : callable, optional
        ``accept(t_old, y_old, t_new, y_new) -> bool``; a step that passes
        the error test is still rejected (and halved) when this is false.
    dense : bool
        Keep the interpolant for every step.
    max_step : float
        Upper bound on the step length.  The quartic interpolant is less
        accurate than the step itself, so callers that differentiate the
        dense output cap the step.

    Returns
    -------
    Solution
        Step endpoints, the event location (or None) and the dense output.
    """
    span = abs(t_end - t0)
    direction = 1.0 if t_end >= t0 else -1.0
    t = float(t0)
    a, b = float(y0[0]), float(y0[1])
    ts = [t]
    ys = [(a, b)]
    out = DenseOutput() if dense else None
    ka, kb = fun(t, a, b)
    nfev = 1
    if span == 0.0:
        return Solution(ts, ys, None, out, nfev)

    g_sign = 0.0
    if event is not None:
        g0 = event(t, a, b)
        g_sign = math.copysign(1.0, g0) if g0 != 0.0 else 0.0

    h = min(_initial_step(fun, t, a, b, ka, kb, direction, rtol, atol, span), max_step)
    nfev += 1
    rejected = 0
    step_rejected = False
    for _ in range(max_steps):
        remaining = abs(t_end - t)
        min_step = 10 * abs(math.nextafter(t, direction * math.inf) - t)
        if h > remaining:
            h = remaining
        if h < min_step and remaining <= SNAP * max(1.0, abs(t_end)):
            # Steps collapse onto a weak singularity sitting at the end point
            # (phi' ~ sqrt(q) with q -> 0); cover the sliver with one Euler step.
            an, bn = a + direction * remaining * ka, b + direction * remaining * kb
            ts.append(t_end)
            ys.append((an, bn))
            if event is not None and g_sign != 0.0 and event(t_end, an, bn) * g_sign <= 0.0:
                return Solution(ts, ys, t_end, out, nfev, rejected)
            return Solution(ts, ys, None, out, nfev, rejected)
        if h < min_step:
            raise StepFailure(f"step size underflow at s={t!r}", location=t, step=h)
        hs = direction * h

        k1a, k1b = ka, kb
        k2a, k2b = fun(t + C2 * hs, a + hs * A21 * k1a, b + hs * A21 * k1b)
        k3a, k3b = fun(t + C3 * hs, a + hs * (A31 * k1a + A32 * k2a),
                       b + hs * (A31 * k1b + A32 * k2b))
        k4a, k4b = fun(t + C4 * hs, a + hs * (A41 * k1a + A42 * k2a + A43 * k3a),
                       b + hs * (A41 * k1b + A42 * k2b + A43 * k3b))
        k5a, k5b = fun(t + C5 * hs,
                       a + hs * (A51 * k1a + A52 * k2a + A53 * k3a + A54 * k4a),
                       b + hs * (A51 * k1b + A52 * k2b + A53 * k3b + A54 * k4b))
        k6a, k6b = fun(t + hs,
                       a + hs * (A61 * k1a + A62 * k2a + A63 * k3a + A64 * k4a + A65 * k5a),
                       b + hs * (A61 * k1b + A62 * k2b + A63 * k3b + A64 * k4b + A65 * k5b))
        an = a + hs * (B1 * k1a + B3 * k3a + B4 * k4a + B5 * k5a + B6 * k6a)
        bn = b + hs * (B1 * k1b + B3 * k3b + B4 * k4b + B5 * k5b + B6 * k6b)
        tn = t_end if h == remaining else t + hs
        k7a, k7b = fun(tn, an, bn)
        nfev += 6

        ea = hs * (E1 * k1a + E3 * k3a + E4 * k4a + E5 * k5a + E6 * k6a + E7 * k7a)
        eb = hs * (E1 * k1b + E3 * k3b + E4 * k4b + E5 * k5b + E6 * k6b + E7 * k7b)
        err = _rms(ea, eb, atol + rtol * max(abs(a), abs(an)),
                   atol + rtol * max(abs(b), abs(bn)))
        if not math.isfinite(err):
            err = math.inf

        if err > 1.0 or (accept is not None and not accept(t, (a, b), tn, (an, bn))):
            if err == 0.0:
                factor = 0.5
            elif not math.isfinite(err):
                factor = MIN_FACTOR
            else:
                factor = max(MIN_FACTOR, SAFETY * err ** -0.2)
            h *= min(factor, 0.5)
            step_rejected = True
            rejected += 1
            continue

        if err == 0.0:
            factor = MAX_FACTOR
        else:
            factor = min(MAX_FACTOR, SAFETY * err ** -0.2)
        if step_rejected:
            factor = min(1.0, factor)
        step_rejected = False

        ks_a = (k1a, k2a, k3a, k4a, k5a, k6a, k7a)
        ks_b = (k1b, k2b, k3b, k4b, k5b, k6b, k7b)
        step = DenseOutput()
        step.append(t, hs, a, b, ks_a, ks_b)

        if event is not None:
            gn = event(tn, an, bn)
            if g_sign == 0.0:
                g_sign = math.copysign(1.0, gn) if gn != 0.0 else 0.0
            elif gn * g_sign <= 0.0:
                if gn == 0.0:
                    te = tn
                else:
                    def g_local(s):
                        u, v = step.eval(s)
                        return event(s, u, v)
                    lo, hi = (t, tn) if direction > 0 else (tn, t)
                    te = brentq(g_local, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps)
                ae, be = step.eval(te)
                if out is not None:
                    out.append(t, hs, a, b, ks_a, ks_b)
                ts.append(te)
                ys.append((ae, be))
                return Solution(ts, ys, te, out, nfev, rejected)

        if out is not None:
            out.append(t, hs, a, b, ks_a, ks_b)
        t, a, b = tn, an, bn
        ka, kb = k7a, k7b
        ts.append(t)
        ys.append((a, b))
        if t == t_end:
            return Solution(ts, ys, None, out, nfev, rejected)
        h = min(h * factor, max_step)

    raise StepFailure(f"exceeded {max_steps} steps at s={t!r}", location=t)
