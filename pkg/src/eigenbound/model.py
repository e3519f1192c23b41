"""Geometry profiles and the one-dimensional model eigenvalue problems.

A profile is a list of ``(multiplicity, curvature)`` terms.  For the
closed/Neumann problem the drift is ``sum a_i T_{k_i}`` and the weight
``prod c_{k_i}^{a_i}``; for the Dirichlet problem every factor is replaced
by its boundary-adapted version ``C_{k_i, Lambda}``.  In both cases
``w'/w = -drift``, which turns the drift form of the ODE into the
divergence form ``(w q)' = -mu w |phi|^(p-2) phi``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import compfun
from .compfun import EPS_SING
from .errors import DomainError, ValidationError


class Kind(str, enum.Enum):
    NEUMANN = "neumann"
    DIRICHLET = "dirichlet"


@dataclass(frozen=True)
class GeometryProfile:
    terms: tuple
    boundary: float | None = None
    labels: tuple | None = None

    def __post_init__(self):
        terms = tuple((float(a), float(k)) for a, k in self.terms)
        if not terms:
            raise DomainError("a profile needs at least one term")
        for a, k in terms:
            if not a > 0 or not math.isfinite(a) or not math.isfinite(k):
                raise DomainError(f"bad profile term ({a}, {k})")
        object.__setattr__(self, "terms", terms)
        if self.boundary is not None:
            object.__setattr__(self, "boundary", float(self.boundary))
        if self.labels is not None and len(self.labels) != len(terms):
            raise DomainError("one label per term")

    @property
    def total_multiplicity(self):
        return sum(a for a, _ in self.terms)

    def label(self, i):
        if self.labels is not None:
            return self.labels[i]
        return f"kappa={self.terms[i][1]:g}"


def quaternionic_profile(m, kappa, boundary=None):
    """Drift ``4(m-1) T_k + 3 T_{4k}`` of quaternionic dimension ``m``."""
    if m < 2:
        raise DomainError(f"quaternionic dimension must be >= 2, got {m}")
    return GeometryProfile(((4 * (m - 1), kappa), (3, 4 * kappa)), boundary,
                           labels=("κ", "4κ"))


def riemannian_profile(n, kappa, boundary=None):
    """Drift ``(n-1) T_k`` of the classical Ricci-bounded comparison."""
    if n < 2:
        raise DomainError(f"dimension must be >= 2, got {n}")
    return GeometryProfile(((n - 1, kappa),), boundary, labels=("κ",))


def parse_profile(text, boundary=None):
    """Parse ``"a1:k1,a2:k2"`` into a profile."""
    terms = []
    for chunk in text.split(","):
        a, _, k = chunk.partition(":")
        if not _:
            raise DomainError(f"profile term {chunk!r} is not 'multiplicity:curvature'")
        terms.append((float(a), float(k)))
    return GeometryProfile(tuple(terms), boundary)


@dataclass(frozen=True)
class ModelProblem:
    profile: GeometryProfile
    p: float
    half_length: float
    kind: Kind = Kind.NEUMANN

    def __post_init__(self):
        if not self.p > 1:
            raise DomainError(f"p must exceed 1, got {self.p}")
        if not self.half_length > 0 or not math.isfinite(self.half_length):
            raise DomainError(f"interval length must be positive, got {self.half_length}")
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "half_length", float(self.half_length))

    @property
    def end(self):
        return self.half_length

    @property
    def lam(self):
        if self.kind is Kind.DIRICHLET and self.profile.boundary is not None:
            return self.profile.boundary
        return 0.0

    @property
    def length(self):
        """Diameter for Neumann problems, inradius for Dirichlet ones."""
        return 2 * self.half_length if self.kind is Kind.NEUMANN else self.half_length


def neumann_problem(profile, p, diameter):
    return ModelProblem(profile, p, diameter / 2, Kind.NEUMANN)


def dirichlet_problem(profile, p, inradius):
    return ModelProblem(profile, p, inradius, Kind.DIRICHLET)


def drift(problem, s):
    """Drift coefficient at ``s`` (float or array)."""
    lam = problem.lam
    total = 0.0
    for a, k in problem.profile.terms:
        if problem.kind is Kind.NEUMANN:
            total = total + a * compfun.t_kappa(k, s)
        else:
            total = total + a * compfun.t_kl(k, lam, s)
    return total


def weight(problem, s):
    """Divergence-form weight at ``s``; equals 1 at ``s = 0``."""
    lam = problem.lam
    w = 1.0
    for i, (a, k) in enumerate(problem.profile.terms):
        if problem.kind is Kind.NEUMANN:
            c = compfun.c_kappa(k, s)
        else:
            c = compfun.c_kl(k, lam, s)
        if (c <= 0) if not isinstance(c, np.ndarray) else np.any(c <= 0):
            raise DomainError(f"weight factor {problem.profile.label(i)} not positive at s={s}")
        w = w * c ** a
    return w


def drift_function(problem):
    """Scalar closure ``s -> drift`` for the integrator's inner loop."""
    terms = problem.profile.terms
    lam = problem.lam
    if all(k == 0 for _, k in terms) and lam == 0:
        return lambda s: 0.0
    if problem.kind is Kind.NEUMANN:
        tk = compfun.t_kappa
        if len(terms) == 1:
            (a, k), = terms
            return lambda s: a * tk(k, s)
        if len(terms) == 2:
            (a1, k1), (a2, k2) = terms
            return lambda s: a1 * tk(k1, s) + a2 * tk(k2, s)
        return lambda s: sum(a * tk(k, s) for a, k in terms)
    tkl = compfun.t_kl
    return lambda s: sum(a * tkl(k, lam, s) for a, k in terms)


SINGULAR_MATCH = 1e-9


def _factor_data(problem, i):
    a, k = problem.profile.terms[i]
    lam = problem.lam
    if problem.kind is Kind.NEUMANN:
        lam = 0.0
        name = f"c_{{{problem.profile.label(i)}}}"
    else:
        name = f"C_{{{problem.profile.label(i)},Λ}}"
    return a, k, lam, name


def singular_end(problem):
    """``(zero, multiplicity)`` when weight factors vanish exactly at the end.

    An end point that coincides (to relative 1e-9) with a zero of the
    weight is a regular singular point of the ODE; the Neumann condition
    there is replaced by regularity of the solution.  This is the case of
    the round sphere, e.g. ``riemannian_profile(n, 1)`` with ``D = pi``.
    """
    end = problem.end
    zero = None
    mult = 0.0
    for i in range(len(problem.profile.terms)):
        a, k, lam, _ = _factor_data(problem, i)
        z = compfun.first_zero(k, lam)
        if math.isfinite(z) and abs(z - end) <= SINGULAR_MATCH * end:
            if zero is None or z < zero:
                zero = z
            mult += a
    return None if zero is None else (zero, mult)


def working_end(problem):
    """Right end used by the integrators (pulled in from a singular end)."""
    sing = singular_end(problem)
    if sing is None:
        return problem.end
    return sing[0] * (1 - 1e-8)


def validate(problem):
    """Raise ValidationError unless every weight factor stays >= EPS_SING.

    The closed working interval is ``[0, end]`` (the Neumann weight is even,
    so this covers ``[-D/2, D/2]`` as well).  The error names the first
    offending factor and the first zero of that factor.  A zero lying on
    the end point itself is accepted, see ``singular_end``.  When several
    factors vanish, the one with the earliest zero is reported.
    """
    end = problem.end
    sing = singular_end(problem)
    bad = []
    for i in range(len(problem.profile.terms)):
        a, k, lam, name = _factor_data(problem, i)
        zero = compfun.first_zero(k, lam)
        if sing is not None and math.isfinite(zero) and abs(zero - end) <= SINGULAR_MATCH * end:
            continue
        if compfun.min_on(k, lam, end) < EPS_SING or zero <= end:
            bad.append((zero, i, a, k, name))
    if bad:
        zero, i, a, k, name = min(bad)
        raise ValidationError(
            f"weight factor {name} (curvature {k:g}, multiplicity {a:g}) "
            f"vanishes at s={zero!r}, inside the working interval [0, {end!r}]",
            factor=i, curvature=k, location=zero)
    if sing is not None:
        w_end = working_end(problem)
        for i in range(len(problem.profile.terms)):
            a, k, lam, name = _factor_data(problem, i)
            if compfun.min_on(k, lam, w_end) < EPS_SING:
                raise ValidationError(f"weight factor {name} too small near the singular end",
                                      factor=i, curvature=k, location=sing[0])
    return True
