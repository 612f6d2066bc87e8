"""Bistable reaction terms f, their derivatives and antiderivative F.

Two families are provided: the rational Wolbachia reaction term obtained in
the fast-fecundity limit of the two-species competition model, and the cubic
p(1-p)(p-theta) used as a closed-form test oracle.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial, chebyshev, polynomial
from scipy import integrate, optimize

from ._numerics import GL_NODES, GL_WEIGHTS, bracketed_root

SIGN_GRID = 10_001


@dataclass(frozen=True)
class WolbachiaParams:
    """Life-history parameters (rates per day).

    ``sigma`` is accepted for compatibility with published parameter tables
    and has no effect on any computation.
    """

    b_u: float = 1.12
    d_u: float = 0.27
    delta: float = 10.0 / 9.0
    s_f: float = 0.1
    s_h: float = 0.8
    K: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.b_u > 0:
            raise ValueError(f"b_u must be > 0, got {self.b_u}")
        if not self.d_u > 0:
            raise ValueError(f"d_u must be > 0, got {self.d_u}")
        if not self.K > 0:
            raise ValueError(f"K must be > 0, got {self.K}")
        if not self.delta > 1:
            raise ValueError(f"delta > 1 violated (delta={self.delta})")
        if not 0 <= self.s_f:
            raise ValueError(f"0 <= s_f violated (s_f={self.s_f})")
        if not self.s_f < self.s_h:
            raise ValueError(f"s_f < s_h violated (s_f={self.s_f}, s_h={self.s_h})")
        if not self.s_h <= 1:
            raise ValueError(f"s_h <= 1 violated (s_h={self.s_h})")
        if not self.s_f + self.delta * (1 - self.s_h) < 1:
            raise ValueError(
                "s_f + delta*(1 - s_h) < 1 violated "
                f"({self.s_f} + {self.delta}*(1 - {self.s_h}) = "
                f"{self.s_f + self.delta * (1 - self.s_h)})"
            )

    @property
    def theta(self) -> float:
        return (self.s_f + self.delta - 1.0) / (self.delta * self.s_h)


TABLE1 = WolbachiaParams()


@dataclass(frozen=True)
class ReactionModel:
    """f(p) = scale * N(p) / Q(p) with N(p) = p(1-p)(p-theta).

    F is exact for the cubic and a Chebyshev interpolant of adaptive
    quadrature for the rational case. Instances are immutable.
    """

    kind: str
    theta: float
    scale: float
    num: Polynomial
    den: Polynomial
    params: Optional[WolbachiaParams] = None
    antiderivative: Chebyshev | Polynomial = field(default=None, repr=False)

    def __post_init__(self):
        self._check_assumptions()

    def __getstate__(self):
        # cached evaluators hold closures; rebuild them after unpickling
        names = {k for k, v in vars(type(self)).items() if isinstance(v, cached_property)}
        return {k: v for k, v in self.__dict__.items() if k not in names}

    def __setstate__(self, state):
        self.__dict__.update(state)

    @cached_property
    def _den_coef(self):
        c = np.zeros(3)
        c[: len(self.den.coef)] = self.den.coef
        return c

    @cached_property
    def _F_eval(self):
        F = self.antiderivative
        if isinstance(F, Chebyshev):
            off, scl = F.mapparms()
            coef = F.coef.copy()
            base = chebyshev.chebval(off, coef)
            return lambda p: chebyshev.chebval(off + scl * p, coef) - base
        coef = F.coef.copy()
        base = polynomial.polyval(0.0, coef)
        return lambda p: polynomial.polyval(p, coef) - base

    # unchecked vectorised evaluators used by the numerics
    def f(self, p):
        p = np.asarray(p, dtype=float)
        d0, d1, d2 = self._den_coef
        return self.scale * p * (1.0 - p) * (p - self.theta) / (d0 + p * (d1 + p * d2))

    @cached_property
    def _series(self):
        # coefficient arrays of N, N', N'', Q, Q', Q''
        return tuple(P.deriv(k).coef[::-1].copy() for P in (self.num, self.den) for k in range(3))

    def fprime(self, p):
        p = np.asarray(p, dtype=float)
        cn, cdn, _, cq, cdq, _ = self._series
        n, dn, q, dq = (np.polyval(c, p) for c in (cn, cdn, cq, cdq))
        return self.scale * (dn * q - n * dq) / q**2

    def fsecond(self, p):
        p = np.asarray(p, dtype=float)
        n, dn, d2n, q, dq, d2q = (np.polyval(c, p) for c in self._series)
        return self.scale * ((d2n * q - n * d2q) * q - 2 * dq * (dn * q - n * dq)) / q**3

    @cached_property
    def fprime_critical(self) -> tuple:
        """Roots of f'' in (0, 1), i.e. interior extrema of f'."""
        grid = np.linspace(0.0, 1.0, 4001)
        vals = self.fsecond(grid)
        g = lambda p: float(self.fsecond(p))
        return tuple(optimize.brentq(g, grid[i], grid[i + 1], xtol=1e-15)
                     for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0])

    def F(self, p):
        return self._F_eval(np.asarray(p, dtype=float))

    def mean_f(self, a, b):
        """(F(b) - F(a)) / (b - a), free of cancellation for short intervals.

        Broadcasts over ``a`` and ``b``.
        """
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        s = a[..., None] + (b - a)[..., None] * GL_NODES
        return self.f(s) @ GL_WEIGHTS

    def _check_assumptions(self):
        grid = np.linspace(0.0, 1.0, SIGN_GRID)
        if np.any(self.den(grid) <= 0):
            raise ValueError("denominator of f is not positive on [0, 1]")
        vals = self.f(grid)
        below = (grid > 0) & (grid < self.theta)
        above = (grid > self.theta) & (grid < 1)
        if np.any(vals[below] >= 0) or np.any(vals[above] <= 0):
            raise ValueError("f violates the bistable sign pattern on (0,1)")
        if not float(self.F(1.0)) > 0:
            raise ValueError(f"integral of f over [0,1] must be > 0, got {float(self.F(1.0))}")


def _numerator(theta):
    # p(1-p)(p-theta)
    return Polynomial([0.0, 1.0]) * Polynomial([1.0, -1.0]) * Polynomial([-theta, 1.0])


def _chebyshev_antiderivative(f, tol=1e-16, max_deg=512):
    def F_quad(xs):
        out = np.empty_like(xs)
        for i, x in enumerate(xs):
            out[i] = integrate.quad(f, 0.0, x, epsabs=1e-15, epsrel=1e-13, limit=200)[0]
        return out

    deg = 16
    while True:
        cheb = Chebyshev.interpolate(F_quad, deg, domain=[0.0, 1.0])
        scale = np.max(np.abs(cheb.coef))
        if np.max(np.abs(cheb.coef[-3:])) < tol * max(scale, 1e-300) * 10 or deg >= max_deg:
            return cheb.trim(tol * scale)
        deg *= 2


def make_wolbachia_reaction(params: WolbachiaParams = TABLE1) -> ReactionModel:
    theta = params.theta
    scale = params.delta * params.d_u * params.s_h
    num = _numerator(theta)
    den = Polynomial([1.0, -(params.s_f + params.s_h), params.s_h])
    grid = np.linspace(0.0, 1.0, SIGN_GRID)
    if np.any(den(grid) <= 0):
        raise ValueError("denominator s_h p^2 - (s_f + s_h) p + 1 is not positive on [0, 1]")

    def f(p):
        return scale * num(p) / den(p)

    return ReactionModel("wolbachia", theta, scale, num, den, params,
                         _chebyshev_antiderivative(f))


def make_cubic_reaction(theta: float) -> ReactionModel:
    if not 0 < theta < 0.5:
        raise ValueError(f"cubic reaction needs 0 < theta < 1/2 (got {theta}); "
                         "otherwise the integral of f over [0,1] is not positive")
    num = _numerator(theta)
    return ReactionModel("cubic", float(theta), 1.0, num, Polynomial([1.0]), None, num.integ())


def evaluate_reaction(model: ReactionModel, p: float):
    """Checked evaluation: returns (f(p), f'(p), F(p)) for p in [0, 1]."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"proportion must lie in [0, 1], got {p}")
    return float(model.f(p)), float(model.fprime(p)), float(model.F(p))


@dataclass(frozen=True)
class Landmarks:
    theta: float
    alpha1: float
    alpha2: float
    beta: float
    F_theta: float
    F_zero: float
    F_one: float


def compute_landmarks(model: ReactionModel) -> Landmarks:
    th = model.theta
    fp = lambda p: float(model.fprime(p))
    f2 = lambda p: float(model.fsecond(p))
    try:
        alpha1 = bracketed_root(fp, 0.0, th, f2)
        alpha2 = bracketed_root(fp, th, 1.0, f2)
        beta = bracketed_root(lambda p: float(model.F(p)), th, 1.0, lambda p: float(model.f(p)))
    except ValueError as exc:
        raise ValueError(f"landmark bracketing failed, f violates the bistability "
                         f"assumptions: {exc}") from exc
    return Landmarks(th, alpha1, alpha2, beta, float(model.F(th)), 0.0, float(model.F(1.0)))
