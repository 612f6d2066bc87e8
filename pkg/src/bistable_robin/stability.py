"""Principal Robin eigenvalue and stability of steady states.

The linearisation of -p'' = f(p) with Robin data at a steady state is
-phi'' - f'(p(x)) phi = mu phi with phi'(+-L) = -+D phi(+-L). Comparing the
range of f' along the profile with the principal eigenvalue lambda_1 of the
pure Robin Laplacian gives sufficient conditions; the smallest eigenvalue
mu_1 of a finite-difference discretisation is the numeric tie-breaker.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import eigh_tridiagonal

from ._numerics import bracketed_root
from .reaction import ReactionModel
from .steady import SteadyProfile, profile_residual
from .timemap import BoundaryEnv, invert_F

STABLE, UNSTABLE, INCONCLUSIVE = "StableByTheorem", "UnstableByTheorem", "Inconclusive"
RESIDUAL_TOL = 1e-4


@dataclass(frozen=True)
class StabilityVerdict:
    lambda1: float
    fprime_min: float
    fprime_max: float
    verdict: str
    mu1: Optional[float] = None


def principal_eigenvalue(env: BoundaryEnv) -> float:
    """Smallest lambda > 0 with sqrt(lambda) tan(L sqrt(lambda)) = D.

    Solved as s sin s = L D cos s for s = L sqrt(lambda) in (0, pi/2), which
    is increasing there and has no pole.
    """
    LD = env.L * env.D
    g = lambda s: s * math.sin(s) - LD * math.cos(s)
    dg = lambda s: (1.0 + LD) * math.sin(s) + s * math.cos(s)
    s = bracketed_root(g, 0.0, 0.5 * math.pi, dg, xtol=1e-16)
    return (s / env.L) ** 2


def principal_eigenfunction(env: BoundaryEnv, x) -> np.ndarray:
    """cos(sqrt(lambda_1) x), positive on [-L, L], with max 1."""
    return np.cos(math.sqrt(principal_eigenvalue(env)) * np.asarray(x, dtype=float))


def fprime_range(model: ReactionModel, profile: SteadyProfile):
    """Exact (min, max) of f'(p(x)) over the profile.

    The value range of p includes turning values lying between grid nodes
    (recovered from the energy level), and f' is examined at the range ends
    and at its own critical points inside the range.
    """
    p, dp = np.asarray(profile.p), np.asarray(profile.dp)
    lo, hi = float(p.min()), float(p.max())
    flips = np.nonzero(np.sign(dp[:-1]) * np.sign(dp[1:]) < 0)[0]
    for i in flips:
        mid = 0.5 * (p[i] + p[i + 1])
        try:
            turn = invert_F(model, "lower" if mid < model.theta else "upper", profile.energy)
        except ValueError:
            continue
        lo, hi = min(lo, turn), max(hi, turn)
    pts = [lo, hi] + [c for c in model.fprime_critical if lo < c < hi]
    vals = model.fprime(np.array(pts))
    return float(vals.min()), float(vals.max())


def ground_eigenvalue(fprime_values, L: float, D: float, vector: bool = False):
    """Smallest eigenvalue of -phi'' - q phi with Robin ends on a uniform grid.

    Ghost-point closure phi_{-1} = phi_1 - 2 h D phi_0 (and mirrored). The
    boundary rows carry a factor 2 on the off-diagonal; a diagonal
    similarity makes the matrix symmetric with off-diagonal -sqrt(2)/h^2
    there, so the spectrum comes from a symmetric tridiagonal solver.
    """
    q = np.asarray(fprime_values, dtype=float)
    n = len(q)
    h = 2.0 * L / (n - 1)
    d = 2.0 / h**2 - q
    d[0] += 2.0 * D / h
    d[-1] += 2.0 * D / h
    e = np.full(n - 1, -1.0 / h**2)
    e[0] = e[-1] = -math.sqrt(2.0) / h**2
    if not vector:
        return float(eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, 0))[0])
    w, v = eigh_tridiagonal(d, e, select="i", select_range=(0, 0))
    phi = v[:, 0].copy()
    phi[0] *= math.sqrt(2.0)
    phi[-1] *= math.sqrt(2.0)
    phi /= phi[np.argmax(np.abs(phi))]
    return float(w[0]), phi


def _resample(profile: SteadyProfile, n: int):
    x = np.asarray(profile.x)
    if len(x) == n:
        return x, np.asarray(profile.p)
    spline = CubicHermiteSpline(x, profile.p, profile.dp)
    xs = np.linspace(x[0], x[-1], n)
    return xs, spline(xs)


def linearized_ground_eigenvalue(model: ReactionModel, env: BoundaryEnv,
                                 profile: SteadyProfile, n: int = 1001) -> float:
    """mu_1 of the linearisation at ``profile`` (positive: linearly stable)."""
    if n < 101 or n % 2 == 0:
        raise ValueError(f"n must be odd and >= 101, got {n}")
    _, p = _resample(profile, n)
    return ground_eigenvalue(model.fprime(p), env.L, env.D)


def classify_stability(model: ReactionModel, env: BoundaryEnv, profile: SteadyProfile,
                       with_oracle: bool = True, n: int = 1001,
                       residual_tol: float = RESIDUAL_TOL) -> StabilityVerdict:
    """Sufficient-condition verdict: f' < lambda_1 everywhere means stable,
    f' > lambda_1 everywhere means unstable, anything else is inconclusive."""
    res = profile_residual(model, env, profile)
    worst = max(res.interior_norm, res.bc_left, res.bc_right)
    if not worst <= residual_tol:
        raise ValueError(f"profile is not a verified steady state (residual {worst:.2e} "
                         f"> {residual_tol:.0e})")
    lam = principal_eigenvalue(env)
    lo, hi = fprime_range(model, profile)
    if hi < lam:
        verdict = STABLE
    elif lo > lam:
        verdict = UNSTABLE
    else:
        verdict = INCONCLUSIVE
    mu = linearized_ground_eigenvalue(model, env, profile, n) if with_oracle else None
    return StabilityVerdict(lam, lo, hi, verdict, mu)
