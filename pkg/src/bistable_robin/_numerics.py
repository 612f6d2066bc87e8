"""Small numerical building blocks shared by the modules."""
from __future__ import annotations

import math

import numpy as np
from scipy import optimize

# 20-point Gauss-Legendre rule mapped to [0, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)
GL_NODES = 0.5 * (_GL_X + 1.0)
GL_WEIGHTS = 0.5 * _GL_W


class ConvergenceError(RuntimeError):
    """A numerical procedure failed to reach its tolerance."""


def bracketed_root(func, a, b, dfunc=None, xtol=1e-12, maxiter=200):
    """Root of ``func`` in [a, b] with a sign change.

    Safeguarded Newton: a Newton step is taken when it stays inside the
    current bracket and shrinks the step fast enough, otherwise bisection.
    Without ``dfunc`` this is plain bisection. Ends with Newton polish to
    machine precision when the derivative is available.
    """
    fa, fb = func(a), func(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if np.sign(fa) == np.sign(fb):
        raise ValueError(f"no sign change on [{a}, {b}]: f(a)={fa:.3e}, f(b)={fb:.3e}")
    # orient so that func(lo) < 0 < func(hi)
    lo, hi = (a, b) if fa < 0 else (b, a)
    x = 0.5 * (a + b)
    dx_old = dx = abs(b - a)
    fx = func(x)
    if fx < 0:
        lo = x
    elif fx > 0:
        hi = x
    dfx = dfunc(x) if dfunc is not None else 0.0
    for _ in range(maxiter):
        if fx == 0.0:
            return x
        newton_ok = (dfunc is not None and dfx != 0.0 and math.isfinite(dfx)
                     and ((x - hi) * dfx - fx) * ((x - lo) * dfx - fx) < 0.0
                     and abs(2.0 * fx) < abs(dx_old * dfx))
        dx_old = dx
        if newton_ok:
            dx = fx / dfx
            x_new = x - dx
        else:
            dx = 0.5 * (hi - lo)
            x_new = lo + dx
        converged = abs(dx) <= xtol or x_new == x
        x = x_new
        fx = func(x)
        if fx < 0:
            lo = x
        elif fx > 0:
            hi = x
        if converged:
            break
        if dfunc is not None:
            dfx = dfunc(x)
    else:
        raise ConvergenceError(f"root finding on [{a}, {b}] did not converge")
    if dfunc is not None:
        # polish: one or two extra Newton steps kept inside the bracket
        for _ in range(2):
            dfx = dfunc(x)
            if fx == 0.0 or dfx == 0.0 or not math.isfinite(dfx):
                break
            xn = x - fx / dfx
            if not min(lo, hi) <= xn <= max(lo, hi) or xn == x:
                break
            x, fx = xn, func(xn)
    return x


def scan_sign_changes(values):
    """Indices i with a sign change between values[i] and values[i+1]."""
    v = np.asarray(values, dtype=float)
    s = np.sign(v)
    idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
    zeros = np.nonzero(s == 0)[0]
    return idx, zeros


def grid_then_golden(func, xs, tol=1e-10):
    """Global minimum of ``func`` over sorted points ``xs`` refined by golden section.

    Returns (argmin, min). The grid guards against several local minima.
    """
    vals = np.array([func(x) for x in xs])
    finite = np.isfinite(vals)
    if not finite.any():
        return math.nan, math.inf
    k = int(np.nanargmin(np.where(finite, vals, np.inf)))
    if k == 0 or k == len(xs) - 1:
        return float(xs[k]), float(vals[k])
    a, b, c = xs[k - 1], xs[k], xs[k + 1]
    try:
        xmin, fmin, _ = optimize.golden(func, brack=(a, b, c), tol=tol, full_output=True)
    except (ValueError, RuntimeError):
        return float(xs[k]), float(vals[k])
    if not (a <= xmin <= c) or fmin > vals[k]:
        return float(xs[k]), float(vals[k])
    return float(xmin), float(fmin)
