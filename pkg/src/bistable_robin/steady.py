"""Steady states: boundary-value roots, profile reconstruction, census.

A steady state is a chain of monotone orbit segments between turning
points and boundary points. Each segment is parametrised by the smooth
variable t of ``timemap._segment_integrand``; x(t) is the integral of a
Chebyshev interpolant of the integrand and is inverted by safeguarded
Newton onto a uniform x grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Chebyshev
from scipy import optimize

from ._numerics import ConvergenceError, scan_sign_changes
from .reaction import ReactionModel
from .timemap import (
    N_SCAN, SD, SI, BoundaryEnv, _G, _segment_integrand, grid_then_golden, level_breaks,
    level_band, level_scan, nonmonotone_families, orbit_candidates, time_map, time_map_domain,
    turning_value,
)

N_GRID = 1001
ROOT_XTOL = 1e-12
DEDUPE = 1e-8
CONSTANT, NONSM = "Constant", "NonSM"


@dataclass(frozen=True)
class SteadyProfile:
    """Sampled steady state on a uniform grid of [-L, L].

    ``dp`` is p' from the orbit parametrisation (not a finite difference).
    ``energy`` is the orbit level c = p'^2/2 + F(p).
    """

    kind: str
    x: np.ndarray
    p: np.ndarray
    dp: np.ndarray
    energy: float
    label: str = ""

    @property
    def p_at_0(self) -> float:
        return float(np.interp(0.0, self.x, self.p))

    @property
    def p_at_L(self) -> float:
        return float(self.p[-1])

    @property
    def p_at_minus_L(self) -> float:
        return float(self.p[0])

    @property
    def L(self) -> float:
        return float(self.x[-1])

    def mirrored(self, label=None) -> "SteadyProfile":
        return SteadyProfile(self.kind, self.x, self.p[::-1].copy(), -self.dp[::-1],
                             self.energy, label if label is not None else self.label)


# --- one monotone orbit segment -------------------------------------------

class _Segment:
    """Monotone piece from p_start to p_end; r_* is level minus F at each end."""

    def __init__(self, model, p_start, p_end, r_start, r_end, tol=1e-14):
        self.rising = p_end >= p_start
        if self.rising:
            a, b, r_a, r_b = p_start, p_end, r_start, r_end
        else:
            a, b, r_a, r_b = p_end, p_start, r_end, r_start
        self.model, self.a, self.b, self.r_a, self.r_b = model, a, b, r_a, r_b
        self.w = b - a
        if self.w <= 0.0:
            self.g = None
            self.T = 0.0
            return
        g, _ = _segment_integrand(model, a, b, r_a, r_b)
        self.g = _adaptive_chebyshev(lambda t: g(t), tol)
        self.X = self.g.integ(lbnd=0.0)
        self.T = float(self.X(1.0))

    def s_of_t(self, t):
        return self.a + self.w * np.sin(0.5 * np.pi * t) ** 2

    def t_of_x(self, xl):
        """Parameter t with X(t) = xl (xl measured from the p = a end)."""
        return _invert_monotone(self.X, self.g, xl, self.T)

    def sample(self, xl):
        """(p, p') at local distance xl in [0, T] from the start of the piece."""
        xl = np.clip(np.asarray(xl, dtype=float), 0.0, self.T)
        if self.g is None:
            return np.full_like(xl, self.a), np.zeros_like(xl)
        t = self.t_of_x(xl if self.rising else self.T - xl)
        s = self.s_of_t(t)
        half = 0.5 * np.pi * t
        S, C = np.sin(half), np.cos(half)
        speed = np.empty_like(t)
        # interior: chain rule through x(t); ends: energy relation, which
        # stays accurate where dx/dt vanishes at a boundary point
        inner = S * C > 1e-3
        speed[inner] = np.pi * self.w * S[inner] * C[inner] / self.g(t[inner])
        end = ~inner
        if end.any():
            left = end & (S <= C)
            right = end & (S > C)
            m = self.model
            va = self.r_a - (s[left] - self.a) * m.mean_f(np.full(left.sum(), self.a), s[left])
            vb = self.r_b + (self.b - s[right]) * m.mean_f(s[right], np.full(right.sum(), self.b))
            speed[left] = np.sqrt(2.0 * np.maximum(va, 0.0))
            speed[right] = np.sqrt(2.0 * np.maximum(vb, 0.0))
        return s, speed if self.rising else -speed


def _adaptive_chebyshev(func, tol, deg=32, max_deg=1 << 14):
    while True:
        cheb = Chebyshev.interpolate(func, deg, domain=[0.0, 1.0])
        scale = np.max(np.abs(cheb.coef))
        if np.max(np.abs(cheb.coef[-4:])) <= tol * scale or deg >= max_deg:
            return cheb
        deg *= 2


def _invert_monotone(X, dX, y, T, n_table=2049, iters=60):
    """Vectorised safeguarded Newton for X(t) = y on [0, 1], X increasing."""
    y = np.asarray(y, dtype=float)
    tt = np.linspace(0.0, 1.0, n_table)
    XX = np.maximum.accumulate(X(tt))
    k = np.clip(np.searchsorted(XX, y) - 1, 0, n_table - 2)
    lo, hi = tt[k], tt[k + 1]
    span = np.where(XX[k + 1] > XX[k], XX[k + 1] - XX[k], 1.0)
    t = lo + (hi - lo) * np.clip((y - XX[k]) / span, 0.0, 1.0)
    for _ in range(iters):
        r = X(t) - y
        lo = np.where(r < 0, t, lo)
        hi = np.where(r > 0, t, hi)
        d = dX(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            tn = t - r / d
        bad = ~np.isfinite(tn) | (tn <= lo) | (tn >= hi)
        tn = np.where(bad, 0.5 * (lo + hi), tn)
        if np.all(np.abs(tn - t) <= 1e-15):
            t = tn
            break
        t = tn
    return t


def _assemble(model, env, pieces, n_grid, kind, energy, label):
    """Profile on the uniform grid from monotone pieces ordered from -L to L."""
    segs = [_Segment(model, *pc) for pc in pieces]
    T = np.array([s.T for s in segs])
    total = T.sum()
    x = _grid(env.L, n_grid)
    # map x in [-L, L] onto orbit time, absorbing the O(root tol) mismatch
    tau = (x + env.L) * (total / (2.0 * env.L))
    edges = np.concatenate([[0.0], np.cumsum(T)])
    idx = np.clip(np.searchsorted(edges, tau, side="right") - 1, 0, len(segs) - 1)
    p = np.empty_like(x)
    dp = np.empty_like(x)
    for i, seg in enumerate(segs):
        sel = idx == i
        if sel.any():
            p[sel], dp[sel] = seg.sample(tau[sel] - edges[i])
    return SteadyProfile(kind, x, np.clip(p, 0.0, 1.0), dp, float(energy), label)


def _grid(L, n):
    if n < 3 or n % 2 == 0:
        raise ValueError(f"n_grid must be odd and >= 3, got {n}")
    half = L * np.linspace(0.0, 1.0, n // 2 + 1)
    return np.concatenate([-half[:0:-1], half])


# --- symmetric monotone solutions -----------------------------------------

def _scan_roots(func, pts, xtol=ROOT_XTOL, vals=None):
    """All roots of func on sorted pts: sign changes plus tangential minima."""
    if vals is None:
        vals = np.array([func(q) for q in pts])
    roots = []
    idx, zeros = scan_sign_changes(vals)
    roots += [float(pts[i]) for i in zeros]
    for i in idx:
        roots.append(optimize.brentq(func, pts[i], pts[i + 1], xtol=xtol))
    # double roots hide between grid points near local extrema of func
    for k in range(1, len(vals) - 1):
        v = vals[k]
        if v > 0 and vals[k - 1] > v < vals[k + 1]:
            q, m = grid_then_golden(func, pts[k - 1:k + 2], tol=1e-12)
        elif v < 0 and vals[k - 1] < v > vals[k + 1]:
            q, m = grid_then_golden(lambda z: -func(z), pts[k - 1:k + 2], tol=1e-12)
            m = -m
        else:
            continue
        if abs(m) <= 1e-10:
            roots.append(q)
        elif np.sign(m) != np.sign(v):
            roots.append(optimize.brentq(func, pts[k - 1], q, xtol=xtol))
            roots.append(optimize.brentq(func, q, pts[k + 1], xtol=xtol))
    return _dedupe(sorted(roots))


def _dedupe(xs, tol=DEDUPE):
    out = []
    for v in xs:
        if not out or abs(v - out[-1]) > tol:
            out.append(v)
    return out


@dataclass(frozen=True)
class BranchScan:
    """Time map sampled over a branch domain; independent of L."""

    branch: str
    q: np.ndarray
    T: np.ndarray
    singular_ends: tuple = ()


def scan_branch(model: ReactionModel, env: BoundaryEnv, branch: str,
                n_scan: int = N_SCAN) -> BranchScan:
    dom = time_map_domain(model, env, branch)
    q = dom.scan_points(n_scan)
    ends = tuple(e for e, flag in ((dom.lo, dom.singular_lo), (dom.hi, dom.singular_hi)) if flag)
    return BranchScan(branch, q, np.array([time_map(model, env, branch, v) for v in q]), ends)


def _log_polish(func, scan, q, L):
    """Re-solve a root close to a divergent end in log(distance to the end).

    There the time map grows like -log|q - end|, so an absolute tolerance
    on q is far too coarse in L.
    """
    width = scan.q[-1] - scan.q[0]
    for end in scan.singular_ends:
        if abs(q - end) > 1e-3 * width:
            continue
        j = int(np.searchsorted(scan.q, q))
        if not 0 < j < len(scan.q):
            return q
        a, b = scan.q[j - 1], scan.q[j]
        if (scan.T[j - 1] - L) * (scan.T[j] - L) > 0:
            return q
        side = 1.0 if q > end else -1.0
        g = lambda u: func(end + side * math.exp(u))
        ua, ub = math.log(abs(a - end)), math.log(abs(b - end))
        u = optimize.brentq(g, min(ua, ub), max(ua, ub), xtol=1e-15)
        return end + side * math.exp(u)
    return q


def roots_from_scan(model, env, scan: BranchScan, L: float) -> list:
    """Roots of time_map(q) = L using a precomputed scan."""
    if len(scan.q) == 0:
        return []
    for end in scan.singular_ends:
        k = 0 if abs(scan.q[0] - end) < abs(scan.q[-1] - end) else -1
        if L > scan.T[k]:
            raise ConvergenceError(
                f"a {scan.branch} root for L={L} lies within {abs(scan.q[k] - end):.1e} of the "
                f"divergent end {end}, below what double precision resolves "
                f"(largest resolvable L is {scan.T[k]:.4g})")
    func = lambda q: time_map(model, env, scan.branch, q) - L
    return [_log_polish(func, scan, q, L) for q in _scan_roots(func, scan.q, vals=scan.T - L)]


def solve_boundary_values(model: ReactionModel, env: BoundaryEnv, branch: str,
                          n_scan: int = N_SCAN) -> list:
    """Boundary values q = p(L) of all symmetric monotone solutions of a branch.

    Roots of time_map(q) = L located by a sign-change scan. When
    p_ext = theta the constant solution is included as the value theta.
    """
    out = [model.theta] if env.p_ext == model.theta else []
    roots = roots_from_scan(model, env, scan_branch(model, env, branch, n_scan), env.L)
    return sorted(out + [q for q in roots if not (out and abs(q - out[0]) < DEDUPE)])


def reconstruct_profile(model: ReactionModel, env: BoundaryEnv, branch: str,
                        p_at_L: float, n_grid: int = N_GRID, label: str = "") -> SteadyProfile:
    """Symmetric monotone profile with boundary value p_at_L (a branch root)."""
    x = _grid(env.L, n_grid)
    if env.p_ext == model.theta and p_at_L == model.theta:
        return constant_profile(model, env, n_grid)
    err = time_map(model, env, branch, p_at_L) - env.L
    if not abs(err) <= 1e-7 * max(1.0, env.L):
        raise ValueError(f"p(L)={p_at_L} is not a {branch} boundary value for L={env.L} "
                         f"(time map misses by {err:.2e})")
    c = float(_G(model, env, p_at_L))
    gamma = turning_value(model, env, branch, p_at_L)
    r = 0.5 * env.D**2 * (p_at_L - env.p_ext) ** 2
    seg = _Segment(model, gamma, p_at_L, 0.0, r)
    m = n_grid // 2
    xr = x[m:]
    # stretch the half orbit onto [0, L] exactly, then mirror
    pr, dpr = seg.sample(xr * (seg.T / env.L))
    p = np.clip(np.concatenate([pr[:0:-1], pr]), 0.0, 1.0)
    dp = np.concatenate([-dpr[:0:-1], dpr])
    return SteadyProfile(branch, x, p, dp, c, label)


def constant_profile(model, env, n_grid=N_GRID) -> SteadyProfile:
    x = _grid(env.L, n_grid)
    th = model.theta
    return SteadyProfile(CONSTANT, x, np.full_like(x, th), np.zeros_like(x),
                         float(model.F(th)), "theta")


# --- non-monotone solutions -----------------------------------------------

def nonmonotone_levels(model, env, families=None, n_levels=N_SCAN):
    """(key, level) pairs whose orbit has total length 2L."""
    families = families or nonmonotone_families(model, env)
    band = level_band(model, env, families)
    if band is None:
        return []
    levels = level_scan(*band, n_levels, level_breaks(model, env))
    rows: dict = {}
    for c in levels:
        for key, half, _ in orbit_candidates(model, env, c, families):
            rows.setdefault(key, []).append(c)
    out = []
    for key, cs in rows.items():
        def func(c, key=key):
            for k, half, _ in orbit_candidates(model, env, c, families):
                if k == key:
                    return half - env.L
            return math.nan
        # each family is continuous on its run of levels; scan each run
        cs = np.array(cs)
        out += [(key, c) for c in _scan_roots(func, cs, xtol=1e-22)]
    return out


def construct_non_monotone(model: ReactionModel, env: BoundaryEnv, n_grid: int = N_GRID,
                           families=None, single_extremum: bool = False) -> list:
    """All T3 (and, as applicable, T4/T5) steady states of length 2L.

    Both orientations of each orbit are returned. Orbits that collapse onto
    a symmetric monotone solution (equal boundary values) are dropped.
    """
    families = families or nonmonotone_families(model, env, single_extremum)
    profiles = []
    for key, c in nonmonotone_levels(model, env, families):
        for k, half, pieces in orbit_candidates(model, env, c, families):
            if k != key:
                continue
            if abs(pieces[0][0] - pieces[-1][1]) < DEDUPE:
                continue
            name = key[0] if len(key) == 1 else f"{key[0]}({key[1]},{key[2]})"
            prof = _assemble(model, env, pieces, n_grid, NONSM, c, name)
            profiles += [prof, prof.mirrored(name + "'")]
    return profiles


# --- verification and census ----------------------------------------------

@dataclass(frozen=True)
class Residual:
    interior_norm: float
    bc_left: float
    bc_right: float
    energy_drift: float


def profile_residual(model: ReactionModel, env: BoundaryEnv, profile: SteadyProfile) -> Residual:
    """Finite-difference residuals of -p'' = f(p) and the Robin conditions."""
    x, p = np.asarray(profile.x), np.asarray(profile.p)
    if len(x) < 3:
        raise ValueError("profile needs at least 3 grid points")
    h = np.diff(x)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0.0):
        raise ValueError("profile grid is not uniform")
    h = h[0]
    interior = (p[2:] - 2.0 * p[1:-1] + p[:-2]) / h**2 + model.f(p[1:-1])
    d_left = (-3.0 * p[0] + 4.0 * p[1] - p[2]) / (2.0 * h)
    d_right = (3.0 * p[-1] - 4.0 * p[-2] + p[-3]) / (2.0 * h)
    E = 0.5 * np.asarray(profile.dp) ** 2 + model.F(p)
    return Residual(float(np.max(np.abs(interior))),
                    float(abs(-d_left + env.D * (p[0] - env.p_ext))),
                    float(abs(d_right + env.D * (p[-1] - env.p_ext))),
                    float(np.max(E) - np.min(E)))


def find_steady_states(model: ReactionModel, env: BoundaryEnv, n_grid: int = N_GRID,
                       nonmonotone: bool = True, single_extremum: bool = False) -> list:
    """Every steady state the toolkit can construct, labelled.

    SD profiles are labelled SD1, SD2, ... by decreasing p(0); SI profiles
    SI1, SI2, ... by increasing p(0).
    """
    out = []
    if env.p_ext == model.theta:
        out.append(constant_profile(model, env, n_grid))
    for branch, rev in ((SD, True), (SI, False)):
        roots = [q for q in solve_boundary_values(model, env, branch)
                 if not (env.p_ext == model.theta and q == model.theta)]
        profs = [reconstruct_profile(model, env, branch, q, n_grid) for q in roots]
        profs.sort(key=lambda pr: pr.p_at_0, reverse=rev)
        out += [SteadyProfile(pr.kind, pr.x, pr.p, pr.dp, pr.energy, f"{branch}{i + 1}")
                for i, pr in enumerate(profs)]
    if nonmonotone:
        out += construct_non_monotone(model, env, n_grid, single_extremum=single_extremum)
    return out
