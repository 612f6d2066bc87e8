"""Phase-plane quantities and existence thresholds for the Robin problem.

Steady states satisfy -p'' = f(p) on (-L, L) with p'(+-L) = -+D (p(+-L) - p_ext).
Along an orbit the energy p'^2/2 + F(p) is constant, so a symmetric
monotone solution is fixed by its boundary value q = p(L): the energy level
is G(q) = F(q) + D^2 (q - p_ext)^2 / 2, the centre value p(0) solves
F(p(0)) = G(q) on the matching branch of F, and the half length is the
time map ``time_map(q)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import integrate, optimize

from ._numerics import ConvergenceError, bracketed_root, grid_then_golden
from .reaction import ReactionModel, compute_landmarks

SD, SI = "SD", "SI"
L_MAX = 1e3
N_SCAN = 512
QUAD_EPSABS = 1e-11
TINY_SEGMENT = 1e-10


@dataclass(frozen=True)
class BoundaryEnv:
    """Half length L, migration rate D and exterior proportion p_ext."""

    L: float
    D: float
    p_ext: float

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"L must be > 0, got {self.L}")
        if not self.D > 0:
            raise ValueError(f"D must be > 0, got {self.D}")
        if not 0 < self.p_ext < 1:
            raise ValueError(f"p_ext must lie in (0, 1), got {self.p_ext}")

    def with_L(self, L: float) -> "BoundaryEnv":
        return replace(self, L=L)


@dataclass(frozen=True)
class Threshold:
    """Extended non-negative real: exactly 0, a finite value, or +inf."""

    value: float
    argmin: Optional[float] = None

    @property
    def kind(self) -> str:
        if self.value == 0.0:
            return "zero"
        return "inf" if math.isinf(self.value) else "finite"

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class ThresholdReport:
    M_d: Threshold
    M_i: Threshold
    M_star: Threshold
    D_star: Optional[float]


@dataclass(frozen=True)
class TimeMapBranch:
    """Admissible boundary values for one branch of the time map.

    ``lo``/``hi`` are the exact interval ends; the time map diverges at
    flagged ends, so evaluation uses the trimmed ``lo_eval``/``hi_eval``.
    """

    branch: str
    lo: float
    hi: float
    singular_lo: bool
    singular_hi: bool
    lo_eval: float
    hi_eval: float
    empty: bool = False

    def scan_points(self, n=N_SCAN):
        """Uniform grid plus geometric clustering towards divergent ends."""
        if self.empty:
            return np.empty(0)
        pts = [np.linspace(self.lo_eval, self.hi_eval, n)]
        width = self.hi_eval - self.lo_eval
        geo = width * np.logspace(-14, -1.5, 56)
        if self.singular_lo:
            pts.append(self.lo + geo)
        if self.singular_hi:
            pts.append(self.hi - geo)
        pts = np.concatenate(pts)
        pts = pts[(pts >= self.lo_eval) & (pts <= self.hi_eval)]
        return np.unique(pts)


def _G(model, env, q):
    return model.F(q) + 0.5 * env.D**2 * (q - env.p_ext) ** 2


def potential_G(model: ReactionModel, env: BoundaryEnv, q: float) -> float:
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    return float(_G(model, env, q))


def minimizer_qbar(model: ReactionModel, env: BoundaryEnv) -> float:
    """Unique critical point of G; it lies between p_ext and theta."""
    th, pe, D2 = model.theta, env.p_ext, env.D**2
    if pe == th:
        return th
    dG = lambda q: float(model.f(q)) + D2 * (q - pe)
    d2G = lambda q: float(model.fprime(q)) + D2
    lo, hi = (pe, th) if pe < th else (th, pe)
    return bracketed_root(dG, lo, hi, d2G, xtol=1e-13)


def invert_F(model: ReactionModel, branch: str, y: float) -> float:
    """Inverse of F restricted to [theta, 1] ("upper") or [0, theta] ("lower")."""
    th = model.theta
    F_th = float(model.F(th))
    if branch == "upper":
        top = float(model.F(1.0))
        if not F_th - 1e-15 <= y <= top + 1e-15:
            raise ValueError(f"y={y} outside upper branch range [{F_th}, {top}]")
        lo, hi = th, 1.0
    elif branch == "lower":
        if not F_th - 1e-15 <= y <= 1e-15:
            raise ValueError(f"y={y} outside lower branch range [{F_th}, 0]")
        lo, hi = 0.0, th
    else:
        raise ValueError(f"unknown branch {branch!r}")
    if y <= F_th:
        return th
    g = lambda p: float(model.F(p)) - y
    if branch == "upper" and y >= top:
        return 1.0
    if branch == "lower" and y >= 0.0:
        return 0.0
    return bracketed_root(g, lo, hi, lambda p: float(model.f(p)), xtol=1e-13)


def _segment_integrand(model, a, b, r_a, r_b):
    """Integrand in t in [0, 1] for the orbit time between a < b.

    The energy level exceeds F by r_a at a and r_b at b (zero at a turning
    point). With s = a + (b - a) sin^2(pi t / 2) the square-root endpoint
    singularities cancel; F differences are taken as interval means so no
    cancellation occurs near the ends.
    """
    w = b - a
    fa, fb = float(model.f(a)), float(model.f(b))

    def g(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        half = 0.5 * np.pi * t
        S, C = np.sin(half), np.cos(half)
        s = a + w * S**2
        out = np.empty_like(t)
        left = S <= C
        with np.errstate(divide="ignore", invalid="ignore"):
            # left half, measured from a
            Sl, Cl, sl = S[left], C[left], s[left]
            m_a = model.mean_f(np.full_like(sl, a), sl)
            if r_a > 0:
                den = 2.0 * (r_a / (w * Sl**2) - m_a)
                val = np.where(Sl > 0, Cl / np.sqrt(den), 0.0)
            else:
                m_a = np.where(Sl > 0, m_a, fa)
                val = Cl / np.sqrt(-2.0 * m_a)
            out[left] = val
            # right half, measured from b
            Sr, Cr, sr = S[~left], C[~left], s[~left]
            m_b = model.mean_f(sr, np.full_like(sr, b))
            if r_b > 0:
                den = 2.0 * (r_b / (w * Cr**2) + m_b)
                val = np.where(Cr > 0, Sr / np.sqrt(den), 0.0)
            else:
                m_b = np.where(Cr > 0, m_b, fb)
                val = Sr / np.sqrt(2.0 * m_b)
            out[~left] = val
        return np.pi * math.sqrt(w) * out

    def s_of_t(t):
        return a + w * np.sin(0.5 * np.pi * np.asarray(t, dtype=float)) ** 2

    return g, s_of_t


def _short_segment_time(model, a, b, r_a, r_b):
    # f is constant to leading order, so the speed |p'| varies linearly in
    # time and the transit time is width / mean speed. Near round-off the
    # endpoint data disagree slightly; the larger speed estimate is used.
    drop = float(model.mean_f(a, b)) * (b - a)
    v_a = math.sqrt(max(2.0 * r_a, 2.0 * (r_b + drop), 0.0))
    v_b = math.sqrt(max(2.0 * r_b, 2.0 * (r_a - drop), 0.0))
    if v_a + v_b == 0.0:
        return 0.0
    return 2.0 * (b - a) / (v_a + v_b)


_GL_SMALL = np.polynomial.legendre.leggauss(64)
_GL_LARGE = np.polynomial.legendre.leggauss(128)


def _gauss(g, rule):
    x, w = rule
    return 0.5 * float(np.dot(w, g(0.5 * (x + 1.0))))


_GL_PANEL = np.polynomial.legendre.leggauss(32)


def _composite(g, panels):
    x, w = _GL_PANEL
    left = np.arange(panels)[:, None] / panels
    t = (left + 0.5 * (x + 1.0) / panels).ravel()
    return 0.5 / panels * float(np.dot(np.tile(w, panels), g(t)))


def segment_time(model, a, b, r_a=0.0, r_b=0.0, epsabs=QUAD_EPSABS):
    """Orbit time from a to b (a < b) at the level F(a) + r_a = F(b) + r_b.

    A 64/128-node Gauss-Legendre pair is accepted when the two agree;
    otherwise composite Gauss-Legendre with doubling panels, and finally
    adaptive Gauss-Kronrod.
    """
    if b <= a:
        return 0.0
    if b - a <= TINY_SEGMENT * max(1.0, abs(b)):
        return _short_segment_time(model, a, b, r_a, r_b)
    g, _ = _segment_integrand(model, a, b, r_a, r_b)
    with np.errstate(all="ignore"):
        coarse, fine = _gauss(g, _GL_SMALL), _gauss(g, _GL_LARGE)
        if math.isfinite(fine) and abs(fine - coarse) <= 0.1 * epsabs * max(1.0, abs(fine)):
            return fine
        # sharp peaks (orbits grazing the saddle): composite rule, panels doubled
        prev = _composite(g, 4)
        for panels in (8, 16, 32, 64, 128, 256):
            val = _composite(g, panels)
            if math.isfinite(val) and abs(val - prev) <= 0.1 * epsabs * max(1.0, abs(val)):
                return val
            prev = val
    scalar = lambda t: float(g(t)[0])
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(scalar, 0.0, 1.0, epsabs=epsabs, epsrel=epsabs, limit=500)
        except integrate.IntegrationWarning as exc:
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(scalar, 0.0, 1.0, epsabs=epsabs, epsrel=epsabs, limit=2000)
            if not err < 1e3 * epsabs:
                raise ConvergenceError(f"orbit quadrature on [{a}, {b}] did not converge "
                                       f"(error estimate {err:.2e})") from exc
    return val


def _time_map_parts(model, env, branch, q):
    """(a, b, r_a, r_b, turning value) of the half orbit for boundary value q."""
    c = float(_G(model, env, q))
    r = 0.5 * env.D**2 * (q - env.p_ext) ** 2
    if branch == SD:
        gamma = invert_F(model, "upper", c)
        return q, gamma, r, 0.0, gamma
    if branch == SI:
        gamma = invert_F(model, "lower", c)
        return gamma, q, 0.0, r, gamma
    raise ValueError(f"unknown branch {branch!r}")


def time_map(model: ReactionModel, env: BoundaryEnv, branch: str, q: float,
             epsabs: float = QUAD_EPSABS) -> float:
    """Half length of the symmetric monotone orbit with p(L) = q.

    SD: integral from q up to F1^-1(G(q)); SI: from F2^-1(G(q)) up to q.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    a, b, r_a, r_b, _ = _time_map_parts(model, env, branch, q)
    return segment_time(model, a, b, r_a, r_b, epsabs)


def turning_value(model, env, branch, q):
    """p(0) of the symmetric monotone orbit with p(L) = q."""
    return _time_map_parts(model, env, branch, q)[4]


def _root_G(model, env, level, lo, hi):
    g = lambda q: float(_G(model, env, q)) - level
    dg = lambda q: float(model.f(q)) + env.D**2 * (q - env.p_ext)
    return bracketed_root(g, lo, hi, dg, xtol=1e-14)


def _trim(model, env, branch, end, inward, width, L_max):
    """Distance from a divergent end where evaluation starts."""
    # below ~1e-14 of the width the level G(q) - F(end) is lost to rounding
    floor = 1e-14 * width
    for k in range(2, 15):
        d = 10.0 ** (-k) * width
        try:
            if time_map(model, env, branch, end + inward * d) >= L_max:
                return d
        except (ValueError, ConvergenceError):
            return 10.0 ** (-k + 1) * width
    return floor


def time_map_domain(model: ReactionModel, env: BoundaryEnv, branch: str,
                    L_max: float = L_MAX, trim: bool = True) -> TimeMapBranch:
    th, pe = model.theta, env.p_ext
    qbar = minimizer_qbar(model, env)
    if branch == SD:
        F1 = float(model.F(1.0))
        lo = pe
        hi = _root_G(model, env, F1, max(pe, qbar), 1.0)
        sing_lo, sing_hi = False, True
    elif branch == SI:
        Gmin = float(_G(model, env, qbar))
        if pe <= th:
            lo, hi = _root_G(model, env, 0.0, 0.0, pe), pe
            sing_lo, sing_hi = True, False
        elif Gmin >= 0.0:
            return TimeMapBranch(SI, math.nan, math.nan, False, False, math.nan, math.nan, True)
        else:
            lo = _root_G(model, env, 0.0, 0.0, qbar)
            if float(model.F(pe)) < -1e-15:
                hi, sing_hi = pe, False
            else:
                hi, sing_hi = _root_G(model, env, 0.0, qbar, pe), True
            sing_lo = True
    else:
        raise ValueError(f"unknown branch {branch!r}")
    width = hi - lo
    lo_eval, hi_eval = lo, hi
    if sing_lo:
        lo_eval = lo + (_trim(model, env, branch, lo, 1.0, width, L_max) if trim else 1e-14 * width)
    if sing_hi:
        hi_eval = hi - (_trim(model, env, branch, hi, -1.0, width, L_max) if trim else 1e-14 * width)
    return TimeMapBranch(branch, lo, hi, sing_lo, sing_hi, lo_eval, hi_eval)


def critical_diffusion_Dstar(model: ReactionModel, p_ext: float) -> Optional[float]:
    """Migration rate above which no SI steady state exists (None if p_ext <= beta)."""
    if not 0 < p_ext < 1:
        raise ValueError(f"p_ext must lie in (0, 1), got {p_ext}")
    lm = compute_landmarks(model)
    if p_ext <= lm.beta:
        return None
    H = lambda q: float(model.F(q)) + 0.5 * float(model.f(q)) * (p_ext - q)
    dH = lambda q: 0.5 * float(model.f(q)) + 0.5 * float(model.fprime(q)) * (p_ext - q)
    pbar = bracketed_root(H, model.theta, p_ext, dH, xtol=1e-14)
    return math.sqrt(float(model.f(pbar)) / (p_ext - pbar))


def monotone_threshold(model: ReactionModel, env: BoundaryEnv, branch: str,
                       n_scan: int = N_SCAN) -> Threshold:
    """Smallest L admitting a symmetric monotone solution of the given branch."""
    th, pe = model.theta, env.p_ext
    if branch == SD and pe >= th:
        return Threshold(0.0, pe)
    if branch == SI and pe <= th:
        return Threshold(0.0, pe)
    dom = time_map_domain(model, env, branch)
    if dom.empty:
        return Threshold(math.inf, None)
    qs = dom.scan_points(n_scan)
    q, val = grid_then_golden(lambda q: time_map(model, env, branch, q), qs)
    return Threshold(val, q)


# --- orbits that are not symmetric-monotone -------------------------------

def level_roots(model, env, level):
    """Roots of G(q) = level on the two monotone pieces of G, tagged "dec"/"inc"."""
    qbar = minimizer_qbar(model, env)
    Gq = float(_G(model, env, qbar))
    out = []
    if level <= Gq:
        return out
    if float(_G(model, env, 0.0)) > level:
        out.append(("dec", _root_G(model, env, level, 0.0, qbar)))
    if float(_G(model, env, 1.0)) > level:
        out.append(("inc", _root_G(model, env, level, qbar, 1.0)))
    return out


ALL_FAMILIES = ("T3", "T4", "T5")


def nonmonotone_families(model, env, single_extremum=False):
    """Orbit families searched for non-SM solutions.

    "T3": one interior maximum and one interior minimum, p(-L) >= p_ext >= p(L).
    "T4": a single interior minimum with p(-L) < p(L) <= p_ext, searched
    by default only when p_ext > beta.
    "T5": a single interior maximum with p_ext <= p(-L) < p(L), the mirror
    image of T4 that exists when p_ext < q_bar. Only with ``single_extremum``
    (which also enables T4 for any p_ext).
    """
    if single_extremum:
        return ALL_FAMILIES
    lm = compute_landmarks(model)
    return ("T3", "T4") if env.p_ext > lm.beta else ("T3",)


def orbit_candidates(model, env, level, families=None):
    """Non-SM orbits at energy ``level``: list of (key, half_length, pieces).

    ``pieces`` lists the monotone segments from x=-L to x=L as
    (p_start, p_end, r_start, r_end). Asymmetric orbits are returned in one
    orientation; the mirror image x -> -x is a solution as well.
    """
    families = families or nonmonotone_families(model, env)
    pe, D2 = env.p_ext, env.D**2
    F_th, F_1 = float(model.F(model.theta)), float(model.F(1.0))
    out = []
    if not F_th < level < F_1:
        return out
    roots = level_roots(model, env, level)
    if not roots:
        return out
    r = lambda q: 0.5 * D2 * (q - pe) ** 2
    with_min = level < 0.0
    if "T3" in families and with_min:
        pmin = invert_F(model, "lower", level)
        pmax = invert_F(model, "upper", level)
        middle = None
        for kl, ql in roots:
            if ql < pe:
                continue
            for kr, qr in roots:
                if qr > pe:
                    continue
                if middle is None:
                    middle = segment_time(model, pmin, pmax)
                t_left = segment_time(model, ql, pmax, r(ql), 0.0)
                t_right = segment_time(model, pmin, qr, 0.0, r(qr))
                pieces = [(ql, pmax, r(ql), 0.0), (pmax, pmin, 0.0, 0.0), (pmin, qr, 0.0, r(qr))]
                out.append((("T3", kl, kr), 0.5 * (t_left + middle + t_right), pieces))
    if "T4" in families and with_min:
        below = [q for _, q in roots if q <= pe]
        if len(below) == 2:
            qa, qb = sorted(below)
            pmin = invert_F(model, "lower", level)
            ta = segment_time(model, pmin, qa, 0.0, r(qa))
            tb = segment_time(model, pmin, qb, 0.0, r(qb))
            pieces = [(qa, pmin, r(qa), 0.0), (pmin, qb, 0.0, r(qb))]
            out.append((("T4",), 0.5 * (ta + tb), pieces))
    if "T5" in families:
        above = [q for _, q in roots if q >= pe]
        if len(above) == 2:
            qa, qb = sorted(above)
            pmax = invert_F(model, "upper", level)
            ta = segment_time(model, qa, pmax, r(qa), 0.0)
            tb = segment_time(model, qb, pmax, r(qb), 0.0)
            pieces = [(qa, pmax, r(qa), 0.0), (pmax, qb, 0.0, r(qb))]
            out.append((("T5",), 0.5 * (ta + tb), pieces))
    return out


def level_band(model, env, families=None):
    """Open interval of energy levels carrying non-SM orbits, or None.

    Orbits with an interior minimum need a level below F(0) = 0; a lone
    interior maximum (T5) only needs a level below F(1).
    """
    families = families or nonmonotone_families(model, env)
    F_th = float(model.F(model.theta))
    Gq = float(_G(model, env, minimizer_qbar(model, env)))
    lo = max(F_th, Gq)
    F_1 = float(model.F(1.0))
    hi = F_1 if "T5" in families else min(0.0, F_1)
    eps = 1e-12 * abs(F_th)
    if not lo + eps < hi - eps:
        return None
    return lo + eps, hi - eps


def level_scan(lo, hi, n=N_SCAN, breaks=()):
    """Uniform levels with geometric clustering towards the band ends and
    towards ``breaks`` (levels where a family starts or stops existing)."""
    width = hi - lo
    geo = width * np.logspace(-10, -1.5, 32)
    pts = [np.linspace(lo, hi, n), lo + geo, hi - geo]
    for c in breaks:
        if lo < c < hi:
            pts += [np.array([c]), c + geo, c - geo]
    pts = np.concatenate(pts)
    return np.unique(pts[(pts >= lo) & (pts <= hi)])


def level_breaks(model, env):
    """Levels where the root structure of G(q) = c changes: G(p_ext), G(0), G(1), F(0)."""
    return tuple(float(_G(model, env, q)) for q in (env.p_ext, 0.0, 1.0)) + (0.0,)


def family_half_length(model, env, key, level, families=None):
    for k, half, _ in orbit_candidates(model, env, level, families):
        if k == key:
            return half
    return math.inf


def nonmonotone_threshold_Mstar(model: ReactionModel, env: BoundaryEnv,
                                n_levels: int = N_SCAN, families=None) -> Threshold:
    """Smallest L admitting a T3 (or, for p_ext > beta, T4) solution.

    ``families`` overrides the searched orbit families (see
    ``nonmonotone_families``).

    ``argmin`` holds the minimising energy level. The infimum may sit on a
    level where a family degenerates (an interior extremum reaching the
    boundary), so those levels are scanned exactly.
    """
    families = families or nonmonotone_families(model, env)
    band = level_band(model, env, families)
    if band is None:
        return Threshold(math.inf, None)
    levels = level_scan(*band, n_levels, level_breaks(model, env))
    by_key: dict = {}
    for c in levels:
        for key, half, _ in orbit_candidates(model, env, c, families):
            by_key.setdefault(key, []).append((c, half))
    best = Threshold(math.inf, None)
    for key, rows in by_key.items():
        cs = np.array([c for c, _ in rows])
        c_opt, val = grid_then_golden(
            lambda c: family_half_length(model, env, key, c, families), cs)
        if val < best.value:
            best = Threshold(val, c_opt)
    return best


def compute_thresholds(model: ReactionModel, env: BoundaryEnv,
                       with_Mstar: bool = True) -> ThresholdReport:
    Md = monotone_threshold(model, env, SD)
    Mi = monotone_threshold(model, env, SI)
    Ms = nonmonotone_threshold_Mstar(model, env) if with_Mstar else Threshold(math.nan)
    return ThresholdReport(Md, Mi, Ms, critical_diffusion_Dstar(model, env.p_ext))
