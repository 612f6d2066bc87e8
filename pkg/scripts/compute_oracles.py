"""Independent reference values, frozen into tests/data/oracles.json.

Nothing here imports the package. The reaction is re-coded from its closed
form, the primitive comes from adaptive quadrature, and steady states are
found by shooting the ODE -p'' = f(p) from the left end with solve_ivp, so
the time-map machinery is never used.

    python3 scripts/compute_oracles.py            # print and write
    python3 scripts/compute_oracles.py --dry-run  # print only
"""
from __future__ import annotations

import argparse
import json
import math
import time
from pathlib import Path

import numpy as np
from scipy import integrate, optimize

OUT = Path(__file__).resolve().parents[1] / "tests" / "data" / "oracles.json"

# default Wolbachia reaction
BU, DU, DELTA, SF, SH = 1.12, 0.27, 10.0 / 9.0, 0.1, 0.8
THETA = (SF + DELTA - 1.0) / (DELTA * SH)
SCALE = DELTA * DU * SH
RTOL, ATOL = 1e-11, 1e-13
# Robin hits come in close pairs near tangencies; a step cap keeps both visible
MAX_STEP = 0.02


def f(p):
    return SCALE * p * (1 - p) * (p - THETA) / (SH * p * p - (SF + SH) * p + 1)


def fprime(p):
    n = p * (1 - p) * (p - THETA)
    dn = (1 - p) * (p - THETA) - p * (p - THETA) + p * (1 - p)
    q = SH * p * p - (SF + SH) * p + 1
    dq = 2 * SH * p - (SF + SH)
    return SCALE * (dn * q - n * dq) / q**2


def F(p):
    return integrate.quad(f, 0.0, p, epsabs=1e-15, epsrel=1e-13)[0]


def landmarks():
    beta = optimize.brentq(F, THETA + 1e-9, 1.0, xtol=1e-15)
    a1 = optimize.brentq(fprime, 1e-6, THETA, xtol=1e-15)
    a2 = optimize.brentq(fprime, THETA, 1 - 1e-6, xtol=1e-15)
    return {"theta": THETA, "beta": beta, "alpha1": a1, "alpha2": a2,
            "f_half": float(f(0.5)), "fprime_theta": float(fprime(THETA)), "F1": F(1.0)}


def lambda1(L, D):
    s = optimize.bisect(lambda s: s * math.tan(s) - L * D, 0.0, math.pi / 2 - 1e-15, xtol=1e-16)
    return (s / L) ** 2


# shooting from the centre: half-length of a symmetric monotone profile

def half_length_centre(p0, D, pext):
    """x at which the Robin condition holds first, starting from p(0)=p0, p'(0)=0."""
    rhs = lambda x, y: [y[1], -f(y[0])]
    robin = lambda x, y: y[1] + D * (y[0] - pext)
    robin.terminal = True
    turn = lambda x, y: y[1]
    turn.terminal = True
    turn.direction = 1 if p0 > THETA else -1
    out = lambda x, y: y[0] * (1 - y[0])
    out.terminal = True
    sol = integrate.solve_ivp(rhs, (0, 200.0), [p0, 0.0], method="DOP853", rtol=RTOL, atol=ATOL,
                              events=(robin, turn, out), max_step=MAX_STEP)
    if len(sol.t_events[0]):
        return sol.t_events[0][0]
    return math.nan


def min_half_length(lo, hi, D, pext, n=400):
    ps = np.linspace(lo, hi, n)
    vals = np.array([half_length_centre(p, D, pext) for p in ps])
    k = int(np.nanargmin(vals))
    res = optimize.minimize_scalar(lambda p: half_length_centre(p, D, pext),
                                   bounds=(ps[max(k - 1, 0)], ps[min(k + 1, n - 1)]),
                                   method="bounded", options={"xatol": 1e-12})
    return float(res.fun), float(res.x)


# shooting from the left end: every solution of the boundary value problem

def left_shot(a, D, pext, s_max):
    """Robin hits along the orbit starting at p(-L)=a with p'(-L)=D(a-pext).

    Returns a list of (s, n_extrema_before) with s = x + L.
    """
    rhs = lambda s, y: [y[1], -f(y[0])]
    robin = lambda s, y: y[1] + D * (y[0] - pext)
    turn = lambda s, y: y[1]
    out = lambda s, y: y[0] * (1 - y[0])
    out.terminal = True
    sol = integrate.solve_ivp(rhs, (0, s_max), [a, D * (a - pext)], method="DOP853", rtol=RTOL,
                              atol=ATOL, events=(robin, turn, out), dense_output=True,
                              max_step=MAX_STEP)
    turns = sol.t_events[1]
    hits = [s for s in sol.t_events[0] if s > 1e-9]
    return [(s, int(np.sum(turns < s - 1e-12))) for s in hits], sol


def shoot_profile(a, D, pext, s_end):
    rhs = lambda s, y: [y[1], -f(y[0])]
    sol = integrate.solve_ivp(rhs, (0, s_end), [a, D * (a - pext)], method="DOP853", rtol=RTOL,
                              atol=ATOL, dense_output=True)
    return sol


def census(L, D, pext, n=2000, max_hits=6):
    """All solutions of half-length L, as dicts keyed by the left value a = p(-L).

    For each a the j-th Robin hit s_j(a) along the shot is a function of a;
    solutions are the roots of s_j(a) = 2L. Hit indices can jump where two
    hits are born at a tangency, so every bracketed root is re-shot and kept
    only if it lands on 2L.
    """
    s_max = 2 * L * 1.05
    u = np.linspace(0, 1, n + 2)[1:-1]
    grid = 0.5 - 0.5 * np.cos(np.pi * u)
    hits = np.full((n, max_hits), np.nan)
    for i, a in enumerate(grid):
        h = left_shot(a, D, pext, s_max)[0][:max_hits]
        hits[i, :len(h)] = [s for s, _ in h]

    def hit(a, j):
        h = left_shot(a, D, pext, s_max)[0]
        return h[j][0] if len(h) > j else math.nan

    def edge(j, good, bad):
        # the j-th hit disappears where the orbit leaves [0, 1]; hit times
        # blow up there, so close in on the last point that still has one
        for _ in range(60):
            mid = 0.5 * (good + bad)
            if math.isnan(hit(mid, j)):
                bad = mid
            else:
                good = mid
        return good

    found = []
    for j in range(max_hits):
        vals = hits[:, j] - 2 * L
        brackets = [(grid[i], grid[i + 1]) for i in np.nonzero(vals[:-1] * vals[1:] < 0)[0]]
        for i in range(n - 1):
            fin = [k for k in (i, i + 1) if not math.isnan(vals[k])]
            if len(fin) == 1 and vals[fin[0]] < 0:
                g = grid[fin[0]]
                e = edge(j, g, grid[2 * i + 1 - fin[0]])
                if hit(e, j) > 2 * L:
                    brackets.append((min(g, e), max(g, e)))
        for lo, hi in brackets:
            try:
                a = optimize.brentq(lambda a: hit(a, j) - 2 * L, lo, hi, xtol=1e-14)
            except ValueError:
                continue
            h = left_shot(a, D, pext, s_max)[0]
            if len(h) <= j or abs(h[j][0] - 2 * L) > 1e-8:
                continue
            sol = shoot_profile(a, D, pext, 2 * L)
            b = float(sol.y[0, -1])
            found.append({"a": a, "b": b, "extrema": h[j][1], "p0": float(sol.sol(L)[0]),
                          "bc_residual": float(abs(sol.y[1, -1] + D * (b - pext)))})
    found.sort(key=lambda r: r["a"])
    return found


def linear_mu1(a, L, D, pext):
    """Smallest eigenvalue of -phi'' - f'(p) phi with Robin ends, by shooting."""
    sol = shoot_profile(a, D, pext, 2 * L)
    ss = np.linspace(0, 2 * L, 4001)
    fp = fprime(sol.sol(ss)[0])
    lam = lambda1(L, D)
    lo, hi = lam - fp.max() - 1e-6, lam - fp.min() + 1e-6

    def R(mu):
        rhs = lambda s, y: [y[1], -f(y[0]), y[3], -(fprime(y[0]) + mu) * y[2]]
        y0 = [a, D * (a - pext), 1.0, D]
        r = integrate.solve_ivp(rhs, (0, 2 * L), y0, method="DOP853", rtol=RTOL, atol=ATOL)
        return r.y[3, -1] + D * r.y[2, -1]

    mus = np.linspace(lo, hi, 200)
    vals = [R(m) for m in mus]
    for i in range(len(mus) - 1):
        if vals[i] * vals[i + 1] < 0:
            return optimize.brentq(R, mus[i], mus[i + 1], xtol=1e-14)
    raise RuntimeError("no eigenvalue in the Rayleigh bracket")


def tangency_Dstar(pext, Ffun, ffun, lo, hi):
    """D at which G(q) = F(q) + D^2 (q-pext)^2/2 first touches zero."""
    H = lambda q: Ffun(q) - 0.5 * ffun(q) * (q - pext)
    q = optimize.brentq(H, lo, hi, xtol=1e-15)
    return q, math.sqrt(-2 * Ffun(q)) / (pext - q)


def _edge(valid, good, bad):
    """Bisect the boundary between a valid and an invalid shooting parameter."""
    for _ in range(60):
        mid = 0.5 * (good + bad)
        if valid(mid):
            good = mid
        else:
            bad = mid
    return good


def nonsm_infimum(D, pext, n_extrema, lo, hi, n=600):
    """Infimum of the half-length over orbits whose closing hit has n_extrema.

    The closing hit is the first hit preceded by n_extrema turning points
    whose end value differs from a (a symmetric orbit is not counted).
    The infimum may sit at the edge of the family, so a grid minimum next to
    an invalid neighbour is followed to the edge by bisection.
    """
    def half(a):
        h, sol = left_shot(a, D, pext, 60.0)
        for s, e in h:
            if e == n_extrema and abs(sol.sol(s)[0] - a) > 1e-9:
                return s / 2
        return math.nan

    grid = np.linspace(lo, hi, n)
    vals = np.array([half(a) for a in grid])
    k = int(np.nanargmin(vals))
    best = (float(vals[k]), float(grid[k]))
    for nb in (k - 1, k + 1):
        if 0 <= nb < n and not np.isfinite(vals[nb]):
            a = _edge(lambda a: np.isfinite(half(a)), grid[k], grid[nb])
            best = min(best, (half(a), a))
        elif 0 <= nb < n:
            lo_, hi_ = sorted((grid[k], grid[nb]))
            r = optimize.minimize_scalar(half, bounds=(lo_, hi_), method="bounded",
                                         options={"xatol": 1e-12})
            if np.isfinite(r.fun):
                best = min(best, (float(r.fun), float(r.x)))
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--dry-run", action="store_true")
    args = ap.parse_args()
    t0 = time.time()
    out = {"landmarks": landmarks()}
    out["lambda1"] = {"1,1": lambda1(1, 1), "8.96,0.05": lambda1(8.96, 0.05),
                      "12,0.05": lambda1(12, 0.05)}
    th = THETA
    out["M_d_0.1_0.05"], _ = min_half_length(th + 1e-6, 1 - 1e-6, 0.05, 0.1)
    out["M_i_0.8_0.05"], _ = min_half_length(1e-6, th - 1e-6, 0.05, 0.8)
    out["M_star_T3_0.1_0.05"], out["M_star_T3_argmin"] = nonsm_infimum(0.05, 0.1, 2, 0.1, 0.99)
    out["M_T5_0.1_0.05"], out["M_T5_argmin"] = nonsm_infimum(0.05, 0.1, 1, 0.1, 0.99)
    out["M_T4_0.8_0.05"], out["M_T4_argmin"] = nonsm_infimum(0.05, 0.8, 1, 0.01, 0.8)
    q, Ds = tangency_Dstar(0.8, F, f, th, 0.8 - 1e-9)
    out["D_star_0.8"] = Ds
    out["D_star_0.8_q"] = q
    # cubic theta = 0.2
    Fc = lambda p: -p**4 / 4 + 0.4 * p**3 - 0.1 * p**2
    fc = lambda p: p * (1 - p) * (p - 0.2)
    qc, Dc = tangency_Dstar(0.9, Fc, fc, 0.2, 0.9 - 1e-9)
    out["cubic_0.2"] = {"beta": (1.6 - math.sqrt(0.96)) / 2,
                        "alpha1": (2.4 - math.sqrt(3.36)) / 6,
                        "alpha2": (2.4 + math.sqrt(3.36)) / 6,
                        "F_0.3": Fc(0.3), "G_0.1_0.5_0.3": Fc(0.3) + 0.125 * 0.04,
                        "qbar_0.1_1": optimize.brentq(lambda q: fc(q) + (q - 0.1), 0.1, 0.2,
                                                      xtol=1e-15),
                        "pbar_star_0.9": qc, "D_star_0.9": Dc}
    print(json.dumps(out, indent=1))
    scen = {}
    for key, (pext, D, L) in {"0.1,0.05,0.5": (0.1, 0.05, 0.5), "0.1,0.05,8.96": (0.1, 0.05, 8.96),
                              "0.8,0.05,2": (0.8, 0.05, 2.0), "0.8,0.05,12": (0.8, 0.05, 12.0),
                              "0.8,0.5,12": (0.8, 0.5, 12.0)}.items():
        t = time.time()
        sols = census(L, D, pext)
        for s in sols:
            s["mu1"] = linear_mu1(s["a"], L, D, pext)
        scen[key] = sols
        print(key, f"{time.time() - t:.0f}s")
        for s in sols:
            print("   ", {k: round(v, 9) if isinstance(v, float) else v for k, v in s.items()})
    out["census"] = scen
    out["elapsed_s"] = round(time.time() - t0, 1)
    if not args.dry_run:
        OUT.parent.mkdir(parents=True, exist_ok=True)
        OUT.write_text(json.dumps(out, indent=1) + "\n")
        print("wrote", OUT)


if __name__ == "__main__":
    main()
