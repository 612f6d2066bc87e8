"""Semi-implicit finite differences for the scalar problem and the two-species system.

Each step solves (I - dt A Lap) u_new = u + dt (R(u) + boundary source):
diffusion is backward Euler, reaction explicit. The Robin condition
du/dnu = -D (u - u_ext) enters through a ghost node eliminated with the
centred flux, so the boundary row reads (2 u_1 - 2 (1 + h D) u_0 + 2 h D u_ext) / h^2.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from ._numerics import ConvergenceError
from .reaction import ReactionModel, WolbachiaParams, TABLE1
from .steady import SteadyProfile, find_steady_states
from .timemap import BoundaryEnv

log = logging.getLogger(__name__)

CLIP_TOL = 1e-12


class DegenerateStateError(ArithmeticError):
    """Total density vanished at a node, so the proportion is undefined."""


@dataclass(frozen=True)
class SimConfig:
    """Discretisation settings; ``None`` picks the documented defaults.

    dx defaults to L/200 and dt to min(0.1, 0.25 / max reaction rate).
    """

    dx: Optional[float] = None
    dt: Optional[float] = None
    t_max: float = 100.0
    A: float = 1.0
    snapshot_times: Sequence[float] = ()

    def __post_init__(self):
        if self.dx is not None and not self.dx > 0:
            raise ValueError(f"dx must be > 0, got {self.dx}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.t_max > 0:
            raise ValueError(f"t_max must be > 0, got {self.t_max}")
        if not self.A > 0:
            raise ValueError(f"A must be > 0, got {self.A}")
        if any(t < 0 or t > self.t_max for t in self.snapshot_times):
            raise ValueError("snapshot times must lie in [0, t_max]")

    def grid(self, L):
        dx = self.dx if self.dx is not None else L / 200.0
        n = max(int(round(2.0 * L / dx)), 2) + 1
        return np.linspace(-L, L, n)

    def step(self, rate_bound):
        """Time step, checked against the explicit-reaction bound dt <= 0.5 / rate."""
        dt = self.dt if self.dt is not None else min(0.1, 0.25 / rate_bound)
        if dt > 0.5 / rate_bound:
            raise ValueError(f"dt={dt} violates the explicit reaction bound "
                             f"dt <= 0.5/max|rate| = {0.5 / rate_bound:.4g}")
        # shrink so that t_max is an integer number of steps
        return self.t_max / math.ceil(self.t_max / dt - 1e-9)


@dataclass(frozen=True)
class SystemConfig:
    """Two-species model with fecundity scale epsilon.

    Exterior densities default to p_ext K and (1 - p_ext) K; initial
    densities default to K/2 each (proportion 1/2, total K).
    """

    params: WolbachiaParams = TABLE1
    epsilon: float = 0.01
    n_i_ext: Optional[float] = None
    n_u_ext: Optional[float] = None
    n_i_init: object = None
    n_u_init: object = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.n_u_ext is not None and not self.n_u_ext > 0:
            raise ValueError(f"n_u_ext must be > 0, got {self.n_u_ext}")
        if self.n_i_ext is not None and not self.n_i_ext >= 0:
            raise ValueError(f"n_i_ext must be >= 0, got {self.n_i_ext}")

    def exterior(self, p_ext):
        K = self.params.K
        n_i = self.n_i_ext if self.n_i_ext is not None else p_ext * K
        n_u = self.n_u_ext if self.n_u_ext is not None else (1.0 - p_ext) * K
        return n_i, n_u

    def rate_bound(self):
        P = self.params
        return P.b_u / self.epsilon + P.delta * P.d_u

    def rates(self, n_i, n_u):
        P = self.params
        N = n_i + n_u
        if np.any(N < 1e-300):
            raise DegenerateStateError("total density below 1e-300; proportion undefined")
        logistic = P.b_u / self.epsilon * (1.0 - N / P.K)
        r_i = (1.0 - P.s_f) * logistic * n_i - P.delta * P.d_u * n_i
        r_u = logistic * (1.0 - P.s_h * n_i / N) * n_u - P.d_u * n_u
        return r_i, r_u


@dataclass(frozen=True)
class Trajectory:
    """Snapshots of one run. ``fields`` maps a name to an (n_snapshots, n_x) array."""

    times: np.ndarray
    x: np.ndarray
    fields: dict
    rates: np.ndarray
    clipped: int = 0
    max_clip: float = 0.0
    converged: Optional[bool] = None

    @property
    def final(self):
        return {k: v[-1] for k, v in self.fields.items()}


def _field(init, x, name):
    if init is None:
        raise ValueError(f"{name} is required")
    if callable(init):
        v = np.asarray(init(x), dtype=float)
    else:
        v = np.asarray(init, dtype=float)
    v = np.broadcast_to(v, x.shape).astype(float)
    if v.shape != x.shape:
        raise ValueError(f"{name} has shape {v.shape}, grid has {x.shape}")
    return v


def robin_operator(n, h, D, A=1.0):
    """Sparse A * Lap with the ghost-node Robin rows, and the unit-source vector.

    The boundary source for exterior value u_ext is ``u_ext * src``.
    """
    main = np.full(n, -2.0)
    upper = np.ones(n - 1)
    lower = np.ones(n - 1)
    main[0] = main[-1] = -2.0 * (1.0 + h * D)
    upper[0] = 2.0
    lower[-1] = 2.0
    lap = sparse.diags([lower, main, upper], [-1, 0, 1], format="csc") * (A / h**2)
    src = np.zeros(n)
    src[0] = src[-1] = 2.0 * D * A / h
    return lap, src


def integrate(x, u0, reaction, D, exteriors, A, dt, t_max, snapshot_times=(),
              rate_tol=None, bounds=None):
    """Generic driver for k coupled fields sharing one diffusion operator.

    ``reaction(list_of_fields) -> list_of_rates``. ``bounds=(lo, hi)`` clips
    after each step and counts clips beyond CLIP_TOL. With ``rate_tol`` the
    run stops once max|u_new - u| / dt < rate_tol.
    """
    n = len(x)
    h = (x[-1] - x[0]) / (n - 1)
    lap, src = robin_operator(n, h, D, A)
    solver = splu((sparse.identity(n, format="csc") - dt * lap).tocsc())
    u = [np.array(v, dtype=float) for v in u0]
    nsteps = int(round(t_max / dt))
    marks = {0, nsteps} | {int(round(t / dt)) for t in snapshot_times}
    snaps, times, rates = [[v.copy() for v in u]], [0.0], [math.nan]
    clipped, max_clip = 0, 0.0
    rate = math.nan
    converged = None
    for k in range(1, nsteps + 1):
        r = reaction(u)
        new = [solver.solve(v + dt * (rv + ext * src)) for v, rv, ext in zip(u, r, exteriors)]
        if bounds is not None:
            lo, hi = bounds
            for v in new:
                excess = max(float(np.max(lo - v)), float(np.max(v - hi)), 0.0)
                if excess > CLIP_TOL:
                    clipped += 1
                    max_clip = max(max_clip, excess)
                np.clip(v, lo, hi, out=v)
        rate = max(float(np.max(np.abs(a - b))) for a, b in zip(new, u)) / dt
        u = new
        stop = rate_tol is not None and rate < rate_tol
        if k in marks or stop:
            snaps.append([v.copy() for v in u])
            times.append(k * dt)
            rates.append(rate)
        if stop:
            converged = True
            break
    else:
        if rate_tol is not None:
            converged = False
    if clipped:
        log.warning("%d step(s) clipped to bounds, largest excess %.3e", clipped, max_clip)
    stacked = [np.array([s[i] for s in snaps]) for i in range(len(u0))]
    return np.array(times), stacked, np.array(rates), clipped, max_clip, converged


def max_abs_fprime(model: ReactionModel) -> float:
    pts = np.array([0.0, 1.0, model.theta, *model.fprime_critical])
    return float(np.max(np.abs(model.fprime(pts))))


def simulate_scalar(model: ReactionModel, env: BoundaryEnv, p_init, cfg: SimConfig = SimConfig(),
                    rate_tol=None) -> Trajectory:
    """p_t = A p_xx + f(p) on (-L, L) with Robin data towards p_ext."""
    x = cfg.grid(env.L)
    p0 = _field(p_init, x, "p_init")
    if np.any(p0 < 0) or np.any(p0 > 1):
        raise ValueError("p_init must take values in [0, 1]")
    dt = cfg.step(max_abs_fprime(model))
    times, (P,), rates, nclip, mclip, conv = integrate(
        x, [p0], lambda u: [model.f(u[0])], env.D, [env.p_ext], cfg.A, dt, cfg.t_max,
        cfg.snapshot_times, rate_tol, bounds=(0.0, 1.0))
    return Trajectory(times, x, {"p": P}, rates, nclip, mclip, conv)


def simulate_system(sys: SystemConfig, env: BoundaryEnv, cfg: SimConfig = SimConfig()) -> Trajectory:
    """Both species with the same scheme; also returns p_eps = n_i / (n_i + n_u)."""
    x = cfg.grid(env.L)
    K = sys.params.K
    n_i0 = _field(sys.n_i_init if sys.n_i_init is not None else 0.5 * K, x, "n_i_init")
    n_u0 = _field(sys.n_u_init if sys.n_u_init is not None else 0.5 * K, x, "n_u_init")
    if np.any(n_i0 < 0) or np.any(n_u0 < 0):
        raise ValueError("initial densities must be nonnegative")
    if not np.any(n_u0 > 0):
        raise ValueError("uninfected initial density must not vanish identically")
    dt = cfg.step(sys.rate_bound())
    times, (Ni, Nu), rates, nclip, mclip, conv = integrate(
        x, [n_i0, n_u0], lambda u: list(sys.rates(u[0], u[1])), env.D, sys.exterior(env.p_ext),
        cfg.A, dt, cfg.t_max, cfg.snapshot_times, bounds=(0.0, math.inf))
    tot = Ni + Nu
    if np.any(tot < 1e-300):
        raise DegenerateStateError("total density below 1e-300; proportion undefined")
    return Trajectory(times, x, {"n_i": Ni, "n_u": Nu, "p_eps": Ni / tot}, rates, nclip, mclip)


def l2_linf(x, a, b):
    """Trapezoidal L2 norm and sup norm of a - b on grid x."""
    d = np.asarray(a) - np.asarray(b)
    return math.sqrt(float(np.trapezoid(d * d, x))), float(np.max(np.abs(d)))


@dataclass(frozen=True)
class EpsilonRow:
    epsilon: float
    L2_error: float
    Linf_error: float


def epsilon_convergence_study(sys_base: SystemConfig, env: BoundaryEnv, cfg: SimConfig,
                              eps_list, jobs: int = 1) -> list:
    """Distance between p_eps and the limit p0 at cfg.t_max for each epsilon."""
    eps_list = [float(e) for e in eps_list]
    if any(e <= 0 for e in eps_list):
        raise ValueError("epsilon values must be positive")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("epsilon values must be strictly decreasing")
    from .reaction import make_wolbachia_reaction

    model = make_wolbachia_reaction(sys_base.params)
    K = sys_base.params.K
    n_i0 = sys_base.n_i_init if sys_base.n_i_init is not None else 0.5 * K
    n_u0 = sys_base.n_u_init if sys_base.n_u_init is not None else 0.5 * K
    x = cfg.grid(env.L)
    p_init = _field(n_i0, x, "n_i_init") / (_field(n_i0, x, "n_i_init") + _field(n_u0, x, "n_u_init"))
    ref = simulate_scalar(model, env, p_init, cfg).final["p"]
    systems = [replace(sys_base, epsilon=e) for e in eps_list]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(jobs) as pool:
            finals = list(pool.map(_final_p_eps, systems, [env] * len(systems), [cfg] * len(systems)))
    else:
        finals = [_final_p_eps(s, env, cfg) for s in systems]
    return [EpsilonRow(e, *l2_linf(x, p, ref)) for e, p in zip(eps_list, finals)]


def _final_p_eps(sys, env, cfg):
    return simulate_system(sys, env, cfg).final["p_eps"]


@dataclass(frozen=True)
class RelaxResult:
    label: str
    kind: str
    distance: float
    converged: bool
    final_rate: float


def relax_to_steady(model: ReactionModel, env: BoundaryEnv, p_init, cfg: SimConfig = SimConfig(),
                    tol: float = 1e-9, candidates=None, strict: bool = False):
    """Run until the sup-norm time derivative drops below ``tol`` and name the
    closest steady state by L2 distance. Returns (RelaxResult, Trajectory)."""
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    traj = simulate_scalar(model, env, p_init, cfg, rate_tol=tol)
    if strict and not traj.converged:
        raise ConvergenceError(f"no steady state reached by t={cfg.t_max}: "
                               f"final rate {traj.rates[-1]:.3e} >= {tol:.1e}")
    if candidates is None:
        candidates = find_steady_states(model, env)
    x, p = traj.x, traj.final["p"]
    best = None
    for prof in candidates:
        d = l2_linf(x, p, np.interp(x, prof.x, prof.p))[0]
        if best is None or d < best[0]:
            best = (d, prof)
    if best is None:
        return RelaxResult("", "", math.inf, bool(traj.converged), float(traj.rates[-1])), traj
    d, prof = best
    return RelaxResult(prof.label, prof.kind, d, bool(traj.converged), float(traj.rates[-1])), traj
