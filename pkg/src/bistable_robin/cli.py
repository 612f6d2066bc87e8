"""Command-line front end.

    bistable-robin analyze --preset table1 --pext 0.1 --D 0.05 -o report.json
    bistable-robin steady --pext 0.1 --D 0.05 --L 0.5 --class all -o prof.csv
    bistable-robin sweep --pext 0.1 --D 0.05 --L-min 0.5 --L-max 2 --n-points 16 -o sweep.csv

Exit status: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict

import numpy as np

from ._numerics import ConvergenceError
from .pde import (DegenerateStateError, SimConfig, SystemConfig, epsilon_convergence_study,
                  simulate_scalar, simulate_system)
from .reaction import TABLE1, WolbachiaParams, compute_landmarks, make_cubic_reaction, \
    make_wolbachia_reaction
from .stability import classify_stability, principal_eigenvalue
from .steady import NONSM, find_steady_states, roots_from_scan, scan_branch
from .timemap import SD, SI, BoundaryEnv, compute_thresholds

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3

FORMATS = """\
Profiles CSV (steady):
  header  x,p,class,label
  one block of rows per solution, blocks separated by a blank line;
  class is SD, SI, NonSM or Constant.

Trajectory CSV (simulate):
  scalar  t,x,p
  system  t,x,n_i,n_u,p_eps
  one row per (snapshot time, grid node).

Sweep CSV (sweep):
  header  L,branch,p_at_L
  one row per boundary-value root; an L with no root on either branch
  gets a single row with empty branch and p_at_L fields.

Epsilon study CSV (epsilon-study):
  header  epsilon,L2_error,Linf_error

Report JSON (analyze, stability):
  {"model": {...}, "env": {"L", "D", "p_ext"} (L null without --L),
   "landmarks": {"theta", "alpha1", "alpha2", "beta"},
   "thresholds": {"M_d", "M_i", "M_star"[, "D_star"]},
   "lambda1": number, "solutions": [{"class", "label", "p_at_L", "p_at_0",
   "p_at_minus_L", "verdict", "mu1"}]}
  Thresholds are the string "0", the string "inf" or a number. D_star is
  present only when p_ext > beta. lambda1 and solutions need --L.

Floats are written in shortest round-trip form. Config files (--config)
hold key=value lines using the long option names without dashes
(e.g. pext=0.1); command-line flags win over the file.
"""

PARAM_KEYS = ("b_u", "d_u", "delta", "s_f", "s_h", "K", "sigma")


class HelpFormats(argparse.Action):
    def __init__(self, option_strings, dest, **kw):
        super().__init__(option_strings, dest, nargs=0, default=argparse.SUPPRESS, **kw)

    def __call__(self, parser, namespace, values, option_string=None):
        print(FORMATS, end="")
        parser.exit()


def _common(p, need_L=False):
    g = p.add_argument_group("model and environment")
    g.add_argument("--config", help="key=value file; flags take precedence")
    g.add_argument("--model", choices=("wolbachia", "cubic"))
    g.add_argument("--preset", choices=("table1",))
    g.add_argument("--theta", type=float, help="cubic model root")
    for k in PARAM_KEYS:
        g.add_argument(f"--{k.replace('_', '-')}", dest=k, type=float)
    g.add_argument("--pext", type=float)
    g.add_argument("--D", type=float)
    g.add_argument("--L", type=float, help="half length" + ("" if need_L else " (optional)"))
    p.add_argument("-o", "--output")
    p.add_argument("--jobs", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="bistable-robin", description=__doc__.split("\n")[0])
    parser.add_argument("--help-formats", action=HelpFormats, help="describe output formats")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="landmarks, thresholds and (with --L) solutions")
    _common(p)
    p = sub.add_parser("steady", help="steady-state profiles as CSV")
    _common(p, need_L=True)
    p.add_argument("--class", dest="klass", choices=("SD", "SI", "NonSM", "all"))
    p.add_argument("--n-grid", dest="n_grid", type=int)
    p = sub.add_parser("stability", help="stability verdicts as JSON")
    _common(p, need_L=True)
    p.add_argument("--n-grid", dest="n_grid", type=int)
    p = sub.add_parser("simulate", help="time integration, trajectory CSV")
    _common(p, need_L=True)
    p.add_argument("--init", help="constant in [0,1] or a steady label such as SI1")
    p.add_argument("--system", action="store_const", const=True,
                   help="two-species model instead of the scalar limit")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--dx", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--snapshots", help="comma separated times")
    p = sub.add_parser("sweep", help="boundary values against L")
    _common(p)
    p.add_argument("--L-min", dest="L_min", type=float)
    p.add_argument("--L-max", dest="L_max", type=float)
    p.add_argument("--n-points", dest="n_points", type=int)
    p = sub.add_parser("epsilon-study", help="p_eps against p0 for several epsilon")
    _common(p, need_L=True)
    p.add_argument("--eps", help="comma separated, decreasing")
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--dx", type=float)
    p.add_argument("--dt", type=float)
    return parser


DEFAULTS = dict(model="wolbachia", jobs=1, klass="all", n_grid=1001, t_max=100.0,
                epsilon=0.01, n_points=32, eps="0.1,0.05,0.01", init="0.5", system=False)
STRINGS = {"model", "preset", "output", "klass", "init", "snapshots", "eps", "config", "command"}


def _merge_config(args):
    """Fill options not given on the command line from --config."""
    if not args.config:
        return
    known = {k for k in vars(args) if k not in ("command", "config")}
    with open(args.config) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{args.config}:{n}: expected key=value, got {line!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            key = {"class": "klass"}.get(key, key)
            if key not in known:
                raise ValueError(f"{args.config}:{n}: unknown key {key!r}")
            if getattr(args, key) is not None:
                continue
            if key in STRINGS:
                setattr(args, key, val)
            elif key in ("jobs", "n_grid", "n_points"):
                setattr(args, key, int(val))
            elif key == "system":
                setattr(args, key, val.lower() in ("1", "true", "yes"))
            else:
                setattr(args, key, float(val))


def _finalize(args):
    for k, v in DEFAULTS.items():
        if hasattr(args, k) and getattr(args, k) is None:
            setattr(args, k, v)


def _model(args):
    if args.model == "cubic":
        if args.theta is None:
            raise ValueError("--theta is required for the cubic model")
        return make_cubic_reaction(args.theta)
    base = asdict(TABLE1)
    overrides = {k: getattr(args, k) for k in PARAM_KEYS if getattr(args, k) is not None}
    return make_wolbachia_reaction(WolbachiaParams(**{**base, **overrides}))


def _env(args, need_L):
    for k in ("pext", "D"):
        if getattr(args, k) is None:
            raise ValueError(f"--{k} is required")
    L = args.L
    if L is None:
        if need_L:
            raise ValueError("--L is required")
        L = 1.0
    return BoundaryEnv(L, args.D, args.pext)


def _num(v):
    """Shortest round-trip float; extended reals as "0"/"inf"."""
    return repr(float(v))


def _ext(v):
    v = float(v)
    if v == 0.0:
        return "0"
    if math.isinf(v):
        return "inf"
    return v


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, text, summary):
    if args.output:
        _atomic_write(args.output, text)
        print(f"wrote {args.output}: {summary}")
    else:
        sys.stdout.write(text)


def _model_json(model):
    if model.kind == "cubic":
        return {"kind": "cubic", "theta": model.theta}
    return {"kind": "wolbachia", "params": asdict(model.params)}


def _report(model, env, with_solutions, n_grid=1001):
    lm = compute_landmarks(model)
    th = compute_thresholds(model, env)
    thresholds = {"M_d": _ext(th.M_d.value), "M_i": _ext(th.M_i.value),
                  "M_star": _ext(th.M_star.value)}
    if th.D_star is not None:
        thresholds["D_star"] = th.D_star
    out = {"model": _model_json(model),
           "env": {"L": env.L if with_solutions else None, "D": env.D, "p_ext": env.p_ext},
           "landmarks": {"theta": lm.theta, "alpha1": lm.alpha1, "alpha2": lm.alpha2,
                         "beta": lm.beta},
           "thresholds": thresholds}
    if with_solutions:
        out["lambda1"] = principal_eigenvalue(env)
        out["solutions"] = _solutions(model, env, n_grid)
    return out


def _solutions(model, env, n_grid):
    rows = []
    for prof in find_steady_states(model, env, n_grid):
        v = classify_stability(model, env, prof)
        rows.append({"class": prof.kind, "label": prof.label, "p_at_L": prof.p_at_L,
                     "p_at_0": prof.p_at_0, "p_at_minus_L": prof.p_at_minus_L,
                     "verdict": v.verdict, "mu1": v.mu1,
                     "fprime_min": v.fprime_min, "fprime_max": v.fprime_max})
    return rows


def cmd_analyze(args):
    model = _model(args)
    env = _env(args, need_L=False)
    rep = _report(model, env, args.L is not None)
    t = rep["thresholds"]
    _emit(args, json.dumps(rep, indent=2) + "\n",
          f"M_d={t['M_d']} M_i={t['M_i']} M_star={t['M_star']}")


def cmd_stability(args):
    model = _model(args)
    env = _env(args, need_L=True)
    rep = _report(model, env, True, args.n_grid)
    _emit(args, json.dumps(rep, indent=2) + "\n",
          f"{len(rep['solutions'])} solution(s), lambda1={rep['lambda1']:.6g}")


def cmd_steady(args):
    model = _model(args)
    env = _env(args, need_L=True)
    profs = find_steady_states(model, env, args.n_grid, nonmonotone=args.klass in ("all", NONSM))
    if args.klass != "all":
        profs = [p for p in profs if p.kind == args.klass]
    blocks = []
    for prof in profs:
        blocks.append("".join(f"{_num(x)},{_num(p)},{prof.kind},{prof.label}\n"
                              for x, p in zip(prof.x, prof.p)))
    text = "x,p,class,label\n" + "\n".join(blocks)
    _emit(args, text, f"{len(profs)} profile(s) " + " ".join(p.label for p in profs))


def _parse_list(s, name):
    try:
        return [float(v) for v in s.split(",") if v.strip()]
    except ValueError as exc:
        raise ValueError(f"--{name}: expected comma separated numbers, got {s!r}") from exc


def cmd_simulate(args):
    model = _model(args)
    env = _env(args, need_L=True)
    snaps = _parse_list(args.snapshots, "snapshots") if args.snapshots else ()
    cfg = SimConfig(dx=args.dx, dt=args.dt, t_max=args.t_max, snapshot_times=tuple(snaps))
    if args.system:
        if model.kind != "wolbachia":
            raise ValueError("--system needs the wolbachia model")
        traj = simulate_system(SystemConfig(model.params, args.epsilon), env, cfg)
        names = ("n_i", "n_u", "p_eps")
    else:
        try:
            init = float(args.init)
        except ValueError:
            match = [p for p in find_steady_states(model, env) if p.label == args.init]
            if not match:
                raise ValueError(f"--init {args.init!r} is neither a number nor a steady label")
            prof = match[0]
            init = lambda x: np.interp(x, prof.x, prof.p)
        traj = simulate_scalar(model, env, init, cfg)
        names = ("p",)
    lines = ["t,x," + ",".join(names) + "\n"]
    for k, t in enumerate(traj.times):
        cols = [traj.fields[nm][k] for nm in names]
        for j, x in enumerate(traj.x):
            lines.append(",".join([_num(t), _num(x)] + [_num(c[j]) for c in cols]) + "\n")
    note = f", {traj.clipped} clipped step(s)" if traj.clipped else ""
    _emit(args, "".join(lines), f"{len(traj.times)} snapshot(s) on {len(traj.x)} nodes{note}")


def _sweep_branch(model, env, branch, Ls):
    scan = scan_branch(model, env, branch)
    return [(L, branch, q) for L in Ls for q in roots_from_scan(model, env, scan, L)]


def sweep_bifurcation(model, p_ext, D, L_range, n_points, jobs=1):
    """Rows (L, branch, p_at_L) of every symmetric monotone solution.

    The time map does not depend on L, so each branch is scanned once and
    every L on the grid reuses the scan.
    """
    L_min, L_max = L_range
    if not 0 < L_min < L_max:
        raise ValueError(f"need 0 < L_min < L_max, got {L_range}")
    if n_points < 2:
        raise ValueError(f"n_points must be >= 2, got {n_points}")
    Ls = np.linspace(L_min, L_max, n_points)
    env = BoundaryEnv(float(L_min), D, p_ext)
    if jobs > 1:
        with ProcessPoolExecutor(min(jobs, 2)) as pool:
            parts = list(pool.map(_sweep_branch, [model] * 2, [env] * 2, (SD, SI), [Ls] * 2))
    else:
        parts = [_sweep_branch(model, env, b, Ls) for b in (SD, SI)]
    rows = parts[0] + parts[1]
    hit = {r[0] for r in rows}
    rows += [(L, "", math.nan) for L in Ls if L not in hit]
    order = {"": -1, SD: 0, SI: 1}
    rows.sort(key=lambda r: (r[0], order[r[1]], r[2]))
    return [(float(L), b, float(q)) for L, b, q in rows]


def cmd_sweep(args):
    model = _model(args)
    if args.pext is None or args.D is None:
        raise ValueError("--pext and --D are required")
    if args.L_min is None or args.L_max is None:
        raise ValueError("--L-min and --L-max are required")
    rows = sweep_bifurcation(model, args.pext, args.D, (args.L_min, args.L_max),
                             args.n_points, args.jobs)
    text = "L,branch,p_at_L\n" + "".join(
        f"{_num(L)},{b},{_num(q) if b else ''}\n" for L, b, q in rows)
    _emit(args, text, f"{len(rows)} root(s) over {args.n_points} values of L")


def cmd_epsilon_study(args):
    model = _model(args)
    if model.kind != "wolbachia":
        raise ValueError("epsilon-study needs the wolbachia model")
    env = _env(args, need_L=True)
    cfg = SimConfig(dx=args.dx, dt=args.dt, t_max=args.t_max)
    rows = epsilon_convergence_study(SystemConfig(model.params), env, cfg,
                                     _parse_list(args.eps, "eps"), args.jobs)
    text = "epsilon,L2_error,Linf_error\n" + "".join(
        f"{_num(r.epsilon)},{_num(r.L2_error)},{_num(r.Linf_error)}\n" for r in rows)
    _emit(args, text, " ".join(f"eps={r.epsilon:g}:L2={r.L2_error:.3e}" for r in rows))


COMMANDS = {"analyze": cmd_analyze, "steady": cmd_steady, "stability": cmd_stability,
            "simulate": cmd_simulate, "sweep": cmd_sweep, "epsilon-study": cmd_epsilon_study}


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _merge_config(args)
        _finalize(args)
        if args.preset == "table1" and args.model == "cubic":
            raise ValueError("--preset table1 applies to the wolbachia model")
        if args.jobs < 1:
            raise ValueError("--jobs must be >= 1")
        COMMANDS[args.command](args)
    except (ConvergenceError, DegenerateStateError, FloatingPointError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def main():
    sys.exit(run_command())
