"""Distance between the two-species proportion and the scalar limit at t = 50 days."""
import argparse
import time

from bistable_robin.pde import SimConfig, SystemConfig, epsilon_convergence_study
from bistable_robin.timemap import BoundaryEnv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", default="0.1,0.05,0.01")
    ap.add_argument("--L", type=float, default=2.0)
    ap.add_argument("--t-max", type=float, default=50.0)
    ap.add_argument("--refine", action="store_true", help="also run epsilon=min with dx, dt halved")
    args = ap.parse_args()
    eps = [float(e) for e in args.eps.split(",")]
    env = BoundaryEnv(args.L, 0.05, 0.1)
    cfg = SimConfig(t_max=args.t_max)
    t0 = time.perf_counter()
    rows = epsilon_convergence_study(SystemConfig(), env, cfg, eps)
    print(f"{'epsilon':>8} {'L2':>12} {'Linf':>12}")
    for r in rows:
        print(f"{r.epsilon:8g} {r.L2_error:12.4e} {r.Linf_error:12.4e}")
    if args.refine:
        sys0 = SystemConfig(epsilon=eps[-1])
        fine = SimConfig(t_max=args.t_max, dx=args.L / 400, dt=cfg.step(sys0.rate_bound()) / 2)
        r = epsilon_convergence_study(SystemConfig(), env, fine, eps[-1:])[0]
        print(f"refined  {r.L2_error:12.4e} {r.Linf_error:12.4e} "
              f"(change {abs(r.L2_error / rows[-1].L2_error - 1):.1%})")
    print(f"{time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
