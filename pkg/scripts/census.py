"""Steady states and their stability for the scenarios of the Wolbachia study."""
import argparse

from bistable_robin.reaction import make_wolbachia_reaction
from bistable_robin.stability import classify_stability
from bistable_robin.steady import find_steady_states
from bistable_robin.timemap import BoundaryEnv

SCENARIOS = [(0.1, 0.05, 0.5), (0.1, 0.05, 8.96), (0.8, 0.05, 2.0), (0.8, 0.05, 12.0),
             (0.8, 0.5, 12.0)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-grid", type=int, default=1001)
    args = ap.parse_args()
    model = make_wolbachia_reaction()
    for pext, D, L in SCENARIOS:
        env = BoundaryEnv(L, D, pext)
        profs = find_steady_states(model, env, args.n_grid)
        print(f"p_ext={pext} D={D} L={L}: {len(profs)} steady state(s)")
        for p in profs:
            v = classify_stability(model, env, p)
            print(f"  {p.label:14s} p(-L)={p.p_at_minus_L:.6f} p(0)={p.p_at_0:.6f} "
                  f"p(L)={p.p_at_L:.6f}  f' in [{v.fprime_min:+.4f}, {v.fprime_max:+.4f}] "
                  f"lambda1={v.lambda1:.5f}  {v.verdict:18s} mu1={v.mu1:+.6f}")


if __name__ == "__main__":
    main()
