"""Long-time behaviour from constant and steady-state initial data."""
import argparse

import numpy as np

from bistable_robin.pde import SimConfig, relax_to_steady
from bistable_robin.reaction import make_wolbachia_reaction
from bistable_robin.steady import NONSM, find_steady_states
from bistable_robin.timemap import BoundaryEnv

SCENARIOS = [(0.1, 0.05, 0.5), (0.1, 0.05, 8.96), (0.8, 0.05, 2.0), (0.8, 0.05, 12.0),
             (0.8, 0.5, 12.0)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--t-max", type=float, default=3000.0)
    ap.add_argument("--tol", type=float, default=1e-10)
    args = ap.parse_args()
    model = make_wolbachia_reaction()
    cfg = SimConfig(t_max=args.t_max)
    for pext, D, L in SCENARIOS:
        env = BoundaryEnv(L, D, pext)
        profs = find_steady_states(model, env)
        starts = [(f"{v:g}", v) for v in (0.0, 0.5, 1.0)]
        starts += [(p.label, lambda x, p=p: np.interp(x, p.x, p.p))
                   for p in profs if p.kind == NONSM][:1]
        for name, init in starts:
            res, tr = relax_to_steady(model, env, init, cfg, args.tol, candidates=profs)
            print(f"p_ext={pext} D={D} L={L} from {name:12s} -> {res.label:5s} "
                  f"distance {res.distance:.2e} at t={tr.times[-1]:.0f}")


if __name__ == "__main__":
    main()
