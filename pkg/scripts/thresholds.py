"""Landmarks and existence thresholds of the default Wolbachia model for a few (p_ext, D)."""
import argparse

from bistable_robin.reaction import compute_landmarks, make_wolbachia_reaction
from bistable_robin.timemap import BoundaryEnv, compute_thresholds, critical_diffusion_Dstar


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pairs", default="0.1:0.05,0.8:0.05,0.8:0.5",
                    help="comma separated p_ext:D pairs")
    args = ap.parse_args()
    model = make_wolbachia_reaction()
    lm = compute_landmarks(model)
    print(f"theta={lm.theta:.6f} alpha1={lm.alpha1:.6f} beta={lm.beta:.6f} alpha2={lm.alpha2:.6f}")
    print(f"{'p_ext':>6} {'D':>6} {'M_d':>12} {'M_i':>12} {'M_star':>12} {'D_star':>10}")
    for pair in args.pairs.split(","):
        pext, D = map(float, pair.split(":"))
        th = compute_thresholds(model, BoundaryEnv(1.0, D, pext))
        Ds = critical_diffusion_Dstar(model, pext)
        print(f"{pext:6g} {D:6g} {th.M_d.value:12.6f} {th.M_i.value:12.6f} "
              f"{th.M_star.value:12.6f} {'-' if Ds is None else f'{Ds:10.6f}':>10}")


if __name__ == "__main__":
    main()
