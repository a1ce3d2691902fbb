"""Contractibility radii for the Gaussian potential and the simulated coverage/emptiness event."""

import argparse
import math
import sys

from crackle.census import contractibility_event
from crackle.distributions import derive_seed, light_von_mises, sample_cloud
from crackle.scaling import RnRule, contractibility_radii


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=float, nargs="+", default=[1e4, 1e5, 1e6])
    ap.add_argument("--reps", type=int, default=500)
    ap.add_argument("--delta", type=float, default=2.0)
    ap.add_argument("--g", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    dens = light_von_mises(2.0, 1)
    rule = RnRule("log_power", -0.25)
    print(f"{'n':>8} {'r_n':>7} {'R0':>7} {'R1':>7} {'gap/r_n':>8} {'P(cover)':>9} {'P(empty)':>9} "
          f"{'exact':>7} {'P(joint)':>9}")
    for g, n in enumerate(args.n):
        r = rule(n)
        rad = contractibility_radii(n, dens, r, args.delta, args.g, rule)
        events = [contractibility_event(sample_cloud(n, dens, derive_seed(args.seed, g, i)), rad.R0, rad.R1, r)
                  for i in range(args.reps)]
        cover = sum(c for c, _ in events) / args.reps
        empty = sum(e for _, e in events) / args.reps
        joint = sum(c and e for c, e in events) / args.reps
        exact = math.exp(-n * float(dens.radial_sf(rad.R1)))
        print(f"{n:>8.0e} {r:7.4f} {rad.R0:7.4f} {rad.R1:7.4f} {(rad.R1 - rad.R0) / r:8.4f} {cover:9.4f} "
              f"{empty:9.4f} {exact:7.4f} {joint:9.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
