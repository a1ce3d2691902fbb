"""Replicated crackle census from a config file, with Poisson diagnostics per n.

    python3 scripts/poisson_census.py scripts/heavy_alpha2.cfg
"""

import argparse
import sys

from crackle.census import run_replications
from crackle.config import load_config


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)
    report = run_replications(load_config(args.config), workers=args.workers)
    print(f"{'n':>10} {'R_kn':>12} {'mean':>8} {'var':>8} {'lambda':>8} {'TV(fit)':>8} {'p(lambda)':>10}")
    for s in report.summaries:
        lam = s["lambda"]
        p = s.get("fit_to_lambda", {}).get("p_value", float("nan"))
        print(f"{s['n']:>10.3g} {s['R_kn']:>12.5g} {s['mean']:>8.4f} {s['variance']:>8.4f} "
              f"{lam if lam is not None else float('nan'):>8.4f} "
              f"{s['fit_to_empirical_mean']['tv_distance']:>8.4f} {p:>10.3g}")
    print(f"runtime {report.runtime_seconds:.1f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
