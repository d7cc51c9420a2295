"""Stability threshold mu* as a function of the angiogenesis rate alpha.

Sweeps alpha on a log grid for several stationary radii on both sides of the
critical radius and writes one CSV row per (r0, alpha) pair.

    python3 scripts/threshold_vs_alpha.py --out threshold_vs_alpha.csv
"""

import argparse

import numpy as np

from tumordelay import modes
from tumordelay.profile import write_columns


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--r0", type=float, nargs="+", default=[1.0, 1.5, 2.0, 2.5, 3.0, 5.0])
    ap.add_argument("--alpha-min", type=float, default=0.05)
    ap.add_argument("--alpha-max", type=float, default=50.0)
    ap.add_argument("--count", type=int, default=200)
    ap.add_argument("--sigma-bar", type=float, default=1.0)
    ap.add_argument("--out", default="threshold_vs_alpha.csv")
    args = ap.parse_args()

    alphas = np.geomspace(args.alpha_min, args.alpha_max, args.count)
    rows = modes.stability_map(alphas, args.r0, mu=1.0, sigma_bar=args.sigma_bar)
    write_columns(args.out, {k: [r[k] for r in rows] for k in ("r0", "alpha", "mu_star", "dmu_dalpha")})

    r_crit = modes.critical_radius()
    print(f"critical radius {r_crit:.9f}")
    for r0 in args.r0:
        mus = np.array([r["mu_star"] for r in rows if r["r0"] == r0])
        trend = "decreasing" if np.all(np.diff(mus) < 0) else "not monotone"
        print(f"r0 = {r0:5.2f}: mu* from {mus[0]:10.4f} to {mus[-1]:10.4f}, {trend}")


if __name__ == "__main__":
    main()
