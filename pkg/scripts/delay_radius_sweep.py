"""Delayed stationary radius against its first-order expansion.

Solves the full delayed stationary problem for a range of delays and
compares with ``r0 + tau r1``; the last column should level off at a
constant as the delay shrinks.

    python3 scripts/delay_radius_sweep.py --out delay_radius.csv
"""

import argparse

import numpy as np

from tumordelay import DelayTooLargeError, ModelParams
from tumordelay.profile import write_columns
from tumordelay.stationary import solve_stationary_delayed


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--sigma-bar", type=float, default=1.0)
    ap.add_argument("--sigma-tilde", type=float, default=0.5)
    ap.add_argument("--mu", type=float, default=1.0)
    ap.add_argument("--taus", type=float, nargs="+",
                    default=[0.005, 0.01, 0.02, 0.04, 0.08, 0.16, 0.32, 0.64, 1.28])
    ap.add_argument("--out", default="delay_radius.csv")
    args = ap.parse_args()

    base = ModelParams(args.alpha, args.sigma_bar, args.sigma_tilde, args.mu)
    cols = {k: [] for k in ("tau", "radius", "r0", "r1", "linear", "remainder_over_tau2")}
    for tau in args.taus:
        try:
            rep = solve_stationary_delayed(base.with_(tau=tau))
        except DelayTooLargeError as exc:
            print(f"tau = {tau}: {exc}")
            break
        linear = rep.r0 + tau * rep.r1
        ratio = (rep.delayed.radius - linear) / tau**2
        for k, v in zip(cols, (tau, rep.delayed.radius, rep.r0, rep.r1, linear, ratio)):
            cols[k].append(v)
        print(f"tau = {tau:7.4f}  R = {rep.delayed.radius:.12f}  (R - r0 - tau r1)/tau^2 = {ratio:.6e}")
    write_columns(args.out, {k: np.array(v) for k, v in cols.items()})


if __name__ == "__main__":
    main()
