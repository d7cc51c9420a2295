"""Radial simulations converging to the stationary radius.

Starts from half and one-and-a-half times the stationary radius, with and
without delay, and writes each trajectory to ``<out>_tau<tau>_x<factor>.csv``.

    python3 scripts/radial_attractor.py --tau 0 0.02 --out attractor
"""

import argparse

from tumordelay import ModelParams
from tumordelay.radialsim import run
from tumordelay.stationary import solve_stationary_delayed


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--tau", type=float, nargs="+", default=[0.0, 0.02])
    ap.add_argument("--factors", type=float, nargs="+", default=[0.5, 1.5])
    ap.add_argument("--t-end", type=float, default=400.0)
    ap.add_argument("--dt", type=float, default=0.005)
    ap.add_argument("--out", default="attractor")
    args = ap.parse_args()

    base = ModelParams(1.0, 1.0, 0.5, 1.0)
    for tau in args.tau:
        p = base.with_(tau=tau)
        target = solve_stationary_delayed(p).delayed.radius
        for factor in args.factors:
            res = run(p, factor * target, args.t_end, args.dt, record_every=20)
            res.to_csv(f"{args.out}_tau{tau:g}_x{factor:g}.csv")
            rel = (res.limit_radius - target) / target
            print(f"tau = {tau:g}, start {factor:g} R*: converged = {res.converged} "
                  f"at t = {res.t[-1]:.2f}, relative error {rel:.2e}, clamps {res.clamps}")


if __name__ == "__main__":
    main()
