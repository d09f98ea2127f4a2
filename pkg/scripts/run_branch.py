#!/usr/bin/env python3
"""Continue a bifurcation branch and compare the fitted expansion against the
leading-order formulas.

    python3 scripts/run_branch.py --kappa2 2 --tau triangular --N 128
"""

import argparse
import json

import numpy as np

from vortexlattice import bifurcation as bif
from vortexlattice.cli import parse_tau, write_csv
from vortexlattice.lattice import normalize_tau


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--kappa2", type=float, default=2.0)
    ap.add_argument("--tau", default="square")
    ap.add_argument("--s-max", type=float, default=0.1)
    ap.add_argument("--s-points", type=int, default=5)
    ap.add_argument("--N", type=int, default=128)
    ap.add_argument("--K-lev", type=int, default=40)
    ap.add_argument("--outdir", default=".")
    args = ap.parse_args()

    kappa = np.sqrt(args.kappa2)
    shape, _ = normalize_tau(parse_tau(args.tau))
    s_grid = np.linspace(args.s_max / args.s_points, args.s_max, args.s_points)
    branch = bif.solve_branch(s_grid, kappa, shape, N=args.N, K_lev=args.K_lev)

    cfg = vars(args)
    rows = [[p.s, p.lam, p.b, p.energy, p.residual_psi, p.residual_alpha,
             p.max_curl_a, p.min_abs_psi] for p in branch.points]
    write_csv(f"{args.outdir}/branch_scan.csv", cfg,
              ["s", "lambda", "b", "energy", "residual_psi", "residual_alpha",
               "max_curl_a", "min_abs_psi"], np.array(rows))

    rep = bif.fit_expansion(branch, kappa, shape)
    with open(f"{args.outdir}/branch_expansion.json", "w") as fh:
        json.dump(rep.to_dict(), fh, indent=2)
    print(f"beta(tau) = {branch.beta:.10f}")
    print(f"fitted  d(lambda)/d(s^2) = {rep.g_lambda_prime0:.9f}")
    print(f"formula ((k^2-1/2) beta + 1/2) = {rep.g_lambda_prime0_target:.9f}")
    print(f"|curl a1 - (1-|psi0|^2)/2|_inf = {rep.curl_a1_sup_err:.2e}")
    print(f"energy defect slope = {rep.energy_slope:.2f}")


if __name__ == "__main__":
    main()
