"""PDE residual of a one-gap KdV-n sheet under successive grid halving."""
import argparse
import time

import numpy as np

from dubrovin.integrator import solve_sheet, verify_pde
from dubrovin.spectrum import validate_gapset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=1)
    ap.add_argument("--phi0", type=float, default=0.7)
    ap.add_argument("--levels", type=int, default=3)
    ap.add_argument("--nx", type=int, default=512)
    ap.add_argument("--nt", type=int, default=64)
    ap.add_argument("--dx", type=float, default=0.02)
    ap.add_argument("--dt", type=float, default=0.005)
    args = ap.parse_args()

    S = validate_gapset([(1.0, 2.0)])
    print(f"{'nx':>6} {'nt':>5} {'dx':>9} {'dt':>9} {'max':>10} {'rms':>10} {'ratio':>6} {'sec':>6}")
    prev = None
    for lvl in range(args.levels):
        k = 2**lvl
        nx, nt, dx, dt = args.nx * k, args.nt * k, args.dx / k, args.dt / k
        t0 = time.perf_counter()
        sheet = solve_sheet(S, args.n, [args.phi0], np.arange(nx) * dx, np.arange(nt) * dt)
        rep = verify_pde(sheet, args.n)
        ratio = f"{prev / rep.max:6.2f}" if prev else "     -"
        print(f"{nx:6d} {nt:5d} {dx:9.5f} {dt:9.6f} {rep.max:10.3e} {rep.rms:10.3e} {ratio} "
              f"{time.perf_counter() - t0:6.2f}")
        prev = rep.max


if __name__ == "__main__":
    main()
