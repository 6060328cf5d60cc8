"""Commutation defect of the x- and t-flows against integrator tolerance."""
import argparse

from dubrovin.integrator import verify_commute
from dubrovin.spectrum import validate_gapset

SETS = {
    "one-gap": ([(1.0, 2.0)], [0.7]),
    "three-gap": ([(1.0, 2.0), (3.0, 3.5), (5.0, 5.2)], [0.7, 2.0, 4.1]),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--x", type=float, default=1.0)
    ap.add_argument("--t", type=float, default=1.0)
    ap.add_argument("--nmax", type=int, default=2)
    args = ap.parse_args()

    tols = [1e-6, 1e-7, 1e-8, 1e-9, 1e-10, 1e-11]
    print(f"{'set':>10} {'n':>2} " + " ".join(f"{t:>9.0e}" for t in tols))
    for name, (gaps, phi) in SETS.items():
        S = validate_gapset(gaps)
        for n in range(args.nmax + 1):
            row = [verify_commute(S, n, phi, args.x, args.t, tol, tol) for tol in tols]
            print(f"{name:>10} {n:2d} " + " ".join(f"{d:9.2e}" for d in row))


if __name__ == "__main__":
    main()
