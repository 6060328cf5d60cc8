"""Synthesize quasi-periodic gap models over (eps, kappa0) and run the Craig checks."""
import argparse

from dubrovin.qpmodel import ModelInconsistent, QPData, check_craig_app, synthesize_gapmodel
from dubrovin.spectrum import check_craig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.001, 0.01, 0.1, 1.0])
    ap.add_argument("--kappa0", type=float, nargs="+", default=[0.0, 0.25, 0.5, 1.0])
    ap.add_argument("--nmax", type=int, default=3)
    ap.add_argument("--mmax", type=int, default=50)
    args = ap.parse_args()

    ns = range(1, args.nmax + 1)
    print(f"{'eps':>7} {'kappa0':>7} {'a':>7} {'b':>5} {'F':>8}  "
          + " ".join(f"craig n={n}" for n in ns) + "  " + " ".join(f"app n={n}" for n in ns))
    for eps in args.eps:
        for k0 in args.kappa0:
            try:
                S, rep = synthesize_gapmodel(QPData(eps=eps, kappa0=k0, Mmax=args.mmax))
            except ModelInconsistent as exc:
                print(f"{eps:7.3g} {k0:7.3g}  inconsistent: {exc}")
                continue
            qp = rep.qp
            craig = ["pass" if check_craig(S, n).passed else "FAIL" for n in ns]
            app = []
            for n in ns:
                try:
                    app.append("pass" if check_craig_app(S, n, qp).passed else "FAIL")
                except ModelInconsistent:
                    app.append("n/a")
            print(f"{eps:7.3g} {k0:7.3g} {qp.a:7.3g} {qp.b:5.2f} {qp.F:8.3g}  "
                  + " ".join(f"{c:>10}" for c in craig) + "  " + " ".join(f"{c:>7}" for c in app))


if __name__ == "__main__":
    main()
