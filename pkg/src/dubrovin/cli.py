"""Command-line front end.

Exit status: 0 when every check passes, 2 when a verification fails and 1
on usage or input errors.  Artifacts go to ``--out`` (written atomically)
or to stdout.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from typing import Optional, Sequence

import numpy as np

from . import hierarchy, integrator, qpmodel, weyl
from .dirichlet import parse_phi
from .flows import sample_bound_violations
from .spectrum import DivergenceError, GapSetError, check_craig, load_spectrum

EXIT_OK, EXIT_INPUT, EXIT_FAIL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# helpers


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _count(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return v


def _range(text: str) -> tuple:
    try:
        a, b = (float(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'start,stop', got {text!r}") from None
    return a, b


def _complex(text: str) -> complex:
    try:
        parts = [float(s) for s in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 're,im', got {text!r}") from None
    if len(parts) == 1:
        parts.append(0.0)
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 're,im', got {text!r}")
    return complex(parts[0], parts[1])


def write_artifact(text: str, path: Optional[str]) -> None:
    """Write ``text`` to ``path`` atomically, or to stdout when ``path`` is None."""
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        mask = os.umask(0)
        os.umask(mask)
        os.chmod(tmp, 0o666 & ~mask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _finite(x: float):
    return x if math.isfinite(x) else str(x)


def _status(ok: bool) -> int:
    return EXIT_OK if ok else EXIT_FAIL


def _load(args):
    S = load_spectrum(args.spectrum)
    phi = parse_phi(S, args.phi0)
    return S, phi


def _emit(args, doc: dict, ok: bool) -> int:
    doc = dict(doc)
    doc["pass"] = bool(ok)
    write_artifact(_dump(doc), args.out)
    return _status(ok)


# ---------------------------------------------------------------------------
# commands


def cmd_hierarchy(args) -> int:
    n = args.n
    f = hierarchy.fhat(n + 1)
    rhs = hierarchy.kdv_rhs(n)
    R = hierarchy.zero_curvature_residual(n)
    expected = hierarchy.DiffPoly.qt() - rhs
    ok = (all(R[i][j].is_zero() for i, j in ((0, 0), (0, 1), (1, 1)))
          and R[1][0].degree <= 0 and R[1][0][0] == expected)
    text = (f"fhat_{n + 1} = {f.pretty()}\n"
            f"kdv_rhs({n}) = {rhs.pretty()}\n"
            f"zero-curvature residual (z-polynomial entries):\n{hierarchy.format_matrix(R)}\n"
            f"reduces to qt - kdv_rhs({n}): {'yes' if ok else 'no'}\n")
    write_artifact(text, args.out)
    return _status(ok)


def cmd_check_craig(args) -> int:
    S = load_spectrum(args.spectrum)
    report = check_craig(S, args.n, args.tol)
    return _emit(args, report.to_json(), report.passed)


def cmd_flow(args) -> int:
    S, phi = _load(args)
    out = integrator.flow(S, args.n, phi, args.direction, args.s, args.rtol, args.atol)
    write_artifact(out.to_json() + "\n", args.out)
    return EXIT_OK


def _grids(args):
    x = integrator.uniform_grid(*args.x_range, args.nx)
    t = integrator.uniform_grid(*args.t_range, args.nt)
    return x, t


def cmd_sheet(args) -> int:
    S, phi = _load(args)
    x, t = _grids(args)
    sheet = integrator.solve_sheet(S, args.n, phi, x, t, args.rtol, args.atol)
    write_artifact(sheet.to_csv(), args.out)
    return EXIT_OK


def cmd_verify_pde(args) -> int:
    S, phi = _load(args)
    x, t = _grids(args)
    sheet = integrator.solve_sheet(S, args.n, phi, x, t, args.rtol, args.atol)
    rep = integrator.verify_pde(sheet, args.n)
    ok = rep.max <= args.threshold
    return _emit(args, {"max": rep.max, "rms": rep.rms, "valid_nodes": rep.valid,
                        "threshold": args.threshold}, ok)


def cmd_verify_commute(args) -> int:
    S, phi = _load(args)
    d = integrator.verify_commute(S, args.n, phi, args.x, args.t, args.rtol, args.atol)
    return _emit(args, {"discrepancy": d, "threshold": args.threshold}, d <= args.threshold)


def cmd_verify_trace(args) -> int:
    S, phi = _load(args)
    res = integrator.verify_trace_identity(S, args.n, phi, args.h)
    ok = all(v <= args.threshold for v in res.values())
    return _emit(args, {"discrepancy": {str(k): v for k, v in res.items()},
                        "threshold": args.threshold}, ok)


def cmd_verify_weyl_sym(args) -> int:
    S, phi = _load(args)
    t = integrator.uniform_grid(0.0, args.t, args.nt)
    rep = weyl.verify_weyl_evolution(S, args.n, phi, args.z, t, args.rtol, args.atol, args.h)
    ok = (rep.symmetry <= args.threshold and rep.det_residual <= args.det_threshold
          and rep.match <= args.match_threshold)
    return _emit(args, {"symmetry": rep.symmetry, "det_residual": rep.det_residual,
                        "match": rep.match,
                        "thresholds": {"symmetry": args.threshold, "det": args.det_threshold,
                                       "match": args.match_threshold}}, ok)


def cmd_verify_reflectionless(args) -> int:
    S, phi = _load(args)
    lams = weyl.mid_band_points(S, args.count)
    control = None
    if len(S.gaps):
        # a quarter point of the first gap on the side away from mu_1, where G is not small
        frac = 0.25 if phi.mu[0] > S.lower[0] + 0.5 * S.gamma[0] else 0.75
        control = float(S.lower[0] + frac * S.gamma[0])
    rep = weyl.verify_reflectionless(S, phi, lams, tuple(args.deltas), args.threshold, control)
    pts = [{"lambda": p.lam, "ratio": p.ratios[-1], "slope": p.slope} for p in rep.points]
    return _emit(args, {"points": pts, "worst_ratio": rep.worst_ratio,
                        "control_lambda": control, "control_abs_re": rep.control_abs_re,
                        "threshold": args.threshold}, rep.passed)


def cmd_verify_asymptotics(args) -> int:
    S, phi = _load(args)
    r = np.geomspace(*args.r_range, args.nr)
    rep = weyl.verify_green_asymptotics(S, args.n, phi, r)
    zero = bool(np.all(rep.eps == 0))
    ok = zero or rep.exponent >= args.n + 0.8
    return _emit(args, {"exponent": _finite(rep.exponent), "required": args.n + 0.8,
                        "max_residual": float(np.max(rep.eps)), "zero_residual": zero}, ok)


def cmd_verify_bounds(args) -> int:
    S = load_spectrum(args.spectrum)
    rep = sample_bound_violations(S, args.n, args.samples, args.seed)
    return _emit(args, {"samples": rep.samples,
                        "jacobian_violations": rep.jacobian_violations,
                        "jacobian_worst_ratio": rep.jacobian_worst_ratio,
                        "lipschitz_violations": rep.lipschitz_violations,
                        "lipschitz_worst_quotient": rep.lipschitz_worst_quotient,
                        "lipschitz_bound": rep.lipschitz_bound}, rep.passed)


def _qp(args) -> qpmodel.QPData:
    return qpmodel.QPData.load(args.qp) if args.qp else qpmodel.QPData()


def cmd_qp_dio(args) -> int:
    qp = _qp(args)
    rep = qpmodel.diophantine_check(qp.omega, qp.a0, qp.b0, args.mmax or qp.Mmax,
                                    args.nearest_integer)
    return _emit(args, {"worst_m": list(rep.worst_m), "margin": rep.margin, "ratio": rep.ratio,
                        "nearest_integer": rep.nearest_integer}, rep.passed)


def cmd_qp_synth(args) -> int:
    qp = _qp(args)
    try:
        S, rep = qpmodel.synthesize_gapmodel(qp)
    except qpmodel.ModelInconsistent as exc:
        print(f"inconsistent model: {exc}", file=sys.stderr)
        return EXIT_FAIL
    doc = {"spectrum": S.to_json(), "qp": rep.qp.to_json(),
           "worst_eta0_ratio": rep.worst_eta0_ratio,
           "worst_distance_ratio": rep.worst_distance_ratio}
    if args.spectrum_out:
        write_artifact(_dump(S.to_json()), args.spectrum_out)
    return _emit(args, doc, rep.passed)


def cmd_qp_craig_app(args) -> int:
    qp = _qp(args)
    try:
        S, rep = qpmodel.synthesize_gapmodel(qp)
    except qpmodel.ModelInconsistent as exc:
        print(f"inconsistent model: {exc}", file=sys.stderr)
        return EXIT_FAIL
    report = qpmodel.check_craig_app(S, args.n, rep.qp)
    return _emit(args, report.to_json(), report.passed)


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, spectrum: bool = True, phi: bool = True,
            tolerances: bool = True) -> None:
    if spectrum:
        p.add_argument("spectrum", help="gap-set JSON file")
    p.add_argument("--n", type=int, default=1, help="hierarchy index (default 1)")
    if phi:
        p.add_argument("--phi0", default=None,
                       help="initial angles as a JSON array or a file holding one (default zeros)")
    if tolerances:
        p.add_argument("--rtol", type=_positive, default=integrator.DEFAULT_TOL)
        p.add_argument("--atol", type=_positive, default=integrator.DEFAULT_TOL)
    p.add_argument("--out", default=None, help="artifact path (default stdout)")


def _grid_args(p: argparse.ArgumentParser, x=(0.0, 10.22), nx=512, t=(0.0, 0.315), nt=64) -> None:
    p.add_argument("--x-range", type=_range, default=x, metavar="START,STOP")
    p.add_argument("--nx", type=_count, default=nx)
    p.add_argument("--t-range", type=_range, default=t, metavar="START,STOP")
    p.add_argument("--nt", type=_count, default=nt)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dubrovin", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("hierarchy", help="print fhat_{n+1}, kdv_rhs(n) and the zero-curvature residual")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_hierarchy)

    p = sub.add_parser("check-craig", help="moment and Craig-type conditions for a gap set")
    _common(p, phi=False, tolerances=False)
    p.add_argument("--tol", type=_positive, default=1e-12)
    p.set_defaults(func=cmd_check_craig)

    p = sub.add_parser("flow", help="carry phi0 along the x- or t-flow")
    _common(p)
    p.add_argument("--direction", choices=integrator.DIRECTIONS, default="t")
    p.add_argument("--s", type=float, default=1.0, help="flow time")
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("sheet", help="solve a flow sheet and write it as CSV")
    _common(p)
    _grid_args(p)
    p.set_defaults(func=cmd_sheet)

    p = sub.add_parser("verify", help="numerical identity checks")
    vsub = p.add_subparsers(dest="check", required=True, parser_class=_Parser)

    v = vsub.add_parser("pde", help="finite-difference residual of the hierarchy equation")
    _common(v)
    _grid_args(v)
    v.add_argument("--threshold", type=_positive, default=1e-4)
    v.set_defaults(func=cmd_verify_pde)

    v = vsub.add_parser("commute", help="x-then-t versus t-then-x")
    _common(v)
    v.add_argument("--x", type=float, default=1.0)
    v.add_argument("--t", type=float, default=1.0)
    v.add_argument("--threshold", type=_positive, default=1e-8)
    v.set_defaults(func=cmd_verify_commute)

    v = vsub.add_parser("trace", help="higher trace identities fhat_m = R_m")
    _common(v, tolerances=False)
    v.add_argument("--h", type=_positive, default=integrator.PROBE_H)
    v.add_argument("--threshold", type=_positive, default=1e-5)
    v.set_defaults(func=cmd_verify_trace)

    v = vsub.add_parser("weyl-sym", help="evolution of the M matrix along the t-flow")
    _common(v)
    v.add_argument("--z", type=_complex, default=complex(-1.0, 0.0), metavar="RE,IM",
                   help="spectral parameter (write --z=-1,0 for negative values)")
    v.add_argument("--t", type=float, default=1.0)
    v.add_argument("--nt", type=_count, default=11)
    v.add_argument("--h", type=_positive, default=integrator.PROBE_H)
    v.add_argument("--threshold", type=_positive, default=1e-8)
    v.add_argument("--det-threshold", type=_positive, default=1e-12)
    v.add_argument("--match-threshold", type=_positive, default=1e-6)
    v.set_defaults(func=cmd_verify_weyl_sym)

    v = vsub.add_parser("reflectionless", help="|Re G / G| at mid-band points")
    _common(v, tolerances=False)
    v.add_argument("--count", type=_count, default=10)
    v.add_argument("--deltas", type=_positive, nargs="+", default=[1e-4, 1e-5, 1e-6])
    v.add_argument("--threshold", type=_positive, default=1e-4)
    v.set_defaults(func=cmd_verify_reflectionless)

    v = vsub.add_parser("asymptotics", help="decay of the large-|z| expansion residual")
    _common(v, tolerances=False)
    v.add_argument("--r-range", type=_range, default=(1e2, 1e4), metavar="START,STOP")
    v.add_argument("--nr", type=_count, default=20)
    v.set_defaults(func=cmd_verify_asymptotics)

    v = vsub.add_parser("bounds", help="sampled Jacobian and Lipschitz bounds")
    _common(v, phi=False, tolerances=False)
    v.add_argument("--samples", type=_count, default=1000)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify_bounds)

    p = sub.add_parser("qp", help="quasi-periodic model")
    qsub = p.add_subparsers(dest="check", required=True, parser_class=_Parser)
    for name, func, helptext in (("dio", cmd_qp_dio, "Diophantine condition"),
                                 ("synth", cmd_qp_synth, "synthesize the gap model"),
                                 ("craig-app", cmd_qp_craig_app, "Craig conditions for the model")):
        q = qsub.add_parser(name, help=helptext)
        q.add_argument("--qp", default=None, help="QPData JSON (default parameters otherwise)")
        q.add_argument("--out", default=None)
        q.set_defaults(func=func)
        if name == "dio":
            q.add_argument("--mmax", type=_count, default=None)
            q.add_argument("--nearest-integer", action="store_true")
        if name == "synth":
            q.add_argument("--spectrum-out", default=None, help="also write the gap set here")
        if name == "craig-app":
            q.add_argument("--n", type=_count, default=1)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "n", 0) < 0:
        parser.error("--n must be nonnegative")
    try:
        return args.func(args)
    except (OSError, GapSetError, ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DivergenceError as exc:
        print(f"divergent: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
