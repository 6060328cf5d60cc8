"""Acceptance suite: one test per criterion, summarised as PASS/FAIL lines.

Run directly with ``python tests/test_acceptance.py`` or as part of pytest.
"""
import itertools
import math
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import ONE_GAP, THREE_GAPS
from dubrovin.flows import sample_bound_violations
from dubrovin.hierarchy import DiffPoly, fhat, kdv_rhs, zero_curvature_residual
from dubrovin.integrator import (solve_sheet, verify_commute, verify_pde, verify_trace_identity,
                                 verify_translation)
from dubrovin.moments import partitions, r_from_q
from dubrovin.qpmodel import QPData, check_craig_app, synthesize_gapmodel
from dubrovin.spectrum import TailModel, check_craig, validate_gapset
from dubrovin.weyl import (green_at_dirichlet, green_identity_residual, mid_band_points,
                           verify_green_asymptotics, verify_reflectionless,
                           verify_weyl_evolution)

S1 = validate_gapset(ONE_GAP)
S3 = validate_gapset(THREE_GAPS)
PHI1 = [0.7]
PHI3 = [0.7, 2.0, 4.1]


@pytest.mark.criterion(1, "symbolic hierarchy exactness")
def test_c01_hierarchy_exact():
    t0 = time.perf_counter()
    u0, u1, u2, u3 = (DiffPoly.u(i) for i in range(4))
    assert fhat(2) == Fraction(1, 8) * (3 * u0 * u0 - u2)
    assert kdv_rhs(1) == Fraction(3, 2) * u0 * u1 - Fraction(1, 4) * u3
    assert time.perf_counter() - t0 < 1.0


@pytest.mark.criterion(2, "zero-curvature reduction")
def test_c02_zero_curvature():
    t0 = time.perf_counter()
    for n in range(4):
        R = zero_curvature_residual(n)
        assert R[0][0].is_zero() and R[0][1].is_zero() and R[1][1].is_zero()
        assert R[1][0].degree == 0
        assert R[1][0][0] == DiffPoly.qt() - kdv_rhs(n)
    assert time.perf_counter() - t0 < 10.0


def _brute_weights(m):
    out = {}
    for alpha in itertools.product(range(m + 1), repeat=m):
        if sum((k + 1) * a for k, a in enumerate(alpha)) == m:
            w = Fraction(1)
            for k, a in enumerate(alpha, start=1):
                w /= math.factorial(a) * (2 * k) ** a
            out[alpha] = w
    return out


@pytest.mark.criterion(3, "R_m enumeration")
def test_c03_r_enumeration():
    closed = {
        1: {(1,): Fraction(1, 2)},
        2: {(0, 1): Fraction(1, 4), (2, 0): Fraction(1, 8)},
        3: {(0, 0, 1): Fraction(1, 6), (1, 1, 0): Fraction(1, 8), (3, 0, 0): Fraction(1, 48)},
    }
    for m, ref in closed.items():
        assert dict(partitions(m)) == ref
    for m in range(1, 7):
        assert dict(partitions(m)) == _brute_weights(m)
    Q = np.array([0.3, -1.1, 0.8, 2.0, -0.4, 1.7])
    for m in range(1, 7):
        direct = sum(float(w) * np.prod(Q[:m] ** np.array(a)) for a, w in _brute_weights(m).items())
        assert r_from_q(Q, m) == pytest.approx(direct, rel=1e-13)


@pytest.mark.criterion(4, "one-gap KdV-1 PDE residual")
def test_c04_kdv1_residual():
    t0 = time.perf_counter()
    coarse = solve_sheet(S1, 1, PHI1, np.arange(512) * 0.02, np.arange(64) * 0.005)
    r1 = verify_pde(coarse, 1)
    assert r1.max <= 1e-4
    fine = solve_sheet(S1, 1, PHI1, np.arange(1024) * 0.01, np.arange(128) * 0.0025)
    r2 = verify_pde(fine, 1)
    assert r1.max / r2.max >= 4.0
    assert time.perf_counter() - t0 < 60.0


@pytest.mark.criterion(5, "translation identity for n = 0")
@pytest.mark.parametrize("S, phi", [(S1, PHI1), (S3, PHI3)], ids=["one-gap", "three-gap"])
def test_c05_translation(S, phi):
    x = np.linspace(0, 2, 21)
    t = np.linspace(0, 1, 11)
    assert verify_translation(S, phi, x, t, 1e-10, 1e-10) <= 1e-8


@pytest.mark.criterion(6, "flow commutativity")
@pytest.mark.parametrize("S, phi", [(S1, PHI1), (S3, PHI3)], ids=["one-gap", "three-gap"])
def test_c06_commute(S, phi):
    assert verify_commute(S, 1, phi, 1.0, 1.0) <= 1e-8
    loose = verify_commute(S, 1, phi, 1.0, 1.0, 1e-6, 1e-6)
    tight = verify_commute(S, 1, phi, 1.0, 1.0, 1e-9, 1e-9)
    assert tight < loose


@pytest.mark.criterion(7, "higher-order trace identity")
def test_c07_trace_identity():
    res = verify_trace_identity(S1, 2, PHI1)
    assert res[1] <= 1e-5 and res[2] <= 1e-5


@pytest.mark.criterion(8, "M-matrix evolution")
def test_c08_weyl_evolution():
    rep = verify_weyl_evolution(S1, 1, PHI1, -1.0, np.linspace(0, 1, 11), rtol=1e-12, atol=1e-12)
    assert rep.symmetry <= 1e-8
    assert rep.match <= 1e-6
    assert rep.det_residual <= 1e-12


@pytest.mark.criterion(9, "reflectionless property")
def test_c09_reflectionless():
    lams = mid_band_points(S1, 10)
    rep = verify_reflectionless(S1, PHI1, lams, deltas=(1e-4, 1e-5, 1e-6), control=1.25)
    assert len(rep.points) == 10
    assert all(p.deltas[-1] == 1e-6 for p in rep.points)
    assert rep.worst_ratio <= 1e-4
    assert all(0.8 <= p.slope <= 1.2 for p in rep.points)
    assert rep.control_abs_re > 1e-3
    assert rep.passed


@pytest.mark.criterion(10, "Green identity and Dirichlet signs")
def test_c10_green_identity():
    rng = np.random.default_rng(10)
    worst = 0.0
    for i in range(20):
        S = S1 if i % 2 == 0 else S3
        phi = rng.uniform(0, 2 * math.pi, len(S))
        z = complex(rng.uniform(-3, 7), rng.uniform(0.1, 2))
        worst = max(worst, green_identity_residual(S, phi, z))
    assert worst < 1e-6
    for phi in ([0.4, 1.9, 3.6], [5.0, 2.5, 0.9]):
        for j in range(1, 4):
            v = green_at_dirichlet(S3, phi, j)
            assert abs(v * v - 1) <= 1e-8


@pytest.mark.criterion(11, "Green asymptotic expansion")
def test_c11_asymptotics():
    r = np.geomspace(1e2, 1e4, 20)
    for n in (1, 2):
        assert verify_green_asymptotics(S1, n, PHI1, r).exponent >= n + 0.8
    free = verify_green_asymptotics(validate_gapset([], 0.0), 2, np.zeros(0), r)
    assert np.all(free.eps == 0)


@pytest.mark.criterion(12, "Craig checker discrimination")
def test_c12_craig_discrimination():
    geometric = validate_gapset([], 0.0, TailModel("exp", 0.02, 0.5, 1.0))
    synthesized, _ = synthesize_gapmodel(QPData())
    for S in (geometric, synthesized):
        for n in (0, 1, 2, 3):
            assert check_craig(S, n).passed
    slow = validate_gapset([], 0.0, TailModel("pow", 1.0, 2.0, 1.0, 1.0))
    c1 = check_craig(slow, 2)["craig1"]
    assert c1.status == "divergent"
    assert c1.certificate


@pytest.mark.criterion(13, "Jacobian and Lipschitz bounds")
def test_c13_bounds():
    rep = sample_bound_violations(S3, 1, samples=1000, seed=0)
    assert rep.samples == 1000
    assert rep.jacobian_violations == 0
    assert rep.lipschitz_violations == 0


@pytest.mark.criterion(14, "quasi-periodic model pipeline")
def test_c14_qp_pipeline():
    t0 = time.perf_counter()
    S, rep = synthesize_gapmodel(QPData(Mmax=50))
    assert rep.gamma_ok and rep.eta0_ok and rep.distance_ok
    for n in (1, 2, 3):
        assert check_craig_app(S, n, rep.qp).passed
    assert time.perf_counter() - t0 < 30.0


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
