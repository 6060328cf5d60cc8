import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import THREE_GAPS, angles, gapsets
from dubrovin.dirichlet import phi_of_mu_sigma
from dubrovin.flows import (jacobian_bounds, lipschitz_estimate, psi, psi_array,
                            sample_bound_violations, xi)
from dubrovin.qpmodel import QPData, synthesize_gapmodel
from dubrovin.spectrum import DivergenceError, TailModel, c_j, validate_gapset

S1 = validate_gapset([(1, 2)])
S2 = validate_gapset([(1, 2), (3, 4)])
S3 = validate_gapset(THREE_GAPS)


def at_mu(S, mus, sigma=-1):
    return np.array([phi_of_mu_sigma(S, j, m, sigma) for j, m in enumerate(mus, 1)])


def test_psi_one_gap():
    assert psi(S1, at_mu(S1, [1.5]))[0] == pytest.approx(2 * math.sqrt(1.5), rel=1e-14)


def test_psi_two_gaps():
    v = psi(S2, at_mu(S2, [1.5, 3.5]))
    assert v[0] == pytest.approx(2 * math.sqrt(1.40625), rel=1e-14)


def test_psi_vanishes_at_e_low():
    S = validate_gapset([(0, 1)])
    assert psi(S, [math.pi])[0] == pytest.approx(0.0, abs=1e-15)


def test_psi_batched_matches_single():
    rng = np.random.default_rng(0)
    phi = rng.uniform(0, 2 * math.pi, (5, 3))
    batch = psi_array(S3, phi)
    for i in range(5):
        assert np.array_equal(batch[i], psi_array(S3, phi[i]))


def test_xi_examples():
    phi = at_mu(S1, [1.5])
    assert np.array_equal(xi(S1, 0, phi), psi(S1, phi))
    assert xi(S1, 1, phi)[0] == pytest.approx(1.5 * 2 * math.sqrt(1.5), rel=1e-14)


def test_xi_sign_flip():
    # with e_low = -3 and gaps (1,2), (3,4) the factor R_1 + mu_1 is (3.5 - mu_2)
    S = validate_gapset([(1, 2), (3, 4)], -3.0)
    below = xi(S, 1, at_mu(S, [1.5, 3.25]))[0]
    root = xi(S, 1, at_mu(S, [1.5, 3.5]))[0]
    above = xi(S, 1, at_mu(S, [1.5, 3.75]))[0]
    assert below > 0 > above
    assert abs(root) < 1e-12


def test_xi_rejects_negative_n():
    with pytest.raises(ValueError):
        xi(S1, -1, [0.0])


@given(gapsets(), st.data())
def test_xi_n0_equals_psi(S, data):
    phi = data.draw(angles(len(S)))
    assert np.array_equal(xi(S, 0, phi), psi(S, phi))


@given(gapsets(), st.data())
def test_psi_positive_and_bounded(S, data):
    phi = data.draw(angles(len(S)))
    v = psi(S, phi)
    mu = S.lower + S.gamma * np.cos(phi / 2) ** 2
    assert np.all(v[mu > S.e_low] > 0)
    C = np.array([c_j(S, j) for j in range(1, len(S) + 1)])
    assert np.all(v <= 2 * C * (1 + 1e-12))


def test_psi_cross_derivative_bound():
    rng = np.random.default_rng(2)
    C = np.array([c_j(S3, j) for j in (1, 2, 3)])
    h = 1e-6
    for _ in range(300):
        phi = rng.uniform(0, 2 * math.pi, 3)
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            d = (psi_array(S3, phi + e) - psi_array(S3, phi - e)) / (2 * h)
            for j in range(3):
                if j != k:
                    assert abs(d[j]) <= C[j] * S3.gamma[k] / S3.eta[j, k] * (1 + 1e-6)


def test_tail_bounds():
    S = validate_gapset([(1, 2), (3, 3.5)], 0.0, TailModel("exp", 0.02, 0.5, 1.0))
    v, b = psi(S, [0.5, 1.0], return_bound=True)
    assert np.all(b > 0) and np.all(b < v)
    with pytest.raises(DivergenceError):
        psi(S, [0.5, 1.0], tol=1e-12)
    v, b = xi(S, 2, [0.5, 1.0], return_bound=True)
    assert np.all(np.isfinite(b))


# -- bounds ------------------------------------------------------------------

def test_jacobian_bounds_finite():
    B = jacobian_bounds(S2, 1)
    assert B.shape == (2, 2)
    assert np.all(np.isfinite(B)) and np.all(B > 0)


def test_jacobian_bound_linear_in_gamma():
    # shrinking gap 2 symmetrically about its centre halves the column of off-diagonal bounds
    def col(width):
        S = validate_gapset([(1, 2), (3.5 - width / 2, 3.5 + width / 2)])
        return jacobian_bounds(S, 1)[0, 1]
    r1 = col(1e-3) / col(5e-4)
    r2 = col(1e-4) / col(5e-5)
    assert abs(r2 - 2) < abs(r1 - 2) + 1e-9
    assert r2 == pytest.approx(2.0, rel=1e-3)


def test_jacobian_needs_n_at_least_one():
    with pytest.raises(ValueError):
        jacobian_bounds(S2, 0)


def test_sampled_bounds_three_gaps():
    rep = sample_bound_violations(S3, 1, samples=1000, seed=0)
    assert rep.passed
    assert rep.jacobian_worst_ratio < 1


def test_lipschitz_finite():
    L = lipschitz_estimate(S3, 1, detail=True)
    assert math.isfinite(L.total) and L.L1 > 0 and L.L2 > 0


def test_lipschitz_qp_tail_finite():
    S, rep = synthesize_gapmodel(QPData(Mmax=10))
    assert math.isfinite(lipschitz_estimate(S, 1))


def test_lipschitz_diverges_when_craig_fails():
    S = validate_gapset([], 0.0, TailModel("pow", 1.0, 2.0, 1.0, 1.0))
    with pytest.raises(DivergenceError):
        lipschitz_estimate(S, 2)
