import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import ONE_GAP, THREE_GAPS, angles, gapsets
from dubrovin.dirichlet import phi_of_mu_sigma, sigma_of_phi
from dubrovin.integrator import flow, x_probe
from dubrovin.spectrum import validate_gapset
from dubrovin.weyl import (M_matrix, SpectrumPointError, evolve_M, green_at_dirichlet,
                           green_diag, green_dx, green_identity_residual, in_spectrum,
                           m_functions, mid_band_points, reflection_coefficients,
                           verify_green_asymptotics, verify_reflectionless,
                           verify_weyl_evolution)

S0 = validate_gapset([])
S1 = validate_gapset(ONE_GAP)
S3 = validate_gapset(THREE_GAPS)
PHI3 = np.array([0.4, 2.2, 5.0])


def test_free_green_function():
    assert green_diag(S0, np.zeros(0), -1.0) == pytest.approx(0.5, abs=1e-16)
    assert green_dx(S0, np.zeros(0), -1.0) == 0
    mm, mp = m_functions(S0, np.zeros(0), -1.0)
    assert mm == pytest.approx(-1.0) and mp == pytest.approx(-1.0)


def test_free_green_closed_form_off_axis():
    for z in (2 + 1j, -3 - 0.5j, 0.1 + 1e-3j):
        assert green_diag(S0, np.zeros(0), z) == pytest.approx(0.5 / np.sqrt(-z), rel=1e-14)


def test_green_zero_at_dirichlet_point():
    phi = np.array([phi_of_mu_sigma(S1, 1, 1.5, -1)])
    assert green_diag(S1, phi, 1.5) == 0


def test_green_in_band_branch():
    phi = np.array([phi_of_mu_sigma(S1, 1, 1.5, -1)])
    G = green_diag(S1, phi, complex(0.5, 1e-14))
    assert abs(G) == pytest.approx(0.5 * math.sqrt(1 / 0.375), rel=1e-10)
    assert G.imag > 0 and abs(G.real) < 1e-10


def test_real_z_in_spectrum_rejected():
    with pytest.raises(SpectrumPointError):
        green_diag(S1, [0.3], 0.5)
    assert not in_spectrum(S1, 1.5) and in_spectrum(S1, 0.5) and not in_spectrum(S1, -1)


def test_green_real_in_gap_and_below():
    for z in (-2.0, 1.2, 1.9):
        G = green_diag(S1, [0.3], z)
        assert abs(G.imag) <= 1e-15 * abs(G)


def test_green_dx_zero_at_edges():
    assert abs(green_dx(S3, [0.0, math.pi, 0.0], -1.0)) < 1e-15


@given(gapsets(), st.data())
def test_dirichlet_point_derivative_is_minus_sigma(S, data):
    phi = data.draw(angles(len(S)))
    for j in range(1, len(S) + 1):
        s = sigma_of_phi(phi[j - 1])
        if s == 0 or min(abs(math.sin(phi[j - 1])), 1) < 1e-3:
            continue
        v = green_at_dirichlet(S, phi, j)
        assert abs(v * v - 1) <= 1e-8
        assert v.real == pytest.approx(-s, abs=1e-8)


def test_green_dx_matches_fd_along_x_flow():
    z = -0.7 + 0.3j
    errs = []
    for h in (1e-2, 5e-3):
        probe = x_probe(S3, PHI3, h, 1)
        fd = (green_diag(S3, probe[2], z) - green_diag(S3, probe[0], z)) / (2 * h)
        errs.append(abs(fd - green_dx(S3, PHI3, z)))
    assert errs[1] < errs[0] / 3.5


def test_m_function_identities():
    rng = np.random.default_rng(4)
    for _ in range(20):
        phi = rng.uniform(0, 2 * math.pi, 3)
        z = complex(rng.uniform(-3, 7), rng.uniform(0.05, 2))
        mm, mp = m_functions(S3, phi, z)
        G = green_diag(S3, phi, z)
        assert mm + mp == pytest.approx(-1 / G, rel=1e-12)
        assert mp.imag > 0  # Herglotz
        W = M_matrix(S3, phi, z)
        assert W.det_residual < 1e-12
        assert np.allclose(W.m_functions(), (mm, mp), rtol=1e-12)


def test_m_function_pole():
    phi = np.array([phi_of_mu_sigma(S1, 1, 1.5, 1)])
    with pytest.raises(SpectrumPointError):
        m_functions(S1, phi, 1.5)


def test_green_identity_random_points():
    rng = np.random.default_rng(7)
    worst = 0.0
    for S in (S1, S3):
        for _ in range(10):
            phi = rng.uniform(0, 2 * math.pi, len(S))
            z = complex(rng.uniform(-3, 7), rng.uniform(0.1, 2))
            worst = max(worst, green_identity_residual(S, phi, z))
    assert worst < 1e-6


# -- M evolution -------------------------------------------------------------

def test_evolve_zero_span():
    tr = evolve_M(S1, 1, [0.3], -1.0, [0.0])
    assert np.array_equal(tr.M[0], M_matrix(S1, [0.3], -1.0).M)


def test_evolve_matches_flowed_state():
    t = np.linspace(0, 0.5, 3)
    tr = evolve_M(S1, 1, [0.3], -1.0, t)
    for i, tv in enumerate(t):
        ref = M_matrix(S1, flow(S1, 1, [0.3], "t", tv), -1.0).M
        assert np.max(np.abs(tr.M[i] - ref)) < 1e-6


def test_evolution_symmetry_complex_z():
    rep = verify_weyl_evolution(S1, 1, [0.3], complex(-1.0, 0.5), np.linspace(0, 0.5, 3))
    assert rep.symmetry < 1e-8 and rep.match < 1e-6 and rep.det_residual < 1e-10


def test_reflection_coefficients_stay_zero():
    lam = float(mid_band_points(S1, 2)[0])
    z = complex(lam, 1e-6)
    tr = evolve_M(S1, 1, [0.3], z, np.linspace(0, 0.3, 4))
    for i in range(len(tr.t)):
        rp, rm = reflection_coefficients(tr.matrix(i))
        assert abs(rp) <= 1e-4 and abs(rm) <= 1e-4


# -- reflectionless and asymptotics ------------------------------------------

def test_reflectionless_free():
    rep = verify_reflectionless(S0, np.zeros(0), [1.0])
    assert rep.passed and rep.worst_ratio < 1e-4


def test_reflectionless_one_gap_with_control():
    lams = mid_band_points(S1, 10)
    rep = verify_reflectionless(S1, [0.3], lams, control=1.25)
    assert rep.passed
    assert rep.control_abs_re > 1e-3
    assert all(0.8 <= p.slope <= 1.2 for p in rep.points)


def test_reflectionless_rejects_edges_and_gaps():
    with pytest.raises(SpectrumPointError):
        verify_reflectionless(S1, [0.3], [1.5])
    with pytest.raises(SpectrumPointError):
        verify_reflectionless(S1, [0.3], [2.0 + 1e-5])
    with pytest.raises(SpectrumPointError):
        verify_reflectionless(S1, [0.3], [0.5], control=0.7)


def test_mid_band_points_in_bands():
    pts = mid_band_points(S3, 10)
    assert len(pts) == 10
    assert all(in_spectrum(S3, p) for p in pts)


def test_asymptotics_zero_gap_exact():
    rep = verify_green_asymptotics(validate_gapset([], 0.4), 2, np.zeros(0), np.geomspace(1e2, 1e4, 10))
    assert np.all(rep.eps == 0)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_asymptotic_decay_exponent(n):
    rep = verify_green_asymptotics(S1, n, [0.7], np.geomspace(1e2, 1e4, 20))
    assert rep.exponent >= n + 0.8
    assert rep.leading == pytest.approx(1.0, abs=1e-3)
    # the k-expansion of G agrees to the next order
    assert np.all(rep.expansion_error < 10 * np.geomspace(1e2, 1e4, 20) ** (-(n + 1) / 2 * 0.9) + 1e-8)
