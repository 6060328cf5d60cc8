import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from conftest import gapsets
from dubrovin.dirichlet import (DirichletState, arc, dist, dmu_dphi, mu_of_phi, parse_phi,
                                phi_of_mu_sigma, random_state, sigma_of_phi, wrap_angle)
from dubrovin.spectrum import GapSetError, TailModel, validate_gapset

S1 = validate_gapset([(1, 2)])


def test_mu_examples():
    assert mu_of_phi(S1, 1, 0.0) == 2.0
    assert mu_of_phi(S1, 1, math.pi) == pytest.approx(1.0, abs=1e-16)
    assert mu_of_phi(S1, 1, math.pi / 2) == pytest.approx(1.5)


def test_sigma_examples():
    assert sigma_of_phi(math.pi / 2) == -1
    assert sigma_of_phi(3 * math.pi / 2) == 1
    assert sigma_of_phi(0.0) == 0
    assert sigma_of_phi(math.pi) == 0


def test_phi_of_mu_sigma_examples():
    assert phi_of_mu_sigma(S1, 1, 1.5, -1) == pytest.approx(math.pi / 2)
    assert phi_of_mu_sigma(S1, 1, 2.0, 1) == 0.0
    assert phi_of_mu_sigma(S1, 1, 1.0, 1) == math.pi
    assert phi_of_mu_sigma(S1, 1, 1.5, 1) == pytest.approx(3 * math.pi / 2)
    with pytest.raises(GapSetError):
        phi_of_mu_sigma(S1, 1, 2.5, 1)


@given(st.floats(0.0, 2 * math.pi, exclude_max=True))
def test_round_trip(phi):
    assume(phi not in (0.0, math.pi))
    s = sigma_of_phi(phi)
    assume(s != 0)
    back = phi_of_mu_sigma(S1, 1, mu_of_phi(S1, 1, phi), int(s))
    assert arc(back, phi) < 1e-7


@given(st.floats(-20.0, 20.0))
def test_mu_periodic_and_even(phi):
    m = mu_of_phi(S1, 1, phi)
    assert m == pytest.approx(mu_of_phi(S1, 1, phi + 2 * math.pi), abs=1e-12)
    assert m == pytest.approx(mu_of_phi(S1, 1, -phi), abs=1e-15)
    assert 1.0 <= m <= 2.0


def test_dmu_dphi_matches_fd():
    phi = np.array([0.3])
    h = 1e-6
    fd = (mu_of_phi(S1, 1, 0.3 + h) - mu_of_phi(S1, 1, 0.3 - h)) / (2 * h)
    assert dmu_dphi(S1, phi)[0] == pytest.approx(fd, rel=1e-8)


def test_wrap_angle():
    assert wrap_angle(-1e-20) == 0.0
    assert wrap_angle(2 * math.pi) == 0.0
    assert wrap_angle(7.0) == pytest.approx(7.0 - 2 * math.pi)


def test_state_normalises_and_freezes():
    st_ = DirichletState(S1, [7.0])
    assert 0 <= st_.phi[0] < 2 * math.pi
    with pytest.raises(ValueError):
        st_.phi[0] = 1.0
    with pytest.raises(ValueError):
        DirichletState(S1, [1.0, 2.0])


def test_dist_examples():
    a, b = DirichletState(S1, [0.0]), DirichletState(S1, [math.pi])
    assert dist(S1, 1, a, a) == 0.0
    assert dist(S1, 1, a, b) == pytest.approx(math.sqrt(2) * math.pi)


def test_dist_mismatched_sets():
    T = validate_gapset([(1, 3)])
    with pytest.raises(ValueError):
        dist(S1, 1, DirichletState(S1, [0.0]), DirichletState(T, [0.0]))


def test_dist_tail_bound():
    S = validate_gapset([(1, 2)], 0.0, TailModel("exp", 0.02, 0.5, 1.0))
    a = DirichletState(S, [0.0])
    v, b = dist(S, 1, a, a, return_bound=True)
    assert v == 0.0 and 0 < b < math.inf


@given(gapsets(), st.integers(0, 3), st.integers(0, 2**31))
def test_dist_metric_axioms(S, n, seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_state(S, rng) for _ in range(3))
    ab, bc, ac = dist(S, n, a, b), dist(S, n, b, c), dist(S, n, a, c)
    assert ab == dist(S, n, b, a)
    assert ac <= ab + bc + 1e-12


def test_parse_phi(tmp_path):
    S = validate_gapset([(1, 2), (3, 4)])
    assert np.array_equal(parse_phi(S, None).phi, [0.0, 0.0])
    assert np.allclose(parse_phi(S, "[0.5, 1.0]").phi, [0.5, 1.0])
    p = tmp_path / "phi.json"
    p.write_text("[0.25, 0.75]")
    assert np.allclose(parse_phi(S, str(p)).phi, [0.25, 0.75])
    assert np.allclose(parse_phi(S, [1, 2]).phi, [1, 2])
    state = parse_phi(S, [1, 2])
    assert DirichletState.from_json(S, state.to_json()).phi.tolist() == state.phi.tolist()
