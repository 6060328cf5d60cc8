import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import gapsets
from dubrovin.spectrum import (CONDITIONS, DivergenceError, Gap, GapSetError, TailModel, c_j,
                               c_upper, check_craig, load_spectrum, metric_weight,
                               spectrum_from_json, validate_gapset)

QP_TAIL = TailModel("exp", 0.02, 0.5, 1.0)          # gamma_k = 2 eps e^{-k/2}, eta ~ k^2
SLOW_TAIL = TailModel("pow", 1.0, 2.0, 1.0, 1.0)    # gamma_k = k^-2, eta_{k,0} ~ k


def test_one_gap_basic():
    S = validate_gapset([(1, 2)])
    assert S.gamma[0] == 1.0 and S.eta0[0] == 1.0
    assert len(S) == 1


@pytest.mark.parametrize("raw,e_low", [([(1, 2), (1.5, 3)], 0.0), ([(-1, 0)], 0.0),
                                       ([(2, 2)], 0.0), ([(1, 2), (2, 3)], 0.0)])
def test_invalid_sets(raw, e_low):
    with pytest.raises(GapSetError):
        validate_gapset(raw, e_low)


def test_gaps_are_sorted():
    S = validate_gapset([(3, 4), (1, 2)])
    assert list(S.lower) == [1.0, 3.0]


def test_narrow_gap_keeps_width():
    S = validate_gapset([(1e4, 1e4)], widths=[1e-13])
    assert S.gamma[0] == 1e-13
    doc = S.to_json()
    assert doc["widths"] == [1e-13]
    assert spectrum_from_json(doc).gamma[0] == 1e-13


def test_json_round_trip(tmp_path):
    S = validate_gapset([(1, 2), (3, 3.5)], 0.5, QP_TAIL)
    p = tmp_path / "s.json"
    p.write_text(json.dumps(S.to_json()))
    T = load_spectrum(p)
    assert T == S


def test_malformed_documents():
    with pytest.raises(GapSetError):
        spectrum_from_json({"gaps": [[1, 2]]})
    with pytest.raises(GapSetError):
        spectrum_from_json({"e_low": 0, "gaps": [[1, 2]],
                            "tail": {"kind": "exp", "A": 1, "rate": 1,
                                     "position": {"kind": "cubic", "c": 1}}})


def test_tail_overlapping_explicit_rejected():
    with pytest.raises(GapSetError):
        validate_gapset([(1, 2), (3, 10)], 0.0, TailModel("exp", 0.1, 1.0, 1.0))


def test_gap_from_edges():
    g = Gap.from_edges(1.0, 2.5)
    assert g.length == 1.5 and g.upper == 2.5


@given(gapsets())
def test_eta_positive_and_symmetric(S):
    eta = S.eta
    off = ~np.eye(len(S), dtype=bool)
    assert np.all(eta[off] > 0)
    assert np.array_equal(eta, eta.T)


# -- C_j --------------------------------------------------------------------

def test_c_j_examples():
    assert c_j(validate_gapset([(1, 2)]), 1) == pytest.approx(math.sqrt(2), rel=1e-15)
    assert c_j(validate_gapset([(1, 2), (3, 4)]), 1) == pytest.approx(2.0, rel=1e-15)


def test_c_j_bad_index():
    with pytest.raises(IndexError):
        c_j(validate_gapset([(1, 2)]), 2)


@given(gapsets(max_gaps=3), st.floats(0.05, 1.0), st.floats(0.1, 2.0))
def test_c_j_monotone_under_adding_gaps(S, spacing, length):
    top = S.upper[-1] + spacing
    raw = [(g.lower, g.upper) for g in S.gaps] + [(top, top + length)]
    T = validate_gapset(raw, S.e_low)
    for j in range(1, len(S) + 1):
        assert c_j(T, j) >= c_j(S, j) * (1 - 1e-14)


@pytest.mark.parametrize("tail", [QP_TAIL, TailModel("pow", 0.5, 2.5, 2.0)])
def test_c_j_tail_tolerance_halving(tail):
    S = validate_gapset([(1, 1.5), (4, 4.2)], 0.0, tail)
    for j in (1, 2):
        v1, b1 = c_j(S, j, 1e-6, return_bound=True)
        v2, b2 = c_j(S, j, 5e-7, return_bound=True)
        assert abs(v2 - v1) <= b1 + 1e-15
        assert v2 >= v1


def test_c_j_nonsummable_tail():
    S = validate_gapset([(1, 1.5)], 0.0, TailModel("pow", 0.1, 0.5, 2.0))
    with pytest.raises(DivergenceError):
        c_j(S, 1)


def test_c_upper_dominates():
    S = validate_gapset([(1, 1.5)], 0.0, QP_TAIL)
    assert c_upper(S)[0] >= c_j(S, 1)


# -- metric weights ----------------------------------------------------------

def test_metric_weight_examples():
    assert metric_weight(validate_gapset([(1, 2)]), 1, 1) == pytest.approx(math.sqrt(2))
    assert metric_weight(validate_gapset([(0, 1)]), 3, 1) == 1.0
    assert metric_weight(validate_gapset([(4, 5)]), 2, 1) == pytest.approx(math.sqrt(17))


# -- Craig-type conditions ---------------------------------------------------

@given(gapsets(), st.integers(0, 4))
def test_finite_sets_pass_craig(S, n):
    if np.any(S.eta0 == 0):
        return
    rep = check_craig(S, n)
    assert rep.passed
    assert tuple(rep.conditions) == CONDITIONS


def test_touching_e_low_makes_craig3_divergent():
    rep = check_craig(validate_gapset([(0, 1)]), 1)
    assert rep["craig3"].status == "divergent"
    assert not rep.passed


@pytest.mark.parametrize("n", [1, 2, 3])
def test_geometric_tail_passes(n):
    rep = check_craig(validate_gapset([], 0.0, QP_TAIL), n)
    assert rep.passed, rep.to_json()
    for c in rep.conditions.values():
        assert c.upper >= c.value


def test_power_tail_craig1_divergent_at_n2():
    rep = check_craig(validate_gapset([], 0.0, SLOW_TAIL), 2)
    c1 = rep["craig1"]
    assert c1.status == "divergent"
    assert "diverges" in c1.certificate
    assert not rep.passed


def test_tail_upper_bound_dominates_partial_sums():
    # explicit partial sum of the moment condition over many tail gaps stays below the bound
    S = validate_gapset([], 0.0, QP_TAIL)
    n = 2
    rep = check_craig(S, n)
    k = np.arange(1, 400, dtype=float)
    g = QP_TAIL.gamma(k)
    eta0 = QP_TAIL.center_offset(k) - g / 2
    assert np.sum(g * (1 + eta0**n)) <= rep["moment"].upper
    assert np.sum(np.sqrt(g * (1 + eta0**n))) <= rep["craig1"].upper


def test_report_json():
    doc = check_craig(validate_gapset([(1, 2)]), 1).to_json()
    json.dumps(doc)
    assert doc["pass"] is True
