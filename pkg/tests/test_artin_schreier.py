"""Counting oracles vs. eigenvalue predictions, plus the char-2 census."""

import itertools

import pytest

from epipelagic.artin_schreier import (
    ASVarietySpec,
    compute_Nr,
    count_Xprime,
    count_Xw,
    predict_count_even,
    predict_count_odd,
    stratum_census,
)
from epipelagic.errors import EnumerationCapError
from epipelagic.finite_field import build_field, jacobi
from epipelagic.quadratic_gauss import nu_eval


def test_spec_validation():
    with pytest.raises(ValueError):
        ASVarietySpec(3, 1, 2, 1)  # r+1 = p
    with pytest.raises(ValueError):
        ASVarietySpec(2, 2, 2, 3)  # m does not divide f


def test_frozen_small_counts():
    assert count_Xw(ASVarietySpec(3, 1, 1, 1), 1) == 3
    assert count_Xw(ASVarietySpec(5, 1, 2, 1), 1) == 5
    assert count_Xw(ASVarietySpec(2, 1, 2, 1), 1) == 2
    assert count_Xw(ASVarietySpec(2, 1, 2, 1), 2) == 20
    assert count_Xw(ASVarietySpec(2, 2, 2, 2), 1) == 28


def test_count_matches_naive_double_loop():
    # tiny independent oracle including the z variable explicitly
    for (p, m, r, f, s) in [(3, 1, 1, 1, 1), (3, 1, 1, 1, 2), (2, 1, 2, 1, 1), (5, 1, 1, 1, 1)]:
        spec = ASVarietySpec(p, m, r, f)
        K = spec.base_field(s)
        n = 0
        for z in K.elements():
            for ys in itertools.product(K.elements(), repeat=r):
                lhs = z ** (p ** m) - z
                if lhs == nu_eval(r, list(ys)):
                    n += 1
        assert n == count_Xw(spec, s)


@pytest.mark.parametrize("p,m,f", [(3, 1, 1), (5, 1, 1), (7, 1, 1), (3, 1, 2), (3, 2, 2)])
def test_odd_prediction_matches_enumeration(p, m, f):
    for r in (1, 2, 3, 4):
        if (r + 1) % p == 0:
            continue
        spec = ASVarietySpec(p, m, r, f)
        for s in (1, 2, 3):
            if spec.q ** (s * (r + 1)) > 10 ** 6:
                continue
            assert predict_count_odd(spec, s) == count_Xw(spec, s)


@pytest.mark.parametrize("m,f", [(1, 1), (1, 2), (2, 2)])
def test_even_prediction_matches_enumeration(m, f):
    for r in (2, 4):
        spec = ASVarietySpec(2, m, r, f)
        for s in (1, 2, 3):
            if spec.q ** (s * (r + 1)) > 10 ** 6:
                continue
            assert predict_count_even(spec, s) == count_Xw(spec, s)


def test_xprime_equals_xw():
    cells = [
        (1, 1, 2, (1, 2, 3)),
        (1, 1, 4, (1, 2)),
        (1, 2, 2, (1, 2)),
        (2, 2, 2, (1, 2)),
    ]
    for (m, f, r, svals) in cells:
        spec = ASVarietySpec(2, m, r, f)
        for s in svals:
            assert count_Xprime(spec, s) == count_Xw(spec, s)


def test_nr_values_and_sign_law():
    assert compute_Nr(2) == 1
    assert compute_Nr(4) == 1
    assert compute_Nr(6) == 2
    for r in range(2, 21, 2):
        n = compute_Nr(r)  # internal assertion checks (-1)^N = (2/(r+1))
        assert (-1) ** n == jacobi(2, r + 1)
    with pytest.raises(ValueError):
        compute_Nr(3)


def test_census_frozen_cells():
    c = stratum_census(ASVarietySpec(2, 1, 2, 1), 1)
    assert c == {"count_S": 1, "count_U": 1, "count_fiber_S": 0, "count_V": 2, "total": 2}
    c4 = stratum_census(ASVarietySpec(2, 1, 2, 2), 1)
    assert c4["count_fiber_S"] == 8 and c4["count_U"] == 3 and c4["count_V"] == 12
    assert c4["total"] == 20
    cm2 = stratum_census(ASVarietySpec(2, 2, 2, 2), 1)
    assert cm2["total"] == 28


def test_census_total_equals_xprime():
    for (m, f, r) in [(1, 1, 2), (1, 1, 4), (1, 2, 2), (2, 2, 2)]:
        spec = ASVarietySpec(2, m, r, f)
        for s in (1, 2):
            if spec.q ** (s * r) > 10 ** 6:
                continue
            assert stratum_census(spec, s)["total"] == count_Xprime(spec, s)


def test_weil_bound_proxy():
    for (p, m, r, f, s) in [(3, 1, 3, 1, 1), (5, 1, 2, 1, 1), (2, 1, 2, 1, 2), (2, 2, 2, 2, 1)]:
        spec = ASVarietySpec(p, m, r, f)
        count = count_Xw(spec, s)
        dev = count - spec.q ** (r * s)
        assert dev * dev <= (p ** m - 1) ** 2 * spec.q ** (r * s)


def test_cap_enforced():
    with pytest.raises(EnumerationCapError):
        count_Xw(ASVarietySpec(3, 1, 1, 1), 1, cap=5)
