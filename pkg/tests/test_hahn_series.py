from fractions import Fraction as Fr

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epipelagic.errors import PrecisionError
from epipelagic.finite_field import build_field
from epipelagic.hahn_series import HahnSeries, congruence_check

F3 = build_field(3)
F9 = build_field(3, 2)
CAP = Fr(4)


def mono(field, exp, c=1, cap=CAP):
    return HahnSeries.monomial(field, Fr(exp), field.from_int(c), cap)


def series(field, pairs, cap=CAP):
    return HahnSeries(field, {Fr(*e) if isinstance(e, tuple) else Fr(e): field.element_by_index(i)
                              for e, i in pairs}, cap)


def test_half_power_monomial_squares_to_uniformizer():
    h = mono(F3, Fr(1, 2))
    sq = h * h
    assert sq.terms == {Fr(1): F3.one}
    assert mono(F3, 1).rational_power(Fr(1, 2)).terms == {Fr(1, 2): F3.one}


def test_qth_root_of_uniformizer():
    pi = mono(F3, 1)
    r = pi.qth_root(3)
    assert r.terms == {Fr(1, 3): F3.one}
    assert r.cap == CAP / 3


def test_valuation_basics():
    assert mono(F3, 1).valuation() == Fr(1)
    assert HahnSeries.zero(F3, CAP).valuation() is None
    assert series(F3, [((1, 2), 2), (3, 1)]).valuation() == Fr(1, 2)


def test_inverse_of_one_plus_pi_is_geometric():
    f = HahnSeries.one(F3, CAP) + mono(F3, 1)
    g = f.inverse()
    # 1/(1+pi) = 1 - pi + pi^2 - pi^3 ...
    want = {Fr(k): F3.from_int((-1) ** k) for k in range(4)}
    assert g.terms == want
    assert g.cap == CAP
    prod = f * g
    assert (prod - HahnSeries.one(F3, CAP)).is_zero()


def test_inverse_cap_accounting_with_positive_valuation():
    f = mono(F3, 2) + mono(F3, Fr(5, 2), 2)
    g = f.inverse()
    assert g.cap == CAP - 4
    assert (f * g).coeff(0) == F3.one


def test_mul_cap_rule():
    a = series(F3, [(1, 1), (2, 2)], cap=Fr(5))
    b = series(F3, [((1, 2), 2)], cap=Fr(3))
    prod = a * b
    assert prod.cap == min(Fr(5) + Fr(1, 2), Fr(3) + 1)
    assert prod.coeff(Fr(3, 2)) == F3.from_int(2)


def test_mul_with_truncated_zero_uses_cap_as_valuation():
    z = HahnSeries.zero(F3, Fr(2))
    a = mono(F3, 1, cap=Fr(10))
    prod = a * z
    assert prod.is_zero()
    assert prod.cap == Fr(3)  # 2 + v(a)


def test_additive_valuation_laws():
    a = series(F9, [((1, 3), 5), (2, 7)])
    b = series(F9, [(1, 2), (2, 1)])
    assert (a * b).valuation() == Fr(1, 3) + 1
    assert (a + b).valuation() == Fr(1, 3)
    assert (a - a).valuation() is None
    shifted = a + series(F9, [(2, 4)])
    assert (shifted - a).valuation() == Fr(2)  # leading terms cancel


def test_qth_power_root_round_trip():
    a = series(F9, [((1, 2), 4), (1, 7), ((7, 3), 2)])
    for q in (3, 9, 27):
        assert a.qth_power(q).qth_root(q) == a
        assert a.qth_root(q).qth_power(q) == a


def test_qth_power_is_additive_frobenius():
    a = series(F9, [(0, 3), (1, 5)])
    b = series(F9, [((1, 2), 6), (2, 2)])
    assert ((a + b).qth_power(9)).terms == (a.qth_power(9) + b.qth_power(9)).terms


def test_qth_power_rejects_non_p_power():
    a = mono(F3, 1)
    with pytest.raises(ValueError):
        a.qth_power(2)
    with pytest.raises(ValueError):
        a.qth_power(6)


def test_integer_pow_matches_repeated_multiplication():
    a = series(F9, [((1, 2), 4), (1, 7)], cap=Fr(6))
    acc = a
    for m in range(2, 7):
        acc = acc * a
        pw = a ** m
        lvl = min(acc.cap, pw.cap)
        assert pw.truncate(lvl).terms == acc.truncate(lvl).terms
        # p'-part exponent and Frobenius part split: cap >= direct chain's
        assert pw.cap >= acc.cap


def test_pow_cap_for_coprime_exponent():
    a = series(F3, [(1, 1), (2, 2)], cap=Fr(5))
    # cap(x^m) = c + (m-1) v for m prime to p
    assert (a ** 2).cap == Fr(5) + 1
    assert (a ** 4).cap == Fr(5) + 3


def test_pow_frobenius_last_beats_naive_cap():
    a = series(F3, [(1, 1), (2, 2)], cap=Fr(5))
    assert (a ** 3).cap == Fr(15)  # Frobenius scaling, not 5 + 2
    assert (a ** 6).cap == 3 * (Fr(5) + 1)


def test_negative_pow():
    a = HahnSeries.one(F3, CAP) + mono(F3, 1, 2)
    prod = (a ** -2) * (a ** 2)
    assert prod.coeff(0) == F3.one
    assert prod.valuation() == Fr(0)
    assert congruence_check(prod, HahnSeries.one(F3, prod.cap), Fr(3))


def test_rational_power_defining_identity():
    u = HahnSeries.one(F9, Fr(6)) + series(F9, [(1, 5), ((3, 2), 2)], cap=Fr(6))
    y = u.rational_power(Fr(5, 6))  # denominator 6 = 2 * 3: Hensel and perfection
    assert y.leading() == (Fr(0), F9.one)
    lhs = y ** 6
    rhs = u ** 5
    lvl = min(lhs.cap, rhs.cap)
    assert lhs.truncate(lvl).terms == rhs.truncate(lvl).terms


def test_rational_power_round_trip_on_unit():
    u = HahnSeries.one(F9, Fr(6)) + series(F9, [(1, 5), ((3, 2), 2)], cap=Fr(6))
    y = u.rational_power(Fr(2, 3))
    back = y.rational_power(Fr(3, 2))
    lvl = min(back.cap, u.cap)
    assert back.truncate(lvl).terms == u.truncate(lvl).terms


def test_coprime_root_takes_least_dlog_branch():
    g = F9.generator
    x = HahnSeries.monomial(F9, Fr(0), g ** 2, Fr(4))
    r = x.rational_power(Fr(1, 2))
    assert r.leading()[1] == g  # not g^5, the other square root
    # fourth root of g^4: dlog 4 -> branch g^1
    y = HahnSeries.monomial(F9, Fr(0), g ** 4, Fr(4))
    assert y.rational_power(Fr(1, 4)).leading()[1] == g


def test_root_error_cases():
    gen = HahnSeries.monomial(F3, Fr(1), F3.generator, Fr(4))
    with pytest.raises(ValueError):
        gen.rational_power(Fr(1, 2))  # generator of F_3* is a non-square
    with pytest.raises(ValueError):
        HahnSeries.zero(F3, CAP).rational_power(Fr(1, 2))
    with pytest.raises(ZeroDivisionError):
        HahnSeries.zero(F3, CAP).inverse()


def test_root_degree_coprime_to_unit_group():
    # gcd(5, 8) = 1: the unique 5th root branch, even though 5 does not
    # divide |F_9*|
    r = mono(F9, 1).rational_power(Fr(1, 5))
    assert r.leading() == (Fr(1, 5), F9.one)
    assert (r ** 5).leading() == (Fr(1), F9.one)
    g = F9.generator
    x = HahnSeries.monomial(F9, Fr(0), g ** 3, Fr(4))
    y = x.rational_power(Fr(1, 5))  # 5 * 5 = 25 = 1 mod 8 -> dlog 15 mod 8 = 7
    assert y.leading()[1] == g ** 7
    assert (y ** 5).leading()[1] == g ** 3


def test_congruence_check_contract():
    a = mono(F3, 1)
    b = mono(F3, 1) + mono(F3, 3, 2)
    assert congruence_check(a, b, Fr(3))
    assert not congruence_check(a, b, Fr(3), strict=True)
    assert congruence_check(a, b, Fr(7, 2), strict=True) is False
    with pytest.raises(PrecisionError):
        congruence_check(a, b, CAP)
    with pytest.raises(PrecisionError):
        congruence_check(a, b, Fr(5), strict=True)


def test_field_mixing_rejected():
    with pytest.raises(ValueError):
        mono(F3, 1) + mono(F9, 1)
    with pytest.raises(ValueError):
        HahnSeries(F3, {Fr(0): F9.one}, CAP)


def test_serialization_round_trip():
    a = series(F9, [((1, 2), 4), (1, 7), ((7, 3), 2)])
    triples = a.to_triples()
    exps = [Fr(n, d) for n, d, _ in triples]
    assert exps == sorted(exps)
    b = HahnSeries.from_triples(F9, triples, a.cap)
    assert a == b


def test_truncate_only_lowers():
    a = series(F3, [(1, 1), (3, 2)])
    t = a.truncate(Fr(2))
    assert t.terms == {Fr(1): F3.one}
    with pytest.raises(PrecisionError):
        a.truncate(Fr(5))


_coeffs = st.lists(
    st.tuples(st.integers(0, 6), st.integers(1, 3), st.integers(0, 8)),
    min_size=0, max_size=5)


def _mk(entries, cap=Fr(4)):
    terms = {}
    for num, den, idx in entries:
        e = Fr(num, den)
        terms[e] = F9.element_by_index(idx)
    return HahnSeries(F9, terms, cap)


@settings(max_examples=60, deadline=None)
@given(_coeffs, _coeffs, _coeffs)
def test_ring_laws_randomized(ea, eb, ec):
    a, b, c = _mk(ea), _mk(eb), _mk(ec)
    ab, ba = a * b, b * a
    assert ab.terms == ba.terms and ab.cap == ba.cap
    lhs = (a * b) * c
    rhs = a * (b * c)
    lvl = min(lhs.cap, rhs.cap)
    assert lhs.truncate(lvl).terms == rhs.truncate(lvl).terms
    d_lhs = (a + b) * c
    d_rhs = a * c + b * c
    lvl = min(d_lhs.cap, d_rhs.cap)
    assert d_lhs.truncate(lvl).terms == d_rhs.truncate(lvl).terms


@settings(max_examples=40, deadline=None)
@given(_coeffs, _coeffs)
def test_valuation_product_rule_randomized(ea, eb):
    a, b = _mk(ea), _mk(eb)
    va, vb = a.valuation(), b.valuation()
    prod = a * b
    if va is not None and vb is not None and va + vb < prod.cap:
        assert prod.valuation() == va + vb
