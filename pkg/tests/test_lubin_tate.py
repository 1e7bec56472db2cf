from fractions import Fraction as Fr

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epipelagic.errors import PrecisionError
from epipelagic.hahn_series import HahnSeries, congruence_check
from epipelagic.lubin_tate import (
    LTContext,
    affinoid_membership,
    coords_inverse,
    depth_collapse_check,
    det_ratio_report,
    det_sum_eval,
    formal_action,
    moore_det,
    point_coords,
    pow_q,
    solve_affinoid_point,
    torsion_tower,
    verify_reduction,
)

CTX32 = LTContext(3, 2)


def sub_solvable_residues(ctx, want):
    """First nonzero residue tuples whose z-equation splits over ctx.field."""
    from itertools import product

    from epipelagic.lubin_tate import _subfield_trace

    field = ctx.field
    out = []
    nz = [e for e in field.elements() if e != field.zero]
    for combo in product(nz, repeat=ctx.n - 1):
        rhs = field.zero
        for i in range(ctx.n - 1):
            for j in range(i, ctx.n - 1):
                rhs = rhs + combo[i] * combo[j]
        if _subfield_trace(ctx, rhs) == field.zero:
            out.append(list(combo))
            if len(out) >= want:
                return out
    return out


# ---------------------------------------------------------------- contexts


def test_context_rejects_bad_parameters():
    with pytest.raises(ValueError):
        LTContext(6, 2)  # not a prime power
    with pytest.raises(ValueError):
        LTContext(3, 1)
    with pytest.raises(ValueError):
        LTContext(3, 3)  # n divisible by p
    with pytest.raises(ValueError):
        LTContext(3, 2, u_cap=Fr(1, 2))  # at/above the accumulation shell
    with pytest.raises(ValueError):
        LTContext(3, 2, res_mult=0)


def test_coefficient_field_degrees():
    assert LTContext(3, 2).field.order == 9
    assert LTContext(5, 2).field.order == 25
    assert LTContext(4, 3).field.order == 64
    assert LTContext(3, 4).field.order == 81
    assert LTContext(3, 2, res_mult=2).field.order == 81


# ------------------------------------------------------------------- tower


def test_depth_one_torsion_is_exact_monomial():
    t1 = torsion_tower(CTX32, 1)[0]
    assert t1.to_triples() == [[1, 4, 6]]
    # exact kernel point: phi t + t^q vanishes identically
    img = CTX32.phi * t1 + t1.qth_power(3)
    assert img.valuation() is None


def test_depth_two_torsion_frozen_expansion():
    u = torsion_tower(CTX32, 2)[1]
    assert u.cap == Fr(63, 256)
    assert u.to_triples() == [
        [1, 12, 3],
        [7, 36, 3],
        [25, 108, 3],
        [79, 324, 3],
    ]


def test_tower_compatibility_under_module_action():
    t1, t2 = torsion_tower(CTX32, 2)
    img = formal_action(CTX32, [CTX32.field.zero, CTX32.field.one], t2)
    cap = min(img.cap, t1.cap)
    assert (img.truncate(cap) - t1.truncate(cap)).valuation() is None


def test_tower_depth_validation():
    with pytest.raises(ValueError):
        torsion_tower(CTX32, 0)


# ----------------------------------------------------------- formal action


def test_formal_action_rejects_bad_digits():
    t1 = torsion_tower(CTX32, 1)[0]
    g = CTX32.field.generator  # g^q != g in F_9
    with pytest.raises(ValueError):
        formal_action(CTX32, [g], t1)
    with pytest.raises(ValueError):
        formal_action(CTX32, [CTX32.field.one], HahnSeries.one(CTX32.field, Fr(2)))


def teich_digits(ctx):
    return [e for e in ctx.field.elements() if e.frobenius(ctx.a) == e]


@settings(max_examples=20, deadline=None)
@given(st.data())
def test_formal_action_additive_in_digits(data):
    digits = teich_digits(CTX32)
    d = [data.draw(st.sampled_from(digits)) for _ in range(2)]
    e = [data.draw(st.sampled_from(digits)) for _ in range(2)]
    x = CTX32.cm().gen
    lhs = formal_action(CTX32, d, x) + formal_action(CTX32, e, x)
    rhs = formal_action(CTX32, [d[0] + e[0], d[1] + e[1]], x)
    cap = min(lhs.cap, rhs.cap)
    assert (lhs.truncate(cap) - rhs.truncate(cap)).valuation() is None


# ------------------------------------------------------ distinguished point


def test_distinguished_point_valuations_and_chain():
    for (q, n) in [(3, 2), (4, 3), (5, 2)]:
        ctx = LTContext(q, n)
        cm = ctx.cm()
        for i in range(n):
            assert cm.coords[i].valuation() == Fr(1, n * q**i * (q - 1))
        for i in range(n - 1):
            assert cm.coords[i] == cm.coords[i + 1].qth_power(q)


def test_distinguished_point_scales_frozen():
    cm = CTX32.cm()
    assert cm.lead.to_triples() == [[1, 2, 2]]
    assert cm.zscale.valuation() == Fr(1, 2)
    assert cm.yscale.valuation() == Fr(1, 4)
    assert cm.rho.valuation() == Fr(1, 3)
    # y-scale squares to the z-scale on the nose
    sq = cm.yscale * cm.yscale
    cap = min(sq.cap, cm.zscale.cap)
    assert (sq.truncate(cap) - cm.zscale.truncate(cap)).valuation() is None


# -------------------------------------------------------- determinant sums


def test_moore_det_matches_direct_two_by_two():
    field = CTX32.field
    x = HahnSeries.monomial(field, Fr(1), field.one, Fr(30))
    y = HahnSeries.monomial(field, Fr(1, 3), field.generator, Fr(30))
    got = moore_det([x, y], 3)
    want = x * y.qth_power(3) - y * x.qth_power(3)
    assert (got - want).valuation() is None


def test_det_sum_requires_positive_valuations():
    field = CTX32.field
    with pytest.raises(ValueError):
        det_sum_eval([HahnSeries.one(field, Fr(2))] * 2, 3, Fr(1))


def test_det_sum_at_distinguished_point_collapses_to_leading_monomial():
    # every visible correction cancels below the cap
    ds = det_sum_eval(list(CTX32.cm().coords), 3, CTX32.cap)
    assert ds.to_triples() == [[1, 2, 2]]
    assert ds.cap == Fr(253, 256)


def test_det_sum_stable_under_wider_enumeration():
    coords = list(CTX32.cm().coords)
    narrow = det_sum_eval(coords, 3, Fr(3, 4))
    wide = det_sum_eval(coords, 3, CTX32.cap)
    cap = min(narrow.cap, wide.cap)
    assert (narrow.truncate(cap) - wide.truncate(cap)).valuation() is None


def test_det_ratio_congruence_hits_precision_wall():
    """The ratio to the leading monomial is 1 as far as visible, but the

    storage cap lands just under the target level 1/n, so the congruence is
    not certifiable either way and the check must say so by raising.
    """
    ctx = CTX32
    ds = det_sum_eval(list(ctx.cm().coords), 3, ctx.cap)
    le, lc = ctx.cm().lead.leading()
    ratio = ds * HahnSeries.monomial(ctx.field, -le, lc.inverse(), Fr(10**9))
    defect = ratio - HahnSeries.one(ctx.field, ratio.cap)
    assert defect.valuation() is None
    assert defect.cap == Fr(125, 256)
    with pytest.raises(PrecisionError):
        congruence_check(ratio, HahnSeries.one(ctx.field, ratio.cap), Fr(1, 2))


def test_depth_collapse_check_on_distinguished_point():
    rep = depth_collapse_check(list(CTX32.cm().coords), 3, depths=(1, 2))
    assert rep["ok"]
    for row in rep["depths"]:
        # exact agreement of the stored data; the certified window is the
        # storage cap, which sits below the nominal congruence level here
        assert row["exact_match"]
        assert row["certified_level"] > 0


def test_depth_collapse_check_rejects_shallow_input():
    field = CTX32.field
    thin = [
        HahnSeries.monomial(field, Fr(1), field.one, Fr(3)),  # v = 1 >= 1/4 ok
        HahnSeries.monomial(field, Fr(1, 100), field.one, Fr(3)),  # too shallow
    ]
    with pytest.raises(ValueError):
        depth_collapse_check(thin, 3)


# ----------------------------------------------------------- chart and fiber


def test_affinoid_membership_at_solver_point():
    ctx = LTContext(3, 2, res_mult=2)
    ybar = sub_solvable_residues(ctx, 1)[0]
    pt = solve_affinoid_point(ctx, ybar)
    assert affinoid_membership(ctx, pt["X"])


def test_chart_roundtrip_at_solver_point():
    ctx = LTContext(3, 2, res_mult=2)
    ybar = sub_solvable_residues(ctx, 1)[0]
    pt = solve_affinoid_point(ctx, ybar)
    fwd = point_coords(ctx, pt["X"])
    for got, want in zip(fwd["y"], pt["y"]):
        cap = min(got.cap, want.cap)
        assert (got.truncate(cap) - want.truncate(cap)).valuation() is None
    cap = min(fwd["z"].cap, pt["z"].cap)
    assert (fwd["z"].truncate(cap) - pt["z"].truncate(cap)).valuation() is None


def test_coords_inverse_reproduces_membership():
    ctx = LTContext(3, 2, res_mult=2)
    ybar = sub_solvable_residues(ctx, 2)[1]
    pt = solve_affinoid_point(ctx, ybar)
    xs = coords_inverse(ctx, pt["y"], pt["z"])
    assert affinoid_membership(ctx, xs)


def test_solver_fixed_point_odd_q():
    ctx = LTContext(3, 2, res_mult=2)
    ybar = sub_solvable_residues(ctx, 1)[0]
    pt = solve_affinoid_point(ctx, ybar)
    assert pt["converged"] and not pt["degenerate"]
    assert pt["z"].cap == Fr(61, 2304)
    rep = verify_reduction(ctx, pt)
    assert rep["ok"]
    assert rep["residual_margin"] == Fr(61, 2304)
    assert rep["principal_approx"]["ok"]
    assert rep["centered_approx"]["ok"]


def test_solver_fixed_point_q5():
    ctx = LTContext(5, 2, res_mult=2)
    ybar = sub_solvable_residues(ctx, 1)[0]
    pt = solve_affinoid_point(ctx, ybar)
    assert pt["converged"] and not pt["degenerate"]
    rep = verify_reduction(ctx, pt)
    assert rep["ok"]
    assert rep["residual_margin"] == Fr(123, 12800)


def test_solver_even_q_degenerates_honestly():
    """Even q halves the y-scale caps once more, pushing the certifiable

    window for z to zero width; the solver must say degenerate rather than
    fabricate a residual certificate. The principal-part congruences are
    still decidable and must pass.
    """
    ctx = LTContext(4, 3)
    ybar = sub_solvable_residues(ctx, 1)[0]
    pt = solve_affinoid_point(ctx, ybar)
    assert pt["degenerate"]
    rep = verify_reduction(ctx, pt)
    assert not rep["residual_ok"]
    assert rep["principal_approx"]["ok"]
    assert rep["centered_approx"]["ok"]


def test_solver_rejects_unsolvable_residues():
    ctx = LTContext(5, 2)  # base field: no nonzero tuple is solvable
    with pytest.raises(ValueError, match="resample"):
        solve_affinoid_point(ctx, [ctx.field.one])


def test_solver_rejects_degree_divisible_by_p():
    ctx = LTContext(3, 2, res_mult=3)  # total degree 12, divisible by 3
    with pytest.raises(ValueError, match="res_mult"):
        solve_affinoid_point(ctx, [ctx.field.zero])


def test_branch_census_at_base_field():
    # exactly the zero-trace branch is chosen; over F_9 half the nonzero
    # residues admit no branch at all and the solver must refuse them
    ctx = CTX32
    good = sub_solvable_residues(ctx, 10)
    assert len(good) == 4
