"""Symmetry actors on the determinant fiber and their depth-one characters.

Three kinds of actors move points of the fiber affinoid:

* truncated matrices over F_q[[w]], acting by coordinate substitution with
  the digit rule  [a] X = sum_l a_l X^(q^(l n))  applied column-wise;
* units of the division ring F_{q^n}<phi> / (phi a = a^q phi, phi^n = w),
  acting through the digit expansion of the inverse,  X -> sum_j d_j X^(q^j);
* Weil twists: a coefficientwise q^m-power Frobenius combined with the
  series action of the associated unit.

Depth-one actors of the first two kinds shift the reduced z-coordinate by an
additive residue character (a trace residue against the inverse of the
shift-with-uniformizer element) and fix the y-coordinates; Weil twists act
by Frobenius on both residues.  The check routine at the bottom certifies
these congruences at assembled residue seeds, through whichever read the
stored caps can decide.

Scalars of the base field F_q((w)) are represented as integer-exponent
truncated series (HahnSeries with exponents in Z), so matrix entries,
reduced traces and reduced norms all reuse the series arithmetic.
"""

from __future__ import annotations

import random
from fractions import Fraction
from math import comb
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .errors import PrecisionError
from .finite_field import FFElement, FiniteField
from .hahn_series import HahnSeries
from .lubin_tate import (
    EXACT,
    LTContext,
    _assemble,
    _det_unit_pair,
    affinoid_membership,
    pow_q,
    solvable_residue_tuples,
)

Frac = Fraction

EntrySpec = Union[int, FFElement, Dict[int, FFElement], HahnSeries]


# ---------------------------------------------------------------------------
# scalars of K = F_q((w)) as integer-exponent truncated series


def _as_scalar(ctx: LTContext, spec: EntrySpec, depth: int) -> HahnSeries:
    """Normalize an entry to a truncated series with F_q digits."""
    field = ctx.field
    cap = Frac(depth)
    if isinstance(spec, HahnSeries):
        if spec.cap < cap:
            raise ValueError("entry certified below the requested depth")
        s = spec.truncate(cap)
    elif isinstance(spec, FFElement):
        s = (HahnSeries.monomial(field, Frac(0), spec, cap)
             if spec != field.zero else HahnSeries.zero(field, cap))
    elif isinstance(spec, int):
        c = field.from_int(spec % ctx.p)
        s = (HahnSeries.monomial(field, Frac(0), c, cap)
             if c != field.zero else HahnSeries.zero(field, cap))
    elif isinstance(spec, dict):
        terms = {Frac(l): c for l, c in spec.items() if c != field.zero}
        s = HahnSeries(field, terms, cap)
    else:
        raise TypeError(f"cannot build a scalar from {type(spec).__name__}")
    for e, c in s.terms.items():
        if e.denominator != 1:
            raise ValueError("matrix entries live in the base field: "
                             "integer uniformizer powers only")
        if c.frobenius(ctx.a) != c:
            raise ValueError("matrix digits must lie in the F_q subfield")
    return s


def _scalar_one(ctx: LTContext, depth: int) -> HahnSeries:
    return HahnSeries.one(ctx.field, Frac(depth))


def _nth_root_one_unit(s: HahnSeries, m: int) -> HahnSeries:
    """m-th root of a 1-unit scalar by Newton iteration; m prime to p."""
    field = s.field
    p = field.p
    if m % p == 0:
        raise ValueError("root degree must be prime to the characteristic")
    mc = field.from_int(m % p)
    x = HahnSeries.one(field, s.cap)
    steps = 0
    n_target = s.cap
    while steps < 64:
        steps += 1
        err = x ** m - s
        if err.valuation() is None:
            break
        upd = err * (x ** (m - 1)).inverse().scale(mc.inverse())
        x = x - upd
    return x.truncate(n_target)


# ---------------------------------------------------------------------------
# truncated matrices over O_K


class TruncatedMatrix:
    """Square matrix over F_q[[w]] (Laurent entries allowed), uniform depth.

    Entries are integer-exponent truncated series with digits in the F_q
    subfield of the working coefficient field; depth is the common
    certification exponent of all entries.
    """

    __slots__ = ("ctx", "depth", "entries")

    def __init__(self, ctx: LTContext, rows: Sequence[Sequence[EntrySpec]],
                 depth: Optional[int] = None):
        n = ctx.n
        self.ctx = ctx
        self.depth = 3 * n if depth is None else int(depth)
        if self.depth < 2:
            raise ValueError("matrix depth must be at least 2")
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ValueError(f"expected a {n}x{n} matrix")
        self.entries: Tuple[Tuple[HahnSeries, ...], ...] = tuple(
            tuple(_as_scalar(ctx, e, self.depth) for e in row) for row in rows)

    def __repr__(self) -> str:
        return f"TruncatedMatrix(n={self.ctx.n}, depth={self.depth})"


def identity_matrix(ctx: LTContext, depth: Optional[int] = None) -> TruncatedMatrix:
    n = ctx.n
    return TruncatedMatrix(
        ctx, [[1 if i == j else 0 for j in range(n)] for i in range(n)], depth)


def shift_matrix(ctx: LTContext, depth: Optional[int] = None) -> TruncatedMatrix:
    """Cyclic shift with a uniformizer in the corner.

    Rows 0..n-2 carry the superdiagonal 1s, the last row carries w at
    column 0; the n-th power of this matrix is w times the identity.
    """
    n = ctx.n
    rows: List[List[EntrySpec]] = [[0] * n for _ in range(n)]
    for i in range(n - 1):
        rows[i][i + 1] = 1
    rows[n - 1][0] = {1: ctx.field.one}
    return TruncatedMatrix(ctx, rows, depth)


def shift_matrix_inverse(ctx: LTContext, depth: Optional[int] = None) -> TruncatedMatrix:
    """Inverse of shift_matrix; the corner entry has exponent -1."""
    n = ctx.n
    rows: List[List[EntrySpec]] = [[0] * n for _ in range(n)]
    for i in range(n - 1):
        rows[i + 1][i] = 1
    rows[0][n - 1] = {-1: ctx.field.one}
    return TruncatedMatrix(ctx, rows, depth)


def elementary_matrix(ctx: LTContext, i: int, j: int, scalar: EntrySpec,
                      depth: Optional[int] = None) -> TruncatedMatrix:
    """Identity plus a single off-diagonal entry; determinant exactly 1."""
    n = ctx.n
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise ValueError("need an off-diagonal position")
    rows: List[List[EntrySpec]] = [
        [1 if r == c else 0 for c in range(n)] for r in range(n)]
    rows[i][j] = scalar
    return TruncatedMatrix(ctx, rows, depth)


def mat_mul(a: TruncatedMatrix, b: TruncatedMatrix) -> TruncatedMatrix:
    if a.ctx is not b.ctx:
        raise ValueError("matrices from different contexts")
    n = a.ctx.n
    depth = min(a.depth, b.depth)
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            acc = None
            for k in range(n):
                t = a.entries[i][k] * b.entries[k][j]
                acc = t if acc is None else acc + t
            row.append(acc)
        rows.append(row)
    # entries with negative exponents cost certified digits in products;
    # the result depth is what every entry still certifies
    achieved = min(int(e.cap) for r in rows for e in r)
    return TruncatedMatrix(a.ctx, rows, min(depth, achieved))


def _dp_det(rows: Sequence[Sequence[HahnSeries]], one: HahnSeries) -> HahnSeries:
    # Laplace expansion over column subsets; |S| doubles as the row index.
    n = len(rows)
    minors: Dict[int, HahnSeries] = {0: one}
    for mask in range(1, 1 << n):
        cols = [c for c in range(n) if mask >> c & 1]
        r = len(cols) - 1
        acc = None
        for t, c in enumerate(cols):
            term = rows[r][c] * minors[mask ^ (1 << c)]
            if (len(cols) - 1 - t) % 2:
                term = term.scale(-one.field.one)
            acc = term if acc is None else acc + term
        minors[mask] = acc
    return minors[(1 << n) - 1]


def mat_det(g: TruncatedMatrix) -> HahnSeries:
    """Determinant as a truncated scalar."""
    return _dp_det(g.entries, _scalar_one(g.ctx, g.depth))


def mat_sub_identity(g: TruncatedMatrix) -> TruncatedMatrix:
    one = _scalar_one(g.ctx, g.depth)
    rows = [[g.entries[i][j] - one if i == j else g.entries[i][j]
             for j in range(g.ctx.n)] for i in range(g.ctx.n)]
    return TruncatedMatrix(g.ctx, rows, g.depth)


def iwahori_check(g: TruncatedMatrix) -> Dict[str, bool]:
    """Membership flags for the standard upper-triangular chain order.

    in_I: integral entries whose reduction is upper triangular.
    in_I_units: additionally the diagonal residues are invertible.
    in_UI1: g - 1 lies in the radical (diagonal and subdiagonal entries
    divisible by w, superdiagonal entries merely integral).
    det_is_one: the determinant equals 1 through the stored depth.
    """
    if g.depth < 2:
        raise ValueError("need depth at least 2 to decide the flags")
    n = g.ctx.n
    one = g.ctx.field.one

    def ge(entry: HahnSeries, bound: int) -> bool:
        v = entry.valuation()
        return v is None or v >= bound

    in_i = all(ge(g.entries[i][j], 1 if i > j else 0)
               for i in range(n) for j in range(n))
    units = in_i and all(g.entries[i][i].coeff(Frac(0)) != g.ctx.field.zero
                         for i in range(n))
    gm1 = mat_sub_identity(g)
    in_u1 = all(ge(gm1.entries[i][j], 1 if i >= j else 0)
                for i in range(n) for j in range(n))
    det = mat_det(g)
    dv = (det - _scalar_one(g.ctx, g.depth)).valuation()
    return {
        "in_I": in_i,
        "in_I_units": units,
        "in_UI1": in_u1,
        "det_is_one": dv is None,
    }


def r_L_matrix(g: TruncatedMatrix) -> FFElement:
    """Additive residue character of a depth-one matrix actor.

    The residue of the trace of  shift^(-1) (g - 1); defined on matrices
    congruent to 1 modulo the radical of the chain order.
    """
    if not iwahori_check(g)["in_UI1"]:
        raise ValueError("character defined only on the depth-one unit group")
    prod = mat_mul(shift_matrix_inverse(g.ctx, g.depth), mat_sub_identity(g))
    acc = g.ctx.field.zero
    for i in range(g.ctx.n):
        acc = acc + prod.entries[i][i].coeff(Frac(0))
    return acc


def sample_unipotent(ctx: LTContext, rng: random.Random,
                     depth: Optional[int] = None,
                     factors: int = 3) -> TruncatedMatrix:
    """Random product of elementary matrices in the depth-one unit group.

    Superdiagonal positions may carry unit digits, subdiagonal positions
    start at exponent 1; every factor has determinant 1, so the product
    does too, exactly.
    """
    n = ctx.n
    depth = 3 * n if depth is None else depth
    pool = [c for c in ctx.field.elements() if c.frobenius(ctx.a) == c]
    g = identity_matrix(ctx, depth)
    for _ in range(max(1, factors)):
        i = rng.randrange(n)
        j = rng.randrange(n)
        while j == i:
            j = rng.randrange(n)
        lmin = 0 if i < j else 1
        terms: Dict[int, FFElement] = {}
        for l in range(lmin, min(depth, lmin + 3)):
            c = rng.choice(pool)
            if c != ctx.field.zero:
                terms[l] = c
        g = mat_mul(g, elementary_matrix(ctx, i, j, terms, depth))
    return g


# ---------------------------------------------------------------------------
# the degree-n division ring  F_{q^n}<phi> / (phi a = a^q phi, phi^n = w)


class DivisionAlgElement:
    """Truncated element  sum_{i<N} d_i phi^i  with d_i in F_{q^n}.

    The coefficient field is the F_{q^n} subfield of the working field;
    phi conjugates it by the q-power Frobenius and phi^n is the uniformizer.
    """

    __slots__ = ("ctx", "coeffs", "depth")

    def __init__(self, ctx: LTContext, coeffs: Sequence[FFElement],
                 depth: Optional[int] = None):
        self.ctx = ctx
        self.depth = (3 * ctx.n if depth is None else int(depth))
        if self.depth < ctx.n + 1:
            raise ValueError("depth must exceed the ring degree")
        cs = list(coeffs)
        if len(cs) > self.depth:
            raise ValueError("more digits than the stated depth")
        cs += [ctx.field.zero] * (self.depth - len(cs))
        for c in cs:
            if not isinstance(c, FFElement) or c.field is not ctx.field:
                raise ValueError("digits must be working-field elements")
            if c.frobenius(ctx.a * ctx.n) != c:
                raise ValueError("digits must lie in the F_{q^n} subfield")
        self.coeffs: Tuple[FFElement, ...] = tuple(cs)

    def __repr__(self) -> str:
        return f"DivisionAlgElement(n={self.ctx.n}, depth={self.depth})"


def div_one(ctx: LTContext, depth: Optional[int] = None) -> DivisionAlgElement:
    return DivisionAlgElement(ctx, [ctx.field.one], depth)


def phi_div(ctx: LTContext, depth: Optional[int] = None) -> DivisionAlgElement:
    return DivisionAlgElement(ctx, [ctx.field.zero, ctx.field.one], depth)


def div_mul(a: DivisionAlgElement, b: DivisionAlgElement) -> DivisionAlgElement:
    if a.ctx is not b.ctx:
        raise ValueError("elements from different contexts")
    ctx = a.ctx
    depth = min(a.depth, b.depth)
    out = [ctx.field.zero] * depth
    for i, ai in enumerate(a.coeffs):
        if ai == ctx.field.zero:
            continue
        for j, bj in enumerate(b.coeffs):
            k = i + j
            if k >= depth:
                break
            if bj == ctx.field.zero:
                continue
            # phi^i b_j = b_j^(q^i) phi^i
            out[k] = out[k] + ai * bj.frobenius(ctx.a * i)
    return DivisionAlgElement(ctx, out, depth)


def div_add(a: DivisionAlgElement, b: DivisionAlgElement) -> DivisionAlgElement:
    if a.ctx is not b.ctx:
        raise ValueError("elements from different contexts")
    depth = min(a.depth, b.depth)
    return DivisionAlgElement(
        a.ctx, [a.coeffs[k] + b.coeffs[k] for k in range(depth)], depth)


def embed_scalar(ctx: LTContext, scalar: Union[HahnSeries, Sequence[FFElement]],
                 depth: Optional[int] = None) -> DivisionAlgElement:
    """Central embedding of a base-field scalar: w-digit l goes to phi^(l n)."""
    n = ctx.n
    depth = 3 * n if depth is None else int(depth)
    out = [ctx.field.zero] * depth
    if isinstance(scalar, HahnSeries):
        items = []
        for e, c in scalar.terms.items():
            if e.denominator != 1 or e < 0:
                raise ValueError("need an integral scalar")
            items.append((int(e), c))
    else:
        items = list(enumerate(scalar))
    for l, c in items:
        if c.frobenius(ctx.a) != c:
            raise ValueError("scalar digits must lie in the F_q subfield")
        if l * n < depth and c != ctx.field.zero:
            out[l * n] = c
    return DivisionAlgElement(ctx, out, depth)


def div_inverse(d: DivisionAlgElement) -> DivisionAlgElement:
    """Two-sided inverse of a unit (nonzero constant digit)."""
    ctx = d.ctx
    if d.coeffs[0] == ctx.field.zero:
        raise ValueError("not a unit: constant digit vanishes")
    c0inv = d.coeffs[0].inverse()
    lead = DivisionAlgElement(ctx, [c0inv], d.depth)
    m = div_mul(lead, d)  # 1 + (positive phi-degree part)
    tail = DivisionAlgElement(
        ctx, [ctx.field.zero] + list(m.coeffs[1:]), d.depth)
    acc = div_one(ctx, d.depth)
    power = div_one(ctx, d.depth)
    for k in range(1, d.depth):
        power = div_mul(power, tail)
        if all(c == ctx.field.zero for c in power.coeffs):
            break
        if k % 2:
            acc = div_add(acc, DivisionAlgElement(
                ctx, [-c for c in power.coeffs], d.depth))
        else:
            acc = div_add(acc, power)
    return div_mul(acc, lead)


def _regular_rep(d: DivisionAlgElement) -> List[List[HahnSeries]]:
    """Matrix of right multiplication by d on the phi-power basis over K_n.

    Entry (r, j) collects the contributions of  phi^j d  landing on phi^r
    modulo  phi^n = w; its certification depth reflects which digits of d
    were stored.
    """
    ctx = d.ctx
    n = ctx.n
    field = ctx.field
    rows: List[List[HahnSeries]] = []
    for r in range(n):
        row = []
        for j in range(n):
            terms: Dict[Fraction, FFElement] = {}
            for i, di in enumerate(d.coeffs):
                if (i + j) % n != r or di == field.zero:
                    continue
                c = (i + j - r) // n
                terms[Frac(c)] = terms.get(Frac(c), field.zero) + di.frobenius(ctx.a * j)
            cap = Frac(-(-(d.depth + j - r) // n))
            row.append(HahnSeries(
                field, {e: c for e, c in terms.items() if c != field.zero}, cap))
        rows.append(row)
    return rows


def _descent_checked(s: HahnSeries, a: int) -> HahnSeries:
    for c in s.terms.values():
        if c.frobenius(a) != c:
            raise ArithmeticError("reduced invariant failed to descend to F_q")
    return s


def trd(d: DivisionAlgElement) -> HahnSeries:
    """Reduced trace, a base-field scalar; computed from the regular
    representation and checked to have F_q digits."""
    rep = _regular_rep(d)
    acc = None
    for r in range(d.ctx.n):
        acc = rep[r][r] if acc is None else acc + rep[r][r]
    return _descent_checked(acc, d.ctx.a)


def nrd(d: DivisionAlgElement) -> HahnSeries:
    """Reduced norm, a base-field scalar (determinant of the regular
    representation, with the same descent check)."""
    rep = _regular_rep(d)
    one = HahnSeries.one(d.ctx.field, Frac(d.depth))
    return _descent_checked(_dp_det(rep, one), d.ctx.a)


def div_alg_ops(op: str, a: DivisionAlgElement,
                b: Optional[DivisionAlgElement] = None):
    """Dispatcher used by the command-line surface: mul, trd or nrd."""
    if op == "mul":
        if b is None:
            raise ValueError("mul needs two elements")
        return div_mul(a, b)
    if op == "trd":
        return trd(a)
    if op == "nrd":
        return nrd(a)
    raise ValueError(f"unknown operation {op!r}")


def r_L_div(d: DivisionAlgElement) -> FFElement:
    """Additive residue character of a depth-one division actor.

    Residue of the reduced trace of  (-phi)^(-1) (d - 1).  The constant
    digit of that element must match the inverse-expansion ratio digit
    (first over zeroth digit of d^(-1)) raised to the inverse Frobenius;
    the agreement is asserted on every call.
    """
    ctx = d.ctx
    if d.coeffs[0] != ctx.field.one:
        raise ValueError("character defined only on the depth-one unit group")
    shifted = [-(c.frobenius(-ctx.a)) for c in d.coeffs[1:]]
    x = DivisionAlgElement(ctx, shifted, d.depth)
    res = trd(x).coeff(Frac(0))
    dinv = div_inverse(d)
    kappa = dinv.coeffs[1] * dinv.coeffs[0].inverse()
    expect = ctx.field.zero
    root = kappa.frobenius(-ctx.a)
    for j in range(ctx.n):
        expect = expect + root.frobenius(ctx.a * j)
    if res != expect:
        raise ArithmeticError("trace residue disagrees with the ratio digit")
    return res


def _division_digit_pool(ctx: LTContext) -> List[FFElement]:
    k = ctx.a * ctx.n
    return [c for c in ctx.field.elements() if c.frobenius(k) == c]


def sample_division_unit(ctx: LTContext, rng: random.Random,
                         depth: Optional[int] = None) -> DivisionAlgElement:
    """Random depth-one division unit, normalized to reduced norm 1.

    A random 1-unit is scaled by the central Newton n-th root of the
    inverse of its reduced norm; the normalization is verified exactly
    through the stored depth.
    """
    n = ctx.n
    depth = 3 * n if depth is None else depth
    pool = _division_digit_pool(ctx)
    coeffs = [ctx.field.one]
    for _ in range(1, depth):
        coeffs.append(rng.choice(pool))
    d = DivisionAlgElement(ctx, coeffs, depth)
    nu = nrd(d)
    c = _nth_root_one_unit(nu.inverse(), n)
    scaled = div_mul(embed_scalar(ctx, c, depth), d)
    check = nrd(scaled) - HahnSeries.one(ctx.field, Frac(1))
    if check.valuation() is not None:
        raise ArithmeticError("norm normalization left a visible defect")
    return scaled


# ---------------------------------------------------------------------------
# the special shift actor on reduced coordinates and its characteristic data


def _poly_trim(c: List[FFElement]) -> Tuple[FFElement, ...]:
    while c and not c[-1]:
        c.pop()
    return tuple(c)


def _poly_add(a, b, field):
    out = []
    for k in range(max(len(a), len(b))):
        x = a[k] if k < len(a) else field.zero
        y = b[k] if k < len(b) else field.zero
        out.append(x + y)
    return _poly_trim(out)


def _poly_mul(a, b, field):
    if not a or not b:
        return ()
    out = [field.zero] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if not x:
            continue
        for j, y in enumerate(b):
            out[i + j] = out[i + j] + x * y
    return _poly_trim(out)


def _poly_neg(a):
    return tuple(-x for x in a)


def gL_matrix(q: int, n: int) -> Dict:
    """Reduced-coordinate matrix of the distinguished shift actor.

    On the reduced y-coordinates the actor sends the first to minus the
    sum of all and shifts the rest down one slot.  Returns the matrix, its
    characteristic polynomial (ascending digits over F_q), the comparison
    against 1 + T + ... + T^(n-1), and the determinant.
    """
    from .finite_field import build_field
    from .lubin_tate import _prime_power
    p, a = _prime_power(q)
    if n < 2:
        raise ValueError("need dimension at least 2")
    if n % p == 0:
        raise ValueError("dimension must be prime to the characteristic")
    field = build_field(p, a)
    m = n - 1
    rows = [[field.zero] * m for _ in range(m)]
    for j in range(m):
        rows[0][j] = -field.one
    for i in range(1, m):
        rows[i][i - 1] = field.one
    # characteristic polynomial det(T I - M) by the same subset expansion,
    # with entries in F_q[T]
    prows: List[List[Tuple[FFElement, ...]]] = []
    for i in range(m):
        prow = []
        for j in range(m):
            base = (-rows[i][j],) if rows[i][j] else ()
            if i == j:
                base = _poly_add(base, (field.zero, field.one), field)
            prow.append(base)
        prows.append(prow)
    minors: Dict[int, Tuple[FFElement, ...]] = {0: (field.one,)}
    for mask in range(1, 1 << m):
        cols = [c for c in range(m) if mask >> c & 1]
        r = len(cols) - 1
        acc: Tuple[FFElement, ...] = ()
        for t, c in enumerate(cols):
            term = _poly_mul(prows[r][c], minors[mask ^ (1 << c)], field)
            if (len(cols) - 1 - t) % 2:
                term = _poly_neg(term)
            acc = _poly_add(acc, term, field)
        minors[mask] = acc
    charpoly = minors[(1 << m) - 1]
    target = tuple(field.one for _ in range(n))
    det = field.one
    # det from the constant digit: charpoly(0) = (-1)^m det(M)
    if charpoly:
        det = charpoly[0] if m % 2 == 0 else -charpoly[0]
    return {
        "q": q,
        "n": n,
        "field": field,
        "matrix": tuple(tuple(r) for r in rows),
        "charpoly": charpoly,
        "cyclotomic_quotient": target,
        "matches": charpoly == target,
        "det": det,
    }


# ---------------------------------------------------------------------------
# analytic action on fiber coordinates


Actor = Tuple


def _act_matrix(ctx: LTContext, g: TruncatedMatrix,
                xs: Sequence[HahnSeries]) -> List[HahnSeries]:
    n = ctx.n
    out = []
    for i in range(n):
        acc = None
        for j in range(n):
            entry = g.entries[j][i]
            for e in sorted(entry.terms):
                l = int(e)
                t = pow_q(xs[j], l * n, ctx.q).scale(entry.terms[e])
                acc = t if acc is None else acc + t
        if acc is None:
            raise ValueError("matrix column acts by zero")
        out.append(acc)
    return out


def _act_division(ctx: LTContext, d: DivisionAlgElement,
                  xs: Sequence[HahnSeries]) -> List[HahnSeries]:
    dinv = div_inverse(d)
    out = []
    for x in xs:
        acc = None
        for j, c in enumerate(dinv.coeffs):
            if c == ctx.field.zero:
                continue
            t = pow_q(x, j, ctx.q).scale(c)
            acc = t if acc is None else acc + t
        if acc is None:
            raise ValueError("division element acts by zero")
        out.append(acc)
    return out


def _act_weil(ctx: LTContext, n_sigma: int, u_digits: Sequence[FFElement],
              xs: Sequence[HahnSeries]) -> List[HahnSeries]:
    if n_sigma < 1:
        raise ValueError("need a positive Frobenius power")
    digits = list(u_digits)
    if not digits or digits[0] == ctx.field.zero:
        raise ValueError("unit digits must start with a nonzero residue")
    for c in digits:
        if c.frobenius(ctx.a) != c:
            raise ValueError("unit digits must lie in the F_q subfield")
    # The q^n_sigma-power value map composed with the digit expansion of
    # a_sigma, written on the standard valuation shells: the shared
    # q^n_sigma-power is absorbed into a coefficientwise Frobenius so the
    # j-th digit contributes a plain q^j-power term.
    k = ctx.a * n_sigma
    out = []
    for x in xs:
        xf = HahnSeries(x.field,
                        {e: c.frobenius(k) for e, c in x.terms.items()},
                        x.cap)
        acc = None
        for j, c in enumerate(digits):
            if c == ctx.field.zero:
                continue
            t = pow_q(xf, j, ctx.q).scale(c)
            acc = t if acc is None else acc + t
        out.append(acc)
    return out


def analytic_action(ctx: LTContext, actor: Actor, xs: Sequence[HahnSeries],
                    check_membership: bool = True) -> List[HahnSeries]:
    """Image of fiber coordinates under one actor.

    Actors are tagged tuples: ("matrix", g), ("div", d) or
    ("weil", n_sigma, unit_digits).  The matrix rule substitutes column
    digits with q^(l n)-powers, the division rule applies the inverse digit
    expansion with q^j-powers, and the Weil rule composes a coefficientwise
    Frobenius power with the series action of the shifted unit digits.

    With check_membership the image is required to stay in the affinoid
    (this can raise PrecisionError when the stored caps cannot decide it).
    """
    if len(xs) != ctx.n:
        raise ValueError(f"expected {ctx.n} coordinates")
    kind = actor[0]
    if kind == "matrix":
        out = _act_matrix(ctx, actor[1], xs)
    elif kind == "div":
        out = _act_division(ctx, actor[1], xs)
    elif kind == "weil":
        out = _act_weil(ctx, actor[1], actor[2], xs)
    else:
        raise ValueError(f"unknown actor kind {kind!r}")
    if check_membership and not affinoid_membership(ctx, out):
        raise ValueError("action left the affinoid")
    return out


# ---------------------------------------------------------------------------
# congruence certification at sampled points


def _residue_clause(series: HahnSeries, expect: FFElement) -> Dict:
    """Decide  series == expect  mod exponents > 0 at the stored cap."""
    field = series.field
    if expect != field.zero:
        diff = series - HahnSeries.monomial(field, Frac(0), expect, series.cap)
    else:
        diff = series
    v = diff.valuation()
    if v is None:
        if diff.cap <= 0:
            return {"ok": False, "undecidable": True, "margin": diff.cap}
        return {"ok": True, "undecidable": False, "margin": diff.cap}
    if v <= 0:
        return {"ok": False, "undecidable": False, "margin": v}
    return {"ok": True, "undecidable": False, "margin": v}


def _coeff_twist(s: HahnSeries, k: int) -> HahnSeries:
    return HahnSeries(s.field,
                      {e: c.frobenius(k) for e, c in s.terms.items()}, s.cap)


def _fq_pool(ctx: LTContext) -> List[FFElement]:
    return [c for c in ctx.field.elements() if c.frobenius(ctx.a) == c]


def eta_unit(ctx: LTContext) -> HahnSeries:
    """Leading unit of the wrapped coordinate ratio; valuation 1/n."""
    cm = ctx.cm()
    return pow_q(cm.coords[ctx.n - 1], ctx.n, ctx.q) * cm.coords[0].inverse()


def first_order_terms(ctx: LTContext, one_plus_y: Sequence[HahnSeries],
                      s_unit: HahnSeries) -> Dict:
    """Depth-one shift functionals of a point, normalized to 1-units.

    The superdiagonal matrix digits pair with the central terms, the corner
    pi-digit with the long term, and the division digit expansion with the
    by-slot power terms.  Each series must be congruent to one above
    exponent zero; the assembled residues reproduce the depth-one
    characters.
    """
    q, n = ctx.q, ctx.n
    cm = ctx.cm()
    eta_inv = eta_unit(ctx).inverse()
    central = []
    for i in range(1, n):
        ratio = cm.coords[i - 1] * cm.coords[i].inverse()
        theta = pow_q(ratio, i, q) * eta_inv
        central.append(theta * one_plus_y[i - 1].rational_power(Frac(1, q - 1)))
    long_term = s_unit.rational_power(Frac(1, q - 1))
    div_terms = []
    for i in range(1, n + 1):
        apart = (pow_q(cm.coords[i - 1], i - 1, q) ** (q - 1)) * eta_inv
        b = None
        for j in range(i, n):
            f = one_plus_y[j - 1].rational_power(Frac(q ** (i - 1), q ** j))
            b = f if b is None else b * f
        xn_pow = s_unit
        for k in range(1, n):
            xn_pow = xn_pow * one_plus_y[k - 1].rational_power(Frac(1, q ** k))
        xn_pow = xn_pow.rational_power(Frac(q ** (i - 1), q ** n - 1))
        b = xn_pow if b is None else b * xn_pow
        div_terms.append(apart * b)
    return {"central": central, "long": long_term, "div": div_terms}


def fiber_z_power(ctx: LTContext, one_plus_y: Sequence[HahnSeries],
                  s_unit: HahnSeries) -> HahnSeries:
    """q-th power of the reduced z-coordinate, read off the fiber identity.

    Works on the collapsed unit data of a point, so the read survives caps
    that defeat a direct coordinate chart; the constant term is the q-th
    power of the z-residue, up to exponents within the returned cap.
    """
    q = ctx.q
    cm = ctx.cm()
    unit_cap = Frac(1) + Frac(1, q - 1)
    asm = {"one_plus_Y": list(one_plus_y), "S": s_unit}
    kpow = (q - 1) ** 2
    g_cm, dd = _det_unit_pair(cm, asm, unit_cap)
    ee = dd * (g_cm - dd).inverse()
    dev = None
    ej = None
    for j in range(1, kpow + 1):
        ej = ee if ej is None else ej * ee
        cj = comb(kpow, j) % ctx.p
        if cj == 0:
            continue
        t = ej.scale(ctx.field.from_int(cj))
        dev = t if dev is None else dev + t
    sumy = None
    prod = None
    for oy in one_plus_y:
        y = oy - HahnSeries.one(ctx.field, oy.cap)
        sumy = y if sumy is None else sumy + y
        prod = oy if prod is None else prod * oy
    prod_inv = prod.inverse()
    bracket = sumy + prod_inv - HahnSeries.one(ctx.field, prod_inv.cap)
    if dev is not None:
        bracket = bracket + dev * prod_inv
    return bracket * cm.zscale.inverse()


def _assemble_seed(ctx: LTContext, ybars: Sequence[FFElement],
                   zbar: FFElement) -> Dict:
    field = ctx.field
    ys = [HahnSeries.monomial(field, Frac(0), yb, EXACT)
          if yb != field.zero else HahnSeries.zero(field, EXACT)
          for yb in ybars]
    zz = (HahnSeries.monomial(field, Frac(0), zbar, EXACT)
          if zbar != field.zero else HahnSeries.zero(field, EXACT))
    return _assemble(ctx, ys, zz)


def _delta_y_clauses(ctx: LTContext, xs_ref: Sequence[HahnSeries],
                     one_plus_y_ref: Sequence[HahnSeries],
                     xs_new: Sequence[HahnSeries]) -> List[Dict]:
    """Compare y-data of two coordinate lists through ratio units.

    The by-slot ratio of consecutive-coordinate quotients is a 1-unit
    whose integer power reproduces the quotient of the two y-unit chains;
    offsets survive caps that a direct chart read loses to root-taking.
    """
    q, n = ctx.q, ctx.n
    ys_inv = ctx.cm().yscale.inverse()
    zero = ctx.field.zero
    out = []
    for i in range(1, n):
        rr = ((xs_new[i - 1] * xs_new[i].inverse())
              * (xs_ref[i] * xs_ref[i - 1].inverse()))
        big = rr ** (q ** i * (q - 1))
        diff = (one_plus_y_ref[i - 1]
                * (big - HahnSeries.one(ctx.field, big.cap)) * ys_inv)
        out.append(_residue_clause(diff, zero))
    return out


def _term_clauses(ctx: LTContext, terms: Sequence[HahnSeries],
                  digits: Sequence[FFElement],
                  expect: FFElement) -> Dict:
    """Certify each 1-unit term and the digit-weighted residue assembly."""
    one = ctx.field.one
    clauses = [_residue_clause(t, one) for t in terms]
    acc = ctx.field.zero
    for c, t in zip(digits, terms):
        acc = acc + c * t.coeff(Frac(0))
    decided = all(not c["undecidable"] for c in clauses)
    ok = decided and all(c["ok"] for c in clauses) and acc == expect
    return {"ok": ok, "undecidable": not decided,
            "margin": min(c["margin"] for c in clauses),
            "assembled": acc, "expected": expect}


def _membership_state(ctx: LTContext, xs: Sequence[HahnSeries]):
    try:
        return affinoid_membership(ctx, xs)
    except PrecisionError:
        return None


def _fiber_z_roots(ctx: LTContext,
                   ybars: Sequence[FFElement]) -> List[FFElement]:
    # roots of z^q - z = sum_{i<=j} y_i y_j; nonempty for seeds whose
    # defect has zero trace down to F_q
    field = ctx.field
    rhs = field.zero
    for i in range(ctx.n - 1):
        for j in range(i, ctx.n - 1):
            rhs = rhs + ybars[i] * ybars[j]
    return [c for c in field.elements() if c.frobenius(ctx.a) - c == rhs]


def action_congruence_check(ctx: LTContext, samples: int = 10, seed: int = 0,
                            classes: Sequence[str] = ("matrix", "div", "weil"),
                            max_points: int = 3, n_sigma: int = 1) -> Dict:
    """Certify the reduced-coordinate action laws at sampled points.

    Points are assembled from exact residue seeds, acted on by sampled
    depth-one matrix units, reduced-norm-one division units, and Frobenius
    actors, and every congruence clause the stored caps can decide is
    checked:

    * y-slots are compared through ratio units against the expected image
      (the point itself, or its coefficientwise Frobenius twist);
    * the z-shift of matrix and division actors is certified through the
      depth-one shift functionals, whose unit terms and digit assembly
      must reproduce r_L;
    * the Frobenius z-law is read off the fiber identity at the twisted
      unit data, with the unit-part shift certified separately through
      the division functionals.

    Clauses whose caps close to or below zero are counted undecidable,
    never passed or failed.  The verdict `ok` means no decidable clause
    disagreed; `fully_decided` additionally means nothing was skipped.
    """
    rng = random.Random(seed)
    tuples = solvable_residue_tuples(ctx, limit=8 * max_points)
    if not tuples:
        raise ValueError("no nonzero y-seeds split over this residue field; "
                         "raise res_mult")
    rng.shuffle(tuples)
    pool = _fq_pool(ctx)
    unit_pool = [c for c in pool if c != ctx.field.zero]
    pts = []
    for tup in tuples[:max_points]:
        zbar = rng.choice(_fiber_z_roots(ctx, tup))
        asm = _assemble_seed(ctx, tup, zbar)
        entry = {
            "zbar": zbar,
            "X": asm["X"],
            "one_plus_Y": asm["one_plus_Y"],
            "S": asm["S"],
            "fo": first_order_terms(ctx, asm["one_plus_Y"], asm["S"]),
        }
        if "weil" in classes:
            k = ctx.a * n_sigma
            entry["X_t"] = [_coeff_twist(x, k) for x in asm["X"]]
            entry["oy_t"] = [_coeff_twist(s, k) for s in asm["one_plus_Y"]]
            entry["S_t"] = _coeff_twist(asm["S"], k)
            entry["fo_t"] = first_order_terms(ctx, entry["oy_t"], entry["S_t"])
            entry["zq_t"] = fiber_z_power(ctx, entry["oy_t"], entry["S_t"])
        pts.append(entry)
    rows = []
    for cls in classes:
        for idx in range(samples):
            pt = pts[idx % len(pts)]
            try:
                row = {"class": cls, "index": idx}
                if cls == "matrix":
                    g = sample_unipotent(ctx, rng)
                    image = analytic_action(ctx, ("matrix", g), pt["X"],
                                            check_membership=False)
                    ycs = _delta_y_clauses(ctx, pt["X"], pt["one_plus_Y"],
                                           image)
                    digits = [g.entries[i - 1][i].coeff(Frac(0))
                              for i in range(1, ctx.n)]
                    digits.append(g.entries[ctx.n - 1][0].coeff(Frac(1)))
                    terms = list(pt["fo"]["central"]) + [pt["fo"]["long"]]
                    zc = _term_clauses(ctx, terms, digits, r_L_matrix(g))
                    row["z_mode"] = "first_order"
                elif cls == "div":
                    d = sample_division_unit(ctx, rng)
                    image = analytic_action(ctx, ("div", d), pt["X"],
                                            check_membership=False)
                    ycs = _delta_y_clauses(ctx, pt["X"], pt["one_plus_Y"],
                                           image)
                    dinv = div_inverse(d)
                    kappa = dinv.coeffs[1] * dinv.coeffs[0].inverse()
                    digits = [kappa.frobenius(ctx.a * i)
                              for i in range(ctx.n)]
                    zc = _term_clauses(ctx, pt["fo"]["div"], digits,
                                       r_L_div(d))
                    row["z_mode"] = "first_order"
                elif cls == "weil":
                    digits = [rng.choice(unit_pool)]
                    for _ in range(2):
                        digits.append(rng.choice(pool))
                    image = analytic_action(ctx, ("weil", n_sigma,
                                                  tuple(digits)), pt["X"],
                                            check_membership=False)
                    ycs = _delta_y_clauses(ctx, pt["X_t"], pt["oy_t"], image)
                    zq_expect = pt["zbar"].frobenius(ctx.a * (n_sigma + 1))
                    zc = _residue_clause(pt["zq_t"], zq_expect)
                    row["z_mode"] = "transport"
                    if any(c != ctx.field.zero for c in digits[1:]):
                        c0_inv = digits[0].inverse()
                        u1 = [ctx.field.one] + [c * c0_inv
                                                for c in digits[1:]]
                        d1 = div_inverse(DivisionAlgElement(ctx, u1))
                        kappa1 = u1[1]
                        kdig = [kappa1.frobenius(ctx.a * i)
                                for i in range(ctx.n)]
                        sc = _term_clauses(ctx, pt["fo_t"]["div"], kdig,
                                           r_L_div(d1))
                        zc = {
                            "ok": zc["ok"] and sc["ok"],
                            "undecidable": (zc["undecidable"]
                                            or sc["undecidable"]),
                            "margin": min(zc["margin"], sc["margin"]),
                        }
                        row["z_mode"] = "transport+shift"
                else:
                    raise ValueError(f"unknown actor class {cls!r}")
            except (ValueError, PrecisionError) as exc:
                rows.append({"class": cls, "index": idx, "ok": False,
                             "undecidable": True, "error": str(exc)})
                continue
            row["in_affinoid"] = _membership_state(ctx, image)
            decided = [c for c in [zc] + ycs if not c["undecidable"]]
            row["ok"] = all(c["ok"] for c in decided)
            row["undecidable"] = len(decided) < 1 + len(ycs)
            row["margin"] = min(c["margin"] for c in [zc] + ycs)
            rows.append(row)
    decided_fail = sum(1 for r in rows if not r["ok"])
    undecided = sum(1 for r in rows if r["undecidable"])
    return {
        "q": ctx.q,
        "n": ctx.n,
        "samples": samples,
        "classes": tuple(classes),
        "rows": rows,
        "failures": decided_fail,
        "undecidable_clauses": undecided,
        "ok": decided_fail == 0,
        "fully_decided": undecided == 0,
    }
