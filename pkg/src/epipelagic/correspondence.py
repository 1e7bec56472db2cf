"""Character bookkeeping for the depth-one parameter family.

A parameter is a Teichmueller twist class, a unit-character exponent, a
formal central symbol and an optional tame twist.  This module evaluates
the attached characters on matrix and division-ring inputs, computes the
tame constants by the halving recursion, certifies them against the
quadratic Gauss sum calculus, and audits the index and dimension formulas.

Values live in a small product: a p-th root of unity (additive part), a
(q-1)-th root of unity (unit part), integer exponents of two formal
symbols (the central value and the twist's uniformizer value), and a
half-symbol whose square is the residue class of -1.  Everything is
exact; nothing is ever embedded into the complex numbers.
"""

import json
from fractions import Fraction
from math import gcd
from typing import Dict, List, Optional, Sequence, Tuple

from .cyclotomic import AdditiveCharacter, CyclotomicInt, standard_character
from .finite_field import FFElement, FiniteField, build_field, jacobi, residue_symbol
from .group_action import (
    DivisionAlgElement,
    TruncatedMatrix,
    iwahori_check,
    mat_det,
    mat_mul,
    mat_sub_identity,
    nrd,
    trd,
)
from .lubin_tate import LTContext, _prime_power
from .quadratic_gauss import SignedQuarticUnit, det_nu_class, gauss_sum_char, gauss_sum_form

Frac = Fraction


class CharacterValue:
    """Componentwise product of the value groups the characters hit.

    Canonical slots: `psi_exp` mod p (additive part), `mult_exp` mod q-1
    (unit part against the fixed generator), `c_exp` and `w_exp` (formal
    central and twist-uniformizer symbols), `m_exp` in {0, 1} (the
    half-symbol).  Signs are folded away on construction: into the unit
    part for odd q, into the additive part for p = 2, so equal values
    always compare equal.
    """

    __slots__ = ("q", "p", "psi_exp", "mult_exp", "c_exp", "w_exp", "m_exp")

    def __init__(self, q: int, psi_exp: int = 0, mult_exp: int = 0,
                 c_exp: int = 0, w_exp: int = 0, sign: int = 1,
                 m_exp: int = 0):
        p, _ = _prime_power(q)
        if sign not in (1, -1):
            raise ValueError("sign must be +-1")
        pairs, m_exp = divmod(int(m_exp), 2)
        if q % 2 == 0:
            if m_exp or pairs:
                raise ValueError("the half-symbol needs odd q")
        elif pairs % 2 and q % 4 == 3:
            # the half-symbol squares to the class of -1
            sign = -sign
        if sign == -1:
            if q % 2:
                mult_exp += (q - 1) // 2
            else:
                psi_exp += 1
        self.q = q
        self.p = p
        self.psi_exp = psi_exp % p
        self.mult_exp = mult_exp % (q - 1)
        self.c_exp = int(c_exp)
        self.w_exp = int(w_exp)
        self.m_exp = m_exp

    @classmethod
    def one(cls, q: int) -> "CharacterValue":
        return cls(q)

    @classmethod
    def from_quartic(cls, s: SignedQuarticUnit) -> "CharacterValue":
        return cls(s.q, sign=s.sign, m_exp=s.exponent)

    def __mul__(self, other) -> "CharacterValue":
        if not isinstance(other, CharacterValue):
            return NotImplemented
        if self.q != other.q:
            raise ValueError("values over different residue fields")
        return CharacterValue(
            self.q, self.psi_exp + other.psi_exp,
            self.mult_exp + other.mult_exp, self.c_exp + other.c_exp,
            self.w_exp + other.w_exp, 1, self.m_exp + other.m_exp)

    def __pow__(self, t: int) -> "CharacterValue":
        return CharacterValue(
            self.q, self.psi_exp * t, self.mult_exp * t, self.c_exp * t,
            self.w_exp * t, 1, self.m_exp * t)

    def inverse(self) -> "CharacterValue":
        return self ** (-1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CharacterValue):
            return NotImplemented
        return (self.q, self.psi_exp, self.mult_exp, self.c_exp,
                self.w_exp, self.m_exp) == \
               (other.q, other.psi_exp, other.mult_exp, other.c_exp,
                other.w_exp, other.m_exp)

    def __hash__(self):
        return hash((self.q, self.psi_exp, self.mult_exp, self.c_exp,
                     self.w_exp, self.m_exp))

    def __repr__(self) -> str:
        return (f"CharacterValue(q={self.q}, zeta_p^{self.psi_exp}, "
                f"gen^{self.mult_exp}, c^{self.c_exp}, w^{self.w_exp}, "
                f"m^{self.m_exp})")


class EpipelagicParam:
    """One member of the depth-one parameter family.

    `zeta` is a nonzero residue-field element (the Teichmueller class
    twisting the uniformizer), `chi_exp` the unit-character exponent
    against the field's fixed generator.  The central value is formal and
    needs no slot.  `omega_exp` is None for no tame twist; otherwise the
    twist's unit exponent (its value on the uniformizer stays a formal
    symbol counted by `w_exp`).
    """

    __slots__ = ("field", "zeta", "chi_exp", "omega_exp")

    def __init__(self, zeta: FFElement, chi_exp: int = 0,
                 omega_exp: Optional[int] = None):
        if not isinstance(zeta, FFElement) or not zeta:
            raise ValueError("need a nonzero residue-field element")
        self.field = zeta.field
        self.zeta = zeta
        self.chi_exp = int(chi_exp)
        self.omega_exp = None if omega_exp is None else int(omega_exp)

    def __repr__(self) -> str:
        return (f"EpipelagicParam(q={self.field.order}, "
                f"zeta=g^{self.zeta.dlog()}, chi={self.chi_exp}, "
                f"omega={self.omega_exp})")


def param_to_json(param: EpipelagicParam, n: int) -> str:
    field = param.field
    return json.dumps({
        "p": field.p,
        "f": field.degree,
        "n": n,
        "zeta_index": param.zeta.dlog(),
        "chi_exp": param.chi_exp,
        "omega_exp": param.omega_exp,
    }, sort_keys=True)


def param_from_json(text: str) -> Tuple[EpipelagicParam, int]:
    data = json.loads(text)
    field = build_field(int(data["p"]), int(data["f"]))
    zeta = field.generator ** (int(data["zeta_index"]) % (field.order - 1)) \
        if field.order > 2 else field.one
    omega = data.get("omega_exp")
    return (EpipelagicParam(zeta, int(data.get("chi_exp", 0)),
                            None if omega is None else int(omega)),
            int(data["n"]))


# ---------------------------------------------------------------------------
# tame extensions and their attached signs


def n_q_of(q: int, n: int) -> int:
    return gcd(n, q - 1)


def enumerate_tame_extensions(q: int, n: int) -> List[FFElement]:
    """Twist-class representatives of the totally ramified degree-n covers.

    Uniformizer classes modulo n-th powers of units: gcd(n, q-1) classes,
    represented by the first powers of the residue field's generator.
    """
    p, f = _prime_power(q)
    if n % p == 0:
        raise ValueError("degree must be prime to the residue characteristic")
    if n < 1:
        raise ValueError("degree must be positive")
    field = build_field(p, f)
    nq = n_q_of(q, n)
    if field.order == 2:
        return [field.one]
    g = field.generator
    return [g ** j for j in range(nq)]


def delta_EK(q: int, e: int, x) -> int:
    """Sign character attached to a totally tame degree-e cover.

    On units: the residue symbol to the power e - 1.  On the uniformizer:
    the integer Jacobi symbol (q/e) for odd e; for even e the value is
    completed by the tame quadratic Hilbert-symbol rule through the
    index-two subcover (a derived convention, reported as such).
    """
    p, _ = _prime_power(q)
    if e % p == 0 or e < 1:
        raise ValueError("degree must be prime to the residue characteristic")
    if isinstance(x, FFElement):
        if not x:
            raise ValueError("unit residue must be nonzero")
        if (e - 1) % 2 == 0 or x.field.order % 2 == 0:
            return 1
        return residue_symbol(x)
    if x != "uniformizer":
        raise ValueError("argument must be a unit residue or 'uniformizer'")
    if e % 2:
        return jacobi(q, e)
    # even degree, odd q: Hilbert pairing of the uniformizer with itself
    # through the quadratic step; only the class of (-1)^(e/2) survives
    minus_class = 1 if q % 4 == 1 else -1
    return minus_class if (e // 2) % 2 else 1


def lambda_tame(q: int, n: int) -> SignedQuarticUnit:
    """Tame constant of a totally ramified degree-n cover, odd q.

    Odd degrees give the integer Jacobi symbol (q/n) with no half-symbol;
    each halving step multiplies by the half-symbol of the current
    additive twist to the half-degree power, the twist doubling as the
    degree halves.
    """
    p, f = _prime_power(q)
    if q % 2 == 0:
        raise ValueError("tame constant formula needs odd q")
    if n % p == 0 or n < 1:
        raise ValueError("degree must be prime to the residue characteristic")
    field = build_field(p, f)

    def twist_sign(t: int) -> int:
        return residue_symbol(field.from_int(t))

    def rec(m: int, t: int) -> SignedQuarticUnit:
        if m % 2:
            return SignedQuarticUnit(q, jacobi(q, m), 0)
        half = m // 2
        sgn = twist_sign(t) if half % 2 else 1
        return rec(half, 2 * t) * SignedQuarticUnit(q, sgn, half)

    return rec(n, 1)


def verify_prop_ky(q: int, n: int, work_cap: int = 2 * 10 ** 8) -> Dict:
    """Certify the tame constant against the quadratic Gauss sum calculus.

    Three exact clauses: the form sum factors into the determinant class
    times the character-sum power; the character sum squares to the class
    of -1 times q; and the recursion output equals the determinant class
    times the half-symbol power.  All in Z[zeta_p] or the symbol group,
    never numerically.
    """
    p, f = _prime_power(q)
    if q % 2 == 0:
        raise ValueError("needs odd q")
    if n % p == 0 or n < 2:
        raise ValueError("degree must be >= 2 and prime to p")
    r = n - 1
    if r * q ** 3 > work_cap:
        raise ValueError("grid infeasible under the work cap")
    k = build_field(p, f)
    psi = standard_character(k)
    g1 = gauss_sum_char(psi)
    dclass = det_nu_class(r, k)
    form = gauss_sum_form(r, psi, k)
    closed = CyclotomicInt.from_int(p, dclass) * g1 ** r
    qua_ok = form == closed
    minus_class = 1 if q % 4 == 1 else -1
    gr_ok = g1 * g1 == CyclotomicInt.from_int(p, minus_class * q)
    lam = lambda_tame(q, n)
    target = SignedQuarticUnit(q, dclass, 0) * SignedQuarticUnit.m_symbol(q) ** r
    lambda_ok = lam == target
    return {
        "q": q,
        "n": n,
        "qua_ok": qua_ok,
        "gr_ok": gr_ok,
        "lambda_ok": lambda_ok,
        "ok": qua_ok and gr_ok and lambda_ok,
        "lambda": lam,
        "closed_form": target,
    }


def tame_pushforward_character(q: int, e: int,
                               psi: Optional[AdditiveCharacter] = None) -> AdditiveCharacter:
    """Residue character induced on a totally tame degree-e cover.

    The trace of a residue lift multiplies by the degree, so the induced
    character is the degree-fold twist of the base one.
    """
    p, f = _prime_power(q)
    k = build_field(p, f)
    if psi is None:
        psi = standard_character(k)
    if e % p == 0:
        raise ValueError("degree must be prime to the residue characteristic")
    return AdditiveCharacter(k, k.from_int(e) * psi.twist)


def half_symbol_of(psi: AdditiveCharacter) -> SignedQuarticUnit:
    """Normalized character-sum symbol of a twisted additive character:
    the twist's residue class times the base half-symbol."""
    k = psi.field
    return SignedQuarticUnit(k.order, residue_symbol(psi.twist), 1)


# ---------------------------------------------------------------------------
# the three character evaluators


def _phi_matrix(ctx: LTContext, zeta_emb: FFElement,
                depth: Optional[int] = None) -> TruncatedMatrix:
    """Cyclic shift with the twisted uniformizer in the corner."""
    n = ctx.n
    rows: List[List] = [[0] * n for _ in range(n)]
    for i in range(n - 1):
        rows[i][i + 1] = 1
    rows[n - 1][0] = {1: zeta_emb}
    return TruncatedMatrix(ctx, rows, depth)


def _phi_matrix_inverse(ctx: LTContext, zeta_emb: FFElement,
                        depth: Optional[int] = None) -> TruncatedMatrix:
    n = ctx.n
    rows: List[List] = [[0] * n for _ in range(n)]
    for i in range(n - 1):
        rows[i + 1][i] = 1
    rows[0][n - 1] = {-1: zeta_emb.inverse()}
    return TruncatedMatrix(ctx, rows, depth)


def _division_leading_digit(ctx: LTContext, zeta_small: FFElement) -> FFElement:
    # leading digit whose degree-n norm down to F_q is the twist class
    big = build_field(ctx.p, ctx.a * ctx.n)
    target = big.embed_from(zeta_small)
    e = (ctx.q ** ctx.n - 1) // (ctx.q - 1)
    for cand in big.units():
        if cand ** e == target:
            return ctx.field.embed_from(cand)
    raise ArithmeticError("no leading digit with the required norm")


def phi_division(ctx: LTContext, zeta_small: FFElement,
                 depth: Optional[int] = None) -> DivisionAlgElement:
    """Division-ring uniformizer whose n-th power is the twisted one."""
    z0 = _division_leading_digit(ctx, zeta_small)
    return DivisionAlgElement(ctx, [ctx.field.zero, z0], depth)


def epipelagic_characters(param: EpipelagicParam, q: int, n: int) -> Dict:
    """Evaluators for the matrix, division and field-side characters.

    `Lambda` takes a truncated matrix in the group generated by the
    twisted shift, the constant scalars and the depth-one unit group;
    `theta` a division-ring unit times a power of the twisted uniformizer;
    `xi` a field-side element given as (uniformizer exponent, scalar
    residue, one-unit digits).  Inputs outside the domain raise
    ValueError.  Values multiply componentwise.
    """
    p, f = _prime_power(q)
    k = build_field(p, f)
    if param.field is not k:
        raise ValueError("parameter lives over a different residue field")
    if n < 2 or n % p == 0:
        raise ValueError("degree must be >= 2 and prime to p")
    neg_dlog = k.from_int(-1).dlog()
    # dlog of the determinant residue of the twisted shift
    det_phi_dlog = ((n - 1) * neg_dlog + param.zeta.dlog()) % (q - 1)
    lead_cache: Dict[int, FFElement] = {}

    def check_grid(ctx: LTContext):
        if ctx.q != q or ctx.n != n:
            raise ValueError("input from a different parameter grid")

    def down(ctx: LTContext, c: FFElement) -> FFElement:
        return ctx.field.project_to(ctx.a, c)

    def omega_bits(ctx: LTContext, series, m: int) -> Tuple[int, int]:
        # unit-exponent and formal-symbol contributions of the tame twist
        # against a determinant or reduced-norm series of valuation m
        if param.omega_exp is None:
            return 0, 0
        rbar = series.coeff(Frac(m))
        return param.omega_exp * down(ctx, rbar).dlog(), m

    def Lambda(g: TruncatedMatrix) -> CharacterValue:
        ctx = g.ctx
        check_grid(ctx)
        zem = ctx.field.embed_from(param.zeta)
        det = mat_det(g)
        v = det.valuation()
        if v is None or v.denominator != 1:
            raise ValueError("outside the character's domain")
        m = int(v)
        h = g
        step = _phi_matrix_inverse(ctx, zem, g.depth) if m >= 0 \
            else _phi_matrix(ctx, zem, g.depth)
        for _ in range(abs(m)):
            h = mat_mul(step, h)
        xres = h.entries[0][0].coeff(Frac(0))
        if xres == ctx.field.zero or xres.frobenius(ctx.a) != xres:
            raise ValueError("outside the character's domain")
        sc = [[{0: xres.inverse()} if i == j else 0 for j in range(n)]
              for i in range(n)]
        u = mat_mul(TruncatedMatrix(ctx, sc, h.depth), h)
        if not iwahori_check(u)["in_UI1"]:
            raise ValueError("outside the character's domain")
        prod = mat_mul(_phi_matrix_inverse(ctx, zem, u.depth),
                       mat_sub_identity(u))
        tr = ctx.field.zero
        for i in range(n):
            tr = tr + prod.entries[i][i].coeff(Frac(0))
        psi_exp = k.absolute_trace(down(ctx, tr))
        mult = param.chi_exp * down(ctx, xres).dlog()
        om, w = omega_bits(ctx, det, m)
        return CharacterValue(q, psi_exp, mult + om, m, w)

    def theta(d: DivisionAlgElement) -> CharacterValue:
        ctx = d.ctx
        check_grid(ctx)
        if id(ctx) not in lead_cache:
            lead_cache[id(ctx)] = _division_leading_digit(ctx, param.zeta)
        z0 = lead_cache[id(ctx)]
        m = next((j for j, c in enumerate(d.coeffs) if c != ctx.field.zero),
                 None)
        if m is None:
            raise ValueError("outside the character's domain")
        if d.depth - m < n + 2:
            raise ValueError("depth too small after the uniformizer part")
        s = ctx.field.one
        for i in range(m):
            s = s * z0.frobenius(ctx.a * i)
        t = s.inverse().frobenius(-ctx.a * m)
        shifted = [t * d.coeffs[j + m].frobenius(-ctx.a * m)
                   for j in range(d.depth - m)]
        xres = shifted[0]
        if xres.frobenius(ctx.a) != xres:
            raise ValueError("outside the character's domain")
        xin = xres.inverse()
        ucs = [xin * c for c in shifted]
        tz = z0.inverse().frobenius(-ctx.a)
        ecs = [tz * ucs[j + 1].frobenius(-ctx.a)
               for j in range(len(ucs) - 1)]
        tr = trd(DivisionAlgElement(ctx, ecs, len(ecs))).coeff(Frac(0))
        psi_exp = k.absolute_trace(down(ctx, tr))
        mult = (param.chi_exp * down(ctx, xres).dlog()
                + (n - 1) * m * neg_dlog)
        om, w = omega_bits(ctx, nrd(d), m) if param.omega_exp is not None \
            else (0, 0)
        return CharacterValue(q, psi_exp, mult + om, m, w)

    def xi(m: int, x: FFElement,
           u_digits: Sequence[FFElement] = ()) -> CharacterValue:
        if not isinstance(x, FFElement) or x.field is not k or not x:
            raise ValueError("scalar part must be a nonzero residue element")
        psi_exp = 0
        if u_digits:
            u1 = u_digits[0]
            if u1.field is not k:
                raise ValueError("one-unit digits must be residue elements")
            psi_exp = k.absolute_trace(k.from_int(n) * u1)
        mult = param.chi_exp * x.dlog()
        w = 0
        if param.omega_exp is not None:
            mult += param.omega_exp * (m * det_phi_dlog + n * x.dlog())
            w = m
        return CharacterValue(q, psi_exp, mult, m, w)

    return {"Lambda": Lambda, "theta": theta, "xi": xi, "q": q, "n": n}


def omega_value(param: EpipelagicParam, unit_residue: FFElement,
                valuation: int) -> CharacterValue:
    """Value of the tame twist on an element with the given reduction data."""
    q = param.field.order
    if param.omega_exp is None:
        return CharacterValue(q)
    if unit_residue.field is not param.field or not unit_residue:
        raise ValueError("need a nonzero residue element")
    return CharacterValue(q, 0, param.omega_exp * unit_residue.dlog(),
                          0, valuation)


# ---------------------------------------------------------------------------
# the induced parameter and the audits


def ll_parameter(param: EpipelagicParam, q: int, n: int) -> Dict:
    """Inducing-character table of the degree-n parameter.

    Values of the normalized field-side character on the three generator
    families: the twisted uniformizer (tame constant inverse times the
    central symbol), the Teichmueller scalars (sign power times the unit
    character and twist), and the standard one-unit.  Dimension n.
    """
    p, f = _prime_power(q)
    if q % 2 == 0:
        raise ValueError("tame constant unavailable for even q")
    k = build_field(p, f)
    if param.field is not k:
        raise ValueError("parameter lives over a different residue field")
    if n < 2 or n % p == 0:
        raise ValueError("degree must be >= 2 and prime to p")
    lam = lambda_tame(q, n)
    lam_inv = CharacterValue.from_quartic(lam).inverse()
    neg_dlog = k.from_int(-1).dlog()
    oe = param.omega_exp
    at_phi = lam_inv * CharacterValue(
        q, 0,
        0 if oe is None else oe * ((n - 1) * neg_dlog + param.zeta.dlog()),
        1, 0 if oe is None else 1)
    half = (q - 1) // 2
    at_teich = []
    for j in range(q - 1):
        mult = (n - 1) * j * half + param.chi_exp * j
        if oe is not None:
            mult += oe * n * j
        at_teich.append(CharacterValue(q, 0, mult))
    at_one_unit = CharacterValue(q, k.absolute_trace(k.from_int(n)))
    return {
        "dim": n,
        "n_q": n_q_of(q, n),
        "lambda": lam,
        "zeta_index": param.zeta.dlog(),
        "at_phi": at_phi,
        "at_teichmuller": at_teich,
        "at_one_unit": at_one_unit,
    }


def frobenius_scalar_check(q: int, n: int) -> Dict:
    """Cross-check the two closed forms of the depth-one Frobenius scalar.

    One side assembles the determinant class and inverse half-symbol
    power from the Gauss sum calculus, the other the inverse tame
    constant through the sign character; both carry the same unit-symbol
    prefactor, and they must agree for every unit residue.
    """
    p, f = _prime_power(q)
    if q % 2 == 0:
        raise ValueError("needs odd q")
    if n % p == 0 or n < 2:
        raise ValueError("degree must be >= 2 and prime to p")
    k = build_field(p, f)
    lam_inv = lambda_tame(q, n) ** (-1)
    bracket = (SignedQuarticUnit(q, det_nu_class(n - 1, k), 0)
               * SignedQuarticUnit.m_symbol(q) ** (-(n - 1)))
    parity_sign = -1 if (n - 1) % 2 else 1
    ok = True
    gauss_side = lambda_side = None
    for u in (k.one, k.generator):
        base = SignedQuarticUnit(q, parity_sign * delta_EK(q, n, u), 0)
        gauss_side = base * bracket
        lambda_side = base * lam_inv
        ok = ok and gauss_side == lambda_side
    return {
        "q": q,
        "n": n,
        "ok": ok,
        "gauss_side": gauss_side,
        "lambda_side": lambda_side,
    }


def index_audit(q: int, n: int, oracle_cap: int = 1 << 20) -> Dict:
    """Index and dimension formulas with a brute-force depth-one oracle.

    The coset count of the scalar units inside the full depth-one residue
    group must reproduce the dimension formula, and the n-th power image
    of the scalar units must reproduce the gcd factor.
    """
    p, f = _prime_power(q)
    nq = n_q_of(q, n)
    hl_index = n * (q ** n - 1) // (nq * (q - 1))
    dim_rho = (q ** n - 1) // (q - 1)
    if q ** n > oracle_cap:
        raise ValueError("oracle infeasible above the size cap")
    big = build_field(p, f * n)
    sub_units = [big.embed_from(x) for x in build_field(p, f).units()]
    seen = bytearray(big.order)
    cosets = 0
    for u in big.units():
        if seen[u.idx]:
            continue
        cosets += 1
        for s in sub_units:
            seen[(u * s).idx] = 1
    k = build_field(p, f)
    power_image = len({(x ** n).idx for x in k.units()})
    oracle_pass = cosets == dim_rho and power_image == (q - 1) // nq
    return {
        "q": q,
        "n": n,
        "n_q": nq,
        "hl_index": hl_index,
        "dim_rho": dim_rho,
        "coset_count": cosets,
        "power_image": power_image,
        "oracle_pass": oracle_pass,
    }
