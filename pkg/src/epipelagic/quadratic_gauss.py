"""The quadratic form nu_r, its Gauss sums, and the formal fourth-root calculus.

nu_r(y) = sum over 1 <= i <= j <= r of y_i y_j. Character sums against it are
computed exactly in Z[zeta_p] two ways: a literal tuple enumeration (kept for
cross-checks and determinism tests) and a value-distribution recursion that
counts, coordinate by coordinate, how often nu_r hits each field value. Both
are exhaustive in the sense of the work cap: cost is accounted and a cell that
would exceed the cap raises instead of truncating.

No square root of q is ever materialized. The normalized Gauss sum m(psi) with
m^2 = (-1/q) lives in SignedQuarticUnit, a four-element formal group, and all
identities that would involve q^(1/2) are checked in square-root-free form.
"""

from __future__ import annotations

import itertools
from typing import List, Optional, Sequence

import numpy as np

from ._tables import pair_tables, square_table, trace_exponent_table
from .cyclotomic import AdditiveCharacter, CyclotomicInt
from .errors import EnumerationCapError
from .finite_field import FFElement, FiniteField, residue_symbol

DEFAULT_TUPLE_CAP = 10 ** 8

# counts above this switch the distribution recursion to two-modulus CRT
_INT64_SAFE = 1 << 61
_CRT_M1 = 1 << 55
_CRT_M2 = (1 << 55) - 1


def nu_eval(r: int, ys: Sequence[FFElement]) -> FFElement:
    """nu_r(y) = sum_{1 <= i <= j <= r} y_i y_j, any characteristic.

    Evaluation is total; the nondegeneracy condition p not dividing r + 1 is
    enforced where the theory needs it (determinant class, distributions).
    """
    if len(ys) != r or r < 1:
        raise ValueError("need exactly r coordinates")
    F = ys[0].field
    total = F.zero
    running = F.zero
    for y in ys:
        if y.field is not F:
            raise ValueError("mixed fields")
        total = total + y * running + y * y
        running = running + y
    return total


def det_nu_class(r: int, k: FiniteField) -> int:
    """Square class of det nu_r = 2^(-r)(r+1) in k^x, as +-1. Odd q only."""
    if k.order % 2 == 0:
        raise ValueError("determinant class needs odd q")
    if (r + 1) % k.p == 0:
        raise ValueError("r + 1 divisible by p: form degenerate")
    val = k.from_int(2).inverse() ** r * k.from_int(r + 1)
    return residue_symbol(val)


class SignedQuarticUnit:
    """epsilon * m^e with epsilon in {+1,-1}, e in {0,1}, m^2 = (-1/q).

    The symbol m stands for the normalized Gauss sum g(psi)/q^(1/2) of the
    base field with q elements; it is never evaluated, only multiplied.
    """

    __slots__ = ("q", "sign", "exponent")

    def __init__(self, q: int, sign: int, exponent: int):
        if q % 2 == 0:
            raise ValueError("q must be odd")
        if sign not in (1, -1):
            raise ValueError("sign must be +-1")
        m_square = 1 if q % 4 == 1 else -1
        # canonicalize the exponent mod 2, folding m^2 pairs into the sign
        pairs, e = divmod(exponent, 2)
        if pairs and m_square == -1 and pairs % 2:
            sign = -sign
        self.q = q
        self.sign = sign
        self.exponent = e

    @classmethod
    def one(cls, q: int) -> "SignedQuarticUnit":
        return cls(q, 1, 0)

    @classmethod
    def m_symbol(cls, q: int) -> "SignedQuarticUnit":
        return cls(q, 1, 1)

    def __mul__(self, other) -> "SignedQuarticUnit":
        return quartic_mul(self, other)

    def __pow__(self, n: int) -> "SignedQuarticUnit":
        if n < 0:
            # the group has exponent 4; negative powers via order
            n = n % 4 if self.exponent or self.sign == -1 else 0
        sign = self.sign if n % 2 else 1
        return SignedQuarticUnit(self.q, sign, self.exponent * n)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SignedQuarticUnit):
            return NotImplemented
        return (self.q, self.sign, self.exponent) == (other.q, other.sign, other.exponent)

    def __hash__(self):
        return hash((self.q, self.sign, self.exponent))

    def __repr__(self) -> str:
        s = "+" if self.sign == 1 else "-"
        return f"{s}m^{self.exponent}[q={self.q}]"


def quartic_mul(a: SignedQuarticUnit, b: SignedQuarticUnit) -> SignedQuarticUnit:
    if a.q != b.q:
        raise ValueError("mismatched base cardinalities")
    return SignedQuarticUnit(a.q, a.sign * b.sign, a.exponent + b.exponent)


def gauss_sum_char(psi: AdditiveCharacter) -> CyclotomicInt:
    """g(psi) = sum over x in k^x of (x/k) psi(x), exactly in Z[zeta_p]."""
    k = psi.field
    if k.order % 2 == 0:
        raise ValueError("quadratic Gauss sum needs odd q")
    total = CyclotomicInt(psi.p)
    for x in k.units():
        total = total + residue_symbol(x) * psi.value(x)
    return total


def _distribution_r1(k: FiniteField) -> np.ndarray:
    sq = square_table(k)
    return np.bincount(sq, minlength=k.order)


def _distribution_dp(r: int, k: FiniteField) -> List[int]:
    """Counts N_c = #{y in k^r : nu_r(y) = c}, exact, by the coordinatewise
    recursion on the pair (value so far, coordinate sum so far).

    For one more coordinate x the pair moves (v, s) -> (v + x s + x^2, s + x),
    a bijection for each fixed x, so the update is a sum of |k| gathers."""
    add, mul = pair_tables(k)
    Q = k.order
    neg = np.array([(-k.element_by_index(i)).idx for i in range(Q)], dtype=np.int32)
    sq = square_table(k).astype(np.int32)

    use_crt = k.order ** r > _INT64_SAFE
    moduli = (_CRT_M1, _CRT_M2) if use_crt else (0,)
    planes = []
    for M in moduli:
        N = np.zeros((Q, Q), dtype=np.int64)
        N[0, 0] = 1
        s_idx = np.arange(Q, dtype=np.int32)
        for _ in range(r):
            new = np.zeros_like(N)
            for x in range(Q):
                s_pre = add[s_idx, neg[x]]            # s' - x, per column s'
                w = add[mul[x, s_pre], sq[x]]         # x(s'-x) + x^2, per column
                v_pre = add[:, neg[w]]                # v' - w, (Q, Q) gather
                new += N[v_pre, s_pre[np.newaxis, :]]
                if M:
                    new %= M
            N = new
        planes.append(N.sum(axis=1) % M if M else N.sum(axis=1))

    if not use_crt:
        counts = [int(c) for c in planes[0]]
    else:
        inv = pow(_CRT_M1, -1, _CRT_M2)
        counts = []
        for a1, a2 in zip(planes[0], planes[1]):
            a1, a2 = int(a1), int(a2)
            counts.append(a1 + _CRT_M1 * ((a2 - a1) * inv % _CRT_M2))
    assert sum(counts) == k.order ** r, "distribution lost mass"
    return counts


_dist_cache: dict = {}


def form_distribution(r: int, k: FiniteField, cap: int = DEFAULT_TUPLE_CAP) -> List[int]:
    """Exact value distribution of nu_r over k^r; cached per (field, r)."""
    if (r + 1) % k.p == 0:
        raise ValueError("r + 1 divisible by p")
    key = (id(k), r)
    if key in _dist_cache:
        return _dist_cache[key]
    cost = k.order if r == 1 else r * k.order ** 3
    if cost > cap:
        raise EnumerationCapError(f"distribution cost {cost} exceeds cap {cap}")
    if r == 1:
        counts = [int(c) for c in _distribution_r1(k)]
    else:
        counts = _distribution_dp(r, k)
    _dist_cache[key] = counts
    return counts


def _charge_distribution(counts: Sequence[int], k: FiniteField, psi: AdditiveCharacter) -> CyclotomicInt:
    exps = trace_exponent_table(k, psi.field.degree, psi.twist.idx)
    p = psi.p
    per_exp = [0] * p
    for c_idx, n in enumerate(counts):
        if n:
            per_exp[exps[c_idx]] += n
    top = per_exp[p - 1]
    return CyclotomicInt(p, tuple(per_exp[i] - top for i in range(p - 1)))


def gauss_sum_form(r: int, psi: AdditiveCharacter, k: FiniteField,
                   cap: int = DEFAULT_TUPLE_CAP) -> CyclotomicInt:
    """g(nu_r tensor k, psi) = sum over y in k^r of (psi o Tr)(nu_r(y)).

    psi lives on F_{p^m} with F_{p^m} <= k; the trace composition is implicit.
    """
    if k.p != psi.p or k.degree % psi.field.degree:
        raise ValueError("character field is not a subfield of k")
    counts = form_distribution(r, k, cap)
    return _charge_distribution(counts, k, psi)


def gauss_sum_form_bruteforce(r: int, psi: AdditiveCharacter, k: FiniteField,
                              order: Optional[Sequence[int]] = None,
                              cap: int = 10 ** 6) -> CyclotomicInt:
    """Literal tuple-by-tuple enumeration; `order` permutes the element
    visiting order to witness order-independence. Small inputs only."""
    if k.order ** r > cap:
        raise EnumerationCapError("brute force cap exceeded")
    els = [k.element_by_index(i) for i in (order if order is not None else range(k.order))]
    total = CyclotomicInt(psi.p)
    for ys in itertools.product(els, repeat=r):
        total = total + psi.value(nu_eval(r, ys))
    return total
