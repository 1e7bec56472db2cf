"""Sparse truncated series with exact rational exponents over a finite field.

A series is a finite map {exponent -> nonzero coefficient} plus a cap: the
object stands for "these terms + O(pi^cap)" where pi is the degree-one
uniformizer of the valued base (v(pi) = 1). Every operation propagates the cap
pessimistically, so a stored term is always a certified coefficient, and a
congruence can only be asserted strictly below the cap.

Characteristic p makes p-power maps termwise and bijective on exponents and
coefficients, which is what keeps perfection (q-th roots) exact and cheap:
those maps scale the cap instead of eroding it. Everything else (mul, inv,
coprime-degree roots) uses the standard cap calculus; see each method.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import PrecisionError
from .finite_field import FFElement, FiniteField

Frac = Fraction


def _as_frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"exponents must be exact rationals, got {type(x)!r}")


class HahnSeries:
    """Immutable truncated series. Construct via the classmethods or arithmetic."""

    __slots__ = ("field", "terms", "cap")

    def __init__(self, field: FiniteField, terms: Dict[Fraction, FFElement], cap: Fraction):
        cap = _as_frac(cap)
        clean: Dict[Fraction, FFElement] = {}
        for e, c in terms.items():
            e = _as_frac(e)
            if c.field is not field:
                raise ValueError("coefficient from a foreign field")
            if c and e < cap:
                clean[e] = c
        self.field = field
        self.terms = clean
        self.cap = cap

    # -- constructors ----------------------------------------------------------

    @classmethod
    def zero(cls, field: FiniteField, cap) -> "HahnSeries":
        return cls(field, {}, cap)

    @classmethod
    def one(cls, field: FiniteField, cap) -> "HahnSeries":
        return cls(field, {Frac(0): field.one}, cap)

    @classmethod
    def monomial(cls, field: FiniteField, exp, coeff: FFElement, cap) -> "HahnSeries":
        return cls(field, {_as_frac(exp): coeff}, cap)

    # -- basic structure -------------------------------------------------------

    def valuation(self) -> Optional[Fraction]:
        """Least exponent, or None meaning "v >= cap" (truncated zero)."""
        if not self.terms:
            return None
        return min(self.terms)

    def _val_or_cap(self) -> Fraction:
        v = self.valuation()
        return self.cap if v is None else v

    def is_zero(self) -> bool:
        return not self.terms

    def leading(self) -> Tuple[Fraction, FFElement]:
        if not self.terms:
            raise ValueError("truncated zero has no leading term")
        e = min(self.terms)
        return e, self.terms[e]

    def coeff(self, exp) -> FFElement:
        exp = _as_frac(exp)
        if exp >= self.cap:
            raise PrecisionError(f"coefficient at {exp} is beyond cap {self.cap}")
        return self.terms.get(exp, self.field.zero)

    def truncate(self, new_cap) -> "HahnSeries":
        new_cap = _as_frac(new_cap)
        if new_cap > self.cap:
            raise PrecisionError("cannot raise a cap")
        return HahnSeries(self.field, self.terms, new_cap)

    def __eq__(self, other) -> bool:
        if not isinstance(other, HahnSeries):
            return NotImplemented
        return (self.field is other.field and self.cap == other.cap
                and self.terms == other.terms)

    def __hash__(self):
        return hash((id(self.field), self.cap, frozenset(self.terms.items())))

    # -- ring operations -------------------------------------------------------

    def _check_partner(self, other: "HahnSeries"):
        if not isinstance(other, HahnSeries):
            raise TypeError("series arithmetic needs two series")
        if other.field is not self.field:
            raise ValueError("incompatible coefficient fields")

    def __add__(self, other: "HahnSeries") -> "HahnSeries":
        self._check_partner(other)
        cap = min(self.cap, other.cap)
        out = dict(self.terms)
        for e, c in other.terms.items():
            cur = out.get(e)
            out[e] = c if cur is None else cur + c
        return HahnSeries(self.field, out, cap)

    def __neg__(self) -> "HahnSeries":
        return HahnSeries(self.field, {e: -c for e, c in self.terms.items()}, self.cap)

    def __sub__(self, other: "HahnSeries") -> "HahnSeries":
        return self + (-other)

    def __mul__(self, other: "HahnSeries") -> "HahnSeries":
        self._check_partner(other)
        # accuracy: each factor's cap meets the other's valuation
        v1, v2 = self._val_or_cap(), other._val_or_cap()
        cap = min(self.cap + v2, other.cap + v1)
        out: Dict[Fraction, FFElement] = {}
        bs = sorted(other.terms.items())
        for e1, c1 in sorted(self.terms.items()):
            for e2, c2 in bs:
                e = e1 + e2
                if e >= cap:
                    break
                prod = c1 * c2
                cur = out.get(e)
                out[e] = prod if cur is None else cur + prod
        return HahnSeries(self.field, out, cap)

    def scale(self, c: FFElement) -> "HahnSeries":
        """Multiply by a field constant (exact, cap unchanged)."""
        if not c:
            return HahnSeries.zero(self.field, self.cap)
        return HahnSeries(self.field, {e: c * a for e, a in self.terms.items()}, self.cap)

    def shift(self, delta) -> "HahnSeries":
        """Multiply by the exact monomial pi^delta."""
        d = _as_frac(delta)
        return HahnSeries(self.field, {e + d: c for e, c in self.terms.items()}, self.cap + d)

    def inverse(self) -> "HahnSeries":
        """Newton inversion; needs a nonzero leading term.

        If the input is known mod cap, the inverse is certified mod cap - 2v.
        """
        if not self.terms:
            raise ZeroDivisionError("cannot invert a truncated zero")
        v, lead = self.leading()
        cap = self.cap - 2 * v
        # normalize to a 1 + (positive valuation) unit: self = lead pi^v (1 + u)
        unit = self.shift(-v).scale(lead.inverse())
        rel_cap = self.cap - v
        one = HahnSeries.one(self.field, rel_cap)
        x = HahnSeries.one(self.field, rel_cap)
        while True:
            err = one - unit * x
            if err.is_zero():
                break
            x = x + x * err
        inv_unit = HahnSeries(self.field, x.terms, rel_cap)
        return inv_unit.shift(-v).scale(lead.inverse()).truncate(cap)

    # -- characteristic-p power maps -------------------------------------------

    def _p_exp(self, q: int) -> int:
        p = self.field.p
        a = 0
        m = q
        while m % p == 0:
            m //= p
            a += 1
        if m != 1 or a == 0:
            raise ValueError(f"{q} is not a positive power of the characteristic {p}")
        return a

    def qth_power(self, q: int) -> "HahnSeries":
        """x -> x^q termwise; exponents and cap scale by q. Exact."""
        a = self._p_exp(q)
        return HahnSeries(
            self.field,
            {e * q: c.frobenius(a) for e, c in self.terms.items()},
            self.cap * q,
        )

    def qth_root(self, q: int) -> "HahnSeries":
        """The unique q-th root; inverse of qth_power. Exact."""
        a = self._p_exp(q)
        return HahnSeries(
            self.field,
            {e / q: c.frobenius(-a) for e, c in self.terms.items()},
            self.cap / q,
        )

    def __pow__(self, n: int) -> "HahnSeries":
        if not isinstance(n, int):
            raise TypeError("integer powers only; use rational_power")
        if n == 0:
            return HahnSeries.one(self.field, self.cap)
        if n < 0:
            return self.inverse() ** (-n)
        # peel off the p-part and apply it last: Frobenius scales the cap
        # instead of spending it, so x^(p^a m) = (x^m)^(p^a) certifies more
        p = self.field.p
        a = 0
        while n % p == 0:
            n //= p
            a += 1
        acc = None
        base = self
        while n:
            if n & 1:
                acc = base if acc is None else acc * base
            n >>= 1
            if n:
                base = base * base
        return acc.qth_power(p ** a) if a else acc

    # -- roots of coprime degree and rational powers ---------------------------

    def _coprime_root(self, d: int) -> "HahnSeries":
        """Deterministic d-th root for d prime to p: least-discrete-log root of
        the leading coefficient, Hensel lifting for the unit tail."""
        if not self.terms:
            raise ValueError("root of a truncated zero")
        v, lead = self.leading()
        ev = v / d
        F = self.field
        Q1 = F.order - 1
        # least-dlog branch: smallest t >= 0 with d*t = dlog(lead) mod Q-1
        g = gcd(d, Q1)
        t = lead.dlog()
        if t % g:
            raise ValueError("leading coefficient has no d-th root in the coefficient field")
        t0 = (t // g) * pow(d // g, -1, Q1 // g) % (Q1 // g)
        root_lead = F.generator ** t0
        assert root_lead ** d == lead
        rel_cap = self.cap - v
        unit = self.shift(-v).scale(lead.inverse())  # 1 + u, cap rel_cap
        one = HahnSeries.one(F, rel_cap)
        g = HahnSeries.one(F, rel_cap)
        dinv = F.from_int(d).inverse()
        while True:
            err = unit - g ** d
            if err.is_zero():
                break
            # Newton: g += err / (d g^(d-1)); g stays a 1-unit so the division
            # is by a unit and the error valuation doubles each pass
            g = g + (err * (g ** (d - 1)).inverse()).scale(dinv)
        return g.scale(root_lead).shift(ev).truncate(rel_cap + ev)

    def rational_power(self, gamma) -> "HahnSeries":
        """self^gamma for exact rational gamma.

        Denominator factors as p^a * d: the p-part is the exact perfection
        root, the d-part needs d | (|F| - 1) and uses the deterministic root
        choice. Negative gamma inverts first.
        """
        gamma = _as_frac(gamma)
        if gamma.denominator == 1:
            return self ** gamma.numerator
        if not self.terms:
            raise ValueError("rational power of a truncated zero")
        den = gamma.denominator
        p = self.field.p
        a = 0
        while den % p == 0:
            den //= p
            a += 1
        x = self
        if den > 1:
            x = x._coprime_root(den)
        if a:
            x = x.qth_root(p ** a)
        return x ** gamma.numerator

    # -- congruences -----------------------------------------------------------

    def congruent(self, other: "HahnSeries", level, strict: bool = False) -> bool:
        return congruence_check(self, other, level, strict)

    # -- serialization & display -----------------------------------------------

    def to_triples(self) -> List[List[int]]:
        return [[e.numerator, e.denominator, self.terms[e].idx] for e in sorted(self.terms)]

    @classmethod
    def from_triples(cls, field: FiniteField, triples: Iterable[Sequence[int]], cap) -> "HahnSeries":
        terms = {Frac(n, d): field.element_by_index(i) for (n, d, i) in triples}
        return cls(field, terms, cap)

    def __repr__(self) -> str:
        if not self.terms:
            return f"O(pi^{self.cap})"
        parts = []
        for e in sorted(self.terms)[:6]:
            parts.append(f"[{self.terms[e].idx}]pi^{e}")
        if len(self.terms) > 6:
            parts.append(f"...({len(self.terms)} terms)")
        return " + ".join(parts) + f" + O(pi^{self.cap})"


def congruence_check(f: HahnSeries, g: HahnSeries, level, strict: bool = False) -> bool:
    """Is v(f - g) >= level (or > level when strict)? Raises PrecisionError
    when the requested level is not certifiable at the operands' caps."""
    level = _as_frac(level)
    if level >= f.cap or level >= g.cap:
        raise PrecisionError(
            f"congruence at level {level} not certifiable at caps {f.cap}, {g.cap}")
    diff = f - g
    v = diff.valuation()
    if v is None:
        return True
    return v > level if strict else v >= level


def assert_congruent(f: HahnSeries, g: HahnSeries, level, strict: bool = False):
    if not congruence_check(f, g, level, strict):
        d = (f - g).valuation()
        raise AssertionError(f"congruence failed: v(diff) = {d}, wanted {'>' if strict else '>='} {level}")
