"""Exact arithmetic in Z[zeta_p] and additive characters valued there.

Elements are integer vectors on the power basis 1, zeta, ..., zeta^(p-2);
zeta^(p-1) reduces to -(1 + zeta + ... + zeta^(p-2)). All Gauss-sum identities
downstream are checked as exact equalities of these vectors, never through
complex floats.
"""

from __future__ import annotations

from typing import Sequence, Tuple

from .finite_field import FFElement, FiniteField, build_field


class CyclotomicInt:
    """Element of Z[zeta_p] as a coefficient tuple on 1..zeta^(p-2)."""

    __slots__ = ("p", "coeffs")

    def __init__(self, p: int, coeffs: Sequence[int] = ()):
        self.p = p
        c = tuple(coeffs)
        if len(c) > p - 1:
            raise ValueError("coefficient vector too long")
        self.coeffs = c + (0,) * (p - 1 - len(c))

    @classmethod
    def from_int(cls, p: int, n: int) -> "CyclotomicInt":
        return cls(p, (n,))

    @classmethod
    def zeta_power(cls, p: int, e: int) -> "CyclotomicInt":
        """zeta_p^e, e taken mod p."""
        e %= p
        if e < p - 1:
            return cls(p, (0,) * e + (1,))
        return cls(p, (-1,) * (p - 1))

    def _check(self, other: "CyclotomicInt"):
        if self.p != other.p:
            raise ValueError("mixed cyclotomic levels")

    def __add__(self, other) -> "CyclotomicInt":
        if isinstance(other, int):
            other = CyclotomicInt.from_int(self.p, other)
        self._check(other)
        return CyclotomicInt(self.p, tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    __radd__ = __add__

    def __neg__(self) -> "CyclotomicInt":
        return CyclotomicInt(self.p, tuple(-a for a in self.coeffs))

    def __sub__(self, other) -> "CyclotomicInt":
        if isinstance(other, int):
            other = CyclotomicInt.from_int(self.p, other)
        return self + (-other)

    def __rsub__(self, other) -> "CyclotomicInt":
        return (-self) + other

    def __mul__(self, other) -> "CyclotomicInt":
        if isinstance(other, int):
            return CyclotomicInt(self.p, tuple(a * other for a in self.coeffs))
        self._check(other)
        p = self.p
        # convolve on exponents mod p, then eliminate zeta^(p-1)
        full = [0] * p
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    if b:
                        full[(i + j) % p] += a * b
        top = full[p - 1]
        return CyclotomicInt(p, tuple(full[k] - top for k in range(p - 1)))

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "CyclotomicInt":
        if n < 0:
            raise ValueError("negative powers not supported")
        res = CyclotomicInt.from_int(self.p, 1)
        base = self
        while n:
            if n & 1:
                res = res * base
            base = base * base
            n >>= 1
        return res

    def __eq__(self, other) -> bool:
        if isinstance(other, int):
            other = CyclotomicInt.from_int(self.p, other)
        if not isinstance(other, CyclotomicInt):
            return NotImplemented
        return self.p == other.p and self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash((self.p, self.coeffs))

    def is_rational(self) -> bool:
        return not any(self.coeffs[1:])

    def rational_value(self) -> int:
        if not self.is_rational():
            raise ValueError("not a rational integer")
        return self.coeffs[0]

    def galois(self, t: int) -> "CyclotomicInt":
        """Apply zeta -> zeta^t (t invertible mod p)."""
        p = self.p
        if t % p == 0:
            raise ValueError("t must be prime to p")
        full = [0] * p
        for i, a in enumerate(self.coeffs):
            if a:
                full[(i * t) % p] += a
        top = full[p - 1]
        return CyclotomicInt(p, tuple(full[k] - top for k in range(p - 1)))

    def __repr__(self) -> str:
        parts = []
        for i, a in enumerate(self.coeffs):
            if a:
                parts.append(f"{a}" if i == 0 else f"{a}*z^{i}")
        return "Zp[" + (" + ".join(parts) if parts else "0") + "]"


class AdditiveCharacter:
    """Nontrivial additive character psi_b of F_{p^m}, valued in Z[zeta_p].

    psi_b(x) = zeta_p^(Tr_{F/F_p}(b x)) with twist b != 0. value() also accepts
    elements of any overfield k >= F (composing with Tr_{k/F}), which is how
    Gauss sums over extension fields reuse a base-field character.
    """

    def __init__(self, field: FiniteField, twist: FFElement):
        if twist.field is not field:
            raise ValueError("twist must lie in the character's field")
        if not twist:
            raise ValueError("twist must be nonzero (character nontrivial)")
        self.field = field
        self.twist = twist
        self.p = field.p

    def value(self, x: FFElement) -> CyclotomicInt:
        k = x.field
        if k is not self.field:
            if k.p != self.p or k.degree % self.field.degree:
                raise ValueError("element is not in an overfield of the character's field")
            x = k.trace_to(self.field.degree, x)
        e = self.field.absolute_trace(self.field.mul_el(self.twist, x))
        return CyclotomicInt.zeta_power(self.p, e)

    def exponent(self, x: FFElement) -> int:
        """The F_p-exponent e with value(x) = zeta_p^e."""
        k = x.field
        if k is not self.field:
            x = k.trace_to(self.field.degree, x)
        return self.field.absolute_trace(self.field.mul_el(self.twist, x))

    def __repr__(self) -> str:
        return f"psi[{self.field!r}, b={self.twist.idx}]"


def nontrivial_characters(field: FiniteField):
    """All p^m - 1 nontrivial additive characters of the field."""
    for b in field.units():
        yield AdditiveCharacter(field, b)


def standard_character(field: FiniteField) -> AdditiveCharacter:
    return AdditiveCharacter(field, field.one)
