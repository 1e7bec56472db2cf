"""Finite fields F_{p^f} with deterministic construction.

The rest of the package leans on three contracts fixed here:

* the modulus of F_{p^f} is the lexicographically least monic irreducible of
  degree f over F_p (coefficient tuples compared high degree first), so field
  elements serialize to stable integer indices across runs and platforms;
* each field carries a fixed multiplicative generator: the element of least
  integer encoding among those of full order;
* subfield operations (trace, norm, embedding) for F_{p^e} <= F_{p^f} with
  e | f always land in the canonical build_field(p, e) object.

Fields used here are tiny (q <= 169, q^n <= 6561 for coefficient fields), so
every field precomputes full discrete-log tables and all arithmetic is table
lookups. Enumerating a field is O(p^f) and guarded by an explicit cap.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Optional, Sequence, Tuple

# Hard ceiling on p^f for table-based fields; the spec grids stay far below it.
FIELD_SIZE_CAP = 200_000


def _poly_mulmod(a: Tuple[int, ...], b: Tuple[int, ...], mod: Tuple[int, ...], p: int) -> Tuple[int, ...]:
    # a, b, result: little-endian coeff tuples of length f; mod: monic, length f+1.
    f = len(mod) - 1
    res = [0] * (2 * f - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                if bj:
                    res[i + j] = (res[i + j] + ai * bj) % p
    # reduce: x^f == -(mod[0..f-1])
    for k in range(2 * f - 2, f - 1, -1):
        c = res[k]
        if c:
            res[k] = 0
            for j in range(f):
                res[k - f + j] = (res[k - f + j] - c * mod[j]) % p
    return tuple(res[:f])


def _poly_powmod(a: Tuple[int, ...], n: int, mod: Tuple[int, ...], p: int) -> Tuple[int, ...]:
    f = len(mod) - 1
    res = tuple([1] + [0] * (f - 1))
    base = a
    while n:
        if n & 1:
            res = _poly_mulmod(res, base, mod, p)
        base = _poly_mulmod(base, base, mod, p)
        n >>= 1
    return res


def _poly_gcd_deg(a: Sequence[int], b: Sequence[int], p: int) -> int:
    """Degree of gcd of two little-endian polynomials over F_p (-1 for gcd 1... no: deg 0 means unit)."""
    a = list(a)
    b = list(b)

    def deg(u):
        d = len(u) - 1
        while d >= 0 and u[d] == 0:
            d -= 1
        return d

    da, db = deg(a), deg(b)
    while db >= 0:
        inv = pow(b[db], p - 2, p)
        while da >= db:
            c = a[da] * inv % p
            if c:
                for j in range(db + 1):
                    a[da - db + j] = (a[da - db + j] - c * b[j]) % p
            da = deg(a)
        a, b = b, a
        da, db = db, da
    return da


@lru_cache(maxsize=None)
def _prime_factors(n: int) -> Tuple[int, ...]:
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return tuple(out)


def _is_irreducible(mod: Tuple[int, ...], p: int) -> bool:
    """Rabin's test for a monic degree-f polynomial over F_p (little-endian, length f+1)."""
    f = len(mod) - 1
    if f == 1:
        return True
    x = (0, 1) + (0,) * (f - 2)
    # x^(p^f) == x mod m
    t = x
    for _ in range(f):
        t = _poly_powmod(t, p, mod, p)
    if t != x:
        return False
    for ell in _prime_factors(f):
        t = x
        for _ in range(f // ell):
            t = _poly_powmod(t, p, mod, p)
        # gcd(x^(p^(f/ell)) - x, mod) must be 1
        diff = list(t)
        diff[1] = (diff[1] - 1) % p
        if _poly_gcd_deg(diff, mod, p) != 0:
            return False
    return True


def least_irreducible(p: int, f: int) -> Tuple[int, ...]:
    """Lexicographically least monic irreducible of degree f over F_p.

    Candidate tuples (c_{f-1}, ..., c_1, c_0) are scanned in lex order; the
    returned tuple is little-endian (c_0, ..., c_{f-1}, 1) including the
    leading 1.
    """
    if f == 1:
        return (0, 1)
    for big in itertools.product(range(p), repeat=f):
        mod = tuple(reversed(big)) + (1,)
        if mod[0] == 0:
            continue  # reducible: x divides
        if _is_irreducible(mod, p):
            return mod
    raise AssertionError("no irreducible found")  # unreachable


class FFElement:
    """Element of a table-based finite field. Compare/hash by (field id, index)."""

    __slots__ = ("field", "idx")

    def __init__(self, field: "FiniteField", idx: int):
        self.field = field
        self.idx = idx

    @property
    def coeffs(self) -> Tuple[int, ...]:
        return self.field.idx_to_coeffs[self.idx]

    def __eq__(self, other) -> bool:
        if isinstance(other, int):
            other = self.field.from_int(other)
        if not isinstance(other, FFElement):
            return NotImplemented
        return self.field is other.field and self.idx == other.idx

    def __hash__(self) -> int:
        return hash((id(self.field), self.idx))

    def __bool__(self) -> bool:
        return self.idx != 0

    def __add__(self, other) -> "FFElement":
        if isinstance(other, int):
            other = self.field.from_int(other)
        return self.field.add_el(self, other)

    __radd__ = __add__

    def __neg__(self) -> "FFElement":
        return self.field.neg_el(self)

    def __sub__(self, other) -> "FFElement":
        if isinstance(other, int):
            other = self.field.from_int(other)
        return self.field.add_el(self, self.field.neg_el(other))

    def __rsub__(self, other) -> "FFElement":
        return (-self) + other

    def __mul__(self, other) -> "FFElement":
        if isinstance(other, int):
            other = self.field.from_int(other)
        return self.field.mul_el(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "FFElement":
        if isinstance(other, int):
            other = self.field.from_int(other)
        return self.field.mul_el(self, other.inverse())

    def __pow__(self, n: int) -> "FFElement":
        return self.field.pow_el(self, n)

    def inverse(self) -> "FFElement":
        if self.idx == 0:
            raise ZeroDivisionError("inverse of zero")
        F = self.field
        return F.exp_table[(-F.log_table[self.idx]) % (F.order - 1)]

    def frobenius(self, j: int = 1) -> "FFElement":
        """x -> x^(p^j); j may be negative (inverse Frobenius)."""
        F = self.field
        j %= F.degree
        return self.field.pow_el(self, F.p ** j)

    def dlog(self) -> int:
        """Discrete log base the field's fixed generator."""
        if self.idx == 0:
            raise ZeroDivisionError("dlog of zero")
        return self.field.log_table[self.idx]

    def lift(self) -> int:
        """For prime fields only: the representative in 0..p-1."""
        if self.field.degree != 1:
            raise ValueError("lift is defined on prime fields")
        return self.coeffs[0]

    def __repr__(self) -> str:
        return f"FF({self.field.p}^{self.field.degree}:{self.idx})"


class FiniteField:
    """F_{p^f} as F_p[x]/(m) with m the canonical least irreducible.

    Elements are indexed 0..p^f-1 by the base-p integer encoding sum c_i p^i of
    their coefficient tuples. Construct via build_field(), never directly, so
    each (p, f) has a unique shared instance.
    """

    def __init__(self, p: int, f: int):
        if p < 2 or any(p % d == 0 for d in range(2, int(p ** 0.5) + 1)):
            raise ValueError(f"p must be prime, got {p}")
        order = p ** f
        if order > FIELD_SIZE_CAP:
            raise ValueError(f"field size {order} exceeds enumeration cap {FIELD_SIZE_CAP}")
        self.p = p
        self.degree = f
        self.order = order
        self.modulus = least_irreducible(p, f)

        self.idx_to_coeffs: list = [None] * order
        for idx in range(order):
            c, rem = [], idx
            for _ in range(f):
                c.append(rem % p)
                rem //= p
            self.idx_to_coeffs[idx] = tuple(c)

        self.zero = FFElement(self, 0)
        self.one = FFElement(self, 1)

        # dlog tables off the least full-order generator
        self._build_log_tables()
        # subfield data filled lazily
        self._embed_cache: dict = {}

    # -- construction of tables ------------------------------------------------

    def _coeffs_to_idx(self, c: Sequence[int]) -> int:
        idx = 0
        for v in reversed(c):
            idx = idx * self.p + (v % self.p)
        return idx

    def _mul_idx(self, i: int, j: int) -> int:
        c = _poly_mulmod(self.idx_to_coeffs[i], self.idx_to_coeffs[j], self.modulus, self.p)
        return self._coeffs_to_idx(c)

    def _build_log_tables(self):
        Q1 = self.order - 1
        factors = _prime_factors(Q1)
        gen_idx = None
        for cand in range(1, self.order):
            ok = True
            for ell in factors:
                if self._pow_idx(cand, Q1 // ell) == 1:
                    ok = False
                    break
            if ok:
                gen_idx = cand
                break
        assert gen_idx is not None
        self.generator = FFElement(self, gen_idx)
        exp = [0] * Q1
        log = [0] * self.order
        cur = 1
        for k in range(Q1):
            exp[k] = cur
            log[cur] = k
            cur = self._mul_idx(cur, gen_idx)
        assert cur == 1
        self.exp_table = [FFElement(self, i) for i in exp]
        self.log_table = log

    def _pow_idx(self, i: int, n: int) -> int:
        res = 1
        base = i
        while n:
            if n & 1:
                res = self._mul_idx(res, base)
            base = self._mul_idx(base, base)
            n >>= 1
        return res

    # -- arithmetic ------------------------------------------------------------

    def add_el(self, a: FFElement, b: FFElement) -> FFElement:
        ca, cb = a.coeffs, b.coeffs
        return FFElement(self, self._coeffs_to_idx([x + y for x, y in zip(ca, cb)]))

    def neg_el(self, a: FFElement) -> FFElement:
        return FFElement(self, self._coeffs_to_idx([-x for x in a.coeffs]))

    def mul_el(self, a: FFElement, b: FFElement) -> FFElement:
        if a.idx == 0 or b.idx == 0:
            return self.zero
        Q1 = self.order - 1
        return self.exp_table[(self.log_table[a.idx] + self.log_table[b.idx]) % Q1]

    def pow_el(self, a: FFElement, n: int) -> FFElement:
        if a.idx == 0:
            if n < 0:
                raise ZeroDivisionError
            return self.one if n == 0 else self.zero
        Q1 = self.order - 1
        return self.exp_table[(self.log_table[a.idx] * n) % Q1]

    # -- element constructors --------------------------------------------------

    def from_int(self, n: int) -> FFElement:
        """Image of the integer n under Z -> F_p -> F_{p^f}."""
        return FFElement(self, n % self.p)

    def from_coeffs(self, c: Sequence[int]) -> FFElement:
        if len(c) > self.degree:
            raise ValueError("too many coefficients")
        c = list(c) + [0] * (self.degree - len(c))
        return FFElement(self, self._coeffs_to_idx(c))

    def element_by_index(self, idx: int) -> FFElement:
        if not 0 <= idx < self.order:
            raise ValueError("index out of range")
        return FFElement(self, idx)

    def elements(self) -> Iterator[FFElement]:
        for idx in range(self.order):
            yield FFElement(self, idx)

    def units(self) -> Iterator[FFElement]:
        for idx in range(1, self.order):
            yield FFElement(self, idx)

    # -- subfield structure ----------------------------------------------------

    def _subfield_data(self, e: int):
        """Embedding data for F_{p^e} inside self; returns (subfield, map idx_sub -> element, inverse dict)."""
        if self.degree % e:
            raise ValueError(f"F_p^{e} is not a subfield of F_p^{self.degree}")
        if e in self._embed_cache:
            return self._embed_cache[e]
        sub = build_field(self.p, e)
        if e == self.degree:
            up = {i: FFElement(self, i) for i in range(self.order)}
            down = {i: FFElement(sub, i) for i in range(self.order)}
            self._embed_cache[e] = (sub, up, down)
            return self._embed_cache[e]
        if e == 1:
            up = {s: self.from_int(s) for s in range(self.p)}
            down = {self.from_int(s).idx: FFElement(sub, s) for s in range(self.p)}
            self._embed_cache[e] = (sub, up, down)
            return self._embed_cache[e]
        # root of sub's modulus inside self: least power of h = g^((Q-1)/(p^e-1))
        # annihilated by the modulus; h generates the unique subgroup of order p^e - 1.
        target = sub.modulus
        h = self.pow_el(self.generator, (self.order - 1) // (self.p ** e - 1))
        root = None
        cand = self.one
        for _ in range(self.p ** e - 1):
            cand = self.mul_el(cand, h)
            acc = self.zero
            powc = self.one
            for coef in target:
                if coef:
                    acc = self.add_el(acc, self.mul_el(self.from_int(coef), powc))
                powc = self.mul_el(powc, cand)
            if acc.idx == 0:
                root = cand
                break
        assert root is not None, "subfield root not found"
        up = {}
        down = {}
        for sidx in range(sub.order):
            c = sub.idx_to_coeffs[sidx]
            acc = self.zero
            powr = self.one
            for coef in c:
                if coef:
                    acc = self.add_el(acc, self.mul_el(self.from_int(coef), powr))
                powr = self.mul_el(powr, root)
            up[sidx] = acc
            down[acc.idx] = FFElement(sub, sidx)
        self._embed_cache[e] = (sub, up, down)
        return self._embed_cache[e]

    def embed_from(self, x: FFElement) -> FFElement:
        """Embed x (element of a canonical subfield) into this field."""
        sub, up, _ = self._subfield_data(x.field.degree)
        if x.field is not sub:
            raise ValueError("element is not from the canonical subfield")
        return up[x.idx]

    def project_to(self, e: int, x: FFElement) -> FFElement:
        """Inverse of embed_from on the image; raises if x is outside F_{p^e}."""
        _, _, down = self._subfield_data(e)
        try:
            return down[x.idx]
        except KeyError:
            raise ValueError("element does not lie in the requested subfield") from None

    def trace_to(self, e: int, x: FFElement) -> FFElement:
        """Relative trace F_{p^f} -> F_{p^e} (e | f), landing in build_field(p, e)."""
        if self.degree % e:
            raise ValueError("not a subfield")
        acc = self.zero
        t = x
        for _ in range(self.degree // e):
            acc = self.add_el(acc, t)
            t = t.frobenius(e)
        return self.project_to(e, acc)

    def norm_to(self, e: int, x: FFElement) -> FFElement:
        """Relative norm F_{p^f} -> F_{p^e} (e | f)."""
        if self.degree % e:
            raise ValueError("not a subfield")
        acc = self.one
        t = x
        for _ in range(self.degree // e):
            acc = self.mul_el(acc, t)
            t = t.frobenius(e)
        return self.project_to(e, acc)

    def absolute_trace(self, x: FFElement) -> int:
        return self.trace_to(1, x).coeffs[0]

    def __repr__(self) -> str:
        return f"GF({self.p}^{self.degree})"


@lru_cache(maxsize=None)
def _build_field(p: int, f: int) -> FiniteField:
    return FiniteField(p, f)


def build_field(p: int, f: int = 1) -> FiniteField:
    return _build_field(p, f)


def trace_norm(x: FFElement, e: int) -> Tuple[FFElement, FFElement]:
    """(relative trace, relative norm) of x down to F_{p^e}, e | f."""
    F = x.field
    return F.trace_to(e, x), F.norm_to(e, x)


def residue_symbol(x: FFElement) -> int:
    """Quadratic residue symbol (x / k) in {1, -1}, k of odd order, x nonzero.

    Computed as x^((|k|-1)/2) compared with +-1.
    """
    F = x.field
    if F.order % 2 == 0:
        raise ValueError("residue symbol needs a field of odd cardinality")
    if x.idx == 0:
        raise ValueError("residue symbol of zero")
    s = F.pow_el(x, (F.order - 1) // 2)
    if s.idx == 1:
        return 1
    assert s == F.from_int(-1)
    return -1


def jacobi(a: int, n: int) -> int:
    """Jacobi symbol (a/n) for odd n >= 1."""
    if n <= 0 or n % 2 == 0:
        raise ValueError("n must be positive odd")
    a %= n
    result = 1
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0
