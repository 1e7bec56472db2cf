"""numpy index tables for vectorized finite-field kernels.

Element indices (FFElement.idx) are the universal currency: a table maps index
pairs to the index of the result, so bulk arithmetic over big tuple grids is
fancy indexing. Tables are cached per field; full pairwise tables are built
only for fields below _PAIR_TABLE_MAX elements (the counting kernels never
need them bigger), while unary tables (square, negation, traces) are cheap at
any supported size.
"""

from __future__ import annotations

import numpy as np

from .finite_field import FiniteField

_PAIR_TABLE_MAX = 1100  # full |k|^2 int32 tables up to ~4.8 MB

_pair_cache: dict = {}
_unary_cache: dict = {}


def pair_tables(F: FiniteField):
    """(ADD, MUL) with ADD[i, j] = index of x_i + x_j, same for MUL."""
    key = id(F)
    if key in _pair_cache:
        return _pair_cache[key]
    if F.order > _PAIR_TABLE_MAX:
        raise ValueError(f"pairwise tables capped at {_PAIR_TABLE_MAX} elements, field has {F.order}")
    n = F.order
    add = np.empty((n, n), dtype=np.int32)
    mul = np.empty((n, n), dtype=np.int32)
    for i in range(n):
        a = F.element_by_index(i)
        for j in range(n):
            b = F.element_by_index(j)
            add[i, j] = F.add_el(a, b).idx
            mul[i, j] = F.mul_el(a, b).idx
    _pair_cache[key] = (add, mul)
    return _pair_cache[key]


def square_table(F: FiniteField) -> np.ndarray:
    key = (id(F), "sq")
    if key not in _unary_cache:
        _unary_cache[key] = np.array([(x * x).idx for x in F.elements()], dtype=np.int64)
    return _unary_cache[key]


def trace_exponent_table(F: FiniteField, m: int, twist_idx: int = 1) -> np.ndarray:
    """t[i] = lift(Tr_{F_{p^m}/F_p}(b . Tr_{F/F_{p^m}}(x_i))) for the twist b.

    This is exactly the zeta-exponent of an additive character of F_{p^m} with
    twist b, evaluated on elements of F.
    """
    key = (id(F), "trexp", m, twist_idx)
    if key not in _unary_cache:
        sub = None
        out = np.empty(F.order, dtype=np.int64)
        for x in F.elements():
            t = F.trace_to(m, x)
            sub = t.field
            b = sub.element_by_index(twist_idx)
            out[x.idx] = sub.absolute_trace(sub.mul_el(b, t))
        _unary_cache[key] = out
    return _unary_cache[key]


def coordinate_index_grids(order: int, r: int):
    """For the flattened grid of r-tuples over a field of given order, the
    per-coordinate index arrays: grids[k][j] = index of coordinate k of tuple j."""
    total = order ** r
    flat = np.arange(total, dtype=np.int64)
    out = []
    for k in range(r):
        out.append(((flat // (order ** k)) % order).astype(np.int32))
    return out
