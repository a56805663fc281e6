"""GF(2^p) arithmetic via log/antilog tables.

Element indices double as binary images: element x has bits
(x_0, ..., x_{p-1}) with bit 0 stored in the LSB.  Addition is XOR of
indices; multiplication goes through the log/antilog tables built from a
fixed primitive polynomial per field size.
"""

from dataclasses import dataclass, field

import numpy as np

# One canonical primitive polynomial per bit width (minimal-weight choices).
PRIM_POLYS = {
    1: 0x3,  # x + 1 (GF(2); tables degenerate)
    2: 0x7,  # x^2 + x + 1
    3: 0xB,  # x^3 + x + 1
    4: 0x13,  # x^4 + x + 1
    5: 0x25,  # x^5 + x^2 + 1
    6: 0x43,  # x^6 + x + 1
    7: 0x83,  # x^7 + x + 1
    8: 0x11D,  # x^8 + x^4 + x^3 + x^2 + 1
}


class GFError(ValueError):
    pass


@dataclass(frozen=True)
class Field:
    """Immutable GF(2^p) context.

    mul_table[a, b] is the full q x q product table; perm_gather[h] is the
    index vector g with (m permuted by label h)[x] = m[g[x]], i.e.
    g = mul_table[inv(h)].
    """

    p: int
    q: int
    prim_poly: int
    log_table: np.ndarray = field(repr=False)
    antilog_table: np.ndarray = field(repr=False)
    mul_table: np.ndarray = field(repr=False)
    inv_table: np.ndarray = field(repr=False)
    perm_gather: np.ndarray = field(repr=False)
    bit_matrix: np.ndarray = field(repr=False)

    def mul(self, a, b):
        return int(self.mul_table[a, b])

    def inv(self, a):
        if a == 0:
            raise GFError("inverse of zero")
        return int(self.inv_table[a])

    def add(self, a, b):
        return a ^ b


def field_new(p):
    """Build the GF(2^p) context for 1 <= p <= 8."""
    if not isinstance(p, (int, np.integer)) or not 1 <= p <= 8:
        raise GFError(f"bit width p must be an integer in 1..8, got {p!r}")
    p = int(p)
    q = 1 << p
    poly = PRIM_POLYS[p]

    log_table = np.zeros(q, dtype=np.int64)
    antilog_table = np.zeros(q, dtype=np.int64)
    x = 1
    for i in range(q - 1):
        antilog_table[i] = x
        log_table[x] = i
        x <<= 1
        if x & q:
            x ^= poly

    mul_table = np.zeros((q, q), dtype=np.int64)
    for a in range(1, q):
        for b in range(1, q):
            mul_table[a, b] = antilog_table[(log_table[a] + log_table[b]) % (q - 1)]

    inv_table = np.zeros(q, dtype=np.int64)
    for a in range(1, q):
        inv_table[a] = antilog_table[(q - 1 - log_table[a]) % (q - 1)]

    # perm_gather[h, x] = inv(h) * x, so permuted[x] = m[perm_gather[h, x]]
    perm_gather = np.zeros((q, q), dtype=np.int64)
    for h in range(1, q):
        perm_gather[h] = mul_table[inv_table[h]]

    bit_matrix = np.array([[(x >> i) & 1 for i in range(p)] for x in range(q)],
                          dtype=np.float64)

    return Field(p=p, q=q, prim_poly=poly, log_table=log_table,
                 antilog_table=antilog_table, mul_table=mul_table,
                 inv_table=inv_table, perm_gather=perm_gather,
                 bit_matrix=bit_matrix)


def mul(f: Field, a: int, b: int) -> int:
    return f.mul(a, b)


def inv(f: Field, a: int) -> int:
    return f.inv(a)
