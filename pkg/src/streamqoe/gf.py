"""Table-driven arithmetic in GF(2^k) for k in {1, 4, 8}.

Elements are small unsigned integers; addition is XOR. Multiplication and
inversion go through precomputed tables, and every operation accepts numpy
arrays (broadcasting like the underlying indexing does).
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

# reduction polynomials, including the x^k term
POLYS = {
    2: 0b11,  # x + 1
    16: 0b1_0011,  # x^4 + x + 1
    256: 0b1_0001_1011,  # x^8 + x^4 + x^3 + x + 1
}


def _carryless_mul_table(q: int, poly: int) -> np.ndarray:
    k = q.bit_length() - 1
    a = np.arange(q, dtype=np.int64)[:, None]
    b = np.arange(q, dtype=np.int64)[None, :]
    prod = np.zeros((q, q), dtype=np.int64)
    for i in range(k):
        prod ^= np.where((b >> i) & 1, a << i, 0)
    for bit in range(2 * k - 2, k - 1, -1):
        prod ^= np.where((prod >> bit) & 1, poly << (bit - k), 0)
    return prod.astype(np.uint8)


class GF:
    """The field with ``q`` elements, ``q`` in {2, 16, 256}."""

    def __init__(self, q: int):
        if q not in POLYS:
            raise ValueError(f"unsupported field size {q}; choose one of {sorted(POLYS)}")
        self.q = q
        self.k = q.bit_length() - 1
        self.poly = POLYS[q]
        self.mul_table = _carryless_mul_table(q, self.poly)
        self._flat = self.mul_table.ravel()
        inv = np.zeros(q, dtype=np.uint8)
        rows, cols = np.nonzero(self.mul_table == 1)
        inv[rows] = cols
        self.inv_table = inv

    def __repr__(self) -> str:
        return f"GF({self.q})"

    @staticmethod
    def add(a, b):
        return np.bitwise_xor(a, b)

    sub = add

    def mul(self, a, b):
        a = np.asarray(a, dtype=np.intp)
        b = np.asarray(b, dtype=np.intp)
        return self._flat[(a << self.k) | b]

    def inv(self, a):
        a = np.asarray(a)
        if np.any(a == 0):
            raise ZeroDivisionError("zero has no inverse in GF(q)")
        return self.inv_table[a]

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def random(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.integers(0, self.q, size=size, dtype=np.uint8)


@lru_cache(maxsize=None)
def field(q: int) -> GF:
    return GF(q)
