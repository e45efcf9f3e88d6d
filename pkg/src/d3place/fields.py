"""Arithmetic for small prime-power Galois fields.

Elements of GF(p^e) are encoded as integers in range(q): the base-p digits of
the integer are the coefficients of a polynomial over GF(p), least significant
digit first. Integer order therefore fixes a canonical enumeration of field
elements, which keeps every table built on top of these fields reproducible
across runs and machines.

The reduction polynomial is the lexicographically smallest monic irreducible
polynomial of degree e over GF(p). For the sizes that matter in practice:

    GF(4):  x^2 + x + 1     GF(9):  x^2 + 1
    GF(8):  x^3 + x + 1     GF(16): x^4 + x + 1
    GF(25): x^2 + 2         GF(27): x^3 + 2x + 1
"""

from __future__ import annotations

from functools import lru_cache


def factorize(n: int) -> dict[int, int]:
    """Prime factorization of n as {prime: exponent}."""
    if n < 2:
        raise ValueError(f"factorize needs n >= 2, got {n}")
    factors: dict[int, int] = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            factors[d] = factors.get(d, 0) + 1
            n //= d
        d += 1
    if n > 1:
        factors[n] = factors.get(n, 0) + 1
    return factors


def prime_power(n: int) -> tuple[int, int] | None:
    """Return (p, e) when n == p**e for a prime p, else None."""
    if n < 2:
        return None
    factors = factorize(n)
    if len(factors) != 1:
        return None
    [(p, e)] = factors.items()
    return p, e


def _digits(value: int, p: int, width: int) -> list[int]:
    out = []
    for _ in range(width):
        out.append(value % p)
        value //= p
    return out


def _poly_mul(a: list[int], b: list[int], p: int) -> list[int]:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] = (out[i + j] + x * y) % p
    return out


def _poly_rem(a: list[int], mod: list[int], p: int) -> list[int]:
    # mod is monic, so no leading-coefficient inversion is needed
    a = list(a)
    while len(a) >= len(mod):
        c = a[-1]
        if c:
            off = len(a) - len(mod)
            for i, y in enumerate(mod):
                a[off + i] = (a[off + i] - c * y) % p
        a.pop()
    return a


def _is_irreducible(poly: list[int], p: int) -> bool:
    e = len(poly) - 1
    for d in range(1, e // 2 + 1):
        for tail in range(p**d):
            divisor = _digits(tail, p, d) + [1]
            if not any(_poly_rem(poly, divisor, p)):
                return False
    return True


def canonical_modulus(q: int) -> tuple[int, ...]:
    """Lexicographically smallest monic irreducible of degree e over GF(p).

    Coefficients are returned least significant first, including the leading 1.
    """
    pe = prime_power(q)
    if pe is None:
        raise ValueError(f"{q} is not a prime power")
    p, e = pe
    for tail in range(p**e):
        cand = _digits(tail, p, e) + [1]
        if _is_irreducible(cand, p):
            return tuple(cand)
    raise AssertionError(f"no irreducible polynomial found for GF({q})")


class GaloisField:
    """GF(q) for a prime power q, with integer-coded elements."""

    def __init__(self, q: int):
        pe = prime_power(q)
        if pe is None:
            raise ValueError(f"GF({q}) does not exist: {q} is not a prime power")
        self.q = q
        self.p, self.e = pe
        if self.e == 1:
            self.modulus: tuple[int, ...] | None = None
        else:
            self.modulus = canonical_modulus(q)
            self._mul_table = self._build_mul_table()

    def _build_mul_table(self) -> list[list[int]]:
        assert self.modulus is not None
        p, e, q = self.p, self.e, self.q
        mod = list(self.modulus)
        table = [[0] * q for _ in range(q)]
        for a in range(q):
            da = _digits(a, p, e)
            for b in range(a, q):
                db = _digits(b, p, e)
                rem = _poly_rem(_poly_mul(da, db, p), mod, p)
                rem += [0] * (e - len(rem))
                value = 0
                for coeff in reversed(rem):
                    value = value * p + coeff
                table[a][b] = value
                table[b][a] = value
        return table

    def add(self, a: int, b: int) -> int:
        if self.e == 1:
            return (a + b) % self.p
        p = self.p
        out = 0
        scale = 1
        for _ in range(self.e):
            out += ((a % p + b % p) % p) * scale
            a //= p
            b //= p
            scale *= p
        return out

    def mul(self, a: int, b: int) -> int:
        if self.e == 1:
            return (a * b) % self.p
        return self._mul_table[a][b]


@lru_cache(maxsize=None)
def galois_field(q: int) -> GaloisField:
    return GaloisField(q)
