"""Orthogonal array construction, verification, and addressing tables.

An OA(n, k) is an n^2 x k matrix over the symbols {0, ..., n-1} in which, for
any two columns, every ordered pair of symbols occurs in exactly one row. Two
consequences drive all load-balance guarantees downstream: each column holds
each symbol exactly n times, and fixing a symbol in one column spreads the
paired column uniformly.

Arrays built here are ordered so the first n rows are constant (row i holds
symbol i everywhere). Cutting those rows off an OA(r, c) leaves a table whose
rows never repeat a symbol, which is exactly what the rack-level placement
needs: one distinct rack per region-group, plus a reserved spill-over column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .fields import factorize, galois_field

Row = tuple[int, ...]


def max_columns(n: int) -> int:
    """Largest guaranteed column count for an OA with n symbols.

    Equals min(p**e) + 1 over the prime-power factors of n. The top column of
    that bound breaks the constant leading rows; see max_prefix_columns.
    """
    if n < 2:
        raise ValueError(f"orthogonal arrays need n >= 2, got {n}")
    return max_prefix_columns(n) + 1


def max_prefix_columns(n: int) -> int:
    """Largest k for which construct_oa yields n constant leading rows."""
    if n < 2:
        raise ValueError(f"orthogonal arrays need n >= 2, got {n}")
    return min(p**e for p, e in factorize(n).items())


@dataclass(frozen=True)
class OrthogonalArray:
    n: int
    k: int
    rows: tuple[Row, ...]
    prefix_identical: int

    def column(self, c: int) -> tuple[int, ...]:
        return tuple(row[c] for row in self.rows)

    def to_csv(self) -> str:
        return "\n".join(",".join(str(v) for v in row) for row in self.rows) + "\n"


@dataclass(frozen=True)
class OaVerification:
    """Exact-count verification result for a candidate matrix."""

    n: int
    k: int
    shape_ok: bool
    symbols_ok: bool
    column_frequency_ok: bool
    pair_coverage_ok: bool
    prefix_identical: int

    @property
    def passed(self) -> bool:
        return (
            self.shape_ok
            and self.symbols_ok
            and self.column_frequency_ok
            and self.pair_coverage_ok
        )


@dataclass(frozen=True)
class AddressingTable:
    """OA(r, cols) with its r constant rows removed.

    Every column holds each symbol exactly r-1 times, and within a row the
    first cols-1 entries are pairwise distinct (the whole row is, in fact).
    The final column is reserved for picking spill-over racks during repair.
    """

    r: int
    cols: int
    rows: tuple[Row, ...]
    source: OrthogonalArray


def _measure_prefix(rows: tuple[Row, ...]) -> int:
    count = 0
    for row in rows:
        first = row[0]
        if any(v != first for v in row):
            break
        count += 1
    return count


def _prime_power_rows(q: int, k: int) -> list[Row]:
    # Row (j, i), ordered j-major, column c: i + (c * j) in GF(q). The c-th
    # multiplier is the c-th field element, so column 0 is the plain i column
    # and all rows with j == 0 are constant. When k == q + 1 the extra column
    # holds j itself, which sacrifices the constant leading rows.
    field = galois_field(q)
    affine = min(k, q)
    rows = []
    for j in range(q):
        for i in range(q):
            row = [field.add(i, field.mul(c, j)) for c in range(affine)]
            if k == q + 1:
                row.append(j)
            rows.append(tuple(row))
    return rows


def _product_rows(rows1: list[Row], n1: int, rows2: list[Row], n2: int) -> list[Row]:
    # Pair rows of the two factor arrays; an entry pair (e1, e2) becomes the
    # base-n2 value e1*n2 + e2. Pairing the leading constant blocks first keeps
    # the combined leading block constant.
    n = n1 * n2
    out = []
    for big in range(n):
        j1, j2 = divmod(big, n2)
        for small in range(n):
            i1, i2 = divmod(small, n2)
            r1 = rows1[j1 * n1 + i1]
            r2 = rows2[j2 * n2 + i2]
            out.append(tuple(e1 * n2 + e2 for e1, e2 in zip(r1, r2)))
    return out


def construct_oa(n: int, k: int) -> OrthogonalArray:
    """Build OA(n, k) deterministically.

    For 2 <= k <= max_prefix_columns(n) the first n rows are constant with row
    i holding symbol i; for k == max_columns(n) the array is still a valid OA
    but loses that property. Composite n goes through the product of its
    prime-power factor arrays.
    """
    if n < 2:
        raise ValueError(f"orthogonal arrays need n >= 2, got {n}")
    if not 2 <= k <= max_columns(n):
        raise ValueError(
            f"OA({n}, {k}) out of range: supported column counts are "
            f"2..{max_columns(n)}"
        )
    parts = sorted(p**e for p, e in factorize(n).items())
    factor_rows = [(_prime_power_rows(q, k), q) for q in parts]
    rows, size = factor_rows[0]
    for nxt_rows, nxt_size in factor_rows[1:]:
        rows = _product_rows(rows, size, nxt_rows, nxt_size)
        size *= nxt_size
    rows_t = tuple(rows)
    return OrthogonalArray(n=n, k=k, rows=rows_t, prefix_identical=_measure_prefix(rows_t))


def verify_oa(rows) -> OaVerification:
    """Exhaustively check a candidate matrix against the OA definition.

    Counts every per-column symbol frequency and every ordered pair across
    every column pair; nothing is sampled. Malformed input produces a failing
    report rather than an exception.
    """
    try:
        mat = [tuple(row) for row in rows]
        nrows = len(mat)
        widths = {len(row) for row in mat}
    except TypeError:
        return OaVerification(0, 0, False, False, False, False, 0)
    if nrows == 0 or len(widths) != 1:
        return OaVerification(0, 0, False, False, False, False, 0)
    k = widths.pop()
    n = math.isqrt(nrows)
    shape_ok = n * n == nrows and n >= 1 and k >= 1

    symbols_ok = shape_ok
    if shape_ok:
        for row in mat:
            for v in row:
                if not isinstance(v, int) or isinstance(v, bool) or not 0 <= v < n:
                    symbols_ok = False
                    break
            if not symbols_ok:
                break

    freq_ok = False
    pairs_ok = False
    if symbols_ok:
        freq_ok = True
        for c in range(k):
            counts = [0] * n
            for row in mat:
                counts[row[c]] += 1
            if any(cnt != n for cnt in counts):
                freq_ok = False
                break
        pairs_ok = True
        for c1 in range(k):
            for c2 in range(c1 + 1, k):
                seen = [0] * (n * n)
                for row in mat:
                    seen[row[c1] * n + row[c2]] += 1
                if any(cnt != 1 for cnt in seen):
                    pairs_ok = False
                    break
            if not pairs_ok:
                break

    prefix = _measure_prefix(tuple(mat)) if shape_ok else 0
    return OaVerification(n, k, shape_ok, symbols_ok, freq_ok, pairs_ok, prefix)


def derive_addressing_table(array: OrthogonalArray, n_g: int) -> AddressingTable:
    """Cut the r constant rows off an OA(r, n_g + 1).

    The remainder is the r(r-1)-row addressing table used for rack-level
    placement: column j addresses region-group j, the last column addresses
    repair spill-over racks.
    """
    if n_g < 1:
        raise ValueError(f"need at least one region-group column, got {n_g}")
    if array.k != n_g + 1:
        raise ValueError(
            f"addressing table needs an OA with exactly {n_g + 1} columns, "
            f"got {array.k}"
        )
    if array.prefix_identical < array.n:
        raise ValueError(
            f"source array has only {array.prefix_identical} constant leading "
            f"rows, need {array.n}"
        )
    rows = array.rows[array.n :]
    r = array.n
    for c in range(array.k):
        counts = [0] * r
        for row in rows:
            counts[row[c]] += 1
        if any(cnt != r - 1 for cnt in counts):
            raise AssertionError("addressing table column frequency broken")
    for row in rows:
        if len(set(row[:n_g])) != n_g:
            raise AssertionError("addressing table row repeats a rack")
    return AddressingTable(r=r, cols=n_g + 1, rows=rows, source=array)
