"""Erasure-code schemes, stripe grouping, and a GF(256) coder.

Two code families are supported. An RS-style (k, m) code keeps k data blocks
plus m parities and reconstructs any block from any other k. A (k, l, g) LRC
splits the k data blocks into l local groups, adds one local parity per group
and g global parities; a data or local-parity block is recovered from the k/l
other blocks of its local group, and a global parity from the other parities.

The grouping logic here decides how many blocks of one stripe may share a
rack, and the exact rational `mean_cross_rack_reads` is the per-stripe
average number of blocks that must cross racks to repair one failed block
under that grouping.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence


class ReconstructionError(ValueError):
    """Raised when a block cannot be rebuilt from the offered blocks."""


@dataclass(frozen=True)
class CodeScheme:
    kind: str  # "rs" | "lrc"
    k: int
    m: int = 0
    l: int = 0
    g: int = 0

    def __post_init__(self):
        if self.kind not in ("rs", "lrc"):
            raise ValueError(f"unknown code kind {self.kind!r}")
        if self.k < 1:
            raise ValueError("need at least one data block")
        if self.kind == "rs":
            if self.m < 1:
                raise ValueError("rs code needs at least one parity block")
        else:
            if self.l < 1 or self.g < 1:
                raise ValueError("lrc needs at least one local and one global parity")
            if self.k % self.l:
                raise ValueError(
                    f"local-parity count {self.l} must divide data count {self.k}"
                )

    @property
    def length(self) -> int:
        """Stripe size."""
        if self.kind == "rs":
            return self.k + self.m
        return self.k + self.l + self.g

    @property
    def is_rs(self) -> bool:
        return self.kind == "rs"

    def spec_str(self) -> str:
        if self.kind == "rs":
            return f"rs:{self.k},{self.m}"
        return f"lrc:{self.k},{self.l},{self.g}"

    # LRC stripe layout: data 0..k-1, local parities k..k+l-1, then globals.
    def block_class(self, block: int) -> str:
        if not 0 <= block < self.length:
            raise IndexError(f"block {block} out of range")
        if self.kind == "rs":
            return "data" if block < self.k else "parity"
        if block < self.k:
            return "data"
        if block < self.k + self.l:
            return "local"
        return "global"

    def local_group_of(self, block: int) -> int | None:
        if self.kind != "lrc":
            return None
        cls = self.block_class(block)
        if cls == "data":
            return block // (self.k // self.l)
        if cls == "local":
            return block - self.k
        return None

    def local_group_members(self, group: int) -> tuple[int, ...]:
        if self.kind != "lrc":
            raise ValueError("local groups exist only for lrc schemes")
        per = self.k // self.l
        return tuple(range(group * per, (group + 1) * per)) + (self.k + group,)

    def parity_blocks(self) -> tuple[int, ...]:
        if self.kind == "rs":
            return tuple(range(self.k, self.length))
        return tuple(range(self.k, self.k + self.l + self.g))


def parse_scheme(text: str) -> CodeScheme:
    """Parse `rs:K,M` or `lrc:K,L,G`."""
    try:
        kind, rest = text.split(":", 1)
        parts = [int(p) for p in rest.split(",")]
    except ValueError:
        raise ValueError(f"bad code spec {text!r}, expected rs:K,M or lrc:K,L,G")
    if kind == "rs" and len(parts) == 2:
        return CodeScheme("rs", k=parts[0], m=parts[1])
    if kind == "lrc" and len(parts) == 3:
        return CodeScheme("lrc", k=parts[0], l=parts[1], g=parts[2])
    raise ValueError(f"bad code spec {text!r}, expected rs:K,M or lrc:K,L,G")


@dataclass(frozen=True)
class StripeGrouping:
    """Partition of one RS stripe into rack-sized groups.

    Blocks are assigned contiguously in ascending index order: the first t
    groups take size_max blocks each, the rest size_min. size_max never
    exceeds m, so a whole-rack loss stays decodable.
    """

    scheme: CodeScheme
    n_g: int
    t: int
    size_max: int
    size_min: int
    a: int
    b: int
    sizes: tuple[int, ...]
    group_of: tuple[int, ...]
    offset_in_group: tuple[int, ...]

    def members(self, group: int) -> tuple[int, ...]:
        start = sum(self.sizes[:group])
        return tuple(range(start, start + self.sizes[group]))


def group_stripe(scheme: CodeScheme) -> StripeGrouping:
    if not scheme.is_rs:
        raise ValueError("stripe grouping applies to rs schemes only")
    length, m = scheme.length, scheme.m
    n_g = -(-length // m)  # ceil
    t = length % n_g
    size_max = -(-length // n_g)
    size_min = length // n_g
    sizes = tuple([size_max] * t + [size_min] * (n_g - t))
    group_of = []
    offset = []
    for g, size in enumerate(sizes):
        group_of.extend([g] * size)
        offset.extend(range(size))
    return StripeGrouping(
        scheme=scheme,
        n_g=n_g,
        t=t,
        size_max=size_max,
        size_min=size_min,
        a=length // m,
        b=length % m,
        sizes=sizes,
        group_of=tuple(group_of),
        offset_in_group=tuple(offset),
    )


def mean_cross_rack_reads(scheme: CodeScheme) -> Fraction:
    """Average cross-rack blocks needed to repair one failed block.

    Exact rational; equals (a-1), except when the stripe length leaves a
    remainder of m-1 modulo m, where the short group pays one extra read:
    ((a-1)(k+1) + a(m-1)) / (k+m).
    """
    if not scheme.is_rs:
        raise ValueError("defined for rs schemes")
    length = scheme.length
    a, b = length // scheme.m, length % scheme.m
    if b == scheme.m - 1:
        return Fraction((a - 1) * (scheme.k + 1) + a * (scheme.m - 1), length)
    return Fraction(a - 1)


@dataclass(frozen=True)
class LrcColumnAssignment:
    """Node-addressing column for every block of an LRC stripe.

    One column may serve several blocks, but within a local group all blocks
    get pairwise distinct columns, and so do all parity blocks.
    """

    scheme: CodeScheme
    n_cols: int
    col_of: tuple[int, ...]


def lrc_columns(scheme: CodeScheme) -> LrcColumnAssignment:
    if scheme.kind != "lrc":
        raise ValueError("column assignment applies to lrc schemes only")
    k, l, g = scheme.k, scheme.l, scheme.g
    per = k // l
    n_cols = max(per + 1, l + g)
    cols = [0] * scheme.length
    for j in range(l):
        cols[k + j] = j
    for i in range(g):
        cols[k + l + i] = (l + i) % n_cols
    for j in range(l):
        for t in range(per):
            cols[j * per + t] = (j + 1 + t) % n_cols
    # The modular rule cannot collide inside a local group for valid sizes,
    # but guard anyway and fall back to the smallest free column.
    for j in range(l):
        members = scheme.local_group_members(j)
        used = set()
        for b in members:
            if cols[b] in used:
                free = next(c for c in range(n_cols) if c not in used)
                cols[b] = free
            used.add(cols[b])
    assignment = LrcColumnAssignment(scheme=scheme, n_cols=n_cols, col_of=tuple(cols))
    _check_lrc_assignment(assignment)
    return assignment


def _check_lrc_assignment(assignment: LrcColumnAssignment) -> None:
    scheme = assignment.scheme
    for j in range(scheme.l):
        members = scheme.local_group_members(j)
        if len({assignment.col_of[b] for b in members}) != len(members):
            raise AssertionError(f"local group {j} shares a column")
    parities = scheme.parity_blocks()
    if len({assignment.col_of[b] for b in parities}) != len(parities):
        raise AssertionError("parity blocks share a column")


# ---------------------------------------------------------------------------
# GF(256) coder
# ---------------------------------------------------------------------------

_GF_POLY = 0x11D  # x^8 + x^4 + x^3 + x^2 + 1

_EXP = [0] * 512
_LOG = [0] * 256
_x = 1
for _i in range(255):
    _EXP[_i] = _x
    _LOG[_x] = _i
    _x <<= 1
    if _x & 0x100:
        _x ^= _GF_POLY
for _i in range(255, 512):
    _EXP[_i] = _EXP[_i - 255]
del _x, _i


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return _EXP[_LOG[a] + _LOG[b]]


def gf_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("no inverse for 0")
    return _EXP[255 - _LOG[a]]


def gf_pow(a: int, e: int) -> int:
    if e == 0:
        return 1
    if a == 0:
        return 0
    return _EXP[(_LOG[a] * e) % 255]


_MUL_TABLES: dict[int, bytes] = {}


def _mul_table(c: int) -> bytes:
    table = _MUL_TABLES.get(c)
    if table is None:
        table = bytes(gf_mul(c, v) for v in range(256))
        _MUL_TABLES[c] = table
    return table


def mul_buf(c: int, buf: bytes) -> bytes:
    if c == 0:
        return bytes(len(buf))
    if c == 1:
        return bytes(buf)
    return buf.translate(_mul_table(c))


def xor_buf(a: bytes, b: bytes) -> bytes:
    if len(a) != len(b):
        raise ValueError("buffer length mismatch")
    n = len(a)
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(n, "big")


def _solve_combination(
    rows: Sequence[Sequence[int]], target: Sequence[int]
) -> list[int]:
    """Coefficients x with sum x_i * rows[i] == target over GF(256).

    Gaussian elimination with free variables pinned to zero; raises
    ReconstructionError when target is outside the span.
    """
    width = len(target)
    count = len(rows)
    aug = [[rows[s][eq] for s in range(count)] + [target[eq]] for eq in range(width)]
    pivots: list[tuple[int, int]] = []
    rank = 0
    for col in range(count):
        pivot = next((r for r in range(rank, width) if aug[r][col]), None)
        if pivot is None:
            continue
        aug[rank], aug[pivot] = aug[pivot], aug[rank]
        inv = gf_inv(aug[rank][col])
        aug[rank] = [gf_mul(inv, v) for v in aug[rank]]
        for r in range(width):
            if r != rank and aug[r][col]:
                factor = aug[r][col]
                aug[r] = [v ^ gf_mul(factor, w) for v, w in zip(aug[r], aug[rank])]
        pivots.append((rank, col))
        rank += 1
    for r in range(rank, width):
        if aug[r][count]:
            raise ReconstructionError("blocks do not span the requested block")
    coeffs = [0] * count
    for row, col in pivots:
        coeffs[col] = aug[row][count]
    return coeffs


def _invert_matrix(mat: list[list[int]]) -> list[list[int]]:
    n = len(mat)
    aug = [row[:] + [int(i == j) for j in range(n)] for i, row in enumerate(mat)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col]), None)
        if pivot is None:
            raise ValueError("singular matrix")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = gf_inv(aug[col][col])
        aug[col] = [gf_mul(inv, v) for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                factor = aug[r][col]
                aug[r] = [v ^ gf_mul(factor, w) for v, w in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def _rs_generator(k: int, m: int) -> list[list[int]]:
    # Vandermonde rows over distinct points, then column operations to make
    # the top k x k block the identity. Any k rows of the result stay
    # invertible, which is the any-k-of-n reconstruction property. The parity
    # block is column-scaled so the first parity is the plain XOR of the data
    # (scaling preserves both properties).
    vand = [[gf_pow(i, j) for j in range(k)] for i in range(k + m)]
    top_inv = _invert_matrix([row[:] for row in vand[:k]])
    out = []
    for row in vand:
        out.append(
            [
                _dot(row, [top_inv[x][col] for x in range(k)])
                for col in range(k)
            ]
        )
    scale = [gf_inv(v) for v in out[k]]
    for row in out[k:]:
        for col in range(k):
            row[col] = gf_mul(row[col], scale[col])
    return out


def _dot(a: Sequence[int], b: Sequence[int]) -> int:
    acc = 0
    for x, y in zip(a, b):
        acc ^= gf_mul(x, y)
    return acc


def _lrc_generator(scheme: CodeScheme) -> list[list[int]]:
    k, l, g = scheme.k, scheme.l, scheme.g
    per = k // l
    rows = [[int(i == j) for j in range(k)] for i in range(k)]
    local_rows = []
    for j in range(l):
        row = [0] * k
        for d in range(j * per, (j + 1) * per):
            row[d] = 1
        local_rows.append(row)
    rows.extend(local_rows)
    # Globals are spread over the local parities with distinct nonzero
    # weights, so each one is recoverable from the other parities alone.
    for t in range(g):
        row = [0] * k
        for j, local in enumerate(local_rows):
            weight = gf_pow(_EXP[j], t)
            for d in range(k):
                if local[d]:
                    row[d] ^= gf_mul(weight, local[d])
        rows.append(row)
    return rows


class Coder:
    """Systematic linear coder over GF(256) for one scheme.

    The generator matrix maps k data blocks to the full stripe; block i is
    row i applied bytewise to the data. Reconstruction solves for the
    coefficients that express the wanted row in terms of the offered rows,
    so any information-sufficient subset works.
    """

    def __init__(self, scheme: CodeScheme):
        if scheme.length > 256:
            raise ValueError("stripe size exceeds the byte field's 256 points")
        self.scheme = scheme
        if scheme.is_rs:
            self.rows = _rs_generator(scheme.k, scheme.m)
        else:
            self.rows = _lrc_generator(scheme)

    def encode(self, data: Sequence[bytes]) -> list[bytes]:
        k = self.scheme.k
        if len(data) != k:
            raise ValueError(f"need {k} data blocks, got {len(data)}")
        size = len(data[0])
        if any(len(b) != size for b in data):
            raise ValueError("data blocks must have equal length")
        out = [bytes(b) for b in data]
        for row in self.rows[k:]:
            acc = bytes(size)
            for j, c in enumerate(row):
                if c:
                    acc = xor_buf(acc, mul_buf(c, data[j]))
            out.append(acc)
        return out

    def reconstruction_coefficients(
        self, sources: Sequence[int], target: int
    ) -> dict[int, int]:
        sources = list(sources)
        if target in sources:
            raise ReconstructionError("target listed among its own sources")
        if len(set(sources)) != len(sources):
            raise ReconstructionError("duplicate source blocks")
        if self.scheme.is_rs and len(sources) != self.scheme.k:
            raise ReconstructionError(
                f"rs reconstruction needs exactly {self.scheme.k} blocks, "
                f"got {len(sources)}"
            )
        coeffs = _solve_combination(
            [self.rows[s] for s in sources], self.rows[target]
        )
        return dict(zip(sources, coeffs))

    def decode_from(self, blocks: Mapping[int, bytes], target: int) -> bytes:
        sources = sorted(blocks)
        coeffs = self.reconstruction_coefficients(sources, target)
        size = len(next(iter(blocks.values())))
        acc = bytes(size)
        for s in sources:
            c = coeffs[s]
            if c:
                acc = xor_buf(acc, mul_buf(c, blocks[s]))
        return acc

    def aggregate_partial(
        self,
        blocks: Mapping[int, bytes],
        reconstruction_set: Sequence[int],
        target: int,
        size: int | None = None,
    ) -> bytes:
        """Partial sum of `blocks` under the full set's decode coefficients.

        Summing partials over a disjoint cover of the reconstruction set
        equals decode_from, so partials can be merged anywhere along the way.
        An empty subset yields the zero block (size then required).
        """
        extra = set(blocks) - set(reconstruction_set)
        if extra:
            raise ReconstructionError(
                f"blocks {sorted(extra)} not in the reconstruction set"
            )
        if not blocks:
            if size is None:
                raise ValueError("empty aggregate needs an explicit size")
            return bytes(size)
        coeffs = self.reconstruction_coefficients(reconstruction_set, target)
        size = len(next(iter(blocks.values())))
        acc = bytes(size)
        for s in sorted(blocks):
            c = coeffs[s]
            if c:
                acc = xor_buf(acc, mul_buf(c, blocks[s]))
        return acc
