"""Packed linear algebra over F2.

Bits are stored little-endian in uint64 words, so XOR-heavy loops run at
word granularity through numpy.  Everything is dense except rank_sparse,
which peels low-degree columns first; the 3D check matrices are huge but
every column meets at most three rows, so peeling usually eats the whole
matrix before the dense core is touched.
"""

from __future__ import annotations

from collections import deque

import numpy as np

_ONE = np.uint64(1)


def _word_count(nbits: int) -> int:
    return max(1, (nbits + 63) >> 6)


def _pack_bits(bits: np.ndarray, nwords: int) -> np.ndarray:
    packed = np.packbits(bits.astype(np.uint8), bitorder="little")
    out = np.zeros(nwords * 8, dtype=np.uint8)
    out[: packed.size] = packed
    return out.view(np.uint64)


def _popcount(words: np.ndarray) -> int:
    return int(np.unpackbits(words.view(np.uint8)).sum())


class BitVector:
    """A fixed-length vector over F2."""

    __slots__ = ("n", "words")

    def __init__(self, n: int, words: np.ndarray | None = None):
        self.n = n
        if words is None:
            self.words = np.zeros(_word_count(n), dtype=np.uint64)
        else:
            self.words = words

    @classmethod
    def from_bits(cls, bits) -> "BitVector":
        arr = np.asarray(list(bits), dtype=np.uint8)
        return cls(arr.size, _pack_bits(arr, _word_count(arr.size)))

    @classmethod
    def from_indices(cls, n: int, indices) -> "BitVector":
        v = cls(n)
        for i in indices:
            v.flip(i)
        return v

    def copy(self) -> "BitVector":
        return BitVector(self.n, self.words.copy())

    def get(self, i: int) -> int:
        return int((self.words[i >> 6] >> np.uint64(i & 63)) & _ONE)

    def flip(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise IndexError(f"bit {i} out of range for length {self.n}")
        self.words[i >> 6] ^= _ONE << np.uint64(i & 63)

    def set(self, i: int, value: int) -> None:
        if self.get(i) != (value & 1):
            self.flip(i)

    @property
    def weight(self) -> int:
        return _popcount(self.words)

    def is_zero(self) -> bool:
        return not self.words.any()

    def dot(self, other: "BitVector") -> int:
        """Inner product mod 2."""
        if other.n != self.n:
            raise ValueError("length mismatch")
        return _popcount(self.words & other.words) & 1

    def nonzero(self) -> list[int]:
        bits = np.unpackbits(self.words.view(np.uint8), bitorder="little")
        return np.nonzero(bits[: self.n])[0].tolist()

    def to_array(self) -> np.ndarray:
        bits = np.unpackbits(self.words.view(np.uint8), bitorder="little")
        return bits[: self.n].copy()

    def __xor__(self, other: "BitVector") -> "BitVector":
        if other.n != self.n:
            raise ValueError("length mismatch")
        return BitVector(self.n, self.words ^ other.words)

    def __ixor__(self, other: "BitVector") -> "BitVector":
        self.words ^= other.words
        return self

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BitVector)
            and self.n == other.n
            and bool(np.array_equal(self.words, other.words))
        )

    def __hash__(self) -> int:
        return hash((self.n, self.words.tobytes()))

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"BitVector({''.join(str(b) for b in self.to_array())})"


class BitMatrix:
    """A rows x cols matrix over F2, rows packed in uint64 words."""

    __slots__ = ("rows", "cols", "words")

    def __init__(self, rows: int, cols: int, words: np.ndarray | None = None):
        self.rows = rows
        self.cols = cols
        if words is None:
            self.words = np.zeros((rows, _word_count(cols)), dtype=np.uint64)
        else:
            self.words = words

    @classmethod
    def from_dense(cls, arr) -> "BitMatrix":
        a = np.asarray(arr, dtype=np.uint8) & 1
        if a.ndim != 2:
            raise ValueError("expected a 2D array")
        rows, cols = a.shape
        m = cls(rows, cols)
        for i in range(rows):
            m.words[i] = _pack_bits(a[i], m.words.shape[1])
        return m

    @classmethod
    def from_vectors(cls, vectors: list[BitVector], cols: int | None = None) -> "BitMatrix":
        if not vectors:
            if cols is None:
                raise ValueError("cols required for an empty matrix")
            return cls(0, cols)
        cols = vectors[0].n
        m = cls(len(vectors), cols)
        for i, v in enumerate(vectors):
            if v.n != cols:
                raise ValueError("length mismatch")
            m.words[i] = v.words
        return m

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BitMatrix":
        return cls(rows, cols)

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        m = cls(n, n)
        for i in range(n):
            m.words[i, i >> 6] = _ONE << np.uint64(i & 63)
        return m

    def copy(self) -> "BitMatrix":
        return BitMatrix(self.rows, self.cols, self.words.copy())

    def row(self, i: int) -> BitVector:
        return BitVector(self.cols, self.words[i].copy())

    def get(self, i: int, j: int) -> int:
        return int((self.words[i, j >> 6] >> np.uint64(j & 63)) & _ONE)

    def set(self, i: int, j: int, value: int) -> None:
        mask = _ONE << np.uint64(j & 63)
        if value & 1:
            self.words[i, j >> 6] |= mask
        else:
            self.words[i, j >> 6] &= ~mask

    def to_dense(self) -> np.ndarray:
        bits = np.unpackbits(self.words.view(np.uint8), axis=1, bitorder="little")
        return bits[:, : self.cols].copy()

    def mul_vec(self, v: BitVector) -> BitVector:
        """Matrix-vector product over F2 (the syndrome map)."""
        if v.n != self.cols:
            raise ValueError("dimension mismatch")
        masked = self.words & v.words[np.newaxis, :]
        parities = np.unpackbits(masked.view(np.uint8), axis=1).sum(axis=1) & 1
        return BitVector.from_bits(parities.astype(np.uint8))

    def stack(self, other: "BitMatrix") -> "BitMatrix":
        if other.cols != self.cols:
            raise ValueError("dimension mismatch")
        return BitMatrix(
            self.rows + other.rows, self.cols, np.vstack([self.words, other.words])
        )

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BitMatrix)
            and (self.rows, self.cols) == (other.rows, other.cols)
            and bool(np.array_equal(self.words, other.words))
        )

    def __hash__(self) -> int:
        return hash((self.rows, self.cols, self.words.tobytes()))

    def __repr__(self) -> str:
        return f"BitMatrix({self.rows}x{self.cols})"


def _eliminate(words: np.ndarray, cols: int) -> list[int]:
    """In-place reduced row echelon form; returns the pivot columns."""
    nrows = words.shape[0]
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == nrows:
            break
        wi, bi = c >> 6, np.uint64(c & 63)
        mask = _ONE << bi
        below = np.nonzero(words[r:, wi] & mask)[0]
        if below.size == 0:
            continue
        p = r + int(below[0])
        if p != r:
            words[[r, p]] = words[[p, r]]
        others = np.nonzero(words[:, wi] & mask)[0]
        others = others[others != r]
        if others.size:
            words[others] ^= words[r]
        pivots.append(c)
        r += 1
    return pivots


def rank(m: BitMatrix) -> int:
    if m.rows == 0 or m.cols == 0:
        return 0
    return len(_eliminate(m.words.copy(), m.cols))


def solve(m: BitMatrix, b: BitVector) -> BitVector | None:
    """One solution of Mx = b with free variables set to 0, or None."""
    if b.n != m.rows:
        raise ValueError("dimension mismatch")
    aug = BitMatrix(m.rows, m.cols + 1)
    aug.words[:, : m.words.shape[1]] = m.words
    for i in range(m.rows):
        if b.get(i):
            aug.set(i, m.cols, 1)
    pivots = _eliminate(aug.words, m.cols)
    # rows beyond the rank are zero on the left; a set constant bit there
    # means the system is inconsistent
    for i in range(len(pivots), m.rows):
        if aug.get(i, m.cols):
            return None
    x = BitVector(m.cols)
    for i, c in enumerate(pivots):
        if aug.get(i, m.cols):
            x.flip(c)
    return x


def kernel_basis(m: BitMatrix) -> BitMatrix:
    """Rows span the null space {v : Mv = 0}."""
    if m.cols == 0:
        return BitMatrix(0, 0)
    words = m.words.copy()
    pivots = _eliminate(words, m.cols)
    pivot_set = set(pivots)
    free = [c for c in range(m.cols) if c not in pivot_set]
    basis = BitMatrix(len(free), m.cols)
    reduced = BitMatrix(m.rows, m.cols, words)
    for bi, f in enumerate(free):
        basis.set(bi, f, 1)
        for ri, c in enumerate(pivots):
            if reduced.get(ri, f):
                basis.set(bi, c, 1)
    return basis


def in_rowspace(m: BitMatrix, v: BitVector) -> bool:
    if v.n != m.cols:
        raise ValueError("dimension mismatch")
    if v.is_zero():
        return True
    base = rank(m)
    return rank(m.stack(BitMatrix.from_vectors([v]))) == base


def sample_orthogonal(hz: BitMatrix, row_count: int, rng: np.random.Generator) -> BitMatrix:
    """Rows drawn independently and uniformly from ker(hz).

    Every output row satisfies row . hz^T = 0 by construction.
    """
    basis = kernel_basis(hz).to_dense()
    coeffs = rng.integers(0, 2, size=(row_count, basis.shape[0]), dtype=np.uint8)
    rows = (coeffs @ basis) & 1 if basis.shape[0] else np.zeros((row_count, hz.cols), np.uint8)
    return BitMatrix.from_dense(rows.reshape(row_count, hz.cols))


def rank_sparse(rows, cols: int) -> int:
    """Rank of a sparse 0/1 matrix given as an iterable of column-index rows.

    Peels columns of live degree 1 and 2: a degree-1 column certifies its row
    independent, a degree-2 column lets one row cancel into the other.  The
    leftover core (usually empty for check matrices) goes through the packed
    dense elimination.
    """
    row_sets = [set(r) for r in rows]
    col_rows: dict[int, set[int]] = {}
    for ri, rs in enumerate(row_sets):
        for c in rs:
            col_rows.setdefault(c, set()).add(ri)
    alive = {ri for ri, rs in enumerate(row_sets) if rs}
    pending = deque(c for c, members in col_rows.items() if len(members) <= 2)
    queued = set(pending)
    r = 0

    def drop_row(ri: int) -> None:
        for c in row_sets[ri]:
            col_rows[c].discard(ri)
            if len(col_rows[c]) <= 2 and c not in queued:
                pending.append(c)
                queued.add(c)
        row_sets[ri] = set()
        alive.discard(ri)

    while pending:
        c = pending.popleft()
        queued.discard(c)
        members = col_rows.get(c, set())
        if not members:
            continue
        if len(members) == 1:
            r += 1
            drop_row(next(iter(members)))
        elif len(members) == 2:
            a, b = sorted(members, key=lambda ri: len(row_sets[ri]))
            # fold the lighter row a into b (column c cancels), retire a as pivot
            for cc in row_sets[a]:
                if cc == c:
                    continue
                if cc in row_sets[b]:
                    row_sets[b].discard(cc)
                    col_rows[cc].discard(b)
                else:
                    row_sets[b].add(cc)
                    col_rows[cc].add(b)
                if len(col_rows[cc]) <= 2 and cc not in queued:
                    pending.append(cc)
                    queued.add(cc)
            row_sets[b].discard(c)
            col_rows[c].discard(b)
            r += 1
            drop_row(a)
            if not row_sets[b]:
                alive.discard(b)

    if alive:
        live_cols = sorted({c for ri in alive for c in row_sets[ri]})
        remap = {c: i for i, c in enumerate(live_cols)}
        dense = np.zeros((len(alive), len(live_cols)), dtype=np.uint8)
        for i, ri in enumerate(sorted(alive)):
            for c in row_sets[ri]:
                dense[i, remap[c]] = 1
        r += rank(BitMatrix.from_dense(dense))
    return r


def format_matrix(m: BitMatrix) -> str:
    lines = [f"{m.rows} {m.cols}"]
    dense = m.to_dense()
    for i in range(m.rows):
        lines.append("".join("1" if b else "0" for b in dense[i]))
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> BitMatrix:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty matrix text")
    head = lines[0].split()
    if len(head) != 2:
        raise ValueError(f"bad header line: {lines[0]!r}")
    rows, cols = int(head[0]), int(head[1])
    if len(lines) != rows + 1:
        raise ValueError(f"expected {rows} rows, got {len(lines) - 1}")
    m = BitMatrix(rows, cols)
    for i, ln in enumerate(lines[1:]):
        if len(ln) != cols or set(ln) - {"0", "1"}:
            raise ValueError(f"bad row {i}: {ln!r}")
        m.words[i] = _pack_bits(np.frombuffer(ln.encode(), np.uint8) - ord("0"), m.words.shape[1])
    return m
