"""CSS input codes: validation, random sampling, and exact desk-scale oracles.

A code is a pair of parity check matrices (HX, HZ) with HX.HZ^T = 0.  The
oracles here (distance search, energy barrier, minimum-weight and
minimum-Y-weight decoding) are exhaustive and only meant for small n; they
serve as ground truth for the 3D machinery built on top.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .f2core import (
    BitMatrix,
    BitVector,
    format_matrix,
    kernel_basis,
    parse_matrix,
    rank,
    sample_orthogonal,
    solve,
)


class CodeError(Exception):
    pass


def _max_sparsity(m: BitMatrix) -> int:
    if m.rows == 0:
        return 0
    dense = m.to_dense()
    return int(max(dense.sum(axis=1).max(initial=0), dense.sum(axis=0).max(initial=0)))


class CssCode:
    """Input code with derived logical count k = n - rank(HX) - rank(HZ)."""

    def __init__(self, hx: BitMatrix, hz: BitMatrix):
        if hx.cols != hz.cols:
            raise CodeError("HX and HZ must have the same number of columns")
        self.hx = hx
        self.hz = hz
        self.n = hx.cols
        self.rank_x = rank(hx)
        self.rank_z = rank(hz)
        self.k = self.n - self.rank_x - self.rank_z
        self.w = max(_max_sparsity(hx), _max_sparsity(hz))
        self._y_set: YSet | None = None

    @property
    def rho_x(self) -> float:
        return self.hx.rows / self.n

    @property
    def rho_z(self) -> float:
        return self.hz.rows / self.n

    def y_set(self) -> "YSet":
        if self._y_set is None:
            self._y_set = build_y_set(self.hz)
        return self._y_set

    def __repr__(self) -> str:
        return f"CssCode(n={self.n}, k={self.k}, w={self.w})"


def validate(code: CssCode, *, require_k: bool = False, check_rates: bool = False) -> list[str]:
    """Returns a list of violations; an empty list means the code is fine."""
    problems = []
    for i in range(code.hx.rows):
        s = code.hz.mul_vec(code.hx.row(i))
        if not s.is_zero():
            j = s.nonzero()[0]
            problems.append(f"orthogonality: HX row {i} anticommutes with HZ row {j}")
            break
    if code.k < 0:
        problems.append(f"negative k = {code.k} (matrices cannot be orthogonal)")
    if require_k and code.k == 0:
        problems.append("k = 0 but a logical qubit is required")
    if check_rates:
        for name, rho in (("rho_x", code.rho_x), ("rho_z", code.rho_z)):
            if not 0.0 < rho < 0.5:
                problems.append(f"rate out of range: {name} = {rho:.4f} not in (0, 1/2)")
    return problems


def sample_css(n: int, rho_x: float, rho_z: float, rng: np.random.Generator) -> CssCode:
    """HZ uniform, HX uniform over the orthogonal complement of HZ's rows."""
    mx, mz = rho_x * n, rho_z * n
    if abs(mx - round(mx)) > 1e-9 or abs(mz - round(mz)) > 1e-9:
        raise CodeError(f"rates must give integer row counts, got {mx} x / {mz} z")
    mx, mz = int(round(mx)), int(round(mz))
    if min(mx, mz) < 1 or not (0 < rho_x < 0.5 and 0 < rho_z < 0.5):
        raise CodeError(f"rates out of range: rho_x={rho_x}, rho_z={rho_z}")
    hz = BitMatrix.from_dense(rng.integers(0, 2, size=(mz, n), dtype=np.uint8))
    hx = sample_orthogonal(hz, mx, rng)
    return CssCode(hx, hz)


def iter_kernel(m: BitMatrix):
    """Yields every vector of ker(m) once, by gray-code walking the basis."""
    basis = kernel_basis(m)
    v = BitVector(m.cols)
    yield v.copy()
    for i in range(1, 1 << basis.rows):
        v ^= basis.row((i & -i).bit_length() - 1)
        yield v.copy()


class _RowReducer:
    """Reduction against a fixed row space, for fast membership tests."""

    def __init__(self, m: BitMatrix):
        from .f2core import _eliminate

        words = m.words.copy()
        self.pivots = _eliminate(words, m.cols)
        self.reduced = BitMatrix(m.rows, m.cols, words)

    def reduce(self, v: BitVector) -> BitVector:
        out = v.copy()
        for ri, c in enumerate(self.pivots):
            if out.get(c):
                out ^= self.reduced.row(ri)
        return out

    def contains(self, v: BitVector) -> bool:
        return self.reduce(v).is_zero()


def _min_coset_weight(ker_of: BitMatrix, modulo: BitMatrix, w_max: int) -> int | None:
    """Minimum weight over ker(ker_of) \\ rowspace(modulo), or None past w_max."""
    reducer = _RowReducer(modulo)
    best = None
    for v in iter_kernel(ker_of):
        w = v.weight
        if w == 0 or (best is not None and w >= best):
            continue
        if not reducer.contains(v):
            best = w
            if best == 1:
                break
    if best is None or best > w_max:
        return None
    return best


def min_distance(code: CssCode, w_max: int | None = None) -> tuple[int, int] | None:
    """(dX, dZ) by exhaustive kernel search, or None if both exceed w_max."""
    if code.k < 1:
        raise CodeError("distance undefined for k = 0")
    if w_max is None:
        w_max = code.n
    dz = _min_coset_weight(code.hx, code.hz, w_max)
    dx = _min_coset_weight(code.hz, code.hx, w_max)
    if dx is None or dz is None:
        return None
    return dx, dz


def _int_columns(m: BitMatrix) -> list[int]:
    dense = m.to_dense()
    return [int("".join(map(str, dense[:, j][::-1])), 2) if m.rows else 0
            for j in range(m.cols)]


def _int_rows(m: BitMatrix) -> list[int]:
    dense = m.to_dense()
    return [int("".join(map(str, dense[i][::-1])), 2) for i in range(m.rows)]


def _int_reducer(m: BitMatrix) -> list[tuple[int, int]]:
    """(pivot bit, row int) pairs in echelon order, for int-coded vectors."""
    rows = [r for r in _int_rows(m) if r]
    pivots: list[tuple[int, int]] = []
    for r in rows:
        for p, pr in pivots:
            if (r >> p) & 1:
                r ^= pr
        if r:
            pivots.append((r.bit_length() - 1, r))
    return pivots


def _int_reduce(pivots: list[tuple[int, int]], v: int) -> int:
    for p, pr in pivots:
        if (v >> p) & 1:
            v ^= pr
    return v


def energy_barrier_bruteforce(code: CssCode, pauli_type: str = "Z") -> int:
    """Exact barrier: min over single-flip paths from the identity to any
    nontrivial logical of the max syndrome weight seen along the way.

    Bottleneck search on the 2^n hypercube: states are admitted in order of
    increasing syndrome-weight threshold, and the first threshold at which a
    logical becomes reachable is the barrier.
    """
    if code.k == 0:
        raise CodeError("no logicals: k = 0")
    if code.n > 20:
        raise CodeError(f"state space 2^{code.n} too large for brute force")
    if pauli_type == "Z":
        h_syn, h_stab = code.hx, code.hz
    elif pauli_type == "X":
        h_syn, h_stab = code.hz, code.hx
    else:
        raise CodeError(f"pauli_type must be X or Z, got {pauli_type!r}")

    n = code.n
    syn_col = _int_columns(h_syn)
    stab = _int_reducer(h_stab)
    visited = bytearray(1 << n)
    visited[0] = 1
    frontier: list[tuple[int, int]] = [(0, 0)]
    pending: dict[int, list[tuple[int, int]]] = {}
    level = 0
    while True:
        while frontier:
            s, sy = frontier.pop()
            if sy == 0 and s and _int_reduce(stab, s) != 0:
                return level
            for i in range(n):
                s2 = s ^ (1 << i)
                if visited[s2]:
                    continue
                sy2 = sy ^ syn_col[i]
                w2 = sy2.bit_count()
                if w2 <= level:
                    visited[s2] = 1
                    frontier.append((s2, sy2))
                else:
                    pending.setdefault(w2, []).append((s2, sy2))
        level += 1
        if level > h_syn.rows:
            raise CodeError("no logical reachable; inconsistent code")
        for s, sy in pending.pop(level, []):
            if not visited[s]:
                visited[s] = 1
                frontier.append((s, sy))


@dataclass
class YSet:
    """Prefix truncations of the HZ rows, deduplicated, zero excluded.

    tags[i] = (row, cut): elements[i] is HZ row `row` with every entry of
    index greater than `cut` set to zero.
    """

    n: int
    elements: list[BitVector] = field(default_factory=list)
    tags: list[tuple[int, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.elements)


def build_y_set(hz: BitMatrix) -> YSet:
    ys = YSet(n=hz.cols)
    seen = set()
    for i in range(hz.rows):
        row = hz.row(i)
        support = row.nonzero()
        prefix = BitVector(hz.cols)
        for cut in support:
            prefix.flip(cut)
            key = prefix.words.tobytes()
            if key not in seen:
                seen.add(key)
                ys.elements.append(prefix.copy())
                ys.tags.append((i, cut))
    return ys


def _vec_to_int(v: BitVector) -> int:
    return int.from_bytes(v.words.tobytes(), "little")


def decode_min_y_weight(code: CssCode, syndrome: BitVector) -> BitVector:
    """Correction of minimal Y-weight: XOR of the fewest Y-set elements whose
    combined HX-syndrome matches.  Breadth-first over the syndrome space,
    elements tried in Y-set order, so the result is deterministic.
    """
    if syndrome.n != code.hx.rows:
        raise CodeError("syndrome length must match HX row count")
    ys = code.y_set()
    target = _vec_to_int(syndrome)
    elem_syn = [_vec_to_int(code.hx.mul_vec(y)) for y in ys.elements]
    parent: dict[int, tuple[int, int]] = {0: (-1, -1)}
    queue = [0]
    while queue and target not in parent:
        nxt = []
        for cur in queue:
            for idx, es in enumerate(elem_syn):
                new = cur ^ es
                if new not in parent:
                    parent[new] = (cur, idx)
                    nxt.append(new)
        queue = nxt
    if target not in parent:
        raise CodeError("syndrome not reachable from the Y set")
    out = BitVector(code.n)
    cur = target
    while cur != 0:
        cur, idx = parent[cur]
        out ^= ys.elements[idx]
    return out


def decode_min_weight(code: CssCode, syndrome: BitVector, side: str = "Z") -> BitVector:
    """Minimum-Hamming-weight correction, lexicographically first on ties.

    side "Z" decodes Z errors against HX; side "X" decodes X errors
    against HZ.
    """
    h = code.hx if side == "Z" else code.hz
    if syndrome.n != h.rows:
        raise CodeError("syndrome length mismatch")
    if code.n > 24:
        raise CodeError("exhaustive decoder limited to n <= 24")
    target = _vec_to_int(syndrome)
    cols = _int_columns(h)
    for w in range(code.n + 1):
        for combo in itertools.combinations(range(code.n), w):
            acc = 0
            for i in combo:
                acc ^= cols[i]
            if acc == target:
                return BitVector.from_indices(code.n, combo)
    raise CodeError("syndrome not in the column space")


def _quotient_basis(numerator_kernel_of: BitMatrix, modulo: BitMatrix) -> list[BitVector]:
    """Representatives extending rowspace(modulo) to ker(numerator_kernel_of)."""
    out = []
    acc = modulo
    base = rank(acc)
    kb = kernel_basis(numerator_kernel_of)
    for i in range(kb.rows):
        cand = kb.row(i)
        trial = acc.stack(BitMatrix.from_vectors([cand]))
        r = rank(trial)
        if r > base:
            out.append(cand)
            acc, base = trial, r
    return out


def logical_pairs(code: CssCode) -> list[tuple[BitVector, BitVector]]:
    """k symplectic pairs (z_i, x_j) with z_i . x_j = delta_ij.

    The X side is recombined through the inverse of the raw pairing matrix,
    which is invertible whenever the code is a valid CSS code.
    """
    lz = _quotient_basis(code.hx, code.hz)
    lx = _quotient_basis(code.hz, code.hx)
    k = code.k
    if len(lz) != k or len(lx) != k:
        raise CodeError("logical space dimension mismatch; code invalid?")
    if k == 0:
        return []
    gram = BitMatrix.from_dense(
        np.array([[lz[i].dot(lx[j]) for j in range(k)] for i in range(k)], dtype=np.uint8)
    )
    paired_x = []
    for j in range(k):
        unit = BitVector.from_indices(k, [j])
        coeff = solve(gram, unit)
        if coeff is None:
            raise CodeError("degenerate logical pairing")
        v = BitVector(code.n)
        for m in coeff.nonzero():
            v ^= lx[m]
        paired_x.append(v)
    return list(zip(lz, paired_x))


def code_to_text(code: CssCode) -> str:
    return "HX\n" + format_matrix(code.hx) + "HZ\n" + format_matrix(code.hz)


def code_from_text(text: str) -> CssCode:
    lines = text.strip().splitlines()
    blocks: dict[str, list[str]] = {}
    current = None
    for ln in lines:
        tag = ln.strip()
        if tag in ("HX", "HZ"):
            current = tag
            blocks[current] = []
        elif current is not None:
            blocks[current].append(ln)
        elif tag:
            raise CodeError(f"unexpected line before HX/HZ label: {ln!r}")
    if set(blocks) != {"HX", "HZ"}:
        raise CodeError("expected HX and HZ blocks")
    return CssCode(
        parse_matrix("\n".join(blocks["HX"])),
        parse_matrix("\n".join(blocks["HZ"])),
    )


def steane() -> CssCode:
    """The [[7,1,3]] code, used all over the tests."""
    h = [[0, 0, 0, 1, 1, 1, 1], [0, 1, 1, 0, 0, 1, 1], [1, 0, 1, 0, 1, 0, 1]]
    return CssCode(BitMatrix.from_dense(h), BitMatrix.from_dense(h))
