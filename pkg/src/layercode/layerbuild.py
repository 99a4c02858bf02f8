"""Builds three-dimensional layer codes out of CSS parity-check matrices.

Everything lives on an integer lattice with all coordinates doubled, so
qubits and checks sit on integer points and no half-coordinates appear.
For an input code with parity checks H_X (m_x rows) and H_Z (m_z rows) on
n qubits and a spacing K:

- qubit layer j (one per input qubit, j = 1..n) is the plane y = 2jK,
  carrying a surface code patch with local coordinates (p, q) = (z, x);
  plaquettes truncate at the two p ends (rough), stars truncate at the
  two q ends (smooth);
- X layer i (one per row of H_X) is the plane z = 2iK with local
  coordinates (u, v) = (x, y); stars truncate on every side (all smooth);
- Z layer i' (one per row of H_Z) is the plane x = 2i'K with local
  coordinates (v, r) = (y, z); plaquettes truncate on every side (all
  rough).

Wherever a parity-check entry is 1 the two layers involved meet along a
straight defect line and the checks on either side absorb single qubits
from the other patch; X and Z layers sharing support on the same qubit
layers are additionally sewn together along vertical segments joining
consecutive paired layers of the common support.  The result is a local
commuting check set of weight at most 6 with the same logical dimension
as the input code.

In the "extended" variant the X and Z layers span the full height of the
lattice; in "original-termination" they stretch only over the qubit
layers their row actually touches, which shrinks the code at the price
of shorter logical strings.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import f2core
from .csscode import CodeError, CssCode, logical_pairs, validate

VARIANTS = ("original-termination", "extended")

# Excitation bookkeeping for each defect line kind: crossing the line, an
# excitation of the first kind may continue only by shedding a partner of
# the second kind (and symmetrically for the dual excitation).
FUSION_TAGS = {
    "QX": "eQ<->eQ+eX; mX<->mX+mQ",
    "QZ": "eZ<->eZ+eQ; mQ<->mQ+mZ",
    "XZ": "eZ<->eZ+eX; mX<->mX+mZ",
}


@dataclass(frozen=True, order=True)
class LayerId:
    """A layer, addressed by kind and 1-based input row/column index."""

    kind: str  # "Q" | "X" | "Z"
    index: int


@dataclass(frozen=True)
class Qubit:
    id: int
    layer: LayerId
    pos: tuple[int, int, int]  # global doubled (x, y, z)
    local: tuple[int, int]


@dataclass(frozen=True)
class DefectLine:
    kind: str  # "QX" | "QZ" | "XZ"
    layers: tuple[LayerId, LayerId]
    axis: str  # global axis the line runs along
    start: tuple[int, int, int]
    end: tuple[int, int, int]
    fusion: str


@dataclass
class Region:
    """A maximal patch of Z-checks not crossed by any defect line."""

    id: int
    layer: LayerId
    checks: tuple[int, ...]
    sides: dict[str, str]  # e.g. {"x_lo": "smooth", "y_hi": "defect:3"}


@dataclass
class Patch:
    """Per-layer geometry: local coordinate system and site lookup."""

    layer: LayerId
    plane: tuple[str, int]  # (normal axis, doubled coordinate)
    axes: tuple[str, str]  # global names of the two local axes
    bounds: tuple[tuple[int, int], tuple[int, int]]  # doubled, inclusive
    qubit_at: dict[tuple[int, int], int]
    star_at: dict[tuple[int, int], int] = field(default_factory=dict)
    plaq_at: dict[tuple[int, int], int] = field(default_factory=dict)

    def to_global(self, c1: int, c2: int) -> tuple[int, int, int]:
        k = self.layer.kind
        h = self.plane[1]
        if k == "Q":  # (p, q) -> (x=q, y=h, z=p)
            return (c2, h, c1)
        if k == "X":  # (u, v) -> (x=u, y=v, z=h)
            return (c1, c2, h)
        return (h, c1, c2)  # (v, r) -> (x=h, y=v, z=r)


@dataclass(frozen=True)
class FusionMove:
    """A single-qubit flip together with the excitations it toggles."""

    pauli: str  # "X" or "Z"
    qubit: int
    excitations: tuple[int, ...]  # check ids (Z-checks for X, X-checks for Z)
    label: str


@dataclass(eq=False)
class LayerCode:
    input: CssCode
    K: int
    variant: str
    qubits: list[Qubit]
    checks_x: list[tuple[int, ...]]
    checks_z: list[tuple[int, ...]]
    checks_x_info: list[tuple[LayerId, tuple[int, int]]]
    checks_z_info: list[tuple[LayerId, tuple[int, int]]]
    patches: dict[LayerId, Patch]
    defects: list[DefectLine]
    regions: list[Region]
    lengths: tuple[int, int, int]  # physical (x, y, z) extents

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    @cached_property
    def matrix_x(self) -> f2core.BitMatrix:
        return _rows_to_matrix(self.checks_x, self.n_qubits)

    @cached_property
    def matrix_z(self) -> f2core.BitMatrix:
        return _rows_to_matrix(self.checks_z, self.n_qubits)

    @cached_property
    def k(self) -> int:
        n = self.n_qubits
        return (
            n
            - f2core.rank_sparse(self.checks_x, n)
            - f2core.rank_sparse(self.checks_z, n)
        )

    @cached_property
    def x_checks_of(self) -> list[tuple[int, ...]]:
        return _incidence(self.checks_x, self.n_qubits)

    @cached_property
    def z_checks_of(self) -> list[tuple[int, ...]]:
        return _incidence(self.checks_z, self.n_qubits)

    @cached_property
    def qubits_at(self) -> dict[tuple[int, int, int], tuple[int, ...]]:
        index: dict[tuple[int, int, int], tuple[int, ...]] = {}
        for qb in self.qubits:
            index[qb.pos] = index.get(qb.pos, ()) + (qb.id,)
        return index

    def syndrome_of_z(self, op: f2core.BitVector) -> f2core.BitVector:
        """Star syndrome of a Z-type operator over the code's qubits."""
        return self.matrix_x.mul_vec(op)

    def syndrome_of_x(self, op: f2core.BitVector) -> f2core.BitVector:
        """Plaquette syndrome of an X-type operator."""
        return self.matrix_z.mul_vec(op)


def _rows_to_matrix(rows: list[tuple[int, ...]], cols: int) -> f2core.BitMatrix:
    nwords = (cols + 63) // 64
    words = np.zeros((len(rows), nwords), dtype=np.uint64)
    for r, members in enumerate(rows):
        for q in members:
            words[r, q >> 6] |= np.uint64(1 << (q & 63))
    return f2core.BitMatrix(len(rows), cols, words)


def _incidence(rows: list[tuple[int, ...]], n: int) -> list[tuple[int, ...]]:
    out: list[list[int]] = [[] for _ in range(n)]
    for cid, members in enumerate(rows):
        for q in members:
            out[q].append(cid)
    return [tuple(c) for c in out]


def _row_support(h: np.ndarray, i: int) -> list[int]:
    """1-based column indices where row i (0-based) of h is set."""
    return [int(j) + 1 for j in np.flatnonzero(h[i])]


def _spans(h: np.ndarray, K: int, height2: int, variant: str) -> dict[int, tuple[int, int]]:
    """Doubled y-extent of each X/Z layer, keyed by 1-based row index.

    Rows with empty support are skipped entirely under original
    termination and become isolated full-height layers when extended.
    """
    spans = {}
    for i in range(h.shape[0]):
        supp = _row_support(h, i)
        if variant == "extended":
            spans[i + 1] = (0, height2)
        elif supp:
            spans[i + 1] = (2 * supp[0] * K, 2 * supp[-1] * K)
    return spans


def build(code: CssCode, K: int = 1, variant: str = "original-termination") -> LayerCode:
    """Construct the layer code of `code` with the given layer spacing."""
    if not isinstance(K, (int, np.integer)) or K < 1:
        raise ValueError(f"spacing must be a positive integer, got {K!r}")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    problems = validate(code)
    if problems:
        raise CodeError("invalid input code: " + "; ".join(problems))

    hx = code.hx.to_dense()
    hz = code.hz.to_dense()
    n, mx, mz = code.n, hx.shape[0], hz.shape[0]
    u2 = 2 * (mx + 1) * K  # doubled z extent
    v2 = 2 * (mz + 1) * K  # doubled x extent
    h2 = 2 * (n + 1) * K  # doubled y extent

    def ypos(j: int) -> int:
        return 2 * j * K

    def zpos(i: int) -> int:
        return 2 * i * K

    def xpos(ip: int) -> int:
        return 2 * ip * K

    spans_x = _spans(hx, K, h2, variant)
    spans_z = _spans(hz, K, h2, variant)

    qubits: list[Qubit] = []
    patches: dict[LayerId, Patch] = {}
    star_mem: dict[LayerId, dict[tuple[int, int], list[int]]] = {}
    plaq_mem: dict[LayerId, dict[tuple[int, int], list[int]]] = {}

    def new_qubit(layer: LayerId, local: tuple[int, int], pos: tuple[int, int, int]) -> int:
        qid = len(qubits)
        qubits.append(Qubit(qid, layer, pos, local))
        patches[layer].qubit_at[local] = qid
        return qid

    # Qubit layers: qubits on (even, even) and (odd, odd) sites.
    for j in range(1, n + 1):
        layer = LayerId("Q", j)
        patches[layer] = Patch(layer, ("y", ypos(j)), ("z", "x"), ((0, u2), (0, v2)), {})
        for p in range(u2 + 1):
            qs = range(0, v2 + 1, 2) if p % 2 == 0 else range(1, v2, 2)
            for q in qs:
                new_qubit(layer, (p, q), (q, ypos(j), p))
        stars = star_mem[layer] = {}
        for p in range(1, u2, 2):
            for q in range(0, v2 + 1, 2):
                stars[(p, q)] = _stencil(patches[layer].qubit_at, p, q)
        plaqs = plaq_mem[layer] = {}
        for p in range(0, u2 + 1, 2):
            for q in range(1, v2, 2):
                plaqs[(p, q)] = _stencil(patches[layer].qubit_at, p, q)

    # X layers: qubits on (odd, even) and (even, odd) sites.
    for i in sorted(spans_x):
        layer = LayerId("X", i)
        v0, v1 = spans_x[i]
        patches[layer] = Patch(layer, ("z", zpos(i)), ("x", "y"), ((0, v2), (v0, v1)), {})
        for u in range(v2 + 1):
            vs = range(v0, v1 + 1, 2) if u % 2 == 1 else range(v0 + 1, v1, 2)
            for v in vs:
                new_qubit(layer, (u, v), (u, v, zpos(i)))
        stars = star_mem[layer] = {}
        for u in range(0, v2 + 1, 2):
            for v in range(v0, v1 + 1, 2):
                stars[(u, v)] = _stencil(patches[layer].qubit_at, u, v)
        plaqs = plaq_mem[layer] = {}
        for u in range(1, v2, 2):
            for v in range(v0 + 1, v1, 2):
                plaqs[(u, v)] = _stencil(patches[layer].qubit_at, u, v)

    # Z layers: qubits on (odd, even) and (even, odd) sites.
    for ip in sorted(spans_z):
        layer = LayerId("Z", ip)
        v0, v1 = spans_z[ip]
        patches[layer] = Patch(layer, ("x", xpos(ip)), ("y", "z"), ((v0, v1), (0, u2)), {})
        for v in range(v0, v1 + 1):
            rs = range(0, u2 + 1, 2) if v % 2 == 1 else range(1, u2, 2)
            for r in rs:
                new_qubit(layer, (v, r), (xpos(ip), v, r))
        stars = star_mem[layer] = {}
        for v in range(v0 + 1, v1, 2):
            for r in range(1, u2, 2):
                stars[(v, r)] = _stencil(patches[layer].qubit_at, v, r)
        plaqs = plaq_mem[layer] = {}
        for v in range(v0, v1 + 1, 2):
            for r in range(0, u2 + 1, 2):
                plaqs[(v, r)] = _stencil(patches[layer].qubit_at, v, r)

    defects: list[DefectLine] = []
    xz_segments: dict[tuple[int, int], list[tuple[int, int, int]]] = {}

    # Qubit/X couplings: along y = 2jK, z = 2iK wherever H_X[i][j] = 1.
    # Stars of the X layer absorb the qubit-layer qubits on the line and
    # the qubit-layer plaquettes absorb the X-layer qubits, interleaved.
    for i in sorted(spans_x):
        qlx = LayerId("X", i)
        for j in range(1, n + 1):
            if not hx[i - 1, j - 1]:
                continue
            qlq = LayerId("Q", j)
            for c in range(v2 + 1):
                if c % 2 == 0:
                    star_mem[qlx][(c, ypos(j))].append(patches[qlq].qubit_at[(zpos(i), c)])
                else:
                    plaq_mem[qlq][(zpos(i), c)].append(patches[qlx].qubit_at[(c, ypos(j))])
            defects.append(
                DefectLine("QX", (qlq, qlx), "x", (0, ypos(j), zpos(i)), (v2, ypos(j), zpos(i)), FUSION_TAGS["QX"])
            )

    # Qubit/Z couplings: along x = 2i'K, y = 2jK wherever H_Z[i'][j] = 1.
    for ip in sorted(spans_z):
        qlz = LayerId("Z", ip)
        for j in range(1, n + 1):
            if not hz[ip - 1, j - 1]:
                continue
            qlq = LayerId("Q", j)
            for p in range(u2 + 1):
                if p % 2 == 1:
                    star_mem[qlq][(p, xpos(ip))].append(patches[qlz].qubit_at[(ypos(j), p)])
                else:
                    plaq_mem[qlz][(ypos(j), p)].append(patches[qlq].qubit_at[(p, xpos(ip))])
            defects.append(
                DefectLine("QZ", (qlq, qlz), "z", (xpos(ip), ypos(j), 0), (xpos(ip), ypos(j), u2), FUSION_TAGS["QZ"])
            )

    # X/Z couplings: vertical segments at x = 2i'K, z = 2iK pairing off
    # consecutive layers of the common support (even by orthogonality).
    # Interior odd heights tie each Z-layer qubit to the X-layer star just
    # below it and each X-layer qubit to the Z-layer plaquette just above.
    for i in sorted(spans_x):
        qlx = LayerId("X", i)
        for ip in sorted(spans_z):
            qlz = LayerId("Z", ip)
            common = [j for j in range(1, n + 1) if hx[i - 1, j - 1] and hz[ip - 1, j - 1]]
            assert len(common) % 2 == 0
            for ja, jb in zip(common[0::2], common[1::2]):
                ya, yb = ypos(ja), ypos(jb)
                for yo in range(ya + 1, yb, 2):
                    star_mem[qlx][(xpos(ip), yo - 1)].append(patches[qlz].qubit_at[(yo, zpos(i))])
                    plaq_mem[qlz][(yo + 1, zpos(i))].append(patches[qlx].qubit_at[(xpos(ip), yo)])
                xz_segments.setdefault((i, ip), []).append((ya, yb, len(defects)))
                defects.append(
                    DefectLine("XZ", (qlx, qlz), "y", (xpos(ip), ya, zpos(i)), (xpos(ip), yb, zpos(i)), FUSION_TAGS["XZ"])
                )

    # Canonical check ordering: layers sorted Q < X < Z then by index, and
    # positions lexicographically within each layer.
    checks_x: list[tuple[int, ...]] = []
    checks_z: list[tuple[int, ...]] = []
    checks_x_info: list[tuple[LayerId, tuple[int, int]]] = []
    checks_z_info: list[tuple[LayerId, tuple[int, int]]] = []
    for layer in sorted(patches):
        for pos in sorted(star_mem[layer]):
            patches[layer].star_at[pos] = len(checks_x)
            checks_x.append(tuple(sorted(star_mem[layer][pos])))
            checks_x_info.append((layer, pos))
        for pos in sorted(plaq_mem[layer]):
            patches[layer].plaq_at[pos] = len(checks_z)
            checks_z.append(tuple(sorted(plaq_mem[layer][pos])))
            checks_z_info.append((layer, pos))

    _assert_valid(qubits, checks_x, checks_z)

    regions = _build_regions(
        qubits, checks_z, checks_z_info, patches, defects, xz_segments, K, spans_x, spans_z, u2, v2
    )

    return LayerCode(
        input=code,
        K=K,
        variant=variant,
        qubits=qubits,
        checks_x=checks_x,
        checks_z=checks_z,
        checks_x_info=checks_x_info,
        checks_z_info=checks_z_info,
        patches=patches,
        defects=defects,
        regions=regions,
        lengths=((mz + 1) * K, (n + 1) * K, (mx + 1) * K),
    )


def _stencil(qubit_at: dict[tuple[int, int], int], c1: int, c2: int) -> list[int]:
    members = []
    for d1, d2 in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        qid = qubit_at.get((c1 + d1, c2 + d2))
        if qid is not None:
            members.append(qid)
    return members


def _assert_valid(qubits, checks_x, checks_z) -> None:
    """Cheap structural invariants, run on every build."""
    for rows in (checks_x, checks_z):
        assert all(1 <= len(m) <= 6 for m in rows), "check weight out of range"
    x_of: list[list[int]] = [[] for _ in qubits]
    z_of: list[list[int]] = [[] for _ in qubits]
    for cid, members in enumerate(checks_x):
        for q in members:
            x_of[q].append(cid)
    for cid, members in enumerate(checks_z):
        for q in members:
            z_of[q].append(cid)
    overlap: dict[tuple[int, int], int] = {}
    for qid in range(len(qubits)):
        for a in x_of[qid]:
            for b in z_of[qid]:
                overlap[(a, b)] = overlap.get((a, b), 0) + 1
    assert all(c % 2 == 0 for c in overlap.values()), "anticommuting check pair"


class _Dsu:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _build_regions(qubits, checks_z, checks_z_info, patches, defects, xz_segments, K, spans_x, spans_z, u2, v2):
    """Partition Z-checks into maximal components not crossing defects.

    Two Z-checks are joined whenever they share a qubit whose Z-checks all
    live on a single layer; qubits whose Z-checks span layers sit exactly
    on defect lines and act as cuts.
    """
    z_of: list[list[int]] = [[] for _ in qubits]
    for cid, members in enumerate(checks_z):
        for q in members:
            z_of[q].append(cid)

    dsu = _Dsu(len(checks_z))
    for qid in range(len(qubits)):
        incident = z_of[qid]
        if len(incident) < 2:
            continue
        if len({checks_z_info[c][0] for c in incident}) > 1:
            continue  # defect qubit
        for c in incident[1:]:
            dsu.union(incident[0], c)

    groups: dict[int, list[int]] = {}
    for cid in range(len(checks_z)):
        groups.setdefault(dsu.find(cid), []).append(cid)

    defect_idx = {}
    for idx, d in enumerate(defects):
        if d.kind == "QX":
            defect_idx[("QX", d.layers[1].index, d.layers[0].index)] = idx
        elif d.kind == "QZ":
            defect_idx[("QZ", d.layers[1].index, d.layers[0].index)] = idx

    regions = []
    for root in sorted(groups):
        members = sorted(groups[root])
        layer = checks_z_info[members[0]][0]
        assert all(checks_z_info[c][0] == layer for c in members)
        c1s = [checks_z_info[c][1][0] for c in members]
        c2s = [checks_z_info[c][1][1] for c in members]
        lo1, hi1, lo2, hi2 = min(c1s), max(c1s), min(c2s), max(c2s)
        sides: dict[str, str] = {}
        if layer.kind == "Q":
            assert lo1 == 0 and hi1 == u2
            sides["z_lo"] = sides["z_hi"] = "rough"
            j = layer.index
            for key, edge, bound in (("x_lo", lo2 - 1, 0), ("x_hi", hi2 + 1, v2)):
                if edge == bound:
                    sides[key] = "smooth"
                else:
                    sides[key] = f"defect:{defect_idx[('QZ', edge // (2 * K), j)]}"
        elif layer.kind == "X":
            i = layer.index
            v0, v1 = spans_x[i]
            for key, edge, bound in (("x_lo", lo1 - 1, 0), ("x_hi", hi1 + 1, v2)):
                if edge == bound:
                    sides[key] = "smooth"
                else:
                    seg = next(
                        s for s in xz_segments[(i, edge // (2 * K))] if s[0] <= lo2 - 1 and hi2 + 1 <= s[1]
                    )
                    sides[key] = f"defect:{seg[2]}"
            for key, edge, bound in (("y_lo", lo2 - 1, v0), ("y_hi", hi2 + 1, v1)):
                if edge == bound:
                    sides[key] = "smooth"
                else:
                    sides[key] = f"defect:{defect_idx[('QX', i, edge // (2 * K))]}"
        else:
            v0, v1 = spans_z[layer.index]
            assert (lo1, hi1, lo2, hi2) == (v0, v1, 0, u2)
            sides["y_lo"] = sides["y_hi"] = "rough"
            sides["z_lo"] = sides["z_hi"] = "rough"
        regions.append(Region(len(regions), layer, tuple(members), sides))
    return regions


def fusion_moves(code: LayerCode, location: tuple[int, int, int]) -> tuple[FusionMove, ...]:
    """All single-qubit moves at a lattice point, with their excitations.

    Each qubit at the location (two coincide on XZ segments) yields one X
    move toggling its plaquettes and one Z move toggling its stars.  The
    label lists the excitations as e (star) or m (plaquette) per layer;
    a 2-element set on one layer is an ordinary pair move, a single
    element is a boundary condensation, and a mixed set is the splitting
    forced at a defect crossing.
    """
    ids = code.qubits_at.get(tuple(location))
    if not ids:
        raise CodeError(f"no qubit at {location!r}")
    moves = []
    for qid in ids:
        for pauli, toggled, info, sym in (
            ("X", code.z_checks_of[qid], code.checks_z_info, "m"),
            ("Z", code.x_checks_of[qid], code.checks_x_info, "e"),
        ):
            label = "+".join(sorted(f"{sym}({info[c][0].kind}{info[c][0].index})" for c in toggled))
            moves.append(FusionMove(pauli, qid, tuple(sorted(toggled)), label))
    return tuple(moves)


def quasiconcatenated_logical(code: LayerCode, g: f2core.BitVector, side: str = "Z") -> f2core.BitVector:
    """Lift a logical of the input code to a logical of the layer code.

    For the Z side, a representative g in ker(H_X) outside the row space
    of H_Z becomes one full-height vertical Z-string per supported qubit
    layer (at x = 0), glued by merge strings on the X layers (also at
    x = 0) that pair off the string endpoints an X layer sees.  The X
    side mirrors this with full-width strings at z = 0 merged on the Z
    layers.
    """
    if side not in ("Z", "X"):
        raise ValueError(f"side must be 'Z' or 'X', got {side!r}")
    ha, hb = (code.input.hx, code.input.hz) if side == "Z" else (code.input.hz, code.input.hx)
    if len(g) != code.input.n:
        raise CodeError("logical representative has wrong length")
    if g.is_zero():
        raise CodeError("trivial representative")
    if not ha.mul_vec(g).is_zero():
        raise CodeError("representative is not in the kernel")
    if f2core.in_rowspace(hb, g):
        raise CodeError("representative is a stabilizer of the input code")

    op = f2core.BitVector(code.n_qubits)
    supp = [b + 1 for b in g.nonzero()]
    ypositions = {j: 2 * j * code.K for j in supp}
    if side == "Z":
        for j in supp:
            patch = code.patches[LayerId("Q", j)]
            for p in range(0, patch.bounds[0][1] + 1, 2):
                op.flip(patch.qubit_at[(p, 0)])
        merge_kind, h = "X", code.input.hx.to_dense()
    else:
        for j in supp:
            patch = code.patches[LayerId("Q", j)]
            for q in range(0, patch.bounds[1][1] + 1, 2):
                op.flip(patch.qubit_at[(0, q)])
        merge_kind, h = "Z", code.input.hz.to_dense()

    for layer in sorted(code.patches):
        if layer.kind != merge_kind:
            continue
        ys = sorted(ypositions[j] for j in supp if h[layer.index - 1, j - 1])
        patch = code.patches[layer]
        for ya, yb in zip(ys[0::2], ys[1::2]):
            for vo in range(ya + 1, yb, 2):
                key = (0, vo) if merge_kind == "X" else (vo, 0)
                op.flip(patch.qubit_at[key])
    return op


def logical_basis(code: LayerCode) -> tuple[list[f2core.BitVector], list[f2core.BitVector]]:
    """Symplectic logical bases of the layer code, one pair per input pair."""
    zs, xs = [], []
    for gz, gx in logical_pairs(code.input):
        zs.append(quasiconcatenated_logical(code, gz, "Z"))
        xs.append(quasiconcatenated_logical(code, gx, "X"))
    return zs, xs


def _layer_json(layer: LayerId) -> list:
    return [layer.kind, layer.index]


def geometry_dict(code: LayerCode) -> dict:
    return {
        "K": code.K,
        "variant": code.variant,
        "lengths": list(code.lengths),
        "qubits": [[*qb.pos, qb.layer.kind, qb.layer.index] for qb in code.qubits],
        "defects": [
            {
                "kind": d.kind,
                "layers": [_layer_json(l) for l in d.layers],
                "axis": d.axis,
                "start": list(d.start),
                "end": list(d.end),
                "fusion": d.fusion,
            }
            for d in code.defects
        ],
        "regions": [
            {
                "id": r.id,
                "layer": _layer_json(r.layer),
                "checks": list(r.checks),
                "sides": r.sides,
            }
            for r in code.regions
        ],
    }


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


@dataclass
class LoadedLayerCode:
    checks_x: f2core.BitMatrix
    checks_z: f2core.BitMatrix
    geometry: dict


def save(code: LayerCode, directory: str) -> None:
    """Write the check matrices and the geometry sidecar to a directory."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "checks_x.txt"), "w") as fh:
        fh.write(f2core.format_matrix(code.matrix_x))
    with open(os.path.join(directory, "checks_z.txt"), "w") as fh:
        fh.write(f2core.format_matrix(code.matrix_z))
    with open(os.path.join(directory, "geometry.json"), "w") as fh:
        fh.write(canonical_json(geometry_dict(code)))


def load(directory: str) -> LoadedLayerCode:
    with open(os.path.join(directory, "checks_x.txt")) as fh:
        mx = f2core.parse_matrix(fh.read())
    with open(os.path.join(directory, "checks_z.txt")) as fh:
        mz = f2core.parse_matrix(fh.read())
    with open(os.path.join(directory, "geometry.json")) as fh:
        geo = json.load(fh)
    return LoadedLayerCode(mx, mz, geo)
