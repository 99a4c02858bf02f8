"""Staged matching decoder for layer codes.

The decoder clears excitations family by family.  For a Z error they
live on stars: Z-layer patches condense them on every boundary,
qubit-layer patches only on the two ends of the vertical axis, X-layer
patches nowhere.  Each stage runs an exact minimum-weight matching per
patch, with one virtual boundary partner per excitation where the
policy allows, and realises every match as an L-shaped chain of
single-qubit flips.  The syndrome is recomputed from scratch between
stages, so later stages see exactly what earlier ones left behind.

Once the first two families are clean, the residual per-layer
excitation parities of the remaining family form a syndrome of the
input code.  A pluggable input-code decoder picks a set of columns, one
full-height string is applied on each selected qubit layer, and a final
boundary-free matching clears the rest.  `decode_modified` replaces the
first two matchings with straight runs to a single condensing boundary
and defaults to the minimum-Y-weight input decoder.

X errors use the same pipeline with the family order reversed and the
two check types swapped; `error="X"` selects that orientation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

from . import f2core
from .csscode import CssCode, decode_min_weight, decode_min_y_weight
from .layerbuild import LayerCode, LayerId, Patch

POLICIES = ("all-rough-boundaries", "top-bottom-only", "none", "top-only")

# Boundary sides in tie-break order: lower coordinates win.
_SIDES = ("c1_lo", "c2_lo", "c1_hi", "c2_hi")

_MAX_EXCITATIONS = 18


class OddParityNoBoundary(ValueError):
    """A patch holds an odd excitation count and no boundary may absorb one."""


# ---------------------------------------------------------------------------
# Layer partition


@dataclass(frozen=True)
class LayerFamily:
    qubits: frozenset[int]
    stars: frozenset[int]
    plaqs: frozenset[int]


@dataclass(frozen=True)
class LayerPartition:
    """Qubit and check indices of each layer family."""

    r_q: LayerFamily
    r_x: LayerFamily
    r_z: LayerFamily

    def family(self, kind: str) -> LayerFamily:
        return {"Q": self.r_q, "X": self.r_x, "Z": self.r_z}[kind]


def partition(code: LayerCode) -> LayerPartition:
    qubits: dict[str, set[int]] = {"Q": set(), "X": set(), "Z": set()}
    stars: dict[str, set[int]] = {"Q": set(), "X": set(), "Z": set()}
    plaqs: dict[str, set[int]] = {"Q": set(), "X": set(), "Z": set()}
    for qb in code.qubits:
        qubits[qb.layer.kind].add(qb.id)
    for c, (layer, _) in enumerate(code.checks_x_info):
        stars[layer.kind].add(c)
    for c, (layer, _) in enumerate(code.checks_z_info):
        plaqs[layer.kind].add(c)
    made = {
        k: LayerFamily(frozenset(qubits[k]), frozenset(stars[k]), frozenset(plaqs[k]))
        for k in "QXZ"
    }
    return LayerPartition(r_q=made["Q"], r_x=made["X"], r_z=made["Z"])


# ---------------------------------------------------------------------------
# Per-patch matching


@dataclass(frozen=True)
class MatchingProblem:
    """Excitations on one patch plus the boundary sides that may absorb them."""

    excitations: tuple[tuple[int, int], ...]
    bounds: tuple[tuple[int, int], tuple[int, int]]
    policy: str
    sides: tuple[str, ...]


@dataclass(frozen=True)
class Matching:
    pairs: tuple[tuple[int, int], ...]
    to_boundary: tuple[tuple[int, str], ...]
    weight: int


def matching_problem(
    patch: Patch, coords: Iterable[tuple[int, int]], policy: str, axis: str
) -> MatchingProblem:
    """Set up the matching on `patch`.  `axis` is the global direction whose
    two boundaries condense excitations under the directional policies."""
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}, expected one of {POLICIES}")
    if policy == "all-rough-boundaries":
        sides: tuple[str, ...] = _SIDES
    elif policy == "none":
        sides = ()
    else:
        ax = patch.axes.index(axis)
        sides = (f"c{ax + 1}_lo",)
        if policy == "top-bottom-only":
            sides = sides + (f"c{ax + 1}_hi",)
    return MatchingProblem(tuple(sorted(coords)), patch.bounds, policy, sides)


def _side_distance(bounds, e: tuple[int, int], side: str) -> int:
    ax = 0 if side[1] == "1" else 1
    lo, hi = bounds[ax]
    if side.endswith("lo"):
        return (e[ax] - lo + 1) // 2
    return (hi - e[ax] + 1) // 2


def _pair_distance(a: tuple[int, int], b: tuple[int, int]) -> int:
    return (abs(a[0] - b[0]) + abs(a[1] - b[1])) // 2


def mwpm_layer(problem: MatchingProblem) -> Matching:
    """Exact minimum-weight matching of the excitations.

    Every excitation is paired with another or with its nearest allowed
    boundary; the total hop count is minimised by dynamic programming
    over subsets, anchored on the lowest-index unmatched excitation.
    """
    exc = problem.excitations
    m = len(exc)
    if m == 0:
        return Matching((), (), 0)
    if problem.policy == "top-only":
        side = problem.sides[0]
        legs = tuple((i, side) for i in range(m))
        return Matching((), legs, sum(_side_distance(problem.bounds, e, side) for e in exc))
    if not problem.sides and m % 2:
        raise OddParityNoBoundary(f"{m} excitations and no absorbing boundary")
    if m > _MAX_EXCITATIONS:
        raise ValueError(f"matching limited to {_MAX_EXCITATIONS} excitations, got {m}")

    nearest: list[tuple[int, str] | None] = []
    for e in exc:
        best = None
        for side in _SIDES:
            if side not in problem.sides:
                continue
            d = _side_distance(problem.bounds, e, side)
            if best is None or d < best[0]:
                best = (d, side)
        nearest.append(best)
    dist = [[_pair_distance(a, b) for b in exc] for a in exc]

    memo: dict[int, tuple[int, tuple | None]] = {0: (0, None)}

    def solve(mask: int) -> tuple[int, tuple | None]:
        hit = memo.get(mask)
        if hit is not None:
            return hit
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        best: tuple[int, tuple] | None = None
        if nearest[i] is not None:
            d, side = nearest[i]
            cost = d + solve(rest)[0]
            best = (cost, ("b", i, side))
        probe = rest
        while probe:
            j = (probe & -probe).bit_length() - 1
            probe &= probe - 1
            cost = dist[i][j] + solve(rest & ~(1 << j))[0]
            if best is None or cost < best[0]:
                best = (cost, ("p", i, j))
        assert best is not None
        memo[mask] = best
        return best

    weight, _ = solve((1 << m) - 1)
    pairs: list[tuple[int, int]] = []
    legs: list[tuple[int, str]] = []
    mask = (1 << m) - 1
    while mask:
        _, choice = solve(mask)
        if choice[0] == "b":
            _, i, side = choice
            legs.append((i, side))
            mask &= ~(1 << i)
        else:
            _, i, j = choice
            pairs.append((i, j))
            mask &= ~(1 << i) & ~(1 << j)
    return Matching(tuple(pairs), tuple(legs), weight)


def _pair_path(patch: Patch, a: tuple[int, int], b: tuple[int, int]) -> list[int]:
    """Qubits flipped to fuse the excitations at `a` and `b`: one leg along
    the first local axis, then one along the second."""
    out = []
    lo, hi = sorted((a[0], b[0]))
    for t in range(lo + 1, hi, 2):
        out.append(patch.qubit_at[(t, a[1])])
    lo, hi = sorted((a[1], b[1]))
    for t in range(lo + 1, hi, 2):
        out.append(patch.qubit_at[(b[0], t)])
    return out


def _boundary_leg(patch: Patch, e: tuple[int, int], side: str) -> list[int]:
    """Qubits flipped to march the excitation at `e` off the given side."""
    ax = 0 if side[1] == "1" else 1
    lo, hi = patch.bounds[ax]
    span = range(lo, e[ax], 2) if side.endswith("lo") else range(e[ax] + 1, hi + 1, 2)
    c = list(e)
    out = []
    for t in span:
        c[ax] = t
        out.append(patch.qubit_at[tuple(c)])
    return out


def realize(patch: Patch, problem: MatchingProblem, matching: Matching) -> list[int]:
    """Qubit flips (with multiplicity) implementing a matching on `patch`."""
    out: list[int] = []
    for i, j in matching.pairs:
        out.extend(_pair_path(patch, problem.excitations[i], problem.excitations[j]))
    for i, side in matching.to_boundary:
        out.extend(_boundary_leg(patch, problem.excitations[i], side))
    return out


# ---------------------------------------------------------------------------
# Staged decoding


InputDecoder = Callable[[CssCode, f2core.BitVector], f2core.BitVector]


@dataclass(frozen=True)
class _Role:
    axis: str  # global axis whose boundaries condense the excitations
    families: tuple[str, str, str]  # stage order of layer kinds
    input_code: CssCode  # oriented so its HX rows index the third family


def _role_of(code: LayerCode, error: str) -> _Role:
    if error == "Z":
        return _Role("z", ("Z", "Q", "X"), code.input)
    if error == "X":
        return _Role("x", ("X", "Q", "Z"), CssCode(code.input.hz, code.input.hx))
    raise ValueError(f"error type must be 'Z' or 'X', got {error!r}")


def _check_info(code: LayerCode, error: str):
    return code.checks_x_info if error == "Z" else code.checks_z_info


def _syndrome(code: LayerCode, error: str, op: f2core.BitVector) -> f2core.BitVector:
    return code.syndrome_of_z(op) if error == "Z" else code.syndrome_of_x(op)


def _stage(code: LayerCode, error: str, role: _Role, sigma, family: str, policy: str):
    """Match away all excitations `sigma` holds on the given layer family."""
    out = f2core.BitVector(code.n_qubits)
    info = _check_info(code, error)
    buckets: dict[LayerId, list[tuple[int, int]]] = {}
    for c in sigma.nonzero():
        layer, pos = info[c]
        if layer.kind == family:
            buckets.setdefault(layer, []).append(pos)
    for layer in sorted(buckets):
        patch = code.patches[layer]
        problem = matching_problem(patch, buckets[layer], policy, role.axis)
        for q in realize(patch, problem, mwpm_layer(problem)):
            out.flip(q)
    return out


def _family_excitations(code: LayerCode, error: str, sigma, family: str) -> list[int]:
    info = _check_info(code, error)
    return [c for c in sigma.nonzero() if info[c][0].kind == family]


def _layer_parities(code: LayerCode, error: str, role: _Role, sigma) -> f2core.BitVector:
    """Excitation parity of each third-family layer, as an input-code syndrome."""
    info = _check_info(code, error)
    out = f2core.BitVector(role.input_code.hx.rows)
    for c in sigma.nonzero():
        layer, _ = info[c]
        if layer.kind == role.families[2]:
            out.flip(layer.index - 1)
    return out


def _full_string(patch: Patch, axis: str) -> list[int]:
    """The qubits of one straight boundary-to-boundary string along `axis`,
    hugging the low end of the other local axis."""
    ax = patch.axes.index(axis)
    other = 1 - ax
    c = [0, 0]
    c[other] = patch.bounds[other][0]
    out = []
    for t in range(patch.bounds[ax][0], patch.bounds[ax][1] + 1, 2):
        c[ax] = t
        out.append(patch.qubit_at[tuple(c)])
    return out


def _run(
    code: LayerCode,
    error: str,
    syndrome: f2core.BitVector,
    policies: tuple[str, str],
    input_decoder: InputDecoder,
    audit: list | None,
) -> f2core.BitVector:
    role = _role_of(code, error)
    info = _check_info(code, error)
    if syndrome.n != len(info):
        raise ValueError(f"syndrome length {syndrome.n} != check count {len(info)}")
    total = f2core.BitVector(code.n_qubits)

    def residual() -> f2core.BitVector:
        return syndrome ^ _syndrome(code, error, total)

    def note(label: str) -> f2core.BitVector:
        left = residual()
        if audit is not None:
            audit.append((label, left))
        return left

    total ^= _stage(code, error, role, residual(), role.families[0], policies[0])
    assert not _family_excitations(code, error, note("first-matching"), role.families[0])

    total ^= _stage(code, error, role, residual(), "Q", policies[1])
    left = note("second-matching")
    assert not _family_excitations(code, error, left, role.families[0])
    assert not _family_excitations(code, error, left, "Q")

    correction_c = input_decoder(role.input_code, _layer_parities(code, error, role, left))
    for j in correction_c.nonzero():
        for q in _full_string(code.patches[LayerId("Q", j + 1)], role.axis):
            total.flip(q)
    note("strings")

    total ^= _stage(code, error, role, residual(), role.families[2], "none")
    assert _syndrome(code, error, total) == syndrome
    note("final")
    return total


def decode(
    code: LayerCode,
    syndrome: f2core.BitVector,
    input_decoder: InputDecoder | None = None,
    error: str = "Z",
    audit: list | None = None,
) -> f2core.BitVector:
    """Correction with the given syndrome, built in four matching stages.

    `input_decoder` maps an input-code syndrome to a column set and
    defaults to the exhaustive minimum-weight decoder; its failures
    propagate.  If `audit` is a list, the residual syndrome after each
    stage is appended to it as (label, BitVector) pairs.  The result is
    deterministic in all arguments.
    """
    chosen = input_decoder if input_decoder is not None else decode_min_weight
    return _run(code, error, syndrome, ("all-rough-boundaries", "top-bottom-only"), chosen, audit)


def decode_modified(
    code: LayerCode,
    syndrome: f2core.BitVector,
    y_decoder: InputDecoder | None = None,
    error: str = "Z",
    audit: list | None = None,
) -> f2core.BitVector:
    """Like `decode`, but the first two stages send every excitation straight
    to the single condensing boundary at the low end of the working axis, and
    the input correction minimises Y-weight instead of Hamming weight."""
    chosen = y_decoder if y_decoder is not None else decode_min_y_weight
    return _run(code, error, syndrome, ("top-only", "top-only"), chosen, audit)
