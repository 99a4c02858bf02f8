"""Cluster decoder for X errors on a layer code.

The decoder works on a hypergraph view of the Z-check side: every Z-check
is a vertex, every qubit is a hyperedge joining the checks it sits on.
Edges fall into four working classes:

* ``defect``: the qubit's Z-checks span more than one layer.  These are the
  qubits sitting on defect lines; flipping one moves excitations between
  regions.  Each defect edge carries a *type*, the sorted tuple of the
  (pairwise distinct) region ids of its vertices; edges of equal type act
  identically on region excitation parities.
* ``smooth-boundary``: exactly one Z-check.  An excitation can be absorbed
  here, so a region owning such an edge has no parity constraint.
* ``rough-boundary``: two same-layer Z-checks with the qubit on the patch
  rim.
* ``regional``: two same-layer Z-checks in the bulk.

Qubits with no Z-check at all (they occur only on degenerate single-column
strips) are classed ``free`` and ignored; they cannot move any excitation.

Clusters are grown around excitations, one adjacency layer per step
(``linear`` schedule) or out to radius ``4**t`` (``exponential``), merging
on contact.  A cluster is correctable when the excitation parities of the
regions it touches can be balanced by flipping contained defect edges,
one unknown per defect type; regions holding a contained smooth edge are
exempt.  Correctable clusters are corrected immediately and dropped.
Within a region, corrections run along regional/rough edges, which toggle
only their path endpoints, so a path may safely leave the cluster without
exciting anything outside it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO

from . import f2core
from .layerbuild import LayerCode

SCHEDULES = ("linear", "exponential")


@dataclass
class DecodingHypergraph:
    """Static decoding view of a layer code's Z-check side."""

    n_vertices: int
    edge_vertices: list[tuple[int, ...]]
    edge_class: list[str]
    edge_type: list[tuple[int, ...] | None]
    vertex_region: list[int]
    neighbors: list[tuple[int, ...]]
    path_adj: list[tuple[tuple[int, int], ...]]
    smooth_at: dict[int, tuple[int, ...]]
    defect_at: dict[int, tuple[int, ...]]

    @property
    def n_edges(self) -> int:
        return len(self.edge_vertices)


@dataclass
class Cluster:
    """A grown vertex set together with its correctability bookkeeping.

    ``reps`` maps each defect type present (all vertices of some edge of
    that type inside the cluster) to the smallest such edge id; these are
    the unknowns of the parity system.  ``smooth_verts`` records, per
    region, the cluster vertices carrying a contained smooth edge.
    ``dirty`` records whether anything happened since the last
    correctability check that could change its outcome: growth that only
    adds vertices of known regions cannot, so it does not set the flag.
    """

    root: int
    vertices: set[int] = field(default_factory=set)
    excited: set[int] = field(default_factory=set)
    frontier: set[int] = field(default_factory=set)
    active: bool = True
    radius: int = 0
    dirty: bool = True
    touched: set[int] = field(default_factory=set)
    parity: dict[int, int] = field(default_factory=dict)
    smooth_verts: dict[int, set[int]] = field(default_factory=dict)
    defect_count: dict[int, int] = field(default_factory=dict)
    reps: dict[tuple[int, ...], int] = field(default_factory=dict)


def build_hypergraph(code: LayerCode) -> DecodingHypergraph:
    n_vertices = len(code.checks_z)
    vertex_region = [-1] * n_vertices
    for region in code.regions:
        for c in region.checks:
            vertex_region[c] = region.id

    edge_vertices = [tuple(vs) for vs in code.z_checks_of]
    edge_class: list[str] = []
    edge_type: list[tuple[int, ...] | None] = []
    for qid, vs in enumerate(edge_vertices):
        if not vs:
            edge_class.append("free")
            edge_type.append(None)
            continue
        layers = {code.checks_z_info[c][0] for c in vs}
        if len(layers) > 1:
            kind = tuple(sorted(vertex_region[c] for c in vs))
            assert len(set(kind)) == len(kind), "defect edge revisits a region"
            edge_class.append("defect")
            edge_type.append(kind)
            continue
        edge_type.append(None)
        if len(vs) == 1:
            edge_class.append("smooth-boundary")
            continue
        qubit = code.qubits[qid]
        b1, b2 = code.patches[qubit.layer].bounds
        on_rim = qubit.local[0] in b1 or qubit.local[1] in b2
        edge_class.append("rough-boundary" if on_rim else "regional")

    nbr_sets: list[set[int]] = [set() for _ in range(n_vertices)]
    padj: list[list[tuple[int, int]]] = [[] for _ in range(n_vertices)]
    smooth_lists: dict[int, list[int]] = {}
    defect_lists: dict[int, list[int]] = {}
    for qid, vs in enumerate(edge_vertices):
        for a in vs:
            for b in vs:
                if a != b:
                    nbr_sets[a].add(b)
        cls = edge_class[qid]
        if cls in ("regional", "rough-boundary"):
            a, b = vs
            padj[a].append((b, qid))
            padj[b].append((a, qid))
        elif cls == "smooth-boundary":
            smooth_lists.setdefault(vs[0], []).append(qid)
        elif cls == "defect":
            for v in vs:
                defect_lists.setdefault(v, []).append(qid)

    return DecodingHypergraph(
        n_vertices=n_vertices,
        edge_vertices=edge_vertices,
        edge_class=edge_class,
        edge_type=edge_type,
        vertex_region=vertex_region,
        neighbors=[tuple(sorted(s)) for s in nbr_sets],
        path_adj=[tuple(sorted(l)) for l in padj],
        smooth_at={v: tuple(sorted(l)) for v, l in smooth_lists.items()},
        defect_at={v: tuple(sorted(l)) for v, l in defect_lists.items()},
    )


def _add_vertex(graph: DecodingHypergraph, cluster: Cluster, v: int) -> None:
    cluster.vertices.add(v)
    region = graph.vertex_region[v]
    # A freshly touched region only adds a trivially satisfied (all-zero)
    # parity equation, so touching alone never dirties the cluster.
    cluster.touched.add(region)
    if v in graph.smooth_at:
        verts = cluster.smooth_verts.get(region)
        if verts is None:
            cluster.smooth_verts[region] = {v}
            cluster.dirty = True
        else:
            verts.add(v)
    for d in graph.defect_at.get(v, ()):
        count = cluster.defect_count.get(d, 0) + 1
        cluster.defect_count[d] = count
        if count == len(graph.edge_vertices[d]):
            kind = graph.edge_type[d]
            prev = cluster.reps.get(kind)
            if prev is None:
                cluster.reps[kind] = d
                cluster.dirty = True
            elif d < prev:
                cluster.reps[kind] = d


def cluster_from_vertices(
    graph: DecodingHypergraph, vertices, excited=()
) -> Cluster:
    """Assemble a cluster over an explicit vertex set (mainly for tests)."""
    vs = sorted(set(vertices))
    if not vs:
        raise ValueError("a cluster needs at least one vertex")
    cluster = Cluster(root=vs[0])
    for v in vs:
        _add_vertex(graph, cluster, v)
    for v in sorted(set(excited)):
        if v not in cluster.vertices:
            raise ValueError(f"excited vertex {v} outside the cluster")
        cluster.excited.add(v)
        region = graph.vertex_region[v]
        cluster.parity[region] = cluster.parity.get(region, 0) ^ 1
    cluster.frontier = set(vs)
    return cluster


def is_correctable(
    graph: DecodingHypergraph, cluster: Cluster
) -> dict[tuple[int, ...], int] | None:
    """Defect-edge assignment neutralising the cluster, or None.

    Builds one F2 equation per touched region without a contained smooth
    edge: the region's excitation parity must equal the summed incidence
    of the flipped defect types.  Unknowns are the defect-type
    representatives, ordered so that types covering more odd-parity
    regions are eliminated first; free variables are fixed to zero.  With
    that ordering the preferred solution flips the defect sitting among
    the excitations rather than an unrelated same-parity one, which is
    what keeps isolated low-weight errors exactly invertible.
    """
    open_regions = sorted(r for r in cluster.touched if r not in cluster.smooth_verts)
    if not open_regions:
        return {}
    types = sorted(
        cluster.reps,
        key=lambda kind: (-sum(cluster.parity.get(r, 0) for r in kind), kind),
    )
    if not types:
        if all(cluster.parity.get(r, 0) == 0 for r in open_regions):
            return {}
        return None
    m = f2core.BitMatrix.zeros(len(open_regions), len(types))
    rhs = f2core.BitVector(len(open_regions))
    for i, region in enumerate(open_regions):
        for j, kind in enumerate(types):
            if region in kind:
                m.set(i, j, 1)
        if cluster.parity.get(region, 0):
            rhs.flip(i)
    x = f2core.solve(m, rhs)
    if x is None:
        return None
    return {types[j]: cluster.reps[types[j]] for j in x.nonzero()}


def _bfs_nearest(
    graph: DecodingHypergraph,
    sources: list[int],
    targets: set[int],
    allowed: set[int] | None,
) -> tuple[int, int, list[int]] | None:
    """Closest target reachable from any source along regional/rough edges.

    Returns (source, target, edge ids along the path).  ``allowed``
    restricts the visited vertices; None searches the whole region (path
    adjacency never leaves a region).  Multi-source BFS with sorted seeds
    and sorted adjacency, so the result is deterministic.
    """
    parent: dict[int, tuple[int, int] | None] = {}
    origin: dict[int, int] = {}
    frontier: list[int] = []
    for s in sources:
        if s in parent:
            continue
        parent[s] = None
        origin[s] = s
        if s in targets:
            return s, s, []
        frontier.append(s)
    while frontier:
        nxt = []
        for v in frontier:
            for w, q in graph.path_adj[v]:
                if w in parent:
                    continue
                if allowed is not None and w not in allowed:
                    continue
                parent[w] = (v, q)
                origin[w] = origin[v]
                if w in targets:
                    edges = []
                    node = w
                    while parent[node] is not None:
                        pv, pq = parent[node]
                        edges.append(pq)
                        node = pv
                    return origin[w], w, edges
                nxt.append(w)
        frontier = nxt
    return None


def _edge_syndrome(graph: DecodingHypergraph, op: f2core.BitVector) -> set[int]:
    toggled: set[int] = set()
    for q in op.nonzero():
        for v in graph.edge_vertices[q]:
            if v in toggled:
                toggled.remove(v)
            else:
                toggled.add(v)
    return toggled


def extract_correction(
    graph: DecodingHypergraph,
    cluster: Cluster,
    assignment: dict[tuple[int, ...], int],
) -> f2core.BitVector:
    """Turn a defect assignment into a flip set annihilating the cluster.

    Flips the assigned defect representatives, routes each region's odd
    leftover into the nearest contained smooth edge, then pairs the
    remaining excitations along BFS paths (preferring paths inside the
    cluster, falling back to the whole region).  The result toggles
    exactly the cluster's excited vertices and nothing else.
    """
    correction = f2core.BitVector(graph.n_edges)
    work = set(cluster.excited)
    for kind in sorted(assignment):
        d = assignment[kind]
        correction.flip(d)
        for v in graph.edge_vertices[d]:
            if v in work:
                work.remove(v)
            else:
                work.add(v)

    by_region: dict[int, list[int]] = {}
    for v in sorted(work):
        by_region.setdefault(graph.vertex_region[v], []).append(v)
    for region in sorted(by_region):
        exc = by_region[region]
        if len(exc) % 2:
            sources = sorted(cluster.smooth_verts.get(region, ()))
            assert sources, "odd region parity without a smooth outlet"
            hit = _bfs_nearest(graph, sources, set(exc), cluster.vertices)
            if hit is None:
                hit = _bfs_nearest(graph, sources, set(exc), None)
            assert hit is not None, "smooth edge unreachable within its region"
            source, target, edges = hit
            correction.flip(graph.smooth_at[source][0])
            for q in edges:
                correction.flip(q)
            exc.remove(target)
        for a, b in zip(exc[0::2], exc[1::2]):
            hit = _bfs_nearest(graph, [a], {b}, cluster.vertices)
            if hit is None:
                hit = _bfs_nearest(graph, [a], {b}, None)
            assert hit is not None, "region disconnected under path edges"
            for q in hit[2]:
                correction.flip(q)

    assert _edge_syndrome(graph, correction) == cluster.excited
    return correction


def _find(parent: dict[int, int], root: int) -> int:
    while root in parent:
        root = parent[root]
    return root


def _merge(graph: DecodingHypergraph, keep: Cluster, gone: Cluster) -> None:
    keep.vertices |= gone.vertices
    keep.excited |= gone.excited
    keep.frontier |= gone.frontier
    keep.touched |= gone.touched
    for region, p in gone.parity.items():
        keep.parity[region] = keep.parity.get(region, 0) ^ p
    for region, verts in gone.smooth_verts.items():
        mine = keep.smooth_verts.get(region)
        if mine is None:
            keep.smooth_verts[region] = set(verts)
        else:
            mine |= verts
    for d, count in gone.defect_count.items():
        total = keep.defect_count.get(d, 0) + count
        keep.defect_count[d] = total
        if total == len(graph.edge_vertices[d]):
            kind = graph.edge_type[d]
            prev = keep.reps.get(kind)
            if prev is None or d < prev:
                keep.reps[kind] = d
    for kind, d in gone.reps.items():
        prev = keep.reps.get(kind)
        if prev is None or d < prev:
            keep.reps[kind] = d
    keep.radius = max(keep.radius, gone.radius)
    keep.dirty = True


def _grow(
    graph: DecodingHypergraph,
    cluster: Cluster,
    layers: int,
    owner: dict[int, int],
    parent: dict[int, int],
    pending: list[tuple[int, int]],
) -> None:
    for _ in range(max(layers, 0)):
        if not cluster.frontier:
            return
        new: set[int] = set()
        for v in sorted(cluster.frontier):
            for w in graph.neighbors[v]:
                if w in cluster.vertices or w in new:
                    continue
                held = owner.get(w)
                if held is not None:
                    held = _find(parent, held)
                    if held != cluster.root:
                        pending.append((cluster.root, held))
                        continue
                new.add(w)
        for w in sorted(new):
            owner[w] = cluster.root
            _add_vertex(graph, cluster, w)
        cluster.frontier = new
        if not new:
            return


def decode(
    graph: DecodingHypergraph,
    syndrome: f2core.BitVector,
    schedule: str = "linear",
    lazy: bool = True,
    trace: IO[str] | None = None,
) -> f2core.BitVector:
    """Correction with the same Z-check syndrome as the input.

    Grows one cluster per excitation, merging on contact (the merged
    cluster keeps the smallest root), and corrects each cluster as soon
    as it becomes correctable, dropping it from the active list.
    ``lazy`` skips the correctability recheck for clusters whose parity
    system did not change since the last check; the produced correction
    is identical either way.  With ``trace`` set, one JSON line per
    growth step records the active cluster count, their sizes and the
    merges performed.
    """
    if schedule not in SCHEDULES:
        raise ValueError(f"unknown schedule {schedule!r}")
    if syndrome.n != graph.n_vertices:
        raise ValueError("syndrome length does not match the hypergraph")
    correction = f2core.BitVector(graph.n_edges)
    excitations = syndrome.nonzero()
    if not excitations:
        return correction

    clusters: dict[int, Cluster] = {}
    owner: dict[int, int] = {}
    parent: dict[int, int] = {}
    for v in excitations:
        cluster = Cluster(root=v)
        _add_vertex(graph, cluster, v)
        cluster.excited.add(v)
        region = graph.vertex_region[v]
        cluster.parity[region] = cluster.parity.get(region, 0) ^ 1
        cluster.frontier = {v}
        clusters[v] = cluster
        owner[v] = v

    # No correctability check before the first growth round: a lone
    # excitation next to a smooth boundary would otherwise drain out of it
    # even when its partner sits one step away, stranding the pair on
    # opposite boundaries.  One round of growth merges such pairs first.
    step = 0
    while clusters:
        step += 1
        target = step if schedule == "linear" else 4 ** (step - 1)
        pending: list[tuple[int, int]] = []
        grew = False
        for root in sorted(clusters):
            cluster = clusters[root]
            before = len(cluster.vertices)
            _grow(graph, cluster, target - cluster.radius, owner, parent, pending)
            cluster.radius = max(cluster.radius, target)
            grew = grew or len(cluster.vertices) > before
        merges = 0
        for a, b in pending:
            ra, rb = _find(parent, a), _find(parent, b)
            if ra == rb:
                continue
            keep, gone = min(ra, rb), max(ra, rb)
            _merge(graph, clusters[keep], clusters[gone])
            parent[gone] = keep
            del clusters[gone]
            merges += 1
        if not grew and not merges:
            raise RuntimeError("clusters cannot grow further; syndrome is not realisable")
        for root in sorted(clusters):
            cluster = clusters[root]
            if lazy and not cluster.dirty:
                continue
            assignment = is_correctable(graph, cluster)
            cluster.dirty = False
            if assignment is not None:
                flips = extract_correction(graph, cluster, assignment)
                correction.words ^= flips.words
                for v in cluster.vertices:
                    owner.pop(v, None)
                del clusters[root]
        if trace is not None:
            live = [clusters[r] for r in sorted(clusters)]
            trace.write(
                json.dumps(
                    {
                        "step": step,
                        "clusters": len(live),
                        "sizes": sorted((len(c.vertices) for c in live), reverse=True),
                        "merges": merges,
                    }
                )
                + "\n"
            )

    assert _edge_syndrome(graph, correction) == set(excitations)
    return correction
