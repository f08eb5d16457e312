"""Strong amalgamation and joint embedding over a shared base.

All constructions are deterministic: the left structure is copied verbatim,
the right remainder is inserted by a fixed rule, fresh ids are appended after
existing ones.  Every result is re-validated and both embeddings re-checked
before it is returned, so a bad placement cannot escape silently.
"""

import os
from dataclasses import dataclass
from typing import Optional

from . import core
from .core import (
    Embedding,
    Flavor,
    MeetTree,
    MixedStructure,
    StructureError,
    make_embedding,
)

# below this size every certificate is the full pairwise atom check; above it
# the left (identity) map is checked on its changed frontier only, which is
# exact because an insertion into one tree edge cannot move the meet of nodes
# whose paths avoid that edge -- and the frontier check covers the rest
FULL_CERT_BOUND = 64


def _full_cert(n: int) -> bool:
    return n <= FULL_CERT_BOUND or bool(os.environ.get("TREEFORGE_FULL_CERT"))


@dataclass(frozen=True)
class AmalgamResult:
    """Amalgam plus the three certified maps into it."""

    amalgam: MixedStructure
    left: Embedding
    right: Embedding
    base: Embedding

    def base_image(self) -> frozenset:
        return frozenset(self.base.map.values())


def _require_embedding(e: Embedding, name: str) -> None:
    ok, why = core.is_embedding(e)
    if not ok:
        raise StructureError(f"{name} is not an embedding: {why}")


def _certify_identity_frontier(A: MixedStructure, D: MixedStructure, name: str) -> None:
    """Certify the identity map A -> D by checking every node the construction
    touched against all of A, instead of all pairs.

    Old pairs not on the frontier keep their atoms: their meet node and order
    relations only involve tree edges that were not split, and no edge between
    two old nodes is ever added or removed.
    """
    ta, td = A.tree, D.tree
    frontier = [x for x in range(A.n) if ta.parent[x] != td.parent[x]]
    for x, y in D.edges:
        if x < A.n and y < A.n and not A.has_edge(x, y):
            raise StructureError(f"{name} gained an edge between old nodes")
    for x, y in A.edges:
        if not D.has_edge(x, y):
            raise StructureError(f"{name} lost an edge")
    for x in frontier:
        for y in range(A.n):
            if ta.leq(x, y) != td.leq(x, y) or ta.leq(y, x) != td.leq(y, x):
                raise StructureError(f"{name}: order atom broken at ({x}, {y})")
            if ta.meet(x, y) != td.meet(x, y):
                raise StructureError(f"{name}: meet atom broken at ({x}, {y})")
    if A.flavor.kind == core.POINTED and A.point != D.point:
        raise StructureError(f"{name} moved the designated point")
    if A.flavor.kind == core.SEMIBRANCHED:
        ga, gd = core.gamma_set(A), core.gamma_set(D)
        for x in range(A.n):
            if (x in ga) != (x in gd):
                raise StructureError(f"{name}: chain membership broken at {x}")
        for x in frontier:
            if core.semibranch_projection(A, x) != core.semibranch_projection(D, x):
                raise StructureError(f"{name}: projection broken at {x}")


def _amalgam_engine(f: Embedding, g: Embedding, keep_edges: bool) -> AmalgamResult:
    """Insert B's remainder into a copy of A over the common base C.

    Placement rule for b in B outside the base, ancestors first:
      * if some base element lies above b, splice b immediately below the
        lowest such element;
      * else if b is on B's distinguished chain, stack it on top of the
        chain built so far;
      * else b opens a fresh cone under the image of its parent.
    In a gap of the base chain this puts every A element below every B
    element, each side keeping its internal order.
    """
    A, B, C = f.target, g.target, f.source
    kind = A.flavor.kind
    if B.flavor.kind != kind or (C.n > 0 and C.flavor.kind != kind):
        raise StructureError("amalgamation requires a single flavor kind")
    if C.n == 0 and kind == core.POINTED:
        raise StructureError("a pointed base cannot be empty")
    _require_embedding(f, "left base map")
    _require_embedding(g, "right base map")

    parent: list[Optional[int]] = [A.tree.parent[i] for i in range(A.n)]
    h: dict[int, int] = {g(c): f(c) for c in range(C.n)}
    base_in_b = set(h)
    rest = sorted(set(range(B.n)) - base_in_b)
    for rank, b in enumerate(rest):
        h[b] = A.n + rank
    parent.extend([None] * len(rest))

    fresh_root: Optional[int] = None
    point = A.point
    bt = B.tree
    if C.n == 0 and kind == core.PLAIN:
        # joint embedding: both trees side by side under a fresh common root
        for b in rest:
            p = bt.parent[b]
            parent[h[b]] = None if p is None else h[p]
        fresh_root = A.n + B.n
        parent.append(None)
        if A.n:
            parent[A.tree.root] = fresh_root
        if B.n:
            parent[h[bt.root]] = fresh_root
    else:
        chain_top = A.semibranch_tip
        for b in sorted(rest, key=lambda x: (bt.depth[x], x)):
            above = [x for x in base_in_b if bt.lt(b, x)]
            if above:
                # the base image above b is meet-closed, so a lowest element exists
                u = min(above, key=lambda x: bt.depth[x])
                parent[h[b]] = parent[h[u]]
                parent[h[u]] = h[b]
            elif kind == core.SEMIBRANCHED and bt.leq(b, B.semibranch_tip):
                parent[h[b]] = chain_top
                chain_top = h[b]
            else:
                p = bt.parent[b]
                if p is None:
                    raise StructureError("right structure has no anchor in the base")
                parent[h[b]] = h[p]

    tip = chain_top if kind == core.SEMIBRANCHED else None
    edges = set(A.edges) if keep_edges else set()
    if keep_edges:
        for x, y in B.edges:
            edges.add((h[x], h[y]) if h[x] < h[y] else (h[y], h[x]))
    relational = (A.flavor.relational or B.flavor.relational) if keep_edges else False
    amalgam = MixedStructure(
        MeetTree(tuple(parent)),
        frozenset(edges),
        Flavor(kind, relational),
        point,
        tip,
        A.treat_tip_as_branch or B.treat_tip_as_branch,
    )
    problems = core.validate_structure(amalgam)
    if problems:
        raise StructureError(f"amalgam failed validation: {problems}")

    left = make_embedding(A, amalgam, {a: a for a in range(A.n)})
    right = make_embedding(B, amalgam, dict(h))
    base = make_embedding(C, amalgam, {c: f(c) for c in range(C.n)})
    if _full_cert(amalgam.n):
        _require_embedding(left, "left result map")
    else:
        _certify_identity_frontier(A, amalgam, "left result map")
    _require_embedding(right, "right result map")
    _require_embedding(base, "base result map")
    for c in range(C.n):
        assert left(f(c)) == right(g(c)) == base(c), "square does not commute"
    overlap = set(left.map.values()) & set(right.map.values())
    assert overlap == set(base.map.values()), "amalgam is not strong"
    assert amalgam.n == A.n + B.n - C.n + (1 if fresh_root is not None else 0)
    return AmalgamResult(amalgam, left, right, base)


def amalgamate_tree(f: Embedding, g: Embedding, flavor: Optional[str] = None) -> AmalgamResult:
    """Strong amalgam of two tree-flavored structures over a common base.

    f embeds the base into the left structure, g into the right.  The inputs
    must carry no relational layer; `flavor` optionally pins the expected
    kind.
    """
    for s, name in ((f.target, "left"), (g.target, "right"), (f.source, "base")):
        if s.edges or s.flavor.relational:
            raise StructureError(f"{name} structure carries a relational layer")
    if flavor is not None and f.target.flavor.kind != flavor:
        raise StructureError(f"expected flavor {flavor}, got {f.target.flavor.kind}")
    return _amalgam_engine(f, g, keep_edges=False)


def amalgamate_mixed(f: Embedding, g: Embedding) -> AmalgamResult:
    """Strong amalgam in the full language: tree part and edge part at once.

    The tree reducts are amalgamated by the insertion rule and the edge
    reducts freely, with no edges between the two new sides.  Both reducts
    use the same fresh ids, so the glueing bijection is the identity; the
    only padding ever needed is the fresh root of an empty-base join, which
    stays edgeless on the graph side.
    """
    for s, name in ((f.target, "left"), (g.target, "right")):
        if not s.flavor.relational:
            raise StructureError(f"{name} structure has no relational layer")
    result = _amalgam_engine(f, g, keep_edges=True)
    la, ra = set(result.left.map.values()), set(result.right.map.values())
    for x, y in result.amalgam.edges:
        crossing = (x in la - ra and y in ra - la) or (y in la - ra and x in ra - la)
        assert not crossing, "free edge amalgam produced a cross edge"
    return result


def graph_structure(num_vertices: int, edges=()) -> MixedStructure:
    """Edge-only structure on a star carrier: node 0 is the carrier root,
    vertices are 1..num_vertices.  The star adds no order information beyond
    the shared meet, which is what 'no tree structure' means here."""
    parent = [None] + [0] * num_vertices
    shifted = [(x, y) for x, y in edges]
    for x, y in shifted:
        if not (1 <= x <= num_vertices and 1 <= y <= num_vertices):
            raise StructureError("graph edge touches a non-vertex")
    return core.make_structure(parent, edges=shifted, relational=True)


def _require_star(s: MixedStructure, name: str) -> None:
    if s.flavor.kind != core.PLAIN or not s.flavor.relational:
        raise StructureError(f"{name} is not an edge-only structure")
    r = s.tree.root
    for v in range(s.n):
        if v != r and s.tree.parent[v] != r:
            raise StructureError(f"{name} is not on a star carrier")
    for x, y in s.edges:
        if r in (x, y):
            raise StructureError(f"{name} has an edge on the carrier root")


def amalgamate_graph_free(f: Embedding, g: Embedding) -> AmalgamResult:
    """Free amalgam of edge-only structures: disjoint union of the vertex
    sets over the base, edges inherited from both sides, none across."""
    for s, name in ((f.source, "base"), (f.target, "left"), (g.target, "right")):
        _require_star(s, name)
    if f(f.source.tree.root) != f.target.tree.root or g(g.source.tree.root) != g.target.tree.root:
        raise StructureError("base maps must match carrier roots")
    return amalgamate_mixed(f, g)


def joint_embed(a: MixedStructure, b: MixedStructure, flavor: Optional[str] = None) -> AmalgamResult:
    """Embed two structures of one flavor into a common one.

    Amalgamates over the substructure generated by the constants: the
    designated point when there is one, nothing otherwise.
    """
    if a.flavor.kind != b.flavor.kind:
        raise StructureError("joint embedding requires a single flavor kind")
    if flavor is not None and a.flavor.kind != flavor:
        raise StructureError(f"expected flavor {flavor}, got {a.flavor.kind}")
    if a.flavor.kind == core.POINTED:
        base, _ = core.extract_substructure(a, [a.point])
        f = make_embedding(base, a, {0: a.point})
        g = make_embedding(base, b, {0: b.point})
    else:
        base = MixedStructure(MeetTree(()), frozenset(), Flavor(core.PLAIN))
        f = make_embedding(base, a, {})
        g = make_embedding(base, b, {})
    if a.flavor.relational or b.flavor.relational or a.edges or b.edges:
        return amalgamate_mixed(f, g)
    return amalgamate_tree(f, g)
