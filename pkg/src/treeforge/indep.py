"""Independence between parts of a mixed structure, decided with witnesses.

Two tree-side relations are implemented: cone independence over a base point
and semibranch independence over the designated chain.  Each can be conjoined
with the free edge relation of the graph layer.  Verdicts are replayable: a
failed clause comes with the nodes that break it.  The module also carries the
constructive side, producing an independent copy of a point (or tuple) over a
base inside a growing approximation, and the joint-type prediction that makes
the relations stationary.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Optional, Union

from treeforge import core, limit
from treeforge.core import (
    Embedding,
    Flavor,
    MeetTree,
    MixedStructure,
    QfTypeCode,
    StructureError,
    make_embedding,
)
from treeforge import amalgam

CONE = "cone"
SEMIBRANCH = "semibranch"
GRAPH_FREE = "graph_free"
REL_KINDS = (CONE, SEMIBRANCH, GRAPH_FREE)


@dataclass(frozen=True)
class Relation:
    """Which independence notion a query asks about.

    kind picks the tree side (or the pure edge relation for graph_free);
    mixed conjoins the edge relation on the same closures.  gamma is the cone
    base point; a pointed structure supplies its designated point when gamma
    is left out.
    """

    kind: str
    gamma: Optional[int] = None
    mixed: bool = False

    def __post_init__(self):
        if self.kind not in REL_KINDS:
            raise StructureError(f"unknown relation kind {self.kind!r}")
        if self.mixed and self.kind == GRAPH_FREE:
            raise StructureError("mixed conjoins a tree-side relation with the edge side")


def cone_relation(gamma: Optional[int] = None, mixed: bool = False) -> Relation:
    return Relation(CONE, gamma, mixed)


def semibranch_relation(mixed: bool = False) -> Relation:
    return Relation(SEMIBRANCH, None, mixed)


def graph_free_relation() -> Relation:
    return Relation(GRAPH_FREE)


@dataclass(frozen=True)
class IndepQuery:
    structure: MixedStructure
    A: frozenset
    B: frozenset
    C: frozenset
    relation: Relation


def query(s: MixedStructure, A: Iterable[int], B: Iterable[int], C: Iterable[int],
          relation: Relation) -> IndepQuery:
    q = IndepQuery(s, frozenset(A), frozenset(B), frozenset(C), relation)
    for name, part in (("A", q.A), ("B", q.B), ("C", q.C)):
        for x in part:
            if not (0 <= x < s.n):
                raise StructureError(f"{name} contains {x}, outside the universe")
    return q


@dataclass(frozen=True)
class IndepVerdict:
    """Outcome of a query; on failure the witness replays the broken clause.

    violated_clause is one of "(i)", "(ii)", "graph-intersection",
    "graph-cross-edge" or "none".  The witness holds at most three node ids:
    the offending pair, plus their meet for clause (ii).
    """

    independent: bool
    violated_clause: str = "none"
    witness: tuple = ()

    @property
    def side(self) -> Optional[str]:
        """Which component of a mixed relation failed, None when independent."""
        if self.independent:
            return None
        return "graph" if self.violated_clause.startswith("graph") else "tree"


# ---------------------------------------------------------------------------
# closures per relation


def _base_point(s: MixedStructure, rel: Relation) -> int:
    g = rel.gamma
    if g is None and s.flavor.kind == core.POINTED:
        g = s.point
    if g is None:
        raise StructureError("cone independence needs a base point")
    if not (0 <= g < s.n):
        raise StructureError(f"base point {g} is not in the universe")
    return g


def rel_closure(s: MixedStructure, xs: Iterable[int], rel: Relation) -> frozenset:
    """Generated set in the language the relation lives in."""
    if rel.kind == CONE:
        return core.meet_closure(s.tree, set(xs) | {_base_point(s, rel)})
    if rel.kind == SEMIBRANCH:
        if s.flavor.kind != core.SEMIBRANCHED:
            raise StructureError("semibranch independence needs a semibranched structure")
        return core.closure(s, xs)
    return frozenset(xs)  # graphs: no closure beyond the set itself


# ---------------------------------------------------------------------------
# the two tree clauses


def _clause_i(t: MeetTree, ac, bc, cc):
    """First failing pair b <= a that no base element separates, or None."""
    for a in sorted(ac):
        for b in sorted(bc):
            if t.leq(b, a) and not any(t.leq(b, c) and t.leq(c, a) for c in cc):
                return (a, b)
    return None


def _clause_ii(t: MeetTree, ac, bc, cc, guard=None):
    """First pair whose meet escapes the base with no separating c, or None.

    guard restricts which pairs the clause speaks about; the semibranch
    relation only constrains pairs with equal chain projections.
    """
    for a in sorted(ac):
        for b in sorted(bc):
            if guard is not None and not guard(a, b):
                continue
            m = t.meet(a, b)
            if m in cc:
                continue
            if not any(t.meet(a, c) != t.meet(b, c) for c in cc):
                return (a, b, m)
    return None


def _tree_verdict(t: MeetTree, ac, bc, cc, guard=None) -> IndepVerdict:
    w = _clause_i(t, ac, bc, cc)
    if w is not None:
        return IndepVerdict(False, "(i)", w)
    w = _clause_ii(t, ac, bc, cc, guard)
    if w is not None:
        return IndepVerdict(False, "(ii)", w)
    return IndepVerdict(True)


# ---------------------------------------------------------------------------
# decision procedures


def cone_indep(q: IndepQuery) -> IndepVerdict:
    """A and B are cone-independent over C relative to the base point when
    every comparable cross pair is separated through the closure of C, and
    every cross pair whose meet escapes that closure is told apart by it."""
    s = q.structure
    rel = q.relation
    ac = rel_closure(s, q.A | q.C, rel)
    bc = rel_closure(s, q.B | q.C, rel)
    cc = rel_closure(s, q.C, rel)
    return _tree_verdict(s.tree, ac, bc, cc)


def semibranch_indep(q: IndepQuery) -> IndepVerdict:
    """Same shape as cone independence, over the chain closures; the second
    clause only constrains pairs that project to the same chain element."""
    s = q.structure
    if s.flavor.kind != core.SEMIBRANCHED:
        raise StructureError("semibranch independence needs a semibranched structure")
    rel = q.relation
    ac = rel_closure(s, q.A | q.C, rel)
    bc = rel_closure(s, q.B | q.C, rel)
    cc = rel_closure(s, q.C, rel)

    def same_projection(a, b):
        return core.semibranch_projection(s, a) == core.semibranch_projection(s, b)

    return _tree_verdict(s.tree, ac, bc, cc, same_projection)


def graph_free_indep(q: IndepQuery) -> IndepVerdict:
    """Free-amalgamation independence of the edge layer, on the raw sets:
    A and B may only overlap inside C and may not touch across it."""
    s = q.structure
    if not s.flavor.relational:
        raise StructureError("graph independence needs the relational layer")
    shared = (q.A & q.B) - q.C
    if shared:
        return IndepVerdict(False, "graph-intersection", (min(shared),))
    for a in sorted(q.A - q.C):
        for b in sorted(q.B - q.C):
            if a != b and s.has_edge(a, b):
                return IndepVerdict(False, "graph-cross-edge", (a, b))
    return IndepVerdict(True)


def mix_indep(q: IndepQuery) -> IndepVerdict:
    """Conjunction of the tree-side relation and the free edge relation, both
    taken on the flavor closures of AC, BC and C."""
    s = q.structure
    rel = q.relation
    if not rel.mixed:
        raise StructureError("mix independence expects a mixed relation")
    if not s.flavor.relational:
        raise StructureError("mix independence needs the relational layer")
    ac = rel_closure(s, q.A | q.C, rel)
    bc = rel_closure(s, q.B | q.C, rel)
    cc = rel_closure(s, q.C, rel)
    if rel.kind == SEMIBRANCH:
        def guard(a, b):
            return core.semibranch_projection(s, a) == core.semibranch_projection(s, b)
    else:
        guard = None
    v = _tree_verdict(s.tree, ac, bc, cc, guard)
    if not v.independent:
        return v
    return graph_free_indep(IndepQuery(s, ac, bc, cc, Relation(GRAPH_FREE)))


def decide(q: IndepQuery) -> IndepVerdict:
    """Route a query to the procedure its relation names."""
    rel = q.relation
    if rel.mixed:
        return mix_indep(q)
    if rel.kind == CONE:
        return cone_indep(q)
    if rel.kind == SEMIBRANCH:
        return semibranch_indep(q)
    return graph_free_indep(q)


def easy_indep_sufficient(q: IndepQuery) -> bool:
    """Whether the coarse position test already forces cone independence.

    The test: every a above the base point meets every b at or below it, and
    every a strictly beside it stays strictly below b there.  It never looks
    at C, so a positive answer certifies independence over any base; the
    certificate is checked before returning.
    """
    s = q.structure
    g = _base_point(s, q.relation)
    t = s.tree
    for a in q.A:
        above = t.leq(g, a)
        for b in q.B:
            if above:
                if not t.leq(t.meet(a, b), g):
                    return False
            elif not t.lt(t.meet(a, g), t.meet(b, g)):
                return False
    v = cone_indep(q)
    if not v.independent:
        raise StructureError(
            f"position test passed but independence fails: {v.violated_clause} at {v.witness}"
        )
    return True


# ---------------------------------------------------------------------------
# constructive extension: an independent copy of a point over a base


def _tree_side(rel: Relation) -> None:
    if rel.kind == GRAPH_FREE:
        raise StructureError("extension needs a tree-side relation")


def _claim_step(appr, a: int, dom: frozenset, m: dict, B: frozenset, rel: Relation) -> int:
    """Independent copy of one point whose closure over dom adds only itself.

    The copy's type is read off a's position over dom; placement happens over
    the image base m[dom] inside the closed set B.  Three placements cover
    all positions: below all of B when nothing of dom lies below a, in a
    fresh cone (or on the chain) above the deepest meet with dom when nothing
    lies above, and in the gap just below the first B element between the
    neighbouring dom elements otherwise.
    """
    s = appr.current
    t = s.tree
    if all(m[c] == c for c in dom):
        # over an unmoved base the point may already be its own witness; this
        # also covers a B with nothing on the tree side to collide with
        v = decide(IndepQuery(s, frozenset({a}), B, frozenset(dom), rel))
        if v.independent:
            return a
    c_lt = [c for c in dom if t.lt(c, a)]
    c_gt = [c for c in dom if t.lt(a, c)]
    pattern = frozenset(m[x] for x in dom if s.has_edge(a, x)) if s.flavor.relational else frozenset()
    on_chain = s.flavor.kind == core.SEMIBRANCHED and a in core.gamma_set(s)
    if not c_lt:
        steps = (("below_min",),)
    elif not c_gt:
        e = max((t.meet(a, c) for c in dom), key=lambda v: t.depth[v])
        if e not in dom:
            raise StructureError("closure over the base adds a meet: not a single step")
        e_img = m[e]
        if on_chain:
            chain = core.gamma_set(s)
            above = [b for b in B if b in chain and t.lt(e_img, b)]
            if above:
                b1 = min(above, key=lambda v: t.depth[v])
                steps = (("gap", e_img, b1),)
            else:
                steps = (("cone", e_img, True),)
        else:
            steps = (("cone", e_img, False),)
    else:
        c0 = m[max(c_lt, key=lambda v: t.depth[v])]
        c1 = m[min(c_gt, key=lambda v: t.depth[v])]
        between = [b for b in B if t.lt(c0, b) and t.leq(b, c1)]
        b0 = min(between, key=lambda v: t.depth[v])  # ancestors of c1: a chain
        steps = (("gap", c0, b0),)
    req = limit._finish_request(s, sorted(B), steps, pattern)
    node = limit.realize_extension(appr, req)

    s2 = appr.current
    order = sorted(dom)
    want = core.qf_type(s2, tuple(order) + (a,))
    got = core.qf_type(s2, tuple(m[c] for c in order) + (node,))
    if want != got:
        raise StructureError("witness type drifted from the original")
    img = frozenset(m[c] for c in dom)
    v = decide(IndepQuery(s2, frozenset({node}), B, img, rel))
    if not v.independent:
        raise StructureError(
            f"witness fails independence: {v.violated_clause} at {v.witness}"
        )
    return node


def extension_witness(appr, a: Union[int, Iterable[int]], C: Iterable[int],
                      B: Iterable[int], relation: Relation):
    """Return a copy of a over C that is independent from B, growing the
    approximation when nothing realizes the step yet.

    C and B must be closed for the relation with C inside B.  A single node
    must generate only itself over C; a tuple is reduced to single steps by
    walking each point's closure shallowest element first, so the connecting
    meets come into existence before the points hanging above them.
    """
    s = appr.current
    _tree_side(relation)
    single = isinstance(a, int)
    tup = (a,) if single else tuple(a)
    Cf = frozenset(C)
    Bf = frozenset(B)
    for x in tup:
        if not (0 <= x < s.n):
            raise StructureError(f"node {x} is outside the universe")
    if rel_closure(s, Cf, relation) != Cf:
        raise StructureError("C must be closed for the relation")
    if rel_closure(s, Bf, relation) != Bf:
        raise StructureError("B must be closed for the relation")
    if not Cf <= Bf:
        raise StructureError("C must sit inside B")
    if single:
        cl = rel_closure(s, Cf | {a}, relation)
        if cl - Cf - {a}:
            raise StructureError("closure over C adds a meet: not a single-generator step")

    m = {c: c for c in Cf}
    dom = set(Cf)
    b_cur = Bf
    out = []
    for x in tup:
        if x not in m:
            cur = appr.current
            cl = rel_closure(cur, dom | {x}, relation)
            fresh = sorted(cl - dom, key=lambda v: (cur.tree.depth[v], v))
            for y in fresh:
                node = _claim_step(appr, y, frozenset(dom), m, b_cur, relation)
                m[y] = node
                dom.add(y)
                b_cur = rel_closure(appr.current, b_cur | {node}, relation)
        out.append(m[x])

    if not single:
        s2 = appr.current
        order = tuple(sorted(Cf))
        if core.qf_type(s2, order + tup) != core.qf_type(s2, order + tuple(out)):
            raise StructureError("joint witness type drifted from the original")
        v = decide(IndepQuery(s2, frozenset(out), Bf, Cf, relation))
        if not v.independent:
            raise StructureError(
                f"witness tuple fails independence: {v.violated_clause} at {v.witness}"
            )
        return tuple(out)
    return out[0]


# ---------------------------------------------------------------------------
# joint types of independent pairs


def realize_type(code: QfTypeCode, flavor: Flavor) -> tuple:
    """Build a structure realizing the type code, with the realizing tuple.

    Inverts the code: the elements of the generated substructure are the
    pairwise meets of the augmented tuple, one meet lies below another
    exactly when it lies below both of the other's generators, and edges are
    read off the extension indexing.  The result is re-typed at the end, so
    a code no structure realizes is rejected rather than misread.
    """
    arity = code.arity
    k = 1 + max((i for (i, _, _) in code.meet_rel), default=-1)
    extra = k - arity
    kind = flavor.kind
    want_extra = 1 if (kind == core.POINTED or (kind == core.SEMIBRANCHED and arity)) else 0
    if extra != want_extra or k < 0:
        raise StructureError("type code does not fit the flavor")

    R = code.meet_rel

    def below(p, q):
        # meet(p) <= meet(q) exactly when meet(p) lies below both generators of q
        return (p[0], p[1], q[0]) in R and (p[0], p[1], q[1]) in R

    pairs = [(i, j) for i in range(k) for j in range(i, k)]
    reps: list = []
    cls: dict = {}
    for p in pairs:
        for idx, r in enumerate(reps):
            if below(p, r) and below(r, p):
                cls[p] = idx
                break
        else:
            cls[p] = len(reps)
            reps.append(p)
    n = len(reps)

    parent: list = [None] * n
    for x in range(n):
        anc = [y for y in range(n) if y != x and below(reps[y], reps[x])]
        if not anc:
            continue
        anc.sort(key=lambda y: sum(below(reps[z], reps[y]) for z in range(n)))
        for lower, upper in zip(anc, anc[1:]):
            if not below(reps[lower], reps[upper]):
                raise StructureError("type code is not tree-like")
        parent[x] = anc[-1]

    ext_classes = [cls[(i, i)] for i in range(k)]
    seen = set(ext_classes)
    for i in range(k):
        for j in range(i, k):
            c = cls[(i, j)]
            if c not in seen:
                seen.add(c)
                ext_classes.append(c)
    edges = set()
    for i, j in code.edge_rel:
        if not (0 <= i < len(ext_classes) and 0 <= j < len(ext_classes)):
            raise StructureError("edge atom outside the closure extension")
        u, v = ext_classes[i], ext_classes[j]
        if u == v:
            raise StructureError("edge atom on a single element")
        edges.add((min(u, v), max(u, v)))

    point = cls[(k - 1, k - 1)] if kind == core.POINTED else None
    tip = cls[(k - 1, k - 1)] if kind == core.SEMIBRANCHED and extra else None
    s = MixedStructure(
        MeetTree(tuple(parent)), frozenset(edges), flavor, point, tip,
        kind == core.SEMIBRANCHED,
    )
    problems = core.validate_structure(s)
    if problems:
        raise StructureError(f"type code is unrealizable: {problems}")
    tup = tuple(cls[(i, i)] for i in range(arity))
    if core.qf_type(s, tup) != code:
        raise StructureError("type code is unrealizable")
    return s, tup


def predict_joint_type(sA: QfTypeCode, sB: QfTypeCode, relation: Relation,
                       base_size: int) -> QfTypeCode:
    """The joint type of an independent pair over a common base.

    sA and sB are types over the same base, enumerated first in both; the
    first base_size coordinates are the base.  The joint type glues the two
    closures over the base closure, cross meets falling through it and no
    edges crossing.  Realized marginals of an independent pair always match
    it, which is the stationarity the build loop relies on.
    """
    _tree_side(relation)
    if not (0 <= base_size <= min(sA.arity, sB.arity)):
        raise StructureError("base does not fit inside both types")
    if sB.arity == base_size:
        return sA
    if sA.arity == base_size:
        return sB
    if (sA.edge_rel or sB.edge_rel) and not relation.mixed:
        raise StructureError("cross edges are not determined by a pure tree relation")

    if relation.kind == SEMIBRANCH:
        kind = core.SEMIBRANCHED
    else:
        ka = 1 + max((i for (i, _, _) in sA.meet_rel), default=-1)
        kind = core.POINTED if ka > sA.arity else core.PLAIN
    flavor = Flavor(kind, relation.mixed)
    wa, pos_a = realize_type(sA, flavor)
    wb, pos_b = realize_type(sB, flavor)
    if core.qf_type(wa, pos_a[:base_size]) != core.qf_type(wb, pos_b[:base_size]):
        raise StructureError("the two types disagree on the base")

    cl_a = sorted(core.closure(wa, pos_a[:base_size]))
    cl_b = sorted(core.closure(wb, pos_b[:base_size]))
    base_struct, into_base = core.extract_substructure(wa, cl_a)
    f = make_embedding(base_struct, wa, {new: old for old, new in into_base.items()})
    # the base closures correspond by matching generator pairs
    gens_a = list(pos_a[:base_size])
    gens_b = list(pos_b[:base_size])
    if kind == core.POINTED:
        gens_a.append(wa.point)
        gens_b.append(wb.point)
    elif kind == core.SEMIBRANCHED:
        gens_a.extend(core.semibranch_projection(wa, x) for x in pos_a[:base_size])
        gens_b.extend(core.semibranch_projection(wb, x) for x in pos_b[:base_size])
    a_to_b = {}
    for i in range(len(gens_a)):
        for j in range(len(gens_a)):
            a_to_b[wa.tree.meet(gens_a[i], gens_a[j])] = wb.tree.meet(gens_b[i], gens_b[j])
    if set(a_to_b) != set(cl_a) or len(set(a_to_b.values())) != len(cl_b):
        raise StructureError("base closures do not correspond")
    g = make_embedding(base_struct, wb, {into_base[x]: a_to_b[x] for x in cl_a})
    ok, why = core.is_embedding(g)
    if not ok:
        raise StructureError(f"the two types disagree on the base: {why}")

    if flavor.relational:
        res = amalgam.amalgamate_mixed(f, g)
    else:
        res = amalgam.amalgamate_tree(f, g)
    joint = tuple(res.left(x) for x in pos_a[:base_size])
    joint += tuple(res.left(x) for x in pos_a[base_size:])
    joint += tuple(res.right(x) for x in pos_b[base_size:])
    return core.qf_type(res.amalgam, joint)
