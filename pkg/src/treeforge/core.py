"""Finite meet-trees with an optional point, branch chain, and relational layer.

Order convention: ``a <= b`` means a is an ancestor of b or equal to it, so
the root is the minimum of the tree and the meet of two nodes is their deepest
common ancestor.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Optional

PLAIN = "plain"
POINTED = "pointed"
SEMIBRANCHED = "semibranched"
KINDS = (PLAIN, POINTED, SEMIBRANCHED)

DEFAULT_ENUM_BUDGET = 500_000


class StructureError(Exception):
    """Operation applied to structurally invalid data."""


class BudgetError(Exception):
    """Enumeration or search would exceed the configured budget."""


def enum_budget() -> int:
    raw = os.environ.get("TREEFORGE_BUDGET")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return DEFAULT_ENUM_BUDGET


@dataclass(frozen=True)
class MeetTree:
    """Rooted tree given by a parent array; exactly one entry is None."""

    parent: tuple[Optional[int], ...]

    @property
    def n(self) -> int:
        return len(self.parent)

    @cached_property
    def root(self) -> int:
        roots = [i for i, p in enumerate(self.parent) if p is None]
        if len(roots) != 1:
            raise StructureError(f"expected exactly one root, found {len(roots)}")
        return roots[0]

    @cached_property
    def depth(self) -> tuple[int, ...]:
        n = self.n
        depth = [-1] * n
        for start in range(n):
            if depth[start] >= 0:
                continue
            chain = []
            seen = set()
            v: Optional[int] = start
            while v is not None and depth[v] < 0:
                if v in seen:
                    raise StructureError("parent pointers contain a cycle")
                if not (0 <= v < n):
                    raise StructureError(f"parent id {v} out of range")
                seen.add(v)
                chain.append(v)
                v = self.parent[v]
            d = -1 if v is None else depth[v]
            for node in reversed(chain):
                d += 1
                depth[node] = d
        return tuple(depth)

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        kids: list[list[int]] = [[] for _ in range(self.n)]
        for i, p in enumerate(self.parent):
            if p is not None:
                kids[p].append(i)
        return tuple(tuple(sorted(k)) for k in kids)

    def leq(self, a: int, b: int) -> bool:
        """a is an ancestor of b, or equal."""
        d = self.depth
        while d[b] > d[a]:
            b = self.parent[b]  # type: ignore[assignment]
        return a == b

    def lt(self, a: int, b: int) -> bool:
        return a != b and self.leq(a, b)

    def meet(self, a: int, b: int) -> int:
        d = self.depth
        while d[a] > d[b]:
            a = self.parent[a]  # type: ignore[assignment]
        while d[b] > d[a]:
            b = self.parent[b]  # type: ignore[assignment]
        while a != b:
            a = self.parent[a]  # type: ignore[assignment]
            b = self.parent[b]  # type: ignore[assignment]
        return a

    def chain_to_root(self, a: int) -> list[int]:
        """Ancestors of a, from a down to the root."""
        out = [a]
        while self.parent[out[-1]] is not None:
            out.append(self.parent[out[-1]])  # type: ignore[arg-type]
        return out

    def descendants(self, a: int) -> frozenset[int]:
        acc = [a]
        i = 0
        while i < len(acc):
            acc.extend(self.children[acc[i]])
            i += 1
        return frozenset(acc)


@dataclass(frozen=True)
class Flavor:
    kind: str
    relational: bool = False


@dataclass(frozen=True)
class MixedStructure:
    tree: MeetTree
    edges: frozenset[tuple[int, int]] = frozenset()
    flavor: Flavor = Flavor(PLAIN)
    point: Optional[int] = None
    semibranch_tip: Optional[int] = None
    treat_tip_as_branch: bool = False

    @property
    def n(self) -> int:
        return self.tree.n

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self.edges or (v, u) in self.edges


def _norm_edge(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u <= v else (v, u)


def make_structure(
    parent: Iterable[Optional[int]],
    edges: Iterable[tuple[int, int]] = (),
    kind: Optional[str] = None,
    relational: Optional[bool] = None,
    point: Optional[int] = None,
    tip: Optional[int] = None,
    treat_tip_as_branch: bool = False,
) -> MixedStructure:
    """Convenience constructor; flavor kind inferred from decorations."""
    tree = MeetTree(tuple(parent))
    es = frozenset(_norm_edge(u, v) for u, v in edges)
    if kind is None:
        if point is not None:
            kind = POINTED
        elif tip is not None:
            kind = SEMIBRANCHED
        else:
            kind = PLAIN
    if relational is None:
        relational = bool(es)
    return MixedStructure(tree, es, Flavor(kind, relational), point, tip, treat_tip_as_branch)


def validate_structure(s: MixedStructure) -> list[str]:
    """Invariant check; returns a list of violations, empty when valid.

    A 0-node plain edgeless structure is accepted: it is the empty base of the
    joint-embedding path.
    """
    problems: list[str] = []
    n = s.tree.n
    in_range = True
    for i, p in enumerate(s.tree.parent):
        if p is not None and not (0 <= p < n):
            problems.append(f"parent range: node {i} points to {p}")
            in_range = False
    roots = [i for i, p in enumerate(s.tree.parent) if p is None]
    if n > 0 and len(roots) != 1:
        problems.append(f"root: expected exactly one, found {len(roots)}")
    if in_range:
        # cycle walk without relying on cached depth
        state = [0] * n  # 0 unseen, 1 active, 2 done
        for start in range(n):
            if state[start]:
                continue
            trail = []
            v: Optional[int] = start
            while v is not None and state[v] == 0:
                state[v] = 1
                trail.append(v)
                v = s.tree.parent[v]
            if v is not None and state[v] == 1:
                problems.append("acyclicity: parent pointers contain a cycle")
                for t in trail:
                    state[t] = 2
                break
            for t in trail:
                state[t] = 2
    for e in s.edges:
        if len(e) != 2:
            problems.append(f"edge arity: {e!r}")
            continue
        u, v = e
        if u == v:
            problems.append(f"edge loop: {u}")
        if not (0 <= u < n and 0 <= v < n):
            problems.append(f"edge range: {e!r}")
        if u > v:
            problems.append(f"edge order: {e!r} not normalized")
    if s.edges and not s.flavor.relational:
        problems.append("relational mismatch: edges present with relational layer off")
    kind = s.flavor.kind
    if kind not in KINDS:
        problems.append(f"flavor: unknown kind {kind!r}")
    if kind == PLAIN:
        if s.point is not None or s.semibranch_tip is not None:
            problems.append("flavor mismatch: plain structure carries a designated node")
    elif kind == POINTED:
        if s.point is None:
            problems.append("flavor mismatch: pointed structure without a point")
        elif not (0 <= s.point < n):
            problems.append(f"point range: {s.point}")
        if s.semibranch_tip is not None:
            problems.append("flavor mismatch: pointed structure carries a branch tip")
    elif kind == SEMIBRANCHED:
        if s.semibranch_tip is None:
            problems.append("flavor mismatch: semibranched structure without a tip")
        elif not (0 <= s.semibranch_tip < n):
            problems.append(f"tip range: {s.semibranch_tip}")
        if s.point is not None:
            problems.append("flavor mismatch: semibranched structure carries a point")
    return problems


def require_valid(s: MixedStructure) -> MixedStructure:
    problems = validate_structure(s)
    if problems:
        raise StructureError("; ".join(problems))
    return s


# ---------------------------------------------------------------------------
# closures, cones, branch chain


def meet_closure(t: MeetTree, xs: Iterable[int]) -> frozenset[int]:
    """Closure under meets: pairwise meets already suffice."""
    lst = list(xs)
    return frozenset(t.meet(x, y) for x in lst for y in lst)


def semibranch_projection(s: MixedStructure, a: int) -> int:
    if s.semibranch_tip is None:
        raise StructureError("projection needs a semibranched structure")
    return s.tree.meet(a, s.semibranch_tip)


def gamma_set(s: MixedStructure) -> frozenset[int]:
    """The designated branch chain: all ancestors of the tip, tip included."""
    if s.semibranch_tip is None:
        raise StructureError("no branch chain on this flavor")
    return frozenset(s.tree.chain_to_root(s.semibranch_tip))


def gamma_circle(s: MixedStructure) -> frozenset[int]:
    """Chain elements with something of the chain strictly above them.

    With treat_tip_as_branch set, the tip counts as interior: the finite chain
    stands in for an unbounded branch.
    """
    g = gamma_set(s)
    if s.treat_tip_as_branch:
        return g
    return g - {s.semibranch_tip}


def closure(s: MixedStructure, xs: Iterable[int]) -> frozenset[int]:
    """Generated substructure in the flavor language (node set)."""
    kind = s.flavor.kind
    if kind == POINTED:
        return meet_closure(s.tree, set(xs) | {s.point})
    if kind == SEMIBRANCHED:
        base = set(xs)
        projs = {semibranch_projection(s, x) for x in base}
        return meet_closure(s.tree, base) | frozenset(projs)
    return meet_closure(s.tree, xs)


def cone_of(s: MixedStructure, g: int, a: int) -> frozenset[int]:
    """The open cone above g containing a; empty when a is not above g."""
    t = s.tree
    if not t.lt(g, a):
        return frozenset()
    v = a
    while t.parent[v] != g:
        v = t.parent[v]  # type: ignore[assignment]
    return t.descendants(v)


def cones_at(s: MixedStructure, g: int) -> tuple[frozenset[int], ...]:
    """Partition of the points strictly above g into cones."""
    blocks = [s.tree.descendants(c) for c in s.tree.children[g]]
    return tuple(sorted(blocks, key=min))


def cone_union(s: MixedStructure, g: int, xs: Iterable[int]) -> frozenset[int]:
    """Union of the cones above g that meet the given set."""
    out: set[int] = set()
    for x in xs:
        out |= cone_of(s, g, x)
    return frozenset(out)


def semibranch_space(t: MeetTree) -> tuple[list[tuple[int, ...]], dict[int, int]]:
    """All semibranches of a finite tree, with the canonical bijection.

    On a finite tree every downward closed chain has a maximum, so every
    semibranch is the full ancestor chain of a unique node. Chains are listed
    root-first; the map sends each node to the index of its chain.
    """
    chains: list[tuple[int, ...]] = []
    index: dict[int, int] = {}
    for v in range(t.n):
        chain = tuple(reversed(t.chain_to_root(v)))
        index[v] = len(chains)
        chains.append(chain)
    return chains, index


# ---------------------------------------------------------------------------
# quantifier-free type codes


@dataclass(frozen=True)
class QfTypeCode:
    """Canonical code of the quantifier-free type of a tuple.

    meet_rel and eq_rel range over the flavor-augmented tuple (the point, or
    the maximal projection for the semibranched flavor, appended at the end).
    edge_rel ranges over the canonical closure extension of that tuple, since
    relational atoms may apply to meet terms; the appended positions are
    determined by meet_rel, so equal codes still mean equal types.
    """

    arity: int
    meet_rel: frozenset[tuple[int, int, int]]
    edge_rel: frozenset[tuple[int, int]]
    eq_rel: frozenset[tuple[int, int]]


def _augmented(s: MixedStructure, tup: tuple[int, ...]) -> tuple[int, ...]:
    kind = s.flavor.kind
    if kind == POINTED:
        return tup + (s.point,)  # type: ignore[operator]
    if kind == SEMIBRANCHED and tup:
        t = s.tree
        gx = max((semibranch_projection(s, x) for x in tup), key=lambda v: t.depth[v])
        return tup + (gx,)
    return tup


def closure_extension(s: MixedStructure, tup: tuple[int, ...]) -> tuple[int, ...]:
    """Augmented tuple followed by its interior meets in canonical pair order."""
    aug = _augmented(s, tuple(tup))
    t = s.tree
    ext = list(aug)
    present = set(ext)
    for i in range(len(aug)):
        for j in range(i, len(aug)):
            m = t.meet(aug[i], aug[j])
            if m not in present:
                present.add(m)
                ext.append(m)
    return tuple(ext)


def qf_type(s: MixedStructure, tup: Iterable[int]) -> QfTypeCode:
    tup = tuple(tup)
    aug = _augmented(s, tup)
    t = s.tree
    k = len(aug)
    meets = [[t.meet(aug[i], aug[j]) for j in range(k)] for i in range(k)]
    meet_rel = frozenset(
        (i, j, l)
        for i in range(k)
        for j in range(k)
        for l in range(k)
        if t.leq(meets[i][j], aug[l])
    )
    eq_rel = frozenset((i, j) for i in range(k) for j in range(i + 1, k) if aug[i] == aug[j])
    ext = closure_extension(s, tup)
    edge_rel = frozenset(
        (i, j)
        for i in range(len(ext))
        for j in range(i + 1, len(ext))
        if s.has_edge(ext[i], ext[j])
    )
    return QfTypeCode(len(tup), meet_rel, edge_rel, eq_rel)


def qf_type_over(s: MixedStructure, xs: Iterable[int], base: Iterable[int]) -> QfTypeCode:
    """Type of a tuple over a parameter set (base enumerated sorted, first)."""
    return qf_type(s, tuple(sorted(base)) + tuple(xs))


# ---------------------------------------------------------------------------
# embeddings


@dataclass(frozen=True)
class Embedding:
    source: MixedStructure
    target: MixedStructure
    pairs: tuple[tuple[int, int], ...]

    @cached_property
    def map(self) -> dict[int, int]:
        return dict(self.pairs)

    def __call__(self, v: int) -> int:
        return self.map[v]


def make_embedding(source: MixedStructure, target: MixedStructure, mapping: dict[int, int]) -> Embedding:
    return Embedding(source, target, tuple(sorted(mapping.items())))


def is_embedding(e: Embedding) -> tuple[bool, Optional[str]]:
    """Check that e preserves and reflects all structure; returns (ok, reason)."""
    src, tgt, f = e.source, e.target, e.map
    if src.n == 0:
        # the empty structure embeds into anything; no atoms to check
        return (True, None) if not f else (False, "map not total on the source")
    if src.flavor.kind != tgt.flavor.kind:
        return False, "flavor kinds differ"
    nodes = list(range(src.n))
    if sorted(f.keys()) != nodes:
        return False, "map not total on the source"
    if len(set(f.values())) != len(f):
        return False, "map not injective"
    for v in f.values():
        if not (0 <= v < tgt.n):
            return False, "image out of range"
    ts, tt = src.tree, tgt.tree
    for a in nodes:
        for b in nodes:
            if ts.leq(a, b) != tt.leq(f[a], f[b]):
                return False, f"order atom broken at ({a}, {b})"
            if f[ts.meet(a, b)] != tt.meet(f[a], f[b]):
                return False, f"meet atom broken at ({a}, {b})"
            if src.has_edge(a, b) != tgt.has_edge(f[a], f[b]):
                return False, f"edge atom broken at ({a}, {b})"
    if src.flavor.kind == POINTED:
        if f[src.point] != tgt.point:  # type: ignore[index]
            return False, "designated point not preserved"
    if src.flavor.kind == SEMIBRANCHED:
        gs, gt = gamma_set(src), gamma_set(tgt)
        for a in nodes:
            if (a in gs) != (f[a] in gt):
                return False, f"chain membership broken at {a}"
            if f[semibranch_projection(src, a)] != semibranch_projection(tgt, f[a]):
                return False, f"projection broken at {a}"
    return True, None


def identity_embedding(s: MixedStructure) -> Embedding:
    return make_embedding(s, s, {v: v for v in range(s.n)})


def all_embeddings(src: MixedStructure, tgt: MixedStructure) -> list[Embedding]:
    """Every embedding of src into tgt, by backtracking in deterministic order.

    Nodes are assigned ancestors-first, so the meet of two assigned nodes is
    already assigned and every atom can be checked incrementally.
    """
    if src.n == 0:
        return [make_embedding(src, tgt, {})]
    if src.flavor.kind != tgt.flavor.kind or src.n > tgt.n:
        return []
    order = sorted(range(src.n), key=lambda v: (src.tree.depth[v], v))
    ss, tt = src.tree, tgt.tree
    sg = gamma_set(src) if src.flavor.kind == SEMIBRANCHED else frozenset()
    tg = gamma_set(tgt) if tgt.flavor.kind == SEMIBRANCHED else frozenset()
    out: list[Embedding] = []
    f: dict[int, int] = {}

    def ok(v: int, w: int) -> bool:
        if src.flavor.kind == POINTED and (v == src.point) != (w == tgt.point):
            return False
        if src.flavor.kind == SEMIBRANCHED:
            if (v in sg) != (w in tg):
                return False
            pv = semibranch_projection(src, v)
            if pv != v and f[pv] != semibranch_projection(tgt, w):
                return False
            if pv == v and semibranch_projection(tgt, w) != w:
                return False
        for u, fu in f.items():
            if ss.leq(u, v) != tt.leq(fu, w) or ss.leq(v, u) != tt.leq(w, fu):
                return False
            if f[ss.meet(u, v)] != tt.meet(fu, w):
                return False
            if src.has_edge(u, v) != tgt.has_edge(fu, w):
                return False
        return True

    def rec(i: int) -> None:
        if i == len(order):
            out.append(make_embedding(src, tgt, dict(f)))
            return
        v = order[i]
        used = set(f.values())
        for w in range(tgt.n):
            if w not in used and ok(v, w):
                f[v] = w
                rec(i + 1)
                del f[v]

    rec(0)
    return out


def extract_substructure(s: MixedStructure, nodes: Iterable[int]) -> tuple[MixedStructure, dict[int, int]]:
    """Induced structure on a closed node set, with the old->new id map.

    The set must be closed in the flavor language, otherwise meets would leave
    the set and the result would not embed back.
    """
    keep = sorted(set(nodes))
    cl = closure(s, keep)
    if set(keep) != set(cl):
        raise StructureError("substructure extraction needs a closed node set")
    old2new = {v: i for i, v in enumerate(keep)}
    t = s.tree
    parent: list[Optional[int]] = []
    for v in keep:
        anc = [u for u in t.chain_to_root(v)[1:] if u in old2new]
        parent.append(old2new[anc[0]] if anc else None)
    edges = frozenset(
        _norm_edge(old2new[u], old2new[v]) for (u, v) in s.edges if u in old2new and v in old2new
    )
    point = old2new[s.point] if s.flavor.kind == POINTED else None
    tip = None
    if s.flavor.kind == SEMIBRANCHED:
        td = t.depth
        tip_old = max((semibranch_projection(s, v) for v in keep), key=lambda u: td[u])
        tip = old2new[tip_old]
    sub = MixedStructure(
        MeetTree(tuple(parent)), edges, s.flavor, point, tip, s.treat_tip_as_branch
    )
    return sub, old2new


# ---------------------------------------------------------------------------
# enumeration up to isomorphism


@lru_cache(maxsize=None)
def _tree_codes(n: int) -> tuple[tuple, ...]:
    """Canonical codes of rooted trees on n nodes.

    A code is the sorted tuple of child subtree codes; multisets of children
    are enumerated as non-increasing (size, code) sequences.
    """
    if n <= 0:
        return ()
    if n == 1:
        return ((),)
    out: list[tuple] = []
    seen: set[tuple] = set()

    def extend(remaining: int, max_item, chosen: list) -> None:
        if remaining == 0:
            code = tuple(sorted(c for (_, c) in chosen))
            if code not in seen:
                seen.add(code)
                out.append(code)
            return
        top = remaining if max_item is None else min(remaining, max_item[0])
        for k in range(top, 0, -1):
            for sub in _tree_codes(k):
                item = (k, sub)
                if max_item is not None and item > max_item:
                    continue
                chosen.append(item)
                extend(remaining - k, item, chosen)
                chosen.pop()

    extend(n - 1, None, [])
    return tuple(out)


def _code_to_parent(code: tuple) -> tuple[Optional[int], ...]:
    parent: list[Optional[int]] = [None]

    def build(c: tuple, me: int) -> None:
        for child in sorted(c):
            parent.append(me)
            build(child, len(parent) - 1)

    build(code, 0)
    return tuple(parent)


def _decorated_codes(s: MixedStructure) -> dict[int, tuple]:
    """Per-node canonical codes with flavor marks folded in."""
    on_chain = gamma_set(s) if s.flavor.kind == SEMIBRANCHED else frozenset()
    codes: dict[int, tuple] = {}

    def rec(v: int) -> tuple:
        mark = (v == s.point, v == s.semibranch_tip, v in on_chain)
        code = (mark, tuple(sorted(rec(c) for c in s.tree.children[v])))
        codes[v] = code
        return code

    if s.n:
        rec(s.tree.root)
    return codes


def _labelings(s: MixedStructure, cap: int = 40320) -> list[list[int]]:
    """Preorder labelings respecting decorated-code ordering.

    Without edges a single labeling is canonical (tie swaps produce identical
    arrays because the tied subtrees are decoration-isomorphic). With edges,
    all tie permutations are generated, bounded by cap.
    """
    import itertools

    codes = _decorated_codes(s)
    if not s.n:
        return [[]]
    memo: dict[int, list[list[int]]] = {}

    def rec(v: int) -> list[list[int]]:
        if v in memo:
            return memo[v]
        kids = sorted(s.tree.children[v], key=lambda c: codes[c])
        groups: list[list[int]] = []
        for c in kids:
            if groups and codes[groups[-1][0]] == codes[c]:
                groups[-1].append(c)
            else:
                groups.append([c])
        if s.edges:
            pools = [list(itertools.permutations(g)) for g in groups]
        else:
            pools = [[tuple(g)] for g in groups]
        out: list[list[int]] = []
        for combo in itertools.product(*pools):
            order = [c for g in combo for c in g]
            child_lists = [rec(c) for c in order]
            for sub_combo in itertools.product(*child_lists):
                lab = [v]
                for sub in sub_combo:
                    lab.extend(sub)
                out.append(lab)
                if len(out) > cap:
                    raise BudgetError("too many tie labelings for canonical form")
        memo[v] = out
        return out

    return rec(s.tree.root)


def canonical_key(s: MixedStructure) -> tuple:
    """Isomorphism-invariant key; equal keys mean isomorphic structures."""
    best = None
    for lab in _labelings(s):
        old2new = {old: new for new, old in enumerate(lab)}
        parent = tuple(
            old2new[s.tree.parent[old]] if s.tree.parent[old] is not None else None
            for old in lab
        )
        edges = tuple(sorted(_norm_edge(old2new[u], old2new[v]) for (u, v) in s.edges))
        point = old2new[s.point] if s.point is not None else None
        tip = old2new[s.semibranch_tip] if s.semibranch_tip is not None else None
        key = (parent, edges, point, tip)
        if best is None or key < best:
            best = key
    return (
        s.n,
        s.flavor.kind,
        s.flavor.relational,
        s.treat_tip_as_branch,
        best,
    )


def _as_flavor(flavor, with_edges: bool) -> Flavor:
    if isinstance(flavor, Flavor):
        return Flavor(flavor.kind, flavor.relational or with_edges)
    return Flavor(str(flavor), with_edges)


def enumerate_structures(flavor, n: int, with_edges: bool = False) -> list[MixedStructure]:
    """All structures with exactly n nodes and the given flavor, one per
    isomorphism class, deterministically ordered.

    With the relational layer on, every edge subset is enumerated, so the
    candidate count grows as 2^(n choose 2); the budget guard refuses early
    with an estimate instead of stalling.
    """
    import itertools

    fl = _as_flavor(flavor, with_edges)
    if fl.kind not in KINDS:
        raise StructureError(f"unknown flavor kind {fl.kind!r}")
    if n <= 0:
        return []
    trees = _tree_codes(n)
    decor = n if fl.kind in (POINTED, SEMIBRANCHED) else 1
    pairs = n * (n - 1) // 2
    edge_sets = (1 << pairs) if fl.relational else 1
    estimate = len(trees) * decor * edge_sets
    budget = enum_budget()
    if estimate > budget:
        raise BudgetError(
            f"enumeration would visit about {estimate} candidates, budget is {budget}; "
            "raise TREEFORGE_BUDGET to override"
        )
    all_pairs = list(itertools.combinations(range(n), 2))
    out: dict[tuple, MixedStructure] = {}
    for code in trees:
        parent = _code_to_parent(code)
        tree = MeetTree(parent)
        marks: list[tuple[Optional[int], Optional[int]]]
        if fl.kind == POINTED:
            marks = [(v, None) for v in range(n)]
        elif fl.kind == SEMIBRANCHED:
            marks = [(None, v) for v in range(n)]
        else:
            marks = [(None, None)]
        for point, tip in marks:
            if fl.relational:
                subsets = itertools.chain.from_iterable(
                    itertools.combinations(all_pairs, k) for k in range(pairs + 1)
                )
            else:
                subsets = iter([()])
            for es in subsets:
                cand = MixedStructure(tree, frozenset(es), fl, point, tip, False)
                key = canonical_key(cand)
                if key not in out:
                    out[key] = cand
    return [out[k] for k in sorted(out.keys(), key=repr)]


# ---------------------------------------------------------------------------
# JSON and DOT


def structure_to_json(s: MixedStructure) -> dict:
    return {
        "flavor": s.flavor.kind,
        "n": s.n,
        "parent": list(s.tree.parent),
        "edges": sorted([u, v] for (u, v) in s.edges),
        "point": s.point,
        "semibranch_tip": s.semibranch_tip,
        "treat_tip_as_branch": s.treat_tip_as_branch,
    }


def structure_from_json(d: dict) -> MixedStructure:
    kind = d.get("flavor", PLAIN)
    parent = tuple(d.get("parent", []))
    edges = frozenset(_norm_edge(int(u), int(v)) for u, v in d.get("edges", []))
    point = d.get("point")
    tip = d.get("semibranch_tip")
    return MixedStructure(
        MeetTree(parent),
        edges,
        Flavor(kind, bool(edges)),
        point,
        tip,
        bool(d.get("treat_tip_as_branch", False)),
    )


def structure_to_dot(s: MixedStructure) -> str:
    """Graphviz rendering: tree arcs solid, relational edges dashed, the point
    double-circled, chain nodes shaded."""
    lines = ["digraph tree {"]
    chain = gamma_set(s) if s.flavor.kind == SEMIBRANCHED else frozenset()
    for v in range(s.n):
        attrs = []
        if v == s.point:
            attrs.append("shape=doublecircle")
        if v in chain:
            attrs.append("style=filled")
            attrs.append("fillcolor=lightgray")
        label = f'label="{v}"'
        lines.append(f"  n{v} [{', '.join([label] + attrs)}];")
    for v, p in enumerate(s.tree.parent):
        if p is not None:
            lines.append(f"  n{p} -> n{v};")
    for (u, v) in sorted(s.edges):
        lines.append(f"  n{u} -> n{v} [style=dashed, dir=none, constraint=false];")
    lines.append("}")
    return "\n".join(lines) + "\n"
