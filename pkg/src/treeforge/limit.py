"""Incremental construction of generic tree expansions.

An Approximation grows a finite structure one point at a time toward the
generic object of its flavor: requests describe one-point extensions over
closed bases, a fair FIFO queue realizes them, and a discovery pass feeds the
queue from the structure built so far.  Requests are deduplicated by the
isomorphism class of (base, extension), so realizing one instance settles the
whole class.

Everything is deterministic for a fixed seed: discovery walks node sets in
sorted order, candidate searches run in id order, and randomness is confined
to one seeded generator used for sampling larger bases.
"""

import functools
import itertools
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from . import amalgam, core
from .core import Flavor, MixedStructure, QfTypeCode, StructureError, make_embedding

MAX_SWEEP_PASSES = 50
SAMPLED_BASE_DRAWS = 24
SAMPLED_REQUESTS_PER_CLASS = 20


@dataclass(frozen=True)
class ExtensionRequest:
    """One-point extension over a closed base.

    `steps` has one entry for a position whose closure adds a single point,
    two entries when an intermediate meet must come into existence first
    (branching off the interior of a tree edge).  Node ids refer to the host
    structure; `edge_pattern` lists the closure elements the new point is
    connected to, `inter_pattern` the same for the intermediate point.
    """

    base: tuple[int, ...]
    target_type: QfTypeCode
    steps: tuple[tuple, ...]
    edge_pattern: frozenset = frozenset()
    inter_pattern: frozenset = frozenset()
    inter_new_edge: bool = False

    @property
    def chained(self) -> bool:
        return len(self.steps) == 2


@dataclass
class MixReport:
    samples: int = 0
    realized: int = 0
    missing: int = 0
    enqueued: int = 0
    examples: list = field(default_factory=list)


@dataclass
class Approximation:
    current: MixedStructure
    flavor: Flavor
    seed: int
    step_log: list = field(default_factory=list)
    pending: deque = field(default_factory=deque)
    realized: set = field(default_factory=set)
    base_classes: dict = field(default_factory=dict)
    pair_classes: set = field(default_factory=set)
    key_cache: dict = field(default_factory=dict)
    scanned_n: int = 0
    grown: int = 0
    rng: random.Random = field(default_factory=random.Random)

    def key_of(self, req: ExtensionRequest) -> tuple:
        # sound to cache across growth: a request's atoms live on old nodes,
        # and growth never changes an old node's atoms
        k = self.key_cache.get(req)
        if k is None:
            k = request_key(self.current, req)
            self.key_cache[req] = k
        return k


# --- request construction -----------------------------------------------------


def _sortable(code: QfTypeCode) -> tuple:
    return (
        code.arity,
        tuple(sorted(code.meet_rel)),
        tuple(sorted(code.edge_rel)),
        tuple(sorted(code.eq_rel)),
    )


def _closure_sorted(s: MixedStructure, base) -> list[int]:
    cl = core.closure(s, base)
    if set(base) - set(cl):
        raise StructureError("base contains unknown nodes")
    return sorted(cl)


def _positions(s: MixedStructure, cl: list[int]) -> list[tuple[tuple, ...]]:
    """All tree positions of a new point over the closed set cl, single-step
    positions first, then the two-step ones branching off below an element."""
    kind = s.flavor.kind
    if not cl:
        if kind == core.PLAIN:
            return [(("lone", False),)]
        if kind == core.SEMIBRANCHED:
            lone = ("lone", True)
            return [(lone,), (lone, ("cone", None, False))]
        raise StructureError("a pointed base is never empty after closure")
    t = s.tree
    gamma = core.gamma_set(s) if kind == core.SEMIBRANCHED else frozenset()
    singles: list[tuple] = [("below_min",)]
    for p in cl:
        anc = next((u for u in t.chain_to_root(p)[1:] if u in set(cl)), None)
        if anc is not None:
            singles.append(("gap", anc, p))
    for g in cl:
        singles.append(("cone", g, False))
    if kind == core.SEMIBRANCHED:
        top = max((v for v in cl if v in gamma), key=lambda v: t.depth[v])
        singles.append(("cone", top, True))
    out: list[tuple[tuple, ...]] = [(stp,) for stp in singles]
    for stp in singles:
        if stp[0] in ("below_min", "gap"):
            out.append((stp, ("cone", None, False)))
    return out


def _materialize(s: MixedStructure, cl: list[int], req: ExtensionRequest):
    """Build the witness structure: the extracted base plus the requested
    point(s), new ids appended after the base.  Returns (wit, new_wit_ids)."""
    if cl:
        sub, old2new = core.extract_substructure(s, cl)
    else:
        sub = MixedStructure(
            core.MeetTree(()),
            frozenset(),
            Flavor(s.flavor.kind, s.flavor.relational),
            None,
            None,
            s.treat_tip_as_branch,
        )
        old2new = {}
    parent: list[Optional[int]] = [sub.tree.parent[i] for i in range(sub.n)]
    tip = sub.semibranch_tip
    kind = s.flavor.kind
    new_ids = []
    inter = None
    for stp in req.steps:
        k = len(parent)
        new_ids.append(k)
        tag = stp[0]
        if tag == "lone":
            parent.append(None)
            if kind == core.SEMIBRANCHED and stp[1]:
                tip = k
        elif tag == "below_min":
            root = sub.tree.root
            parent.append(parent[root])
            parent[root] = k
        elif tag == "gap":
            c, p = old2new[stp[1]], old2new[stp[2]]
            parent.append(c)
            parent[p] = k
        elif tag == "cone":
            g = inter if stp[1] is None else old2new[stp[1]]
            parent.append(g)
            if stp[2]:
                if g != tip:
                    raise StructureError("chain can only be raised at its top")
                tip = k
        else:
            raise StructureError(f"unknown position tag {tag!r}")
        inter = k
    edges = set()
    for x, y in sub.edges:
        edges.add((x, y))
    z = new_ids[-1]
    for hx in req.edge_pattern:
        edges.add(tuple(sorted((old2new[hx], z))))
    if req.chained:
        e = new_ids[0]
        for hx in req.inter_pattern:
            edges.add(tuple(sorted((old2new[hx], e))))
        if req.inter_new_edge:
            edges.add((e, z))
    wit = MixedStructure(
        core.MeetTree(tuple(parent)),
        frozenset(edges),
        Flavor(kind, s.flavor.relational),
        old2new[s.point] if kind == core.POINTED else None,
        tip if kind == core.SEMIBRANCHED else None,
        s.treat_tip_as_branch,
    )
    problems = core.validate_structure(wit)
    if problems:
        raise StructureError(f"unrealizable request: {problems}")
    return wit, new_ids


def _finish_request(s: MixedStructure, cl: list[int], steps, edge_pattern,
                    inter_pattern=frozenset(), inter_new_edge=False) -> ExtensionRequest:
    req = ExtensionRequest(
        tuple(cl), QfTypeCode(0, frozenset(), frozenset(), frozenset()),
        tuple(steps), frozenset(edge_pattern), frozenset(inter_pattern), inter_new_edge,
    )
    wit, new_ids = _materialize(s, cl, req)
    tup = tuple(range(len(cl))) + tuple(new_ids)
    target = core.qf_type(wit, tup)
    return ExtensionRequest(
        tuple(cl), target, tuple(steps), frozenset(edge_pattern),
        frozenset(inter_pattern), inter_new_edge,
    )


def enumerate_point_extensions(s: MixedStructure, base) -> list[ExtensionRequest]:
    """Every one-point extension request over the closed base.

    Positions that create one new point are crossed with all edge patterns to
    the base when the relational layer is on; two-point positions keep the
    intermediate meet edgeless, which is enough for the extension property
    because intermediate points are never constrained by a request.
    """
    cl = sorted(base)
    if set(cl) != set(core.closure(s, cl)):
        raise StructureError("base is not closed")
    patterns = [frozenset()]
    if s.flavor.relational:
        patterns = [frozenset(c) for r in range(len(cl) + 1)
                    for c in itertools.combinations(cl, r)]
    out = []
    for steps in _positions(s, cl):
        for pat in patterns:
            out.append(_finish_request(s, cl, steps, pat))
    return out


def request_key(s: MixedStructure, req: ExtensionRequest) -> tuple:
    """Isomorphism-class key of (base, extension).

    The base is canonicalized; the extension code is minimized over all base
    orderings compatible with the single-node invariants, which is exactly the
    orbit of the base's automorphisms.
    """
    cl = list(req.base)
    wit, new_ids = _materialize(s, cl, req)
    k = len(cl)
    inv = {v: (_sortable(core.qf_type(wit, (v,))), ) for v in range(k)}
    groups: dict[tuple, list[int]] = {}
    for v in range(k):
        groups.setdefault(inv[v], []).append(v)
    blocks = [groups[key] for key in sorted(groups)]
    total = 1
    for b in blocks:
        for i in range(2, len(b) + 1):
            total *= i
    base_key = (core.canonical_key(core.extract_substructure(s, cl)[0])
                if cl else ("empty", s.flavor.kind))
    if total > 24:
        # base too symmetric to canonicalize cheaply; the concrete key is still
        # sound for skipping (equal keys imply isomorphic requests), it merely
        # re-searches isomorphic copies instead of recognizing them
        return (base_key, _sortable(core.qf_type(wit, tuple(range(k)) + tuple(new_ids))), "raw")
    best = None
    for perm_parts in itertools.product(*(itertools.permutations(b) for b in blocks)):
        order = [v for part in perm_parts for v in part]
        code = _sortable(core.qf_type(wit, tuple(order) + tuple(new_ids)))
        if best is None or code < best:
            best = code
    return (base_key, best)


# --- realization ----------------------------------------------------------------


def _gap_interior(t, c: int, p: int):
    cur = t.parent[p]
    while cur is not None and cur != c:
        yield cur
        cur = t.parent[cur]


def _single_candidates(s: MixedStructure, cl: list[int], stp: tuple, inter: Optional[int]):
    t = s.tree
    tag = stp[0]
    if tag == "lone":
        if stp[1]:
            yield from sorted(core.gamma_set(s))
        else:
            yield from range(s.n)
    elif tag == "below_min":
        m = min(cl, key=lambda v: t.depth[v])
        yield from sorted(t.chain_to_root(m)[1:])
    elif tag == "gap":
        yield from sorted(_gap_interior(t, stp[1], stp[2]))
    elif tag == "cone":
        g = inter if stp[1] is None else stp[1]
        if stp[2]:
            tip = s.semibranch_tip
            yield from sorted(v for v in t.chain_to_root(tip) if t.lt(g, v))
        else:
            # cones already met by the base (or the intermediate) are taken
            blocked = core.cone_union(s, g, cl)
            for ch in sorted(t.children[g]):
                if ch in blocked:
                    continue
                yield from sorted(t.descendants(ch))


def _edge_ok(s: MixedStructure, z: int, cl: list[int], pattern: frozenset) -> bool:
    return all(s.has_edge(z, x) == (x in pattern) for x in cl)


def search_realizer(s: MixedStructure, req: ExtensionRequest) -> Optional[tuple[int, ...]]:
    """Existing nodes realizing the request, or None.  Returns the new-point
    ids only (intermediate first when the request is chained)."""
    cl = list(req.base)
    clset = set(cl)
    if req.chained:
        for e in _single_candidates(s, cl, req.steps[0], None):
            if e in clset or not _edge_ok(s, e, cl, req.inter_pattern):
                continue
            for z in _single_candidates(s, cl, req.steps[1], e):
                if z in clset or z == e:
                    continue
                if not _edge_ok(s, z, cl, req.edge_pattern):
                    continue
                if s.has_edge(e, z) != req.inter_new_edge:
                    continue
                if core.qf_type(s, tuple(cl) + (e, z)) == req.target_type:
                    return (e, z)
        return None
    for z in _single_candidates(s, cl, req.steps[0], None):
        if z in clset or not _edge_ok(s, z, cl, req.edge_pattern):
            continue
        if core.qf_type(s, tuple(cl) + (z,)) == req.target_type:
            return (z,)
    return None


def _grow(appr: Approximation, req: ExtensionRequest) -> tuple[int, ...]:
    s = appr.current
    cl = list(req.base)
    wit, new_ids = _materialize(s, cl, req)
    if cl:
        sub, old2new = core.extract_substructure(s, cl)
        f = make_embedding(sub, s, {new: old for old, new in old2new.items()})
        g = make_embedding(sub, wit, {i: i for i in range(sub.n)})
    else:
        sub = MixedStructure(core.MeetTree(()), frozenset(), Flavor(core.PLAIN))
        f = make_embedding(sub, s, {})
        g = make_embedding(sub, wit, {})
    if s.flavor.relational:
        res = amalgam.amalgamate_mixed(f, g)
    else:
        res = amalgam.amalgamate_tree(f, g)
    for old in range(s.n):  # stages chain by identity
        assert res.left(old) == old
    appr.current = res.amalgam
    return tuple(res.right(w) for w in new_ids)


def realize_extension(appr: Approximation, req: ExtensionRequest) -> int:
    """Return a node realizing the request, growing the structure if needed."""
    found = search_realizer(appr.current, req)
    grew = found is None
    if grew:
        found = _grow(appr, req)
        check = core.qf_type(appr.current, tuple(req.base) + tuple(found))
        if check != req.target_type:
            raise StructureError("growth failed to realize the requested type")
        appr.grown += len(found)
    key = appr.key_of(req)
    appr.realized.add(key)
    appr.step_log.append(
        {"base": list(req.base), "steps": [list(t) for t in req.steps],
         "edges": sorted(req.edge_pattern), "inter_edges": sorted(req.inter_pattern),
         "inter_new_edge": req.inter_new_edge, "nodes": list(found), "grew": grew}
    )
    return found[-1]


# --- discovery and the build loop -----------------------------------------------


def _class_key_of_base(s: MixedStructure, cl: list[int]) -> tuple:
    if not cl:
        return ("empty", s.flavor.kind, s.flavor.relational)
    return core.canonical_key(core.extract_substructure(s, cl)[0])


@functools.lru_cache(maxsize=None)
def _pair_class_count(kind: str, relational: bool) -> Optional[int]:
    """How many isomorphism classes a two-raw-element closure can possibly hit.

    A closed set is the closure of two elements of some host exactly when it
    is generated by two of its own elements (closure is intrinsic to the
    substructure).  Plain closures of a pair have at most three nodes, so
    counting generated structures there counts the whole reachable family.
    Only computed for the plain flavor, where no point or chain decoration
    can disagree between enumeration conventions.
    """
    if kind != core.PLAIN:
        return None
    count = 0
    for n in (2, 3):
        for s in core.enumerate_structures(kind, n, with_edges=relational):
            nodes = range(s.n)
            if any(
                set(core.closure(s, x)) == set(nodes)
                for x in itertools.combinations(nodes, 2)
            ):
                count += 1
    return count


def _discover(appr: Approximation, sample: bool = True) -> int:
    """Scan small bases, enqueue requests of unseen classes.

    Incremental: subsets entirely inside the already-scanned prefix are
    skipped.  Growth never changes an old node's atoms, so the class key of a
    base inside the prefix is exactly what it was when first recorded, and a
    scan of subsets touching new nodes is a complete scan.  Pair scanning
    also stops outright once the observed pair-closure classes exhaust the
    reachable family, which is what keeps long builds from going quadratic.
    """
    s = appr.current
    lo = appr.scanned_n
    n = s.n
    added = 0
    cap = _pair_class_count(s.flavor.kind, s.flavor.relational)

    def process(raw: tuple[int, ...]) -> None:
        nonlocal added
        cl = _closure_sorted(s, raw)
        ck = _class_key_of_base(s, cl)
        if len(raw) == 2:
            appr.pair_classes.add(ck)
        if ck in appr.base_classes:
            return
        appr.base_classes[ck] = tuple(cl)
        for req in enumerate_point_extensions(s, cl):
            if appr.key_of(req) not in appr.realized:
                appr.pending.append(req)
                added += 1

    if lo == 0:
        process(())
    for a in range(lo, n):
        process((a,))
    if cap is None or len(appr.pair_classes) < cap:
        for a, b in itertools.combinations(range(n), 2):
            if b < lo:
                continue
            process((a, b))
            if cap is not None and len(appr.pair_classes) >= cap:
                break
    # sampled larger bases: a few draws per pass keeps the queue fair
    if sample and n >= 4:
        for _ in range(SAMPLED_BASE_DRAWS):
            k = appr.rng.choice((3, 3, 3, 4))
            raw = appr.rng.sample(range(n), k)
            cl = _closure_sorted(s, raw)
            ck = _class_key_of_base(s, cl)
            if ck in appr.base_classes:
                continue
            appr.base_classes[ck] = tuple(cl)
            reqs = enumerate_point_extensions(s, cl)
            if len(reqs) > SAMPLED_REQUESTS_PER_CLASS:
                reqs = appr.rng.sample(reqs, SAMPLED_REQUESTS_PER_CLASS)
            for req in reqs:
                if appr.key_of(req) not in appr.realized:
                    appr.pending.append(req)
                    added += 1
    appr.scanned_n = n
    return added


def seed_structure(kind: str, relational: bool) -> MixedStructure:
    if kind == core.PLAIN:
        return core.make_structure([None], relational=relational)
    if kind == core.POINTED:
        return core.make_structure([None], relational=relational, point=0)
    return core.make_structure(
        [None], relational=relational, tip=0, treat_tip_as_branch=True
    )


def build_approximation(
    kind: str,
    relational: bool,
    steps: int,
    seed: int,
    sweep: Optional[bool] = None,
) -> Approximation:
    """Grow the generic structure of the given flavor by `steps` new nodes.

    Discovery fires on an exponential schedule of growth counts, so early
    stages are rescanned often and late ones rarely.  After the budget a
    closing sweep re-realizes every request over every base of up to two raw
    elements until none is missing; the sweep may grow the structure past
    `steps` but terminates because the class space at that size is finite and
    realized classes stay realized.

    The sweep defaults to on except for the pointed and branched flavors with
    edges on: there the closure of two points drags in the constant or the
    projections, and crossing up to six base nodes with all edge patterns
    makes the class space far too large to exhaust at this scale.  Those
    builds stay fair (FIFO over deduplicated requests) without the sweep;
    pass sweep=True to force the exhaustive ending anyway.
    """
    if steps < 0:
        raise StructureError("steps must be nonnegative")
    if sweep is None:
        sweep = kind == core.PLAIN or not relational
    appr = Approximation(
        current=seed_structure(kind, relational),
        flavor=Flavor(kind, relational),
        seed=seed,
        rng=random.Random(seed),
    )
    next_discovery = 0
    while appr.grown < steps:
        if appr.grown >= next_discovery:
            _discover(appr)
            next_discovery = 1 if next_discovery == 0 else next_discovery * 2
        if not appr.pending:
            if _discover(appr) == 0:
                break
            continue
        req = appr.pending.popleft()
        if appr.key_of(req) in appr.realized:
            continue
        realize_extension(appr, req)
    if not sweep:
        return appr
    # closing sweep: exhaust the <=2-element request space
    for _ in range(MAX_SWEEP_PASSES):
        if _discover(appr, sample=False) == 0 and not appr.pending:
            break
        while appr.pending:
            req = appr.pending.popleft()
            if appr.key_of(req) in appr.realized:
                continue
            realize_extension(appr, req)
    else:
        raise StructureError("closing sweep did not converge")
    return appr


def replay(kind: str, relational: bool, step_log: list) -> Approximation:
    """Rebuild a structure from a logged run; grown steps are re-grown, found
    steps are re-checked against the logged node."""
    appr = Approximation(
        current=seed_structure(kind, relational),
        flavor=Flavor(kind, relational),
        seed=0,
    )
    for entry in step_log:
        cl = sorted(entry["base"])
        req = _finish_request(
            appr.current, cl, [tuple(t) for t in entry["steps"]],
            frozenset(entry["edges"]), frozenset(entry.get("inter_edges", ())),
            entry.get("inter_new_edge", False),
        )
        if entry["grew"]:
            got = _grow(appr, req)
        else:
            got = tuple(entry["nodes"])
            if core.qf_type(appr.current, tuple(cl) + got) != req.target_type:
                raise StructureError("replayed log entry does not re-validate")
        if list(got) != entry["nodes"]:
            raise StructureError("replay diverged from the log")
        appr.step_log.append(entry)
    return appr


# --- homogeneity ------------------------------------------------------------------


def _describe_over(s: MixedStructure, cl: list[int], z: int):
    """Position and edge data of an existing node over a closed set, in the
    same vocabulary requests use.  Two-point answers list the intermediate
    meet first."""
    t = s.tree
    clset = set(cl)
    if z in clset:
        raise StructureError("node already lies in the base")
    gamma = core.gamma_set(s) if s.flavor.kind == core.SEMIBRANCHED else frozenset()

    def one_point_step(w: int) -> tuple:
        below = [x for x in cl if t.lt(x, w)]
        above = [x for x in cl if t.lt(w, x)]
        if above:
            p = min(above, key=lambda v: t.depth[v])
            if below:
                c = max(below, key=lambda v: t.depth[v])
                return ("gap", c, p)
            return ("below_min",)
        if not cl:
            return ("lone", w in gamma)
        e = max((t.meet(w, x) for x in cl), key=lambda v: t.depth[v])
        assert e in clset
        return ("cone", e, w in gamma)

    meets = [t.meet(z, x) for x in cl]
    e = max(meets, key=lambda v: t.depth[v]) if cl else None
    pattern = frozenset(x for x in cl if s.has_edge(z, x))
    if e is None or e in clset or e == z:
        if e == z:  # z sits below or between base elements
            return (one_point_step(z),), pattern, frozenset(), False
        if e is None and s.flavor.kind == core.SEMIBRANCHED and z not in gamma:
            pz = core.semibranch_projection(s, z)
            ipat = frozenset(x for x in cl if s.has_edge(pz, x))
            return ((("lone", True), ("cone", None, False)), pattern, ipat,
                    s.has_edge(pz, z))
        return (one_point_step(z),), pattern, frozenset(), False
    ipat = frozenset(x for x in cl if s.has_edge(e, x))
    return ((one_point_step(e), ("cone", None, False)), pattern, ipat,
            s.has_edge(e, z))


def extend_partial_iso(appr: Approximation, p: dict, want_in_domain,
                       avoid_fix_outside=None) -> dict:
    """Back-and-forth step: extend p until its domain and image cover the
    requested nodes, growing the approximation when no witness exists.

    With avoid_fix_outside given, newly added pairs are never fixed points
    outside that set; fresh witnesses satisfy this automatically.
    """
    s = appr.current
    dom = sorted(p)
    img = [p[d] for d in dom]
    if sorted(img) != sorted(set(img)):
        raise StructureError("map is not injective")
    if set(dom) != set(core.closure(s, dom)) or set(img) != set(core.closure(s, img)):
        raise StructureError("domain and image must be closed")
    if core.qf_type(s, tuple(dom)) != core.qf_type(s, tuple(img)):
        raise StructureError("map is not a partial isomorphism")
    p = dict(p)

    def add_one(fwd: dict, a: int, avoid) -> None:
        """Extend fwd so a is in its domain, closing as needed.

        The missing closure points are added shallowest-first, so each one is
        a genuine one-point extension over the domain built so far: its
        deepest meet with the domain, and its projection, are already mapped.
        """
        s2 = appr.current
        need = [
            v
            for v in sorted(
                core.closure(s2, sorted(fwd) + [a]),
                key=lambda v: (s2.tree.depth[v], v),
            )
            if v not in fwd
        ]
        for w in need:
            s2 = appr.current
            dom3 = sorted(fwd)
            steps, pat, _, _ = _describe_over(s2, dom3, w)
            assert len(steps) == 1, "shallowest-first order keeps steps single"
            stp = steps[0]
            if stp[0] == "gap":
                stp = ("gap", fwd[stp[1]], fwd[stp[2]])
            elif stp[0] == "cone" and stp[1] is not None:
                stp = ("cone", fwd[stp[1]], stp[2])
            img3 = sorted(fwd[d] for d in dom3)
            req = _finish_request(s2, img3, [stp], frozenset(fwd[x] for x in pat))
            taken = set(fwd.values())
            found = None
            for (z,) in _request_matches(s2, req):
                if z in taken:
                    continue
                if z == w and avoid is not None and w not in avoid:
                    continue
                found = z
                break
            if found is None:
                grown = _grow(appr, req)
                found = grown[0]
                if core.qf_type(appr.current, tuple(req.base) + grown) != req.target_type:
                    raise StructureError("growth failed during extension")
            fwd[w] = found

    for a in want_in_domain:
        if a not in p:
            add_one(p, a, avoid_fix_outside)
    for a in want_in_domain:
        if a not in p.values():
            inv = {v: k for k, v in p.items()}
            add_one(inv, a, avoid_fix_outside)
            p = {v: k for k, v in inv.items()}
    dom = sorted(p)
    if core.qf_type(appr.current, tuple(dom)) != core.qf_type(
        appr.current, tuple(p[d] for d in dom)
    ):
        raise StructureError("extension broke the partial isomorphism")
    return p


def _request_matches(s: MixedStructure, req: ExtensionRequest):
    """All existing realizations of a request, lazily, in id order."""
    cl = list(req.base)
    clset = set(cl)
    if req.chained:
        for e in _single_candidates(s, cl, req.steps[0], None):
            if e in clset or not _edge_ok(s, e, cl, req.inter_pattern):
                continue
            for z in _single_candidates(s, cl, req.steps[1], e):
                if z in clset or z == e:
                    continue
                if not _edge_ok(s, z, cl, req.edge_pattern):
                    continue
                if s.has_edge(e, z) != req.inter_new_edge:
                    continue
                if core.qf_type(s, tuple(cl) + (e, z)) == req.target_type:
                    yield (e, z)
        return
    for z in _single_candidates(s, cl, req.steps[0], None):
        if z in clset or not _edge_ok(s, z, cl, req.edge_pattern):
            continue
        if core.qf_type(s, tuple(cl) + (z,)) == req.target_type:
            yield (z,)


# --- generic mix checking -----------------------------------------------------------


def _tree_part(code: QfTypeCode) -> tuple:
    return (code.arity, tuple(sorted(code.meet_rel)), tuple(sorted(code.eq_rel)))


def _raw_edge_part(s: MixedStructure, tup) -> frozenset:
    return frozenset(
        (i, j) for i, j in itertools.combinations(range(len(tup)), 2)
        if s.has_edge(tup[i], tup[j])
    )


def check_generic_mix(appr: Approximation, budget: int) -> MixReport:
    """Sample pairs of tuples with matching equality patterns and search for a
    tuple realizing the tree type of the first and the edge type of the second.
    Missing pairs enqueue the one-point requests a realization would need."""
    if not appr.flavor.relational:
        raise StructureError("generic mix needs the relational layer")
    s = appr.current
    rng = random.Random(appr.seed ^ 0x6D6978)
    report = MixReport()
    for _ in range(budget):
        k = rng.choice((1, 2, 2))
        if s.n < k:
            break
        t1 = tuple(rng.sample(range(s.n), k))
        t2 = tuple(rng.sample(range(s.n), k))
        report.samples += 1
        want_tree = _tree_part(core.qf_type(s, t1))
        want_edges = _raw_edge_part(s, t2)
        found = None
        if k == 1:
            found = t1
        else:
            for c1 in range(s.n):
                if _tree_part(core.qf_type(s, (c1,))) != _tree_part(core.qf_type(s, (t1[0],))):
                    continue
                for c2 in range(s.n):
                    if c2 == c1:
                        continue
                    if _raw_edge_part(s, (c1, c2)) != want_edges:
                        continue
                    if _tree_part(core.qf_type(s, (c1, c2))) == want_tree:
                        found = (c1, c2)
                        break
                if found:
                    break
        if found:
            report.realized += 1
        else:
            report.missing += 1
            if len(report.examples) < 10:
                report.examples.append({"tree_of": list(t1), "edges_of": list(t2)})
            # one step toward the missing pair: a partner for t1[0] in the
            # right tree position with the wanted edge pattern
            try:
                cl = _closure_sorted(s, [t1[0]])
                steps, _, _, _ = _describe_over(s, cl, t1[1])
                pat = frozenset({t1[0]}) if (0, 1) in want_edges else frozenset()
                req = _finish_request(s, cl, steps, pat)
            except StructureError:
                continue
            if appr.key_of(req) not in appr.realized:
                appr.pending.append(req)
                report.enqueued += 1
    return report
