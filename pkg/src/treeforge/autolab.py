"""Automorphisms of finite meet trees: classification and staged building.

Two layers. Total automorphisms of a single finite structure support the
fixed-chain dichotomy, fan checks over a base point, conjugated products and
tuple ordering. Partial automorphisms of a growing approximation support the
three saturation patterns, cone permutation realization, and the staged
commutator recipes whose words come out strictly increasing on the covered
part of the designated chain.

Everything here is certificate first: the classification and the builders
return data that replays by direct evaluation against the final state, and
any internal step that cannot deliver what the recipe promises raises
instead of degrading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

from . import core
from . import indep
from . import limit
from .core import MixedStructure, QfTypeCode, StructureError
from .limit import Approximation


# ---------------------------------------------------------------------------
# total automorphisms


@dataclass(frozen=True)
class FiniteAutomorphism:
    """Total automorphism of one finite structure, stored as a permutation."""

    structure: MixedStructure
    perm: tuple[int, ...]

    def __call__(self, v: int) -> int:
        return self.perm[v]

    def inverse(self) -> "FiniteAutomorphism":
        inv = [0] * len(self.perm)
        for i, j in enumerate(self.perm):
            inv[j] = i
        return FiniteAutomorphism(self.structure, tuple(inv))

    def compose(self, other: "FiniteAutomorphism") -> "FiniteAutomorphism":
        """self after other: the result sends v to self(other(v))."""
        if self.structure != other.structure:
            raise StructureError("automorphisms live on different structures")
        return FiniteAutomorphism(self.structure, tuple(self.perm[j] for j in other.perm))

    def power(self, k: int) -> "FiniteAutomorphism":
        base = self if k >= 0 else self.inverse()
        out = identity_automorphism(self.structure)
        for _ in range(abs(k)):
            out = base.compose(out)
        return out

    def conjugate_by(self, beta: "FiniteAutomorphism") -> "FiniteAutomorphism":
        """The conjugate beta^-1 self beta, maps applied right to left."""
        return beta.inverse().compose(self).compose(beta)

    def fixed_points(self) -> tuple[int, ...]:
        return tuple(v for v, w in enumerate(self.perm) if v == w)

    def order(self) -> int:
        seen = [False] * len(self.perm)
        out = 1
        for v in range(len(self.perm)):
            length = 0
            w = v
            while not seen[w]:
                seen[w] = True
                w = self.perm[w]
                length += 1
            if length:
                out = math.lcm(out, length)
        return out


def identity_automorphism(s: MixedStructure) -> FiniteAutomorphism:
    return FiniteAutomorphism(s, tuple(range(s.n)))


def finite_automorphism(s: MixedStructure, mapping) -> FiniteAutomorphism:
    """Validate a node map as a total automorphism of s.

    Accepts a dict or a sequence. Both directions are checked as embeddings,
    so every atom is preserved and reflected.
    """
    if isinstance(mapping, Mapping):
        perm = tuple(mapping.get(v, -1) for v in range(s.n))
    else:
        perm = tuple(mapping)
    if sorted(perm) != list(range(s.n)):
        raise StructureError("not a permutation of the node set")
    fwd = {v: perm[v] for v in range(s.n)}
    ok, why = core.is_embedding(core.make_embedding(s, s, fwd))
    if not ok:
        raise StructureError(f"not an automorphism: {why}")
    ok, why = core.is_embedding(core.make_embedding(s, s, {b: a for a, b in fwd.items()}))
    if not ok:
        raise StructureError(f"inverse direction fails: {why}")
    return FiniteAutomorphism(s, perm)


# ---------------------------------------------------------------------------
# fixed-chain dichotomy


BRANCH_FIXED = "branch_fixed"
FAN = "fan"


@dataclass(frozen=True)
class DichotomyResult:
    """Classification certificate: a root-first pointwise fixed chain.

    With kind branch_fixed the chain runs from the root to a fixed leaf.
    With kind fan its top is a maximal fixed point and every node strictly
    above meets its image exactly there.
    """

    kind: str
    chain: tuple[int, ...]

    @property
    def apex(self) -> int:
        return self.chain[-1]


def fixed_chain_dichotomy(alpha: FiniteAutomorphism) -> DichotomyResult:
    """Classify a finite automorphism by its fixed points.

    The fixed set is downward closed and contains the root, so the maximal
    fixed points head full fixed chains. When one of them is a leaf the
    automorphism pointwise fixes a root-to-leaf chain; that classification
    wins. Otherwise the automorphism is a fan above any maximal fixed
    point, and the smallest chain is certified.
    """
    s = alpha.structure
    t = s.tree
    fixed = {v for v in range(s.n) if alpha(v) == v}
    if t.root not in fixed:
        raise StructureError("an automorphism never moves the root")
    maximal = [v for v in sorted(fixed) if not any(t.lt(v, w) for w in fixed)]
    chains = []
    for c in maximal:
        ch = tuple(reversed(t.chain_to_root(c)))
        bad = [v for v in ch if v not in fixed]
        if bad:
            raise StructureError(f"fixed set fails downward closure at {bad[0]}")
        chains.append(ch)
    leafy = [ch for ch in chains if not t.children[ch[-1]]]
    if leafy:
        return DichotomyResult(BRANCH_FIXED, min(leafy))
    cert = min(chains)
    apex = cert[-1]
    for v in range(s.n):
        if t.lt(apex, v) and t.meet(v, alpha(v)) != apex:
            raise StructureError(f"fan property fails at {v} above apex {apex}")
    return DichotomyResult(FAN, cert)


def replay_dichotomy(alpha: FiniteAutomorphism, result: DichotomyResult) -> bool:
    """Re-check a dichotomy certificate by direct evaluation."""
    s = alpha.structure
    t = s.tree
    ch = result.chain
    if not ch or ch[0] != t.root:
        return False
    for u, v in zip(ch, ch[1:]):
        if t.parent[v] != u:
            return False
    if any(alpha(v) != v for v in ch):
        return False
    apex = ch[-1]
    if any(alpha(v) == v and t.lt(apex, v) for v in range(s.n)):
        return False
    leaf_chain = any(
        alpha(v) == v
        and not t.children[v]
        and all(alpha(u) == u for u in t.chain_to_root(v))
        for v in range(s.n)
    )
    if result.kind == BRANCH_FIXED:
        return not t.children[apex]
    if result.kind != FAN:
        return False
    if leaf_chain:
        return False  # the pointwise fixed branch would have won
    return all(t.meet(v, alpha(v)) == apex for v in range(s.n) if t.lt(apex, v))


# ---------------------------------------------------------------------------
# fans


@dataclass(frozen=True)
class FanReport:
    """Fan checks for the powers of one automorphism above a base point.

    powers[k-1] says whether every node above-or-equal the base meets its
    image under the k-th power exactly at the base. vacuous marks a base
    with nothing strictly above it.
    """

    base: int
    order: int
    vacuous: bool
    powers: tuple[bool, ...]

    @property
    def is_fan(self) -> bool:
        return bool(self.powers) and self.powers[0]


def is_fan_above(alpha: FiniteAutomorphism, g: int,
                 max_power: Optional[int] = None) -> FanReport:
    """Evaluate the fan property of alpha and its powers above g.

    The quantifier includes g itself; a fan therefore fixes its apex, since
    g must meet its own image at g from both sides of the orbit.
    """
    s = alpha.structure
    t = s.tree
    order = alpha.order()
    top = order if max_power is None else max_power
    if top < 1:
        raise StructureError("at least one power is needed")
    above = [v for v in range(s.n) if t.leq(g, v)]
    cur = alpha
    flags = []
    for _ in range(top):
        flags.append(all(t.meet(v, cur(v)) == g for v in above))
        cur = alpha.compose(cur)
    return FanReport(g, order, above == [g], tuple(flags))


# reference factor counts for the abstract products; recorded, not enforced
CONJUGATE_BOUNDS = (
    ("fan_product", 8),
    ("semibranch_product", 4),
    ("combined_product", 32),
    ("conormal_generation", 16),
)


@dataclass(frozen=True)
class ConjugacyCheck:
    product: FiniteAutomorphism
    report: FanReport
    cone_action: Optional[tuple[tuple[int, int], ...]]
    bounds: tuple[tuple[str, int], ...] = CONJUGATE_BOUNDS


def compose_and_check_fan(alpha: FiniteAutomorphism, conjugators, g: int,
                          max_power: Optional[int] = None) -> ConjugacyCheck:
    """Product of conjugated powers of alpha with a fan report at g.

    conjugators lists (exponent, beta) factors; the written word applies
    right to left, so the last factor acts first. When the product fixes g
    the induced action on the cones above g is reported as pairs of cone
    representatives.
    """
    s = alpha.structure
    prod = identity_automorphism(s)
    for exp, beta in conjugators:
        if beta.structure != s:
            raise StructureError("conjugator lives on a different structure")
        prod = prod.compose(alpha.power(exp).conjugate_by(beta))
    report = is_fan_above(prod, g, max_power)
    action = None
    if prod(g) == g:
        action = tuple(
            (min(c), min(core.cone_of(s, g, prod(min(c)))))
            for c in core.cones_at(s, g)
        )
    return ConjugacyCheck(prod, report, action)


# ---------------------------------------------------------------------------
# partial automorphisms of an approximation


@dataclass
class PartialAutomorphism:
    """Finite partial isomorphism of the current approximation.

    The domain and image are closed node sets of appr.current and the map
    matches their types position for position under the sorted enumeration
    of the domain.
    """

    appr: Approximation
    map: dict[int, int]
    stage_log: list = field(default_factory=list)

    def __call__(self, v: int) -> int:
        if v not in self.map:
            raise StructureError(f"node {v} is outside the domain")
        return self.map[v]

    @property
    def domain(self) -> frozenset[int]:
        return frozenset(self.map)

    @property
    def image(self) -> frozenset[int]:
        return frozenset(self.map.values())

    def preimage(self, v: int) -> int:
        for k, w in self.map.items():
            if w == v:
                return k
        raise StructureError(f"node {v} is outside the image")


def partial_automorphism(appr: Approximation, mapping) -> PartialAutomorphism:
    checked = limit.extend_partial_iso(appr, dict(mapping), ())
    return PartialAutomorphism(appr, checked, [])


def _assert_iso(s: MixedStructure, p: dict) -> None:
    dom = sorted(p)
    img = [p[x] for x in dom]
    if len(set(img)) != len(img):
        raise StructureError("partial map lost injectivity")
    if core.qf_type(s, tuple(dom)) != core.qf_type(s, tuple(img)):
        raise StructureError("partial map stopped preserving types")


def _img_slot(appr: Approximation, p: dict, v: int, lo, hi, avoid, fix_allowed):
    """Search or grow an image for one new domain point of p.

    The closure of v over the domain must add nothing but v itself. lo and
    hi clamp a chain point's image onto the open interval between them;
    avoid lists nodes the image may not hit; with fix_allowed given, only
    its members may map to themselves.
    """
    s = appr.current
    t = s.tree
    dom = sorted(p)
    chain_pt = s.flavor.kind == core.SEMIBRANCHED and v in core.gamma_set(s)
    if (lo is not None or hi is not None) and not chain_pt:
        raise StructureError("bounds apply to chain points only")

    if chain_pt and (dom or lo is not None or hi is not None):
        lows = [p[x] for x in dom if t.lt(x, v)]
        highs = [p[x] for x in dom if t.lt(v, x)]
        if lo is not None:
            lows.append(lo)
        if hi is not None:
            highs.append(hi)
        c = max(lows, key=lambda x: t.depth[x], default=None)
        u = min(highs, key=lambda x: t.depth[x], default=None)
        if c is not None and u is not None and not t.lt(c, u):
            raise StructureError("no room between the required bounds")
        extras = {x for x in (lo, hi) if x is not None}
        base = sorted(core.closure(s, {p[x] for x in dom} | extras))
        if c is None and u is None:
            raise StructureError("a chain slot needs an anchor on some side")
        if c is None:
            step = ("below_min",)
        elif u is None:
            # nothing of the base chain above c: raise the chain at its top
            step = ("cone", c, True)
        else:
            step = ("gap", c, u)
    else:
        steps, _, _, _ = limit._describe_over(s, dom, v)
        if len(steps) != 1:
            raise StructureError("the closure walk should leave single steps")
        st = steps[0]
        if st[0] == "gap":
            step = ("gap", p[st[1]], p[st[2]])
        elif st[0] == "cone" and st[1] is not None:
            step = ("cone", p[st[1]], st[2])
        else:
            step = st
        base = sorted(p[x] for x in dom)

    pattern = frozenset(p[x] for x in dom if s.has_edge(v, x))
    req = limit._finish_request(s, base, [step], pattern)
    blocked = set(avoid) | set(p.values())
    for cand in limit._request_matches(s, req):
        z = cand[-1]
        if z in blocked:
            continue
        if z == v and fix_allowed is not None and v not in fix_allowed:
            continue
        return z
    return limit._grow(appr, req)[-1]


def _extend_point(appr: Approximation, p: dict, v: int, lo=None, hi=None,
                  avoid=(), fix_allowed=None) -> int:
    """Add v and its closure glue to the domain of p; return the image of v."""
    s = appr.current
    if v in p:
        return p[v]
    t = s.tree
    need = core.closure(s, set(p) | {v}) - set(p)
    for u in sorted(need, key=lambda x: (t.depth[x], x)):
        if u in p:
            continue
        if u == v:
            z = _img_slot(appr, p, u, lo, hi, avoid, fix_allowed)
        else:
            z = _img_slot(appr, p, u, None, None, (), fix_allowed)
        p[u] = z
    _assert_iso(appr.current, p)
    return p[v]


def _extend_preimage(appr: Approximation, p: dict, v: int, lo=None, hi=None,
                     avoid=(), fix_allowed=None) -> int:
    """Add v to the image of p; bounds constrain the new preimage."""
    inv = {b: a for a, b in p.items()}
    got = _extend_point(appr, inv, v, lo, hi, avoid, fix_allowed)
    p.clear()
    p.update({a: b for b, a in inv.items()})
    return got


# ---------------------------------------------------------------------------
# saturation


def _saturate_cone(appr: Approximation, a: int, b: int, c=(), d=(),
                   gamma=None, avoid=()) -> int:
    """A point above b matching the pattern of a over the c side.

    c and d enumerate two sets of the same type over gamma, position for
    position; a sits above gamma outside the cones of c, b outside the
    cones of d. The witness lands strictly above b, which is the strong
    form; landing in the cone of b is what it is usually quoted for.
    """
    s = appr.current
    t = s.tree
    if gamma is None:
        if s.flavor.kind != core.POINTED:
            raise StructureError("gamma is required off the pointed flavor")
        gamma = s.point
    c = tuple(c)
    d = tuple(d)
    if len(c) != len(d):
        raise StructureError("parameter tuples differ in length")
    if not (t.lt(gamma, a) and t.lt(gamma, b)):
        raise StructureError("both points must sit strictly above gamma")
    if a in core.cone_union(s, gamma, c):
        raise StructureError("the mirrored point lies over its own parameters")
    if b in core.cone_union(s, gamma, d):
        raise StructureError("the target point lies over the image parameters")
    if core.qf_type(s, c + (gamma,)) != core.qf_type(s, d + (gamma,)):
        raise StructureError("parameter tuples differ in type over gamma")
    want = core.qf_type(s, c + (gamma, a))
    extc = core.closure_extension(s, c + (gamma,))
    extd = core.closure_extension(s, d + (gamma,))
    base = sorted(core.closure(s, set(extd) | {b}))
    pattern = frozenset(extd[i] for i in range(len(extc)) if s.has_edge(a, extc[i]))
    req = limit._finish_request(s, base, [("cone", b, False)], pattern)
    node = None
    blocked = set(avoid)
    for cand in limit._request_matches(s, req):
        if cand[-1] not in blocked:
            node = cand[-1]
            break
    if node is None:
        node = limit._grow(appr, req)[-1]
    s2 = appr.current
    if core.qf_type(s2, d + (gamma, node)) != want:
        raise StructureError("cone witness came back with the wrong type")
    return node


def _saturate_interval(appr: Approximation, a: int, b1: int, b2: int,
                       c=(), d=(), gamma=None) -> int:
    """A chain point strictly between b1 and b2 matching a over the c side.

    With gamma given the chain is its ancestor set and types carry gamma
    appended; without it the structure must be semibranched and a, b1, b2
    sit on the designated chain. Guards: whenever b1 dominates the
    projection of a d entry, a must dominate the matching c projection,
    and dually at b2; otherwise no point of the interval can copy a.
    """
    s = appr.current
    t = s.tree
    c = tuple(c)
    d = tuple(d)
    if len(c) != len(d):
        raise StructureError("parameter tuples differ in length")
    if gamma is not None:
        for x in (a, b1, b2):
            if not t.lt(x, gamma):
                raise StructureError("interval data must sit strictly below gamma")
        ct = c + (gamma,)
        dt = d + (gamma,)

        def proj(x: int) -> int:
            return t.meet(x, gamma)
    else:
        if s.flavor.kind != core.SEMIBRANCHED:
            raise StructureError("chain intervals need the semibranched flavor")
        chain = core.gamma_set(s)
        for x in (a, b1, b2):
            if x not in chain:
                raise StructureError("interval data must sit on the chain")
        ct = c
        dt = d

        def proj(x: int) -> int:
            return core.semibranch_projection(s, x)

    if not t.lt(b1, b2):
        raise StructureError("the interval is empty")
    if core.qf_type(s, ct) != core.qf_type(s, dt):
        raise StructureError("parameter tuples differ in type")
    want = core.qf_type(s, ct + (a,))
    extc = core.closure_extension(s, ct)
    extd = core.closure_extension(s, dt)

    if a in extc:
        node = extd[extc.index(a)]
        if not (t.lt(b1, node) and t.lt(node, b2)):
            raise StructureError("the forced witness misses the interval")
        return node

    for i in range(len(c)):
        pc, pd = proj(c[i]), proj(d[i])
        if t.leq(pd, b1) and not t.lt(pc, a):
            raise StructureError(f"lower guard fails at position {i}")
        if t.leq(b2, pd) and not t.lt(a, pc):
            raise StructureError(f"upper guard fails at position {i}")

    idx = {x: i for i, x in enumerate(extc)}
    pcs = {proj(x) for x in extc}
    below = [x for x in pcs if t.lt(x, a)]
    above = [x for x in pcs if t.lt(a, x)]
    c1 = max(below, key=lambda x: t.depth[x], default=None)
    c2 = min(above, key=lambda x: t.depth[x], default=None)
    d1 = b1 if c1 is None else max(b1, extd[idx[c1]], key=lambda x: t.depth[x])
    d2 = b2 if c2 is None else min(b2, extd[idx[c2]], key=lambda x: t.depth[x])
    if not t.lt(d1, d2):
        raise StructureError("the guards leave no room in the interval")
    base = sorted(set(extd) | {b1, b2})
    inner = [x for x in base if t.lt(d1, x) and t.leq(x, d2)]
    u = min(inner, key=lambda x: t.depth[x])
    pattern = frozenset(extd[i] for i in range(len(extc)) if s.has_edge(a, extc[i]))
    req = limit._finish_request(s, base, [("gap", d1, u)], pattern)
    cand = limit.search_realizer(s, req)
    node = cand[-1] if cand is not None else limit._grow(appr, req)[-1]
    s2 = appr.current
    t2 = s2.tree
    if core.qf_type(s2, dt + (node,)) != want:
        raise StructureError("interval witness came back with the wrong type")
    if not (t2.lt(b1, node) and t2.lt(node, b2)):
        raise StructureError("interval witness escaped its bounds")
    return node


def _saturate_increasing(appr: Approximation, a: int, c=(), d=(), bound=None,
                         mapping=None, window=(), direction="up"):
    """A chain point past bound matching a, raised by the mapping.

    The mapping is read as a partial order isomorphism of the chain; the
    window lists candidate points e with mapping[e] strictly above e and
    the witness comes from the open interval (e, mapping[e]) for the first
    admissible e. Direction up places the witness above bound, down below
    it. Returns (witness, e, mapping[e]).
    """
    s = appr.current
    t = s.tree
    if s.flavor.kind != core.SEMIBRANCHED:
        raise StructureError("increasing saturation needs the semibranched flavor")
    chain = core.gamma_set(s)
    circle = core.gamma_circle(s)
    if a not in chain:
        raise StructureError("the mirrored point must sit on the chain")
    if bound is None or bound not in chain:
        raise StructureError("bound must be a chain point")
    if mapping is None:
        raise StructureError("a chain mapping is required")
    if direction not in ("up", "down"):
        raise StructureError(f"unknown direction {direction!r}")
    c = tuple(c)
    d = tuple(d)
    proj = lambda x: core.semibranch_projection(s, x)
    C0 = [x for x in c if proj(x) in circle]
    D0 = [x for x in d if proj(x) in circle]
    if direction == "up":
        if not all(t.lt(proj(x), a) for x in C0):
            raise StructureError("a must dominate the interior projections of c")
    else:
        if not all(t.lt(a, proj(x)) for x in C0):
            raise StructureError("a must sit below the interior projections of c")
    pick = None
    for e in window:
        if e not in circle or e not in mapping:
            continue
        ae = mapping[e]
        if not t.lt(e, ae):
            continue
        if direction == "up":
            ok = t.lt(bound, e) and all(t.lt(proj(x), e) for x in D0)
        else:
            ok = t.lt(ae, bound) and all(
                t.lt(ae, proj(x)) and t.lt(e, proj(x)) for x in D0
            )
        if ok:
            pick = (e, ae)
            break
    if pick is None:
        raise StructureError("no admissible window point for the saturation")
    e, ae = pick
    node = _saturate_interval(appr, a, e, ae, c, d, gamma=None)
    return node, e, ae


def realize_saturation(appr: Approximation, kind: str, **kw) -> int:
    """Realize a saturation witness, growing the approximation if needed.

    kind is one of cone, interval, increasing; the keyword arguments are
    those of the matching pattern. Always returns the witness node.
    """
    if kind == "cone":
        return _saturate_cone(appr, **kw)
    if kind == "interval":
        return _saturate_interval(appr, **kw)
    if kind == "increasing":
        return _saturate_increasing(appr, **kw)[0]
    raise StructureError(f"unknown saturation kind {kind!r}")


# ---------------------------------------------------------------------------
# cone permutations


def _inv_perm(sig: tuple[int, ...]) -> tuple[int, ...]:
    inv = [0] * len(sig)
    for i, j in enumerate(sig):
        inv[j] = i
    return tuple(inv)


def realize_cone_permutation(appr: Approximation, g: int, sigma,
                             steps: int = 6) -> PartialAutomorphism:
    """Partial automorphism inducing sigma on the cones listed above g.

    Works over the pointed flavor at the designated point, or the
    semibranched flavor with g off the chain. Fixed points stay within g
    and (off the chain) its projection. The listed cones are the ones
    present at call time; node ids are swept back and forth for the given
    number of steps, and every listed cone ends up with a mapped
    representative regardless.
    """
    s0 = appr.current
    kind = s0.flavor.kind
    if kind == core.POINTED:
        if g != s0.point:
            raise StructureError("cone permutations act at the designated point")
        allowed = frozenset({g})
        p: dict[int, int] = {g: g}
    elif kind == core.SEMIBRANCHED:
        if g in core.gamma_set(s0):
            raise StructureError("the apex must sit off the chain")
        pg = core.semibranch_projection(s0, g)
        allowed = frozenset({g, pg})
        p = {g: g, pg: pg}
    else:
        raise StructureError("cone permutations need a pointed or semibranched flavor")

    listed = core.cones_at(s0, g)
    reps = tuple(min(cn) for cn in listed)
    m = len(listed)
    sig = tuple(sigma)
    if sorted(sig) != list(range(m)):
        raise StructureError("sigma is not a permutation of the listed cones")
    inv_sig = _inv_perm(sig)
    out = PartialAutomorphism(appr, p, [{"stage": 0, "covered": sorted(p)}])
    if m == 0:
        return out

    def cone_index(x: int) -> Optional[int]:
        sc = appr.current
        if not sc.tree.lt(g, x):
            return None
        cn = core.cone_of(sc, g, x)
        for i, r in enumerate(reps):
            if r in cn:
                return i
        return None

    def listed_members() -> set[int]:
        sc = appr.current
        acc: set[int] = set()
        for r in reps:
            acc |= core.cone_of(sc, g, r)
        return acc

    def cover(w: int, forward: bool) -> None:
        side = set(p) if forward else set(p.values())
        if w in side:
            return
        ext = _extend_point if forward else _extend_preimage
        i = cone_index(w)
        if i is None:
            sc = appr.current
            av = listed_members() if sc.tree.lt(g, w) else ()
            ext(appr, p, w, avoid=av, fix_allowed=allowed)
            return
        j = sig[i] if forward else inv_sig[i]
        mates = core.cone_of(appr.current, g, reps[i]) & side
        if mates:
            ext(appr, p, w, fix_allowed=allowed)
        else:
            dom = sorted(p)
            img = tuple(p[x] for x in dom)
            cs, ds = (tuple(dom), img) if forward else (img, tuple(dom))
            z = _saturate_cone(appr, w, reps[j], cs, ds, gamma=g,
                               avoid={w} if j == i else ())
            if forward:
                p[w] = z
            else:
                p[z] = w
            _assert_iso(appr.current, p)
        got = p[w] if forward else next(k for k, v in p.items() if v == w)
        if cone_index(got) != j:
            raise StructureError("cone witness landed in the wrong cone")

    def check() -> None:
        sc = appr.current
        _assert_iso(sc, p)
        for x in allowed:
            if p.get(x) != x:
                raise StructureError("the anchors must stay fixed")
        for x, y in p.items():
            if x == y and x not in allowed:
                raise StructureError(f"unexpected fixed point {x}")
            i = cone_index(x)
            if i is not None:
                if cone_index(y) != sig[i]:
                    raise StructureError("cone action drifted from sigma")
            elif sc.tree.lt(g, x) and cone_index(y) is not None:
                raise StructureError("an unlisted point fell into a listed cone")

    for stage in range(1, steps + 1):
        w = stage - 1
        if w < appr.current.n:
            cover(w, True)
            cover(w, False)
        check()
        out.stage_log.append({"stage": stage, "node": w, "domain": len(p)})

    for i in range(m):
        if not (core.cone_of(appr.current, g, reps[i]) & set(p)):
            cover(reps[i], True)
        if not (core.cone_of(appr.current, g, reps[sig[i]]) & set(p.values())):
            cover(reps[sig[i]], False)
    check()
    out.stage_log.append({"stage": "cones", "domain": len(p)})
    return out


# ---------------------------------------------------------------------------
# staged commutator recipes


def _claim_holds(s: MixedStructure, A: dict, B: dict, cl: dict) -> bool:
    t = s.tree
    k = cl["kind"]
    if k == "lt":
        return t.lt(cl["a"], cl["b"])
    if k == "alpha":
        return A.get(cl["a"]) == cl["b"]
    if k == "beta":
        return B.get(cl["a"]) == cl["b"]
    if k == "raise_in":
        return (t.lt(cl["e"], cl["x"]) and t.lt(cl["x"], cl["ae"])
                and A.get(cl["e"]) == cl["ae"])
    if k == "fall_in":
        return (t.lt(cl["e"], cl["x"]) and t.lt(cl["x"], cl["ae"])
                and A.get(cl["ae"]) == cl["e"])
    if k == "same_cone":
        cn = core.cone_of(s, cl["g"], cl["a"])
        return bool(cn) and cl["b"] in cn
    if k == "closed":
        nodes = set(cl["nodes"])
        return set(core.closure(s, nodes)) == nodes
    if k == "iso":
        dom = tuple(cl["dom"])
        img = tuple(B.get(x) for x in dom)
        if None in img:
            return False
        return core.qf_type(s, dom) == core.qf_type(s, img)
    if k in ("min_chain", "max_chain"):
        chain = core.gamma_set(s)
        circ = core.gamma_circle(s)
        members = [x for x in cl["nodes"] if x in chain and x in circ]
        if not members:
            return False
        pick = (min if k == "min_chain" else max)(members, key=lambda x: t.depth[x])
        return pick == cl["who"]
    raise StructureError(f"unknown claim kind {cl['kind']!r}")


class _Builder:
    """Shared plumbing for the three staged commutator recipes."""

    def __init__(self, recipe: str, alpha: PartialAutomorphism, stages: int, window):
        if recipe not in ("c1", "c2", "c3"):
            raise StructureError(f"unknown recipe {recipe!r}")
        self.recipe = recipe
        self.appr = alpha.appr
        s = self.appr.current
        if s.flavor.kind != core.SEMIBRANCHED:
            raise StructureError("commutator recipes need the semibranched flavor")
        self.A = limit.extend_partial_iso(self.appr, dict(alpha.map), ())
        self.stages = int(stages)
        if self.stages < 1:
            raise StructureError("at least one stage is needed")
        t = s.tree
        circle = core.gamma_circle(s)
        win = sorted(set(window), key=lambda v: t.depth[v])
        if not win:
            raise StructureError("the window is empty")
        for v in win:
            if v not in circle:
                raise StructureError("window points must be interior chain points")
            if v not in self.A:
                raise StructureError("window points must carry alpha values")
        self.window = win
        self.lo = win[0]
        self.hi = win[-1]
        if not t.lt(self.hi, self.A[self.hi]):
            raise StructureError("alpha must raise the top of the window")
        if recipe == "c1":
            if not t.lt(self.lo, self.A[self.lo]):
                raise StructureError("alpha must raise the bottom of the window")
        else:
            if not t.lt(self.A[self.lo], self.lo):
                raise StructureError("alpha must lower the bottom of the window")
        if recipe == "c3" and self.lo == self.hi:
            raise StructureError("two seeds are needed")

        self.branch = s.treat_tip_as_branch
        self.tip = s.semibranch_tip
        self.B: dict[int, int] = {}
        if not self.branch:
            if self.A.get(self.tip, self.tip) != self.tip:
                raise StructureError("alpha must fix the chain top")
            if self.tip not in self.A:
                self.A[self.tip] = self.tip
                _assert_iso(s, self.A)
            self.B[self.tip] = self.tip

        self.a_seq: dict[int, int] = {}
        self.c_seq: dict[int, int] = {}
        self.ap_seq: dict[int, int] = {}
        self.cp_seq: dict[int, int] = {}
        self.ainv_seq: dict[int, int] = {}   # c1: alpha^{-1}(a_k) for k <= 0
        self.alo_seq: dict[int, int] = {}    # c3: alpha(a_k) for k <= 0
        self.up_rungs = [self.hi]
        self.dn_rungs = [self.lo]
        self.certs: list[dict] = []
        self.covered_w: list[int] = []
        self.covered_v: list[int] = []

        if recipe == "c3":
            ws = self.w_stream()
            first = [w for w in ws
                     if t.lt(self.hi, core.semibranch_projection(s, w))]
            # alpha(hi) is such a witness, so the stream always rotates
            if not first:
                raise StructureError("nothing projects above the top seed")
            self.w_first = first[0]

    # -- basic views --------------------------------------------------------

    def s(self) -> MixedStructure:
        return self.appr.current

    def t(self):
        return self.appr.current.tree

    def w_stream(self) -> list[int]:
        s = self.s()
        circ = core.gamma_circle(s)
        return [w for w in range(s.n)
                if core.semibranch_projection(s, w) in circ]

    def w_list(self) -> list[int]:
        ws = self.w_stream()
        if self.recipe == "c3":
            ws.remove(self.w_first)
            ws.insert(0, self.w_first)
        return ws

    def v_stream(self) -> list[int]:
        if self.branch:
            return []
        s = self.s()
        return [v for v in range(s.n)
                if s.tree.leq(self.tip, v) and v != self.tip]

    # -- alpha bookkeeping ---------------------------------------------------

    def _bias(self, z: int, lo, hi, preimage: bool):
        # only the two-sided recipe pins alpha off the constructed orbits:
        # raising above the top seed and lowering below the bottom seed
        if self.recipe != "c3":
            return lo, hi
        s = self.s()
        t = s.tree
        if z not in core.gamma_set(s):
            return lo, hi
        if t.lt(self.hi, z):
            if preimage:
                if hi is None or t.lt(z, hi):
                    hi = z
            elif lo is None or t.lt(lo, z):
                lo = z
        elif t.lt(z, self.lo):
            if preimage:
                if lo is None or t.lt(lo, z):
                    lo = z
            elif hi is None or t.lt(z, hi):
                hi = z
        return lo, hi

    def alpha_at(self, z: int, lo=None, hi=None) -> int:
        if z in self.A:
            return self.A[z]
        lo, hi = self._bias(z, lo, hi, preimage=False)
        return _extend_point(self.appr, self.A, z, lo=lo, hi=hi)

    def alpha_inv_at(self, z: int, lo=None, hi=None) -> int:
        for k, v in self.A.items():
            if v == z:
                return k
        lo, hi = self._bias(z, lo, hi, preimage=True)
        return _extend_preimage(self.appr, self.A, z, lo=lo, hi=hi)

    def up_rung(self, i: int) -> int:
        while len(self.up_rungs) <= i:
            self.up_rungs.append(self.alpha_at(self.up_rungs[-1]))
            if not self.t().lt(self.up_rungs[-2], self.up_rungs[-1]):
                raise StructureError("the rising ladder stopped rising")
        return self.up_rungs[i]

    def dn_rung(self, i: int) -> int:
        while len(self.dn_rungs) <= i:
            last = self.dn_rungs[-1]
            nxt = self.alpha_inv_at(last) if self.recipe == "c1" else self.alpha_at(last)
            if not self.t().lt(nxt, last):
                raise StructureError("the falling ladder stopped falling")
            self.dn_rungs.append(nxt)
        return self.dn_rungs[i]

    # -- saturation with ladders ----------------------------------------------

    def _deadline(self) -> int:
        return 8 + 2 * self.s().n

    def sat_up(self, a: int, c, d, bound: int):
        for i in range(self._deadline()):
            e = self.up_rung(i)
            ae = self.up_rung(i + 1)
            s = self.s()
            t = s.tree
            circ = core.gamma_circle(s)
            D0 = [core.semibranch_projection(s, x) for x in d
                  if core.semibranch_projection(s, x) in circ]
            if t.lt(bound, e) and all(t.lt(px, e) for px in D0):
                z = _saturate_interval(self.appr, a, e, ae, c, d)
                return z, e, ae
        raise StructureError("the rising ladder cannot clear the bound")

    def sat_dn(self, a: int, c, d, bound: int):
        for i in range(self._deadline()):
            e, ae = self.dn_rung(i + 1), self.dn_rung(i)
            s = self.s()
            t = s.tree
            circ = core.gamma_circle(s)
            D0 = [core.semibranch_projection(s, x) for x in d
                  if core.semibranch_projection(s, x) in circ]
            if t.lt(ae, bound) and all(
                t.lt(ae, px) and t.lt(e, px) for px in D0
            ):
                z = _saturate_interval(self.appr, a, e, ae, c, d)
                return z, e, ae
        raise StructureError("the falling ladder cannot duck the bound")

    # -- beta bookkeeping -----------------------------------------------------

    def bind(self, pairs: dict) -> None:
        for k, v in pairs.items():
            if k in self.B and self.B[k] != v:
                raise StructureError("a stage pair collides with the map")
            self.B[k] = v
        _assert_iso(self.s(), self.B)

    def beta_pre(self, v: int) -> int:
        for k, w in self.B.items():
            if w == v:
                return k
        return _extend_preimage(self.appr, self.B, v)

    def cover_w(self, w: int) -> None:
        _extend_point(self.appr, self.B, w)
        if w not in self.B.values():
            _extend_preimage(self.appr, self.B, w)
        self.covered_w.append(w)

    def cover_v(self, v: int) -> None:
        s = self.s()
        if v not in self.B:
            if core.cone_of(s, self.tip, v) & set(self.B):
                _extend_point(self.appr, self.B, v)
            else:
                dom = sorted(self.B)
                img = tuple(self.B[x] for x in dom)
                u = _saturate_cone(self.appr, v, v, tuple(dom), img, gamma=self.tip)
                self.B[v] = u
                _assert_iso(self.s(), self.B)
        if v not in self.B.values():
            _extend_preimage(self.appr, self.B, v)
        sc = self.s()
        pre = self.beta_pre(v)
        cn = core.cone_of(sc, self.tip, v)
        if self.B[v] not in cn or pre not in cn:
            raise StructureError("a guarded cone was not preserved")
        self.covered_v.append(v)

    # -- certificates ----------------------------------------------------------

    def emit(self, label, claims: list[dict]) -> None:
        s = self.s()
        bad = [cl for cl in claims if not _claim_holds(s, self.A, self.B, cl)]
        if bad:
            raise StructureError(f"stage {label}: invariant broke: {bad[0]}")
        self.certs.append({"stage": label, "claims": claims})

    def base_claims(self) -> list[dict]:
        dom = tuple(sorted(self.B))
        img = tuple(self.B[x] for x in dom)
        out = [
            {"kind": "closed", "nodes": dom},
            {"kind": "closed", "nodes": img},
            {"kind": "iso", "dom": dom},
            {"kind": "min_chain", "nodes": dom, "who": self.low_anchor()},
            {"kind": "max_chain", "nodes": dom, "who": self.high_anchor()},
        ]
        if not self.branch:
            out.append({"kind": "beta", "a": self.tip, "b": self.tip})
            sc = self.s()
            for v in dom:
                if sc.tree.lt(self.tip, v):
                    out.append({"kind": "same_cone", "g": self.tip,
                                "a": v, "b": self.B[v]})
        return out

    def low_anchor(self) -> int:
        raise NotImplementedError

    def high_anchor(self) -> int:
        raise NotImplementedError


class _C1Builder(_Builder):
    """One conjugate: alpha beta^-1 alpha beta strictly increasing."""

    def low_anchor(self) -> int:
        return self.a_seq[-max(self.c_seq)]

    def high_anchor(self) -> int:
        return self.c_seq[max(self.c_seq)]

    def stage(self, k: int) -> None:
        s = self.s()
        ws = self.w_list()
        wk = ws[k - 1] if k - 1 < len(ws) else None
        up_bound = core.semibranch_projection(s, wk) if wk is not None else self.hi
        dn_bound = up_bound if wk is not None else self.lo
        dom = tuple(sorted(self.B))
        y = tuple(self.B[x] for x in dom)
        x = dom

        if k == 1:
            top = self.hi
            self.a_seq[0] = top
        else:
            top = self.alpha_at(self.c_seq[k - 1])
            self.a_seq[k - 1] = top
        b, e1, f1 = self.sat_up(top, x, y, up_bound)
        ab = self.alpha_at(b)
        if not self.t().lt(b, ab):
            raise StructureError("the mirrored top witness must be raised")
        ck, e2, f2 = self.sat_up(ab, (b,) + y, (top,) + x, up_bound)
        low = self.a_seq[0] if k == 1 else self.a_seq[-(k - 1)]
        low_src = self.alpha_inv_at(low)
        self.ainv_seq[-(k - 1)] = low_src
        bp, e3, f3 = self.sat_dn(low_src, (ck, top) + x, (ab, b) + y, dn_bound)
        aibp = self.alpha_inv_at(bp)
        am, e4, f4 = self.sat_dn(aibp, (low_src, ck, top) + x, (bp, ab, b) + y, dn_bound)
        self.bind({top: b, ck: ab, low_src: bp, am: aibp})
        self.c_seq[k] = ck
        self.a_seq[-k] = am
        if wk is not None:
            self.cover_w(wk)
        vs = self.v_stream()
        if not self.branch and k - 1 < len(vs):
            self.cover_v(vs[k - 1])

        claims = self.base_claims()
        for j in range(-k + 1, k + 1):
            prev = self.a_seq[j - 1]
            inv = self.c_seq[j] if j >= 1 else self.ainv_seq[j]
            lhs = self.A.get(self.B.get(prev))
            claims.append({"kind": "beta", "a": prev, "b": self.B[prev]})
            claims.append({"kind": "alpha", "a": self.B[prev], "b": lhs})
            claims.append({"kind": "beta", "a": inv, "b": lhs})
        for j in range(-k, k):
            aj = self.a_seq[j]
            if aj in self.A:
                claims.append({"kind": "lt", "a": aj, "b": self.A[aj]})
        for pt, e, f in ((b, e1, f1), (ck, e2, f2), (bp, e3, f3), (am, e4, f4)):
            claims.append({"kind": "raise_in", "x": pt, "e": e, "ae": f})
        if wk is not None:
            pw = core.semibranch_projection(self.s(), wk)
            claims += [
                {"kind": "lt", "a": pw, "b": b},
                {"kind": "lt", "a": bp, "b": pw},
                {"kind": "lt", "a": pw, "b": ck},
                {"kind": "lt", "a": am, "b": pw},
            ]
        self.emit(k, claims)

    def run(self) -> "CommutatorReport":
        for k in range(1, self.stages + 1):
            self.stage(k)
        K = self.stages
        self.a_seq[K] = self.alpha_at(self.c_seq[K])
        return _finish(self, word="aBab")


class _C2Builder(_Builder):
    """One conjugate, orbits both ways: the word drives two seeds apart."""

    def low_anchor(self) -> int:
        return self.cp_seq[max(self.cp_seq)]

    def high_anchor(self) -> int:
        return self.c_seq[max(self.c_seq)]

    def stage(self, k: int) -> None:
        s = self.s()
        ws = self.w_list()
        wk = ws[k - 1] if k - 1 < len(ws) else None
        up_bound = core.semibranch_projection(s, wk) if wk is not None else self.hi
        dn_bound = up_bound if wk is not None else self.lo
        dom = tuple(sorted(self.B))
        y = tuple(self.B[x] for x in dom)
        x = dom

        if k == 1:
            top, bot = self.hi, self.lo
            self.a_seq[0] = top
            self.ap_seq[0] = bot
        else:
            top = self.alpha_at(self.c_seq[k - 1])
            bot = self.alpha_at(self.cp_seq[k - 1])
            if not self.t().lt(bot, self.cp_seq[k - 1]):
                raise StructureError("the lower anchor must keep falling")
            self.a_seq[k - 1] = top
            self.ap_seq[k - 1] = bot
        b, e1, f1 = self.sat_up(top, x, y, up_bound)
        ab = self.alpha_at(b)
        ck, e2, f2 = self.sat_up(ab, (b,) + y, (top,) + x, up_bound)
        bp, e3, f3 = self.sat_dn(bot, (ck, top) + x, (ab, b) + y, dn_bound)
        abp = self.alpha_at(bp)
        if not self.t().lt(abp, bp):
            raise StructureError("the mirrored bottom witness must be lowered")
        cpk, e4, f4 = self.sat_dn(abp, (bp, ab, b) + y, (bot, ck, top) + x, dn_bound)
        self.bind({top: b, ck: ab, bot: bp, cpk: abp})
        self.c_seq[k] = ck
        self.cp_seq[k] = cpk
        if wk is not None:
            self.cover_w(wk)
        vs = self.v_stream()
        if not self.branch and k - 1 < len(vs):
            self.cover_v(vs[k - 1])

        claims = self.base_claims()
        for j in range(1, k + 1):
            for seq, cs in ((self.a_seq, self.c_seq), (self.ap_seq, self.cp_seq)):
                prev = seq[j - 1]
                lhs = self.A.get(self.B.get(prev))
                claims.append({"kind": "beta", "a": prev, "b": self.B[prev]})
                claims.append({"kind": "alpha", "a": self.B[prev], "b": lhs})
                claims.append({"kind": "beta", "a": cs[j], "b": lhs})
        for j in range(0, k):
            up, dn = self.a_seq[j], self.ap_seq[j]
            if up in self.A:
                claims.append({"kind": "lt", "a": up, "b": self.A[up]})
            if dn in self.A:
                claims.append({"kind": "lt", "a": self.A[dn], "b": dn})
        claims.append({"kind": "raise_in", "x": b, "e": e1, "ae": f1})
        claims.append({"kind": "raise_in", "x": ck, "e": e2, "ae": f2})
        claims.append({"kind": "fall_in", "x": bp, "e": e3, "ae": f3})
        claims.append({"kind": "fall_in", "x": cpk, "e": e4, "ae": f4})
        if wk is not None:
            pw = core.semibranch_projection(self.s(), wk)
            claims += [
                {"kind": "lt", "a": pw, "b": b},
                {"kind": "lt", "a": bp, "b": pw},
                {"kind": "lt", "a": pw, "b": ck},
                {"kind": "lt", "a": cpk, "b": pw},
            ]
        self.emit(k, claims)

    def run(self) -> "CommutatorReport":
        for k in range(1, self.stages + 1):
            self.stage(k)
        K = self.stages
        self.a_seq[K] = self.alpha_at(self.c_seq[K])
        self.ap_seq[K] = self.alpha_at(self.cp_seq[K])
        return _finish(self, word="aBab")


class _C3Builder(_Builder):
    """Two monotone regions: alpha^-1 beta^-1 alpha beta strictly increasing."""

    def low_anchor(self) -> int:
        return self.alo_seq[min(self.alo_seq)]

    def high_anchor(self) -> int:
        return self.c_seq[max(self.c_seq)]

    def throttle(self, n: int) -> int:
        """First stream index whose projection escapes the seed band."""
        m = (n - 1) // 2
        bhi = self.up_rung(m)
        blo = self.dn_rung(m)
        s = self.s()
        t = s.tree
        for k, w in enumerate(self.w_list()):
            pw = core.semibranch_projection(s, w)
            if t.leq(pw, blo) or t.leq(bhi, pw):
                return k
        return len(self.w_list())

    def stage(self, k: int) -> None:
        if k == 1:
            a, ap = self.hi, self.lo
            a0 = self.alpha_at(ap)
            self.a_seq[0] = a0
            al_a0 = self.alpha_at(a0)
            self.alo_seq[0] = al_a0
            b = _extend_point(self.appr, self.B, a0, lo=a)
            bp = _extend_point(self.appr, self.B, al_a0, hi=a0)
            ab = self.alpha_at(b)
            if not self.t().lt(b, ab):
                raise StructureError("the top image must be raised")
            c1 = _extend_preimage(self.appr, self.B, ab, lo=self.A[a])
            self.c_seq[1] = c1
            aibp = self.alpha_inv_at(bp)
            am1 = _extend_preimage(self.appr, self.B, aibp)
            self.a_seq[-1] = am1
        else:
            cn = self.c_seq[k - 1]
            an = self.alpha_inv_at(cn)
            self.a_seq[k - 1] = an
            b = _extend_point(self.appr, self.B, an)
            ab = self.alpha_at(b)
            if not self.t().lt(b, ab):
                raise StructureError("the top image must be raised")
            a2an = self.alpha_at(cn)  # alpha^2 of the new top anchor
            ck = _extend_preimage(self.appr, self.B, ab, lo=a2an)
            self.c_seq[k] = ck
            amn = self.a_seq[-(k - 1)]
            al_amn = self.alpha_at(amn)
            self.alo_seq[-(k - 1)] = al_amn
            prev_min = self.alo_seq[-(k - 2)]
            tpt = self.B[prev_min]
            at = self.alpha_at(tpt)
            if not self.t().lt(at, tpt):
                raise StructureError("the image of the old floor must fall")
            bp = _extend_point(self.appr, self.B, al_amn, hi=at)
            aibp = self.alpha_inv_at(bp)
            amk = _extend_preimage(self.appr, self.B, aibp)
            self.a_seq[-k] = amk

        l_cut = self.throttle(k)
        ws = self.w_list()
        for j in range(min(l_cut, len(ws))):
            if ws[j] not in self.covered_w:
                self.cover_w(ws[j])
        vs = self.v_stream()
        if not self.branch:
            v_cut = max(l_cut, 1 if k == 1 else 0)
            for j in range(min(v_cut, len(vs))):
                if vs[j] not in self.covered_v:
                    self.cover_v(vs[j])
        self.emit(k, self.claims(k))

    def claims(self, k: int) -> list[dict]:
        claims = self.base_claims()
        a, ap = self.hi, self.lo
        claims += [
            {"kind": "lt", "a": ap, "b": a},
            {"kind": "lt", "a": self.a_seq[0], "b": ap},
            {"kind": "lt", "a": a, "b": self.B[self.a_seq[0]]},
            {"kind": "lt", "a": self.B[self.a_seq[-1]], "b": ap},
        ]
        if k >= 2:
            claims.append({"kind": "lt", "a": a, "b": self.a_seq[1]})
        for j in range(-k + 1, k + 1):
            prev = self.a_seq[j - 1]
            al_j = self.c_seq[j] if j >= 1 else self.alo_seq[j]
            lhs = self.A.get(self.B.get(prev))
            claims.append({"kind": "beta", "a": prev, "b": self.B[prev]})
            claims.append({"kind": "alpha", "a": self.B[prev], "b": lhs})
            claims.append({"kind": "beta", "a": al_j, "b": lhs})
        for j in range(1, k):
            claims.append({"kind": "lt", "a": self.up_rung(j - 1), "b": self.a_seq[j]})
        for j in range(0, k):
            claims.append({"kind": "lt", "a": self.up_rung(j // 2),
                           "b": self.B[self.a_seq[j]]})
        for j in range(-k, 1):
            claims.append({"kind": "lt", "a": self.a_seq[j],
                           "b": self.dn_rung((-j) // 2)})
        for j in range(-k, 0):
            claims.append({"kind": "lt", "a": self.B[self.a_seq[j]],
                           "b": self.dn_rung(-j - 1)})
        claims.append({"kind": "lt", "a": self.up_rung(1), "b": self.c_seq[k]})
        return claims

    def run(self) -> "CommutatorReport":
        for k in range(1, self.stages + 1):
            self.stage(k)
        K = self.stages
        self.a_seq[K] = self.alpha_inv_at(self.c_seq[K])
        return _finish(self, word="ABab")


@dataclass
class CommutatorReport:
    """Outcome of a staged commutator build.

    product maps each covered chain point to the value of the recipe's
    word; covered lists the chain points bracketed by the anchor ladder,
    where the word's behaviour is certified. anchors carries the named
    sequences of the build.
    """

    recipe: str
    beta: PartialAutomorphism
    alpha: PartialAutomorphism
    product: dict[int, int]
    covered: tuple[int, ...]
    anchors: dict
    stage_certificates: list


def _word_value(bld: _Builder, x: int, word: str) -> Optional[int]:
    """Chase x through the recipe word, extending the maps coherently."""
    cur = x
    for sym in reversed(word):
        if sym == "b":
            cur = _extend_point(bld.appr, bld.B, cur)
        elif sym == "B":
            cur = bld.beta_pre(cur)
        elif sym == "a":
            cur = bld.alpha_at(cur)
        elif sym == "A":
            cur = bld.alpha_inv_at(cur)
    return cur


def _finish(bld: _Builder, word: str) -> CommutatorReport:
    for x in bld.window:
        _extend_point(bld.appr, bld.B, x)
    circle = core.gamma_circle(bld.s())
    anchors_all = list(bld.a_seq.values()) + list(bld.ap_seq.values())

    def bracketed(x: int) -> bool:
        t = bld.t()
        below = any(t.leq(v, x) for v in anchors_all)
        above = any(t.lt(x, v) for v in anchors_all)
        return below and above

    product: dict[int, int] = {}
    covered = []
    for x in sorted(set(bld.B) & circle):
        if not bracketed(x):
            continue
        product[x] = _word_value(bld, x, word)
        covered.append(x)

    claims: list[dict] = []
    ks = sorted(bld.a_seq)
    for j in ks[:-1]:
        if j + 1 in bld.a_seq:
            val = _word_value(bld, bld.a_seq[j], word)
            if val != bld.a_seq[j + 1]:
                raise StructureError("the anchor ladder is not the word's orbit")
            claims.append({"kind": "lt", "a": bld.a_seq[j], "b": bld.a_seq[j + 1]})
    if bld.recipe == "c2":
        kps = sorted(bld.ap_seq)
        for j in kps[:-1]:
            if j + 1 in bld.ap_seq:
                val = _word_value(bld, bld.ap_seq[j], word)
                if val != bld.ap_seq[j + 1]:
                    raise StructureError("the falling ladder is not the word's orbit")
                claims.append({"kind": "lt", "a": bld.ap_seq[j + 1],
                               "b": bld.ap_seq[j]})
    if bld.recipe in ("c1", "c3"):
        for x in covered:
            if not bld.t().lt(x, product[x]):
                raise StructureError(f"the word fails to raise {x}")
            claims.append({"kind": "lt", "a": x, "b": product[x]})
    bld.emit("conclusion", claims)

    anchors = {
        "seeds": (bld.lo, bld.hi),
        "a": dict(bld.a_seq),
        "c": dict(bld.c_seq),
        "w_covered": list(bld.covered_w),
        "v_covered": list(bld.covered_v),
    }
    if bld.recipe == "c2":
        anchors["a_prime"] = dict(bld.ap_seq)
        anchors["c_prime"] = dict(bld.cp_seq)
    beta = PartialAutomorphism(bld.appr, bld.B,
                               [c["stage"] for c in bld.certs])
    alpha = PartialAutomorphism(bld.appr, bld.A, [])
    return CommutatorReport(bld.recipe, beta, alpha, product,
                            tuple(covered), anchors, bld.certs)


def staged_commutator_builder(recipe: str, alpha: PartialAutomorphism,
                              stages: int, window) -> CommutatorReport:
    """Stage a conjugating map beta for one of the commutator recipes.

    alpha is a partial automorphism of the approximation with the recipe's
    behaviour on the window endpoints: c1 wants both raised, c2 and c3 the
    top raised and the bottom lowered. The word (alpha beta^-1 alpha beta
    for c1 and c2, the beta commutator of alpha for c3) is evaluated on
    every covered chain point; c1 and c3 certify a strict raise there, c2
    certifies the two seed orbits running apart. All per-stage claims are
    checked as they are emitted and replay against the final state.
    """
    builders = {"c1": _C1Builder, "c2": _C2Builder, "c3": _C3Builder}
    if recipe not in builders:
        raise StructureError(f"unknown recipe {recipe!r}")
    return builders[recipe](recipe, alpha, stages, window).run()


def replay_commutator(report: CommutatorReport) -> bool:
    """Re-evaluate every stage claim against the final maps and structure."""
    s = report.beta.appr.current
    A = report.alpha.map
    B = report.beta.map
    for cert in report.stage_certificates:
        for cl in cert["claims"]:
            if not _claim_holds(s, A, B, cl):
                return False
    return True


# ---------------------------------------------------------------------------
# tuple ordering


@dataclass
class AlphaOrderResult:
    """A reordering of a tuple, with closure fill-ins, that steps tamely.

    order is the refined sequence, positions the indices of the original
    entries inside it, certificate the directly evaluated conditions.
    """

    order: list[int]
    positions: list[int]
    certificate: dict


def alpha_order(s: MixedStructure, tup, alpha: FiniteAutomorphism,
                g: int) -> AlphaOrderResult:
    """Reorder a tuple over the fixed base g so prefixes extend one gap at
    a time.

    The result lists entries with non-decreasing meets with g; entries
    above g come grouped by cone, blocks arranged so that the image cone
    of each block avoids every cone placed up to it, which is possible
    only when alpha moves enough cones; and the deepest missing meet is
    inserted before each entry, so every prefix is closed over g.
    """
    t = s.tree
    entries = list(tup)
    if g in entries:
        raise ValueError("the base point may not occur in the tuple")
    if len(set(entries)) != len(entries):
        raise StructureError("tuple entries must be distinct")
    if alpha(g) != g:
        raise StructureError("the base point must be fixed")

    low = [x for x in entries if not t.lt(g, x)]
    low.sort(key=lambda x: (t.depth[t.meet(x, g)], x))
    blocks: dict[int, list[int]] = {}
    for x in entries:
        if t.lt(g, x):
            blocks.setdefault(min(core.cone_of(s, g, x)), []).append(x)
    for b in blocks.values():
        b.sort()

    remaining = set(blocks)
    back: list[int] = []
    while remaining:
        pick = None
        for rep in sorted(remaining):
            img_cone = min(core.cone_of(s, g, alpha(rep)))
            if img_cone not in remaining:
                pick = rep
                break
        if pick is None:
            raise StructureError("alpha moves too few cones to order the tuple")
        remaining.discard(pick)
        back.append(pick)

    seq = low + [x for rep in reversed(back) for x in blocks[rep]]
    out: list[int] = []
    for x in seq:
        have = core.meet_closure(t, set(out) | {g})
        need = core.meet_closure(t, set(out) | {g, x})
        fresh = sorted(need - have - {x}, key=lambda v: t.depth[v])
        if len(fresh) > 1:
            raise StructureError("a prefix gained more than one closure point")
        out.extend(fresh)
        out.append(x)

    n0 = next((i for i, x in enumerate(out) if t.lt(g, x)), len(out))
    proj_ok = all(
        t.leq(t.meet(out[i], g), t.meet(out[i + 1], g))
        for i in range(len(out) - 1)
    )
    cone_rep = {
        i: min(core.cone_of(s, g, out[i]))
        for i in range(n0, len(out)) if t.lt(g, out[i])
    }
    convex_ok = True
    for i in cone_rep:
        for j in cone_rep:
            if i < j and cone_rep[i] == cone_rep[j]:
                if cone_rep.get(i + 1) != cone_rep[j]:
                    convex_ok = False
    clear_ok = all(
        t.leq(t.meet(out[i], alpha(out[j])), g)
        for j in range(n0, len(out))
        for i in range(j + 1)
        if t.lt(g, out[j])
    )
    prefix_ok = all(
        core.meet_closure(t, set(out[:i + 1]) | {g}) <= set(out[:i + 1]) | {g}
        for i in range(len(out))
    )
    cert = {
        "n0": n0,
        "projections_monotone": proj_ok,
        "cones_convex": convex_ok,
        "images_clear": clear_ok,
        "prefixes_closed": prefix_ok,
    }
    if not all((proj_ok, convex_ok, clear_ok, prefix_ok)):
        raise StructureError(f"ordering came out untame: {cert}")
    return AlphaOrderResult(out, [out.index(x) for x in entries], cert)


# ---------------------------------------------------------------------------
# moved realizations


def move_maximally_witness(appr: Approximation, alpha: PartialAutomorphism,
                           p: QfTypeCode, C, side: str,
                           relation: indep.Relation) -> int:
    """A realization of p over C that alpha moves independently off C.

    p is the type of the closure of C, enumerated sorted, with one extra
    point. side right asks the image independent from the witness over C,
    side left the reverse. Realizations inside the closure of C are
    algebraic and work immediately; otherwise a fresh independent copy is
    taken, so the one-point extension of alpha there is free to fall off
    the closure of C.
    """
    if side not in ("left", "right"):
        raise StructureError(f"unknown side {side!r}")
    s = appr.current
    Cc = indep.rel_closure(s, frozenset(C), relation)
    base = tuple(sorted(Cc))

    def realizes(z: int) -> bool:
        return core.qf_type(appr.current, base + (z,)) == p

    def verdict_for(w: int) -> indep.IndepVerdict:
        v = alpha.map[w]
        pair = (frozenset({w}), frozenset({v}))
        if side == "left":
            pair = (pair[1], pair[0])
        return indep.decide(indep.IndepQuery(appr.current, pair[0], pair[1],
                                             frozenset(Cc), relation))

    for z in base:
        if realizes(z):
            if z not in alpha.map:
                _extend_point(appr, alpha.map, z)
            out = verdict_for(z)
            if not out.independent:
                raise StructureError("an algebraic realization failed to move freely")
            return z

    z0 = None
    for z in range(appr.current.n):
        if z not in Cc and realizes(z):
            z0 = z
            break
    if z0 is None:
        for req in limit.enumerate_point_extensions(appr.current, Cc):
            if req.target_type == p:
                z0 = limit.realize_extension(appr, req)
                break
    if z0 is None:
        raise StructureError("the type has no one-point realization over C")

    for _ in range(8):
        big = indep.rel_closure(
            appr.current,
            Cc | set(alpha.map) | set(alpha.map.values()) | {z0},
            relation,
        )
        w = indep.extension_witness(appr, (z0,), Cc, big, relation)[0]
        if w not in alpha.map:
            _extend_point(appr, alpha.map, w, fix_allowed=Cc)
        if verdict_for(w).independent:
            return w
        z0 = w
    raise StructureError(f"no {side}-moved realization of the type was found")
