import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import treeforge.core as core
import treeforge.indep as indep
import treeforge.limit as limit
from treeforge.core import StructureError, make_structure
from treeforge.indep import (
    IndepQuery,
    Relation,
    cone_relation,
    graph_free_relation,
    semibranch_relation,
)


# --- independent oracle: the definition, quantifier by quantifier --------------


def oracle_gamma_closure(t, xs, gamma):
    acc = set(xs) | {gamma}
    changed = True
    while changed:
        changed = False
        for a, b in itertools.combinations(list(acc), 2):
            m = t.meet(a, b)
            if m not in acc:
                acc.add(m)
                changed = True
    return acc


def oracle_cone_indep(s, A, B, C, gamma) -> bool:
    t = s.tree
    ac = oracle_gamma_closure(t, set(A) | set(C), gamma)
    bc = oracle_gamma_closure(t, set(B) | set(C), gamma)
    cc = oracle_gamma_closure(t, C, gamma)
    for a in ac:
        for b in bc:
            if t.leq(b, a):
                if not any(t.leq(b, c) and t.leq(c, a) for c in cc):
                    return False
            if t.meet(a, b) not in cc:
                if all(t.meet(a, c) == t.meet(b, c) for c in cc):
                    return False
    return True


def replay_verdict(q: IndepQuery, v) -> None:
    """A failing witness must reproduce its clause on the closures."""
    s = q.structure
    t = s.tree
    rel = q.relation
    if rel.kind == indep.GRAPH_FREE:
        if v.violated_clause == "graph-intersection":
            (x,) = v.witness
            assert x in q.A and x in q.B and x not in q.C
        else:
            a, b = v.witness
            assert s.has_edge(a, b) and a not in q.C and b not in q.C
        return
    ac = indep.rel_closure(s, q.A | q.C, rel)
    bc = indep.rel_closure(s, q.B | q.C, rel)
    cc = indep.rel_closure(s, q.C, rel)
    if v.violated_clause == "(i)":
        a, b = v.witness
        assert a in ac and b in bc and t.leq(b, a)
        assert not any(t.leq(b, c) and t.leq(c, a) for c in cc)
    elif v.violated_clause == "(ii)":
        a, b, m = v.witness
        assert a in ac and b in bc and t.meet(a, b) == m and m not in cc
        assert all(t.meet(a, c) == t.meet(b, c) for c in cc)
        if rel.kind == indep.SEMIBRANCH:
            assert core.semibranch_projection(s, a) == core.semibranch_projection(s, b)
    else:
        a, b = v.witness[:2]
        assert s.has_edge(a, b) or (a == b and a not in cc)


def parent_arrays(max_n):
    def build(draw_parents):
        return tuple([None] + list(draw_parents))

    return st.integers(min_value=1, max_value=max_n).flatmap(
        lambda n: st.tuples(*[st.integers(0, i) for i in range(n - 1)]).map(build)
    )


# --- the worked configuration ---------------------------------------------------
# chain 0 < 1 < 2 < 3 < 4 with cones {5}, {6} above the point 4; side branch
# at 1 carrying 7 < {8} and 7 < 9 < 10.  A-side (5, 2, 10), B-side (6, 3, 8, 0),
# base {9}.


@pytest.fixture
def figure():
    return make_structure([None, 0, 1, 2, 3, 4, 4, 1, 7, 7, 9], point=4)


A_FIG = frozenset({5, 2, 10})
B_FIG = frozenset({6, 3, 8, 0})
C_FIG = frozenset({9})


def test_figure_is_independent(figure):
    q = indep.query(figure, A_FIG, B_FIG, C_FIG, cone_relation())
    v = indep.cone_indep(q)
    assert v.independent
    assert v.violated_clause == "none" and v.witness == ()
    assert oracle_cone_indep(figure, A_FIG, B_FIG, C_FIG, 4)


def test_figure_plain_reduct_agrees(figure):
    plain = make_structure(figure.tree.parent)
    q = indep.query(plain, A_FIG, B_FIG, C_FIG, cone_relation(gamma=4))
    assert indep.cone_indep(q).independent


def test_left_existence(figure):
    # anything inside the closure of the base is independent from anything
    for A in [frozenset(), frozenset({9}), frozenset({9, 4}), frozenset({1})]:
        q = indep.query(figure, A, B_FIG, C_FIG, cone_relation())
        assert indep.cone_indep(q).independent
    q = indep.query(figure, A_FIG, B_FIG, A_FIG, cone_relation())
    assert indep.cone_indep(q).independent  # over its own base
    q = indep.query(figure, A_FIG, B_FIG, B_FIG, cone_relation())
    assert indep.cone_indep(q).independent


def test_reflexivity_violation(figure):
    # a point outside the base closure is never independent from itself
    q = indep.query(figure, {10}, {10}, {9}, cone_relation())
    v = indep.cone_indep(q)
    assert not v.independent
    assert v.violated_clause == "(i)" and v.witness == (10, 10)
    replay_verdict(q, v)


def test_missing_gamma_raises(figure):
    plain = make_structure(figure.tree.parent)
    q = indep.query(plain, {5}, {6}, set(), cone_relation())
    with pytest.raises(StructureError):
        indep.cone_indep(q)
    with pytest.raises(StructureError):
        indep.cone_indep(indep.query(figure, {5}, {6}, set(), cone_relation(gamma=99)))


def test_query_checks_universe(figure):
    with pytest.raises(StructureError):
        indep.query(figure, {50}, {6}, set(), cone_relation())


@settings(max_examples=150)
@given(parent_arrays(6), st.data())
def test_cone_indep_matches_oracle(parent, data):
    s = make_structure(parent)
    n = s.n
    gamma = data.draw(st.integers(0, n - 1))
    A = data.draw(st.sets(st.integers(0, n - 1), max_size=3))
    B = data.draw(st.sets(st.integers(0, n - 1), max_size=3))
    C = data.draw(st.sets(st.integers(0, n - 1), max_size=2))
    q = indep.query(s, A, B, C, cone_relation(gamma=gamma))
    v = indep.cone_indep(q)
    assert v.independent == oracle_cone_indep(s, A, B, C, gamma)
    if not v.independent:
        replay_verdict(q, v)


@settings(max_examples=120)
@given(parent_arrays(6), st.data())
def test_base_point_irrelevance(parent, data):
    # verdicts agree for any two base points inside C
    s = make_structure(parent)
    n = s.n
    C = data.draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=3))
    A = data.draw(st.sets(st.integers(0, n - 1), max_size=3))
    B = data.draw(st.sets(st.integers(0, n - 1), max_size=3))
    verdicts = {
        indep.cone_indep(indep.query(s, A, B, C, cone_relation(gamma=g))).independent
        for g in C
    }
    assert len(verdicts) == 1


@settings(max_examples=120)
@given(parent_arrays(6), st.data())
def test_independence_bounds_cones_and_generation(parent, data):
    s = make_structure(parent)
    n = s.n
    gamma = data.draw(st.integers(0, n - 1))
    A = data.draw(st.sets(st.integers(0, n - 1), max_size=3))
    B = data.draw(st.sets(st.integers(0, n - 1), max_size=3))
    C = data.draw(st.sets(st.integers(0, n - 1), max_size=2))
    rel = cone_relation(gamma=gamma)
    q = indep.query(s, A, B, C, rel)
    if not indep.cone_indep(q).independent:
        return
    ac = indep.rel_closure(s, A | C, rel)
    bc = indep.rel_closure(s, B | C, rel)
    cc = indep.rel_closure(s, C, rel)
    # the two sides only share cones above gamma through the base
    assert core.cone_union(s, gamma, ac) & core.cone_union(s, gamma, bc) \
        == core.cone_union(s, gamma, cc)
    # and together they already generate their union
    assert indep.rel_closure(s, A | B | C, rel) == ac | bc


# --- semibranch relation ---------------------------------------------------------


@pytest.fixture
def branched():
    # chain 0 < 4 (the designated branch), side cone at 1 above 0 with 2, 3
    return make_structure([None, 0, 1, 1, 0], tip=4)


def test_semibranch_right_existence(branched):
    q = indep.query(branched, {2, 3}, {0, 4}, {0, 4}, semibranch_relation())
    assert indep.semibranch_indep(q).independent


def test_semibranch_distinct_projections(branched):
    q = indep.query(branched, {2}, {4}, {0}, semibranch_relation())
    v = indep.semibranch_indep(q)
    assert v.independent
    ac = indep.rel_closure(branched, {2, 0}, q.relation)
    bc = indep.rel_closure(branched, {4, 0}, q.relation)
    assert ac & bc == indep.rel_closure(branched, {0}, q.relation)


def test_semibranch_shared_cone_violates(branched):
    q = indep.query(branched, {2}, {3}, {0}, semibranch_relation())
    v = indep.semibranch_indep(q)
    assert not v.independent
    assert v.violated_clause == "(ii)" and v.witness == (2, 3, 1)
    replay_verdict(q, v)


def test_semibranch_needs_flavor(figure):
    q = indep.query(figure, {5}, {6}, set(), semibranch_relation())
    with pytest.raises(StructureError):
        indep.semibranch_indep(q)


def test_semibranch_guard_is_what_separates_from_cone(branched):
    # same pair, meet outside the base: the cone clause fires, the chain
    # clause does not, because the projections differ
    q_cone = indep.query(branched, {2}, {4}, set(), cone_relation(gamma=0))
    q_semi = indep.query(branched, {2}, {4}, {0}, semibranch_relation())
    assert indep.cone_indep(q_cone).independent
    assert indep.semibranch_indep(q_semi).independent
    q_bad = indep.query(branched, {2}, {3}, {0, 1}, semibranch_relation())
    assert indep.semibranch_indep(q_bad).independent  # meet inside the base now


# --- graph side ------------------------------------------------------------------


def test_graph_free_disjoint_edgeless():
    s = make_structure([None, 0, 0, 0], relational=True)
    q = indep.query(s, {1}, {2}, set(), graph_free_relation())
    assert indep.graph_free_indep(q).independent


def test_graph_free_shared_vertex():
    s = make_structure([None, 0, 0, 0], relational=True)
    q = indep.query(s, {1, 2}, {2, 3}, set(), graph_free_relation())
    v = indep.graph_free_indep(q)
    assert not v.independent
    assert v.violated_clause == "graph-intersection" and v.witness == (2,)
    replay_verdict(q, v)
    # the overlap is fine once the base owns it
    q2 = indep.query(s, {1, 2}, {2, 3}, {2}, graph_free_relation())
    assert indep.graph_free_indep(q2).independent


def test_graph_free_cross_edge():
    s = make_structure([None, 0, 0, 0], edges=[(1, 2)], relational=True)
    q = indep.query(s, {1}, {2}, set(), graph_free_relation())
    v = indep.graph_free_indep(q)
    assert not v.independent
    assert v.violated_clause == "graph-cross-edge" and v.witness == (1, 2)
    replay_verdict(q, v)


def test_graph_free_needs_layer():
    s = make_structure([None, 0, 0])
    with pytest.raises(StructureError):
        indep.graph_free_indep(indep.query(s, {1}, {2}, set(), graph_free_relation()))


# --- mixed relation --------------------------------------------------------------


def test_mix_tree_side_fails_first():
    s = make_structure([None, 0, 0], relational=True)
    q = indep.query(s, {1}, {1}, set(), cone_relation(gamma=0, mixed=True))
    v = indep.mix_indep(q)
    assert not v.independent and v.side == "tree"


def test_mix_graph_side_fails_alone():
    s = make_structure([None, 0, 0], edges=[(1, 2)], relational=True)
    q = indep.query(s, {1}, {2}, set(), cone_relation(gamma=0, mixed=True))
    v = indep.mix_indep(q)
    assert not v.independent
    assert v.side == "graph" and v.violated_clause == "graph-cross-edge"


def test_mix_both_sides_pass():
    s = make_structure([None, 0, 0], relational=True)
    q = indep.query(s, {1}, {2}, set(), cone_relation(gamma=0, mixed=True))
    assert indep.mix_indep(q).independent
    assert indep.decide(q).independent


def test_mix_needs_layer(figure):
    q = indep.query(figure, {5}, {6}, set(), cone_relation(mixed=True))
    with pytest.raises(StructureError):
        indep.mix_indep(q)


def test_relation_guards():
    with pytest.raises(StructureError):
        Relation("nonsense")
    with pytest.raises(StructureError):
        Relation(indep.GRAPH_FREE, mixed=True)


# --- the coarse position test ----------------------------------------------------


def test_easy_indep_fresh_cone_vs_below(figure):
    # 5 sits above the point, everything of B meets it at or below the point
    q = indep.query(figure, {5}, {0, 3, 6}, C_FIG, cone_relation())
    assert indep.easy_indep_sufficient(q)
    assert indep.cone_indep(q).independent


def test_easy_indep_vacuous(figure):
    assert indep.easy_indep_sufficient(
        indep.query(figure, set(), B_FIG, C_FIG, cone_relation())
    )


def test_easy_indep_shared_cone_says_nothing(figure):
    # 8 and 10 share the cone at 1 below the point: the test must stay quiet
    q = indep.query(figure, {8}, {10}, C_FIG, cone_relation())
    assert not indep.easy_indep_sufficient(q)


@settings(max_examples=150)
@given(parent_arrays(6), st.data())
def test_easy_indep_implies_independence(parent, data):
    s = make_structure(parent)
    n = s.n
    gamma = data.draw(st.integers(0, n - 1))
    A = data.draw(st.sets(st.integers(0, n - 1), max_size=3))
    B = data.draw(st.sets(st.integers(0, n - 1), max_size=3))
    C = data.draw(st.sets(st.integers(0, n - 1), max_size=2))
    q = indep.query(s, A, B, C, cone_relation(gamma=gamma))
    # easy_indep_sufficient certifies internally; a True without independence
    # would raise out of this call
    if indep.easy_indep_sufficient(q):
        assert indep.cone_indep(q).independent


# --- constructive extension -------------------------------------------------------


def appr_of(s) -> limit.Approximation:
    return limit.Approximation(s, s.flavor, 0)


def test_extension_witness_inside_base(figure):
    appr = appr_of(figure)
    C = indep.rel_closure(figure, {9}, cone_relation())
    B = indep.rel_closure(figure, {9, 6, 3}, cone_relation())
    assert indep.extension_witness(appr, 9, C, B, cone_relation()) == 9
    assert appr.current.n == figure.n  # nothing grew


def test_extension_witness_rejects_open_sets(figure):
    appr = appr_of(figure)
    with pytest.raises(StructureError):
        indep.extension_witness(appr, 5, {9}, {9, 6}, cone_relation())


def test_extension_witness_rejects_two_step(figure):
    appr = appr_of(figure)
    C = indep.rel_closure(figure, set(), cone_relation())
    B = indep.rel_closure(figure, {6}, cone_relation())
    # 8's closure over {4} adds the meet 7 as well
    with pytest.raises(StructureError):
        indep.extension_witness(appr, 8, C, B, cone_relation())


def test_extension_below_everything():
    # everything of C sits above a, so the copy goes below all of B
    s = make_structure([None, 0, 1])
    appr = appr_of(s)
    rel = cone_relation(gamma=2)
    C = frozenset({2})
    B = frozenset({0, 1, 2})
    w = indep.extension_witness(appr, 0, C, B, rel)
    s2 = appr.current
    assert w != 0 and s2.tree.lt(w, 1)
    assert core.qf_type_over(s2, (w,), C) == core.qf_type_over(s2, (0,), C)
    assert indep.decide(indep.query(s2, {w}, B, C, rel)).independent


def test_extension_fresh_cone():
    # nothing of C above a: the copy opens a cone at the deepest meet,
    # clear of every cone B occupies there
    s = make_structure([None, 0, 1, 0])
    appr = appr_of(s)
    rel = cone_relation(gamma=0)
    C = frozenset({0})
    B = frozenset({0, 1, 2, 3})
    w = indep.extension_witness(appr, 1, C, B, rel)
    s2 = appr.current
    assert all(s2.tree.meet(w, b) == 0 for b in B)
    assert indep.decide(indep.query(s2, {w}, B, C, rel)).independent


def test_extension_gap():
    # C has points on both sides of a: the copy lands in the gap below the
    # first B element between them
    s = make_structure([None, 0, 1])
    appr = appr_of(s)
    rel = cone_relation(gamma=0)
    C = frozenset({0, 2})
    B = frozenset({0, 1, 2})
    w = indep.extension_witness(appr, 1, C, B, rel)
    s2 = appr.current
    assert s2.tree.lt(0, w) and s2.tree.lt(w, 1)
    assert core.qf_type_over(s2, (w,), sorted(C)) == core.qf_type_over(s2, (1,), sorted(C))
    assert indep.decide(indep.query(s2, {w}, B, C, rel)).independent


def test_extension_reuses_existing_node():
    # a realizer already sits in the right position: no growth
    s = make_structure([None, 0, 1, 2, 0, 4])
    appr = appr_of(s)
    rel = cone_relation(gamma=0)
    C = frozenset({0, 2})
    B = frozenset({0, 2, 4})
    w = indep.extension_witness(appr, 1, C, B, rel)
    assert appr.current.n == s.n
    assert indep.decide(indep.query(appr.current, {w}, B, C, rel)).independent


def test_extension_semibranch_on_chain_self_witness():
    # a sits on the chain with nothing of B above the meet: such a point is
    # already independent, so it stands witness for itself
    s = make_structure([None, 0, 1, 0], tip=2)
    appr = appr_of(s)
    rel = semibranch_relation()
    C = frozenset({0})
    B = frozenset({0, 3})
    w = indep.extension_witness(appr, 1, C, B, rel)
    assert w == 1 and appr.current.n == s.n


def test_extension_semibranch_off_chain_cone():
    # an off-chain point over a base that collides with it: fresh cone
    s = make_structure([None, 0, 1, 0], tip=2)
    appr = appr_of(s)
    rel = semibranch_relation()
    C = frozenset({0})
    B = frozenset({0, 1, 3})
    w = indep.extension_witness(appr, 3, C, B, rel)
    s2 = appr.current
    assert w not in B and w not in core.gamma_set(s2)
    assert all(s2.tree.meet(w, b) == 0 for b in B)
    assert indep.decide(indep.query(s2, {w}, B, C, rel)).independent


def test_extension_semibranch_chain_gap():
    # B occupies the chain above the meet: the copy slips into the gap
    s = make_structure([None, 0, 1, 0], tip=2)
    appr = appr_of(s)
    rel = semibranch_relation()
    C = frozenset({0})
    B = frozenset({0, 1, 2})
    w = indep.extension_witness(appr, 1, C, B, rel)
    s2 = appr.current
    assert w not in B and w in core.gamma_set(s2)
    assert core.qf_type_over(s2, (w,), C) == core.qf_type_over(s2, (1,), C)
    assert indep.decide(indep.query(s2, {w}, B, C, rel)).independent


def test_extension_tuple_threads_connecting_meet():
    # the pair closes over C with an extra meet; it must be witnessed first
    s = make_structure([None, 0, 1, 1])
    appr = appr_of(s)
    rel = cone_relation(gamma=0)
    C = frozenset({0})
    B = frozenset({0, 1, 2, 3})
    out = indep.extension_witness(appr, (2, 3), C, B, rel)
    s2 = appr.current
    assert out == (4, 6)  # ids: cone copy, then the meet 5, then its mate
    assert s2.tree.meet(4, 6) == 5
    assert core.qf_type(s2, (0, 2, 3)) == core.qf_type(s2, (0,) + out)
    assert indep.decide(indep.query(s2, set(out), B, C, rel)).independent


def test_extension_mixed_copies_base_edges():
    s = make_structure([None, 0, 0], edges=[(0, 1), (1, 2)], relational=True)
    appr = appr_of(s)
    rel = cone_relation(gamma=0, mixed=True)
    C = frozenset({0})
    B = frozenset({0, 1, 2})
    w = indep.extension_witness(appr, 1, C, B, rel)
    s2 = appr.current
    assert s2.has_edge(w, 0)  # the base edge travels with the copy
    assert not s2.has_edge(w, 1) and not s2.has_edge(w, 2)
    assert indep.decide(indep.query(s2, {w}, B, C, rel)).independent


def test_extension_on_grown_approximation():
    appr = limit.build_approximation("pointed", False, steps=12, seed=9, sweep=False)
    s = appr.current
    rel = cone_relation()
    picks = [v for v in range(s.n)][:6]
    C = indep.rel_closure(s, picks[:1], rel)
    B = indep.rel_closure(s, picks, rel)
    outside = [a for a in range(s.n) if indep.rel_closure(s, C | {a}, rel) == C | {a}]
    for a in outside[:4]:
        w = indep.extension_witness(appr, a, C, B, rel)
        s2 = appr.current
        assert core.qf_type_over(s2, (w,), sorted(C)) == core.qf_type_over(s2, (a,), sorted(C))
        B = indep.rel_closure(s2, B | {w}, rel)


# --- joint types ------------------------------------------------------------------


@settings(max_examples=100)
@given(parent_arrays(7), st.data())
def test_realize_type_round_trip(parent, data):
    t = core.MeetTree(parent)
    kind = data.draw(st.sampled_from(core.KINDS))
    mark = data.draw(st.integers(0, t.n - 1))
    if kind == core.POINTED:
        s = make_structure(parent, point=mark)
    elif kind == core.SEMIBRANCHED:
        s = make_structure(parent, tip=mark, treat_tip_as_branch=True)
    else:
        s = make_structure(parent)
    k = data.draw(st.integers(1, min(4, t.n)))
    tup = tuple(data.draw(st.integers(0, t.n - 1)) for _ in range(k))
    code = core.qf_type(s, tup)
    w, wtup = indep.realize_type(code, s.flavor)
    assert core.qf_type(w, wtup) == code


def test_realize_type_rejects_garbage():
    s = make_structure([None, 0, 0])
    code = core.qf_type(s, (1, 2))
    broken = core.QfTypeCode(code.arity, frozenset(), code.edge_rel, code.eq_rel)
    with pytest.raises(StructureError):
        indep.realize_type(broken, s.flavor)


def test_predict_trivial_side(figure):
    rel = cone_relation()
    sA = core.qf_type_over(figure, (5, 2), sorted(C_FIG))
    sC = core.qf_type_over(figure, (), sorted(C_FIG))
    assert indep.predict_joint_type(sA, sC, rel, 1) == sA
    assert indep.predict_joint_type(sC, sA, rel, 1) == sA


def test_predict_two_fresh_cones():
    # one point in a cone above gamma on each side: they join as two cones
    s = make_structure([None, 0])
    rel = cone_relation(gamma=0)
    sA = core.qf_type_over(s, (1,), [0])
    joint = indep.predict_joint_type(sA, sA, rel, 1)
    direct = make_structure([None, 0, 0])
    assert joint == core.qf_type(direct, (0, 1, 2))


def test_predict_matches_figure(figure):
    # the worked configuration is independent, so its joint type must be
    # exactly the predicted one
    rel = cone_relation()
    a_tup = (5, 2, 10)
    b_tup = (6, 3, 8, 0)
    sA = core.qf_type_over(figure, a_tup, sorted(C_FIG))
    sB = core.qf_type_over(figure, b_tup, sorted(C_FIG))
    joint = indep.predict_joint_type(sA, sB, rel, 1)
    assert joint == core.qf_type_over(figure, a_tup + b_tup, sorted(C_FIG))


def test_predict_mixed_keeps_edges_apart():
    s = make_structure([None, 0, 0], edges=[(0, 1)], relational=True)
    rel = cone_relation(gamma=0, mixed=True)
    sA = core.qf_type_over(s, (1,), [0])   # edge to the base point
    sB = core.qf_type_over(s, (2,), [0])   # no edge
    joint = indep.predict_joint_type(sA, sB, rel, 1)
    direct = make_structure([None, 0, 0], edges=[(0, 1)], relational=True)
    assert joint == core.qf_type(direct, (0, 1, 2))


def test_predict_rejects_base_mismatch(figure):
    rel = cone_relation()
    sA = core.qf_type_over(figure, (5,), [9])
    sB = core.qf_type_over(figure, (6,), [3])
    with pytest.raises(StructureError):
        indep.predict_joint_type(sA, sB, rel, 1)


def test_predict_pure_tree_rejects_edges():
    s = make_structure([None, 0, 0], edges=[(1, 2)], relational=True)
    sA = core.qf_type_over(s, (1, 2), [0])
    with pytest.raises(StructureError):
        indep.predict_joint_type(sA, sA, cone_relation(gamma=0), 1)


def test_predict_is_the_type_of_independent_pairs():
    # stationarity on a grown structure: whenever the verdict is independent,
    # the joint type is forced
    appr = limit.build_approximation("plain", True, steps=30, seed=3, sweep=False)
    s = appr.current
    rel = cone_relation(gamma=s.tree.root, mixed=True)
    C = frozenset({s.tree.root})
    checked = 0
    for a in range(s.n):
        for b in range(a, s.n):
            q = indep.query(s, {a}, {b}, C, rel)
            if not indep.decide(q).independent:
                continue
            sA = core.qf_type_over(s, (a,), sorted(C))
            sB = core.qf_type_over(s, (b,), sorted(C))
            joint = indep.predict_joint_type(sA, sB, rel, len(C))
            assert joint == core.qf_type_over(s, (a, b), sorted(C))
            checked += 1
        if checked > 60:
            break
    assert checked > 10


def test_predict_semibranch_pair():
    s = make_structure([None, 0, 1, 0, 0], tip=2, treat_tip_as_branch=True)
    rel = semibranch_relation()
    C = [0]
    q = indep.query(s, {3}, {4}, set(C), rel)
    assert indep.decide(q).independent
    sA = core.qf_type_over(s, (3,), C)
    sB = core.qf_type_over(s, (4,), C)
    joint = indep.predict_joint_type(sA, sB, rel, 1)
    assert joint == core.qf_type_over(s, (3, 4), C)
