import itertools

from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dpll
from nestinst.combine import combine
from nestinst.membership import TreeAutomaton, emptiness_witness, intersect, subset_witnesses, theta_in, MembershipFragment
from nestinst.pipeline import Flags, build_procedure
from nestinst.problem import parse_problem
from nestinst.terms import BASE, App, Clause, Literal, Sort, Var, apply, variables
from nestinst.theory import normalize_literals

TREE = Sort("tree", BASE)
SIGMA = {"z": 0, "s": 1, "f": 1}
STATES = ("q0", "q1", "q2")


def terms_up_to(depth):
    level = [App("z", (), TREE)]
    out = list(level)
    for _ in range(depth):
        level = [App(g, (t,), TREE) for g in ("s", "f") for t in level]
        out.extend(level)
    return out


TERMS5 = terms_up_to(5)

automata = st.builds(
    lambda z, s, f, final: TreeAutomaton.of(
        STATES,
        final,
        [("z", (), z)] + [("s", (q,), t) for q, t in zip(STATES, s)] + [("f", (q,), t) for q, t in zip(STATES, f)],
    ),
    st.sampled_from(STATES),
    st.lists(st.sampled_from(STATES), min_size=3, max_size=3),
    st.lists(st.sampled_from(STATES), min_size=3, max_size=3),
    st.sets(st.sampled_from(STATES), min_size=1, max_size=2),
)


def test_run_and_accept():
    even = TreeAutomaton.of(("e", "o"), {"e"}, [("z", (), "e"), ("s", ("e",), "o"), ("s", ("o",), "e")])
    two = App("s", (App("s", (App("z", (), TREE),), TREE),), TREE)
    assert even.accepts(two)
    assert not even.accepts(two.args[0])
    assert emptiness_witness(even, TREE) == App("z", (), TREE)


def test_finite_language_automaton():
    ts = terms_up_to(2)[1:4]
    a = TreeAutomaton.for_terms(ts, SIGMA)
    assert {t for t in TERMS5 if a.accepts(t)} == set(ts)


@settings(max_examples=100, deadline=None)
@given(st.lists(automata, min_size=1, max_size=3))
def test_intersection_matches_conjunction(auts):
    product = intersect(auts, SIGMA)
    for t in terms_up_to(3):
        assert product.accepts(t) == all(a.accepts(t) for a in auts)


@settings(max_examples=100, deadline=None)
@given(st.lists(automata, min_size=1, max_size=3))
def test_witnesses_are_accepted(auts):
    frag = MembershipFragment(TREE, SIGMA, {f"P{i}": a for i, a in enumerate(auts)})
    wits = subset_witnesses(frag)
    for names, w in wits.items():
        assert all(frag.predicates[n].accepts(w) for n in names)
    # a missing subset really is empty: its product has at most 27 states, so
    # any accepted term would have depth below that; depth 5 is checked here
    for r in range(len(auts) + 1):
        for combo in itertools.combinations(sorted(frag.predicates), r):
            if frozenset(combo) not in wits:
                assert not any(all(frag.predicates[n].accepts(t) for n in combo) for t in TERMS5)


# -- equisatisfiability against depth-bounded grounding ---------------------------------


def _automaton_text(name, a):
    rules = " ".join(f"({f} {' '.join(qs)} -> {q})" if qs else f"({f} -> {q})" for f, qs, q in a.rules)
    return f"({name} tree (states {' '.join(a.states)}) (final {' '.join(sorted(a.final))}) (rules {rules}))"


GROUND = ["z", "(s z)", "(f z)", "(s (f z))"]
var_lits = st.one_of(
    st.sampled_from(["(not (P0 x))", "(not (P1 x))"]),
    st.sampled_from(GROUND).map(lambda t: f"(not (= x {t}))"),
    st.sampled_from(["(q x)", "(not (q x))", "(r x)", "(not (r x))"]),
)
ground_lits = st.one_of(
    st.sampled_from(GROUND).flatmap(lambda t: st.sampled_from([f"(q {t})", f"(not (q {t}))", f"(r {t})", f"(not (r {t}))"])),
    st.sampled_from(GROUND).flatmap(lambda t: st.sampled_from([f"(P0 {t})", f"(not (P1 {t}))"])),
)
var_clauses = st.lists(var_lits, min_size=1, max_size=3).map(lambda ls: f"(forall ((x tree)) (or {' '.join(ls)}))")
ground_clauses = st.lists(ground_lits, min_size=1, max_size=2).map(lambda ls: f"(or {' '.join(ls)})")


def _membership_problem(auts, cls):
    preds = " ".join(_automaton_text(f"P{i}", a) for i, a in enumerate(auts))
    return parse_problem(
        f"""(problem (sorts (tree base) (elem target))
          (functions (z () tree) (s (tree) tree) (f (tree) tree) (q (tree) bool) (r (tree) bool))
          (theory (base (membership {preds})) (target fol))
          (clauses {' '.join(cls)}))"""
    )


def _propositional(ground, fragments):
    """Evaluate membership and base equations; keep q/r atoms as propositions."""
    out = []
    for cl in ground:
        lits, true = set(), False
        for l in cl:
            if l.is_equational:
                v = (l.left == l.right) == l.pos
            elif l.left.fn in fragments:
                v = fragments[l.left.fn].accepts(l.left.args[0]) == l.pos
            else:
                lits.add((str(l.left), l.pos))
                continue
            true = true or v
        if not true:
            out.append(lits)
    return out


@settings(max_examples=50, deadline=None)
@given(
    st.lists(automata, min_size=2, max_size=2),
    st.lists(var_clauses, min_size=1, max_size=3),
    st.lists(ground_clauses, max_size=3),
)
def test_combination_agrees_with_depth_bounded_grounding(auts, vcls, gcls):
    prob = _membership_problem(auts, vcls + gcls)
    preds = {f"P{i}": a for i, a in enumerate(auts)}
    clauses = normalize_literals(prob.clauses)
    full = []
    for cl in clauses:
        vs = variables(cl)
        for combo in itertools.product(TERMS5, repeat=len(vs)):
            full.append(apply(dict(zip(vs, combo)), cl))
    expected = dpll(_propositional(full, preds))
    outcome = combine(build_procedure(prob.theory, prob, Flags()), clauses)
    got = dpll(_propositional(outcome.instances, preds))
    assert got == expected
    for inst in outcome.instances:
        for origin, subst in outcome.provenance[inst]:
            assert apply(dict(subst), clauses[origin]) == inst


def test_theta_in_pool():
    even = TreeAutomaton.of(("e", "o"), {"e"}, [("z", (), "e"), ("s", ("e",), "o"), ("s", ("o",), "e"), ("f", ("e",), "o"), ("f", ("o",), "o")])
    frag = MembershipFragment(TREE, SIGMA, {"even": even})
    x = Var("x", TREE)
    z = App("z", (), TREE)
    s = [Clause.of([Literal.atom(False, App("even", (x,), Sort("bool", BASE))), Literal.make(False, x, App("f", (z,), TREE))])]
    out = theta_in(s, frag)
    assert set(out.pool["tree"]) == {z, App("f", (z,), TREE)}
