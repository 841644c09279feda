import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import arith_clause
from strategies import A, B, NAT, X, Y, fragment_clause, fragment_sets
from nestinst.arith import eqmod, le, lt, normalize_linear, num, plus
from nestinst.errors import FragmentViolation
from nestinst.presburger import chi_axioms, compute_pool, theta_Z, validate_fragment
from nestinst.terms import Clause, Literal, Var, apply, chi, variables

CHI = chi(NAT).fn


def forms(terms):
    return {normalize_linear(t) for t in terms}


def test_fragment_inference():
    s = [
        Clause.of([Literal.atom(False, le(X, A)), Literal.atom(False, eqmod(2, X, num(0, NAT)))]),
        Clause.of([Literal.atom(False, le(B, X)), Literal.atom(False, eqmod(3, X, B))]),
    ]
    frag = validate_fragment(s)
    assert frag.m == 6
    assert set(frag.T["nat"]) == {A, B, num(0, NAT)}
    pool = compute_pool(s, frag, no_chi=True)
    assert pool.B["nat"] == (A,)
    assert forms(pool.G["nat"]) == {normalize_linear(A).shift(-l) for l in range(6)}
    axioms = {str(c) for c in chi_axioms(frag)}
    assert axioms == {"6 < chi", "a+6 < chi", "b+6 < chi"}


def test_pool_with_chi():
    s = [Clause.of([Literal.atom(False, le(X, A))])]
    pool = compute_pool(s, validate_fragment(s))
    assert pool.B["nat"] == (chi(NAT), A)


def test_chi_axioms_follow_the_pool():
    bounded = [Clause.of([Literal.atom(False, le(X, A))])]
    assert theta_Z(bounded, no_chi=True).aux_axioms == []
    assert [str(c) for c in theta_Z(bounded).aux_axioms] == ["a+1 < chi"]
    # without upper bounds chi stays in the pool, and so do its axioms
    unbounded = [Clause.of([Literal.atom(False, le(A, X))])]
    assert [str(c) for c in theta_Z(unbounded, no_chi=True).aux_axioms] == ["a+1 < chi"]


@pytest.mark.parametrize(
    "lit",
    [
        Literal.atom(True, le(X, A)),
        Literal.atom(False, lt(X, A)),
        Literal.make(False, X, A),
        Literal.atom(True, eqmod(2, X, A)),
        Literal.atom(False, eqmod(2, X, Y)),
        Literal.atom(False, le(plus(X, X), A)),
    ],
    ids=["positive-le", "strict", "equation", "positive-mod", "mod-two-vars", "coefficient"],
)
def test_fragment_violations(lit):
    with pytest.raises(FragmentViolation):
        validate_fragment([Clause.of([lit])])


def _holds(clauses, env, lo=-14, hi=14):
    for cl in clauses:
        vs = [v.name for v in variables(cl)]
        for vals in itertools.product(range(lo, hi + 1), repeat=len(vs)):
            if not arith_clause(cl, {**env, **dict(zip(vs, vals))}):
                return False
    return True


def _sat_over_integers(clauses):
    return any(_holds(clauses, {"a": x, "b": y}) for x, y in itertools.product(range(-3, 4), repeat=2))


def _sat_ground(clauses):
    return any(
        all(arith_clause(cl, {"a": x, "b": y, CHI: z}) for cl in clauses)
        for x, y in itertools.product(range(-3, 4), repeat=2)
        for z in range(-20, 21)
    )


@settings(max_examples=40, deadline=None)
@given(fragment_sets)
def test_theta_Z_is_equisatisfiable(s):
    out = theta_Z(s)
    assert _sat_ground(out.instances + out.aux_axioms) == _sat_over_integers(s)


@settings(max_examples=100, deadline=None)
@given(fragment_sets, fragment_sets)
def test_pool_is_monotone(s1, s2):
    small = theta_Z(s1).pool["nat"]
    big = theta_Z(s1 + s2).pool["nat"]
    assert forms(small) <= forms(big)


@settings(max_examples=100, deadline=None)
@given(fragment_sets, st.data())
def test_pool_is_stable_under_pure_disjunctions(s, data):
    """Adding disjunctions of variable-renamed instances never grows the pool."""
    extra = []
    for _ in range(data.draw(st.integers(1, 3))):
        picks = data.draw(st.lists(st.sampled_from(s), min_size=1, max_size=3))
        lits = []
        for cl in picks:
            ren = {v: data.draw(st.sampled_from([X, Y, Var("z", NAT)])) for v in variables(cl)}
            lits.extend(apply(ren, cl).lits)
        extra.append(Clause.of(lits))
    assert forms(theta_Z(s + extra).pool["nat"]) <= forms(theta_Z(s).pool["nat"])


@settings(max_examples=50, deadline=None)
@given(st.lists(fragment_clause(), min_size=1, max_size=3))
def test_instances_are_ground_instances(s):
    out = theta_Z(s)
    for inst in out.instances:
        for origin, subst in out.provenance[inst]:
            assert apply(dict(subst), s[origin]) == inst
