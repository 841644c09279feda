import itertools

import pytest
from hypothesis import given, settings

from helpers import Z3, corpus, problem, requires_z3
from oracles import dpll, mixed_propositional
from strategies import ground_sets
from nestinst import backend as bk
from nestinst.terms import BASE, App, Clause, Literal, Sort, chi, const
from nestinst.arith import le, lt, num, plus

N = Sort("nat", BASE, 0, True)
E = Sort("elem")
a, b = const("a", N), const("b", N)
c, d = const("c", E), const("d", E)


def unit(*lits):
    return Clause.of(lits)


def oracle_sat(clauses):
    return any(dpll(mixed_propositional(clauses, {"a": x, "b": y})) for x, y in itertools.product(range(0, 5), repeat=2))


@settings(max_examples=150, deadline=None)
@given(ground_sets)
def test_bounded_search_matches_oracle(clauses):
    verdict = bk.bounded_model_search(bk.GroundProblem(clauses))
    assert verdict.status in (bk.SAT, bk.UNSAT_WITHIN_BOUNDS)
    assert (verdict.status == bk.SAT) == oracle_sat(clauses)


@requires_z3
@settings(max_examples=40, deadline=None)
@given(ground_sets)
def test_external_solver_agrees(clauses):
    gp = bk.GroundProblem(clauses)
    bounded = bk.bounded_model_search(gp).status
    external = bk.external_check(gp, Z3).status
    assert (bounded == bk.SAT) == (external == bk.SAT)
    assert external in (bk.SAT, bk.UNSAT_EXTERNAL)


def test_congruence_is_respected():
    fc, fd = App("f", (c,), E), App("f", (d,), E)
    clauses = [unit(Literal.make(True, c, d)), unit(Literal.make(False, fc, fd))]
    assert bk.bounded_model_search(bk.GroundProblem(clauses), free_domain=3).status == bk.UNSAT_WITHIN_BOUNDS
    clauses = [unit(Literal.make(False, c, d)), unit(Literal.make(False, fc, fd))]
    assert bk.bounded_model_search(bk.GroundProblem(clauses), free_domain=2).status == bk.SAT


def test_free_domain_limits_distinct_elements():
    e = const("e", E)
    clauses = [unit(Literal.make(False, x, y)) for x, y in itertools.combinations([c, d, e], 2)]
    assert bk.bounded_model_search(bk.GroundProblem(clauses), free_domain=2).status == bk.UNSAT_WITHIN_BOUNDS
    assert bk.bounded_model_search(bk.GroundProblem(clauses)).status == bk.SAT


def test_chi_is_placed_above_its_bounds():
    k = chi(N)
    aux = [unit(Literal.atom(True, lt(plus(a, num(2, N)), k)))]
    clauses = [unit(Literal.atom(True, le(num(3, N), a)))]
    verdict = bk.bounded_model_search(bk.GroundProblem(clauses, aux, modulus=2), window=(0, 4))
    assert verdict.status == bk.SAT
    values = verdict.model.constants()
    assert values["chi:nat"] > values["a"] + 2


def test_default_window():
    gp = bk.GroundProblem([unit(Literal.atom(True, le(num(3, N), num(7, N))))], modulus=2, bound_count=1)
    assert gp.default_window() == (-2, 13)


def test_node_limit_gives_unknown():
    clauses = [unit(Literal.atom(True, le(a, b)), Literal.atom(True, le(b, a)))] + [
        unit(Literal.atom(False, App("p", (num(k, N), c)))) for k in range(3)
    ]
    assert bk.bounded_model_search(bk.GroundProblem(clauses), node_limit=1).status == bk.UNKNOWN


def test_ground_problem_rejects_variables():
    prob = problem("(forall ((x elem)) (p a x))")
    with pytest.raises(bk.NestInstError):
        bk.GroundProblem(list(prob.clauses))


def test_verdict_exit_codes():
    assert [bk.Verdict(s).exit_code for s in (bk.SAT, bk.UNSAT_WITHIN_BOUNDS, bk.UNSAT_EXTERNAL, bk.UNKNOWN)] == [0, 1, 1, 2]


def test_smtlib_script():
    k = chi(N)
    fc = App("f", (c,), E)
    clauses = [unit(Literal.atom(True, App("p", (a, fc)))), unit(Literal.atom(False, le(a, b)), Literal.make(True, c, d))]
    script = bk.emit_smtlib(bk.GroundProblem(clauses, [unit(Literal.atom(True, lt(a, k)))]))
    assert script.startswith("(set-logic QF_UFLIA)")
    assert "(declare-sort elem 0)" in script
    assert "(declare-fun chi_nat () Int)" in script
    assert "(check-sat)" in script
    assert script == bk.emit_smtlib(bk.GroundProblem(list(reversed(clauses)), [unit(Literal.atom(True, lt(a, k)))]))


def test_smtlib_membership_terms_are_distinct():
    from nestinst.pipeline import run_pipeline, Flags

    prob = corpus("membership_even.nst")
    report = run_pipeline(prob, Flags(backend="smtlib"))
    assert report.verdict == bk.UNKNOWN


@requires_z3
def test_external_solver_missing_binary():
    verdict = bk.external_check(bk.GroundProblem([]), "/nonexistent/solver")
    assert verdict.status == bk.UNKNOWN


def test_no_solver_configured(monkeypatch):
    monkeypatch.delenv(bk.SOLVER_ENV, raising=False)
    monkeypatch.setattr(bk, "default_solver_command", lambda: None)
    assert bk.external_check(bk.GroundProblem([])).status == bk.UNKNOWN
