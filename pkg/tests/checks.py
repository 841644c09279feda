"""Checks shared by the property suites and the acceptance gate.

Each check takes a random.Random-like object, draws one example and returns
None on success or a short description of the failure.
"""
import itertools

import generators as gen
from helpers import prepared
from oracles import dpll, mixed_propositional
from nestinst import backend as bk
from nestinst.arith import ARITH_FUNS, canonical
from nestinst.combine import as_target_procedure, combine
from nestinst.membership import subset_witnesses
from nestinst.pipeline import Flags, build_procedure, run_pipeline
from nestinst.presburger import theta_Z
from nestinst.problem import parse_problem
from nestinst.target import theta_fol
from nestinst.terms import App, BMapping, Clause, Literal, Var, apply, const, variables
from nestinst.arith import normalize_linear, num


def provenance_errors(outcome, clauses) -> list:
    """Instances that are not the recorded ground instance of their origin clause."""
    bad = []
    for inst in outcome.instances:
        recs = outcome.provenance.get(inst)
        if not recs or variables(inst):
            bad.append(str(inst))
            continue
        for origin, subst in recs:
            if apply(dict(subst), clauses[origin]) != inst:
                bad.append(f"{inst} <- clause {origin}")
    return bad


def check_sound_problem(prob):
    clauses, proc = prepared(prob)
    if not any(variables(c) for c in clauses):
        return None
    bad = provenance_errors(combine(proc, clauses), clauses)
    return f"{len(bad)} unmatched instances, e.g. {bad[0]}" if bad else None


def check_soundness(rnd):
    kind = rnd.randrange(3)
    if kind == 0:
        text = gen.hierarchic_problem(rnd)
    elif kind == 1:
        text = gen.membership_problem(rnd)[1]
    else:
        # outer abstraction multiplies pools per clause, so keep these small
        text = gen.nested_problem(rnd, max_clauses=2)
    return check_sound_problem(parse_problem(text))


# -- Presburger pool ------------------------------------------------------------------------


def _forms(terms):
    return {normalize_linear(t) for t in terms}


def check_monotone(rnd):
    s1, s2 = gen.fragment_set(rnd), gen.fragment_set(rnd)
    small = _forms(theta_Z(s1).pool["nat"])
    big = _forms(theta_Z(s1 + s2).pool["nat"])
    return None if small <= big else f"pool shrank: {sorted(map(str, small - big))}"


def check_disjunction_stable(rnd):
    s = gen.fragment_set(rnd)
    extra = gen.pure_disjunctions(rnd, s)
    before = _forms(theta_Z(s).pool["nat"])
    after = _forms(theta_Z(s + extra).pool["nat"])
    return None if after <= before else f"pool grew: {sorted(map(str, after - before))}"


# -- B-preservation -----------------------------------------------------------------------------


def canon(e):
    """Expression with every maximal arithmetic subterm in canonical form."""
    if isinstance(e, Clause):
        return Clause.of(canon(l) for l in e)
    if isinstance(e, Literal):
        if not e.is_equational:
            return Literal(e.pos, canon(e.left), e.right)
        return Literal.make(e.pos, canon(e.left), canon(e.right))
    if isinstance(e, Var) or not e.args:
        return e
    t = App(e.fn, tuple(canon(a) for a in e.args), e.sort)
    return canonical(t) if e.fn in ARITH_FUNS and e.sort.is_int else t


def _preserved(nu, before, after):
    lhs = {canon(nu(c)) for c in before.instances}
    rhs = {canon(c) for c in after.instances}
    missing = lhs - rhs
    return None if not missing else f"{len(missing)} mapped instances missing, e.g. {sorted(map(str, missing))[0]}"


def check_b_preserving_fol(rnd):
    s = gen.bground_fol_set(rnd)
    domain = [gen.A, gen.B, gen.minus(gen.A, num(1, gen.NAT))]
    nu = gen.bmapping(rnd, domain)
    before, after = theta_fol(s), theta_fol(nu(set(s)))
    if before.incomplete or after.incomplete:
        return None  # only fixpoint cases are claimed
    return _preserved(nu, before, after)


def check_b_preserving_combined(rnd):
    prob = parse_problem(gen.nested_problem(rnd))
    inner = as_target_procedure(build_procedure(prob.theory.target, prob, Flags()))
    nat = prob.signature.sorts["nat"]
    a, b = const("a", nat), const("b", nat)
    domain = [a, b, gen.minus(a, num(1, nat))]
    images = [a, b, num(0, nat), num(2, nat), const("e", nat)]
    nu = BMapping.of({t: rnd.choice(images) for t in domain})
    clauses = list(prob.clauses)
    before, after = inner.apply(clauses, 0), inner.apply(sorted(nu(set(clauses)), key=Clause.key), 0)
    if before.incomplete or after.incomplete:
        return None
    return _preserved(nu, before, after)


# -- equisatisfiability on small hierarchic problems ---------------------------------------------

INDEX_RANGE = range(-4, 10)


def oracle_sat(prob) -> bool:
    """Ground over i in [-4,9], x in {c,d} and decide for every a, b in [0,4].

    Bound terms lie in [-1,5]; beyond them an index is only distinguished by its
    parity, so two values of each parity on either side cover the integers.
    """
    sorts = prob.signature.sorts
    elems = [const("c", sorts["elem"]), const("d", sorts["elem"])]
    ground = []
    for cl in prob.clauses:
        vs = variables(cl)
        doms = [[num(k, v.sort) for k in INDEX_RANGE] if v.sort.is_int else elems for v in vs]
        for combo in itertools.product(*doms):
            ground.append(apply(dict(zip(vs, combo)), cl))
    return any(
        dpll(mixed_propositional(ground, {"a": x, "b": y}))
        for x, y in itertools.product(range(5), repeat=2)
    )


def check_equisatisfiable(rnd):
    prob = parse_problem(gen.hierarchic_problem(rnd))
    expected = oracle_sat(prob)
    report = run_pipeline(prob, Flags())
    if report.verdict == bk.UNKNOWN:
        return f"pipeline undecided: {report.reason}"
    got = report.verdict == bk.SAT
    return None if got == expected else f"oracle says sat={expected}, pipeline {report.verdict}"


# -- membership -------------------------------------------------------------------------------------


def _terms_up_to(sort, depth):
    level = [App("z", (), sort)]
    out = list(level)
    for _ in range(depth):
        level = [App(g, (t,), sort) for g in ("s", "f") for t in level]
        out.extend(level)
    return out


def _membership_propositional(ground, predicates):
    out = []
    for cl in ground:
        lits, true = set(), False
        for l in cl:
            if l.is_equational:
                v = (l.left == l.right) == l.pos
            elif l.left.fn in predicates:
                v = predicates[l.left.fn].accepts(l.left.args[0]) == l.pos
            else:
                lits.add((str(l.left), l.pos))
                continue
            true = true or v
        if not true:
            out.append(lits)
    return out


def check_membership(rnd):
    auts, text = gen.membership_problem(rnd)
    prob = parse_problem(text)
    frag = prob.membership_map()["tree"]
    for names, w in subset_witnesses(frag).items():
        if not all(frag.predicates[n].accepts(w) for n in names):
            return f"witness {w} rejected by one of {sorted(names)}"
    preds = {f"P{i}": a for i, a in enumerate(auts)}
    clauses, proc = prepared(prob)
    terms = _terms_up_to(prob.signature.sorts["tree"], 5)
    full = []
    for cl in clauses:
        vs = variables(cl)
        for combo in itertools.product(terms, repeat=len(vs)):
            full.append(apply(dict(zip(vs, combo)), cl))
    expected = dpll(_membership_propositional(full, preds))
    outcome = combine(proc, clauses)
    got = dpll(_membership_propositional(outcome.instances + outcome.aux_axioms, preds))
    return None if got == expected else f"depth-5 grounding sat={expected}, instances sat={got}"
