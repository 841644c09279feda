"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v` or directly as a script.
"""
import random
import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path

import pytest

import checks
from helpers import Z3, corpus, corpus_files, prepared, problem
from nestinst import backend as bk
from nestinst.arith import LinearForm, normalize_linear
from nestinst.combine import combine, diamond_ground
from nestinst.pipeline import Flags, run_pipeline
from nestinst.shift import shift, shiftability_check
from nestinst.target import theta_fol
from nestinst.terms import BASE, Clause, const
from nestinst.theory import decompose, normalize_literals

RESULTS: dict = {}


def report(name, ok, detail, seconds=None):
    took = f" [{seconds:.2f}s]" if seconds is not None else ""
    line = f"{'PASS' if ok else 'FAIL'} {name}{took}: {detail}"
    RESULTS[name] = line
    print(line, flush=True)
    return ok


def texts(clauses):
    return {str(c) for c in clauses}


# -- 1: two-clause worked example ---------------------------------------------------------------

FIRST_EXPECTED = {"p(a,c)", "~(b <= a) | p(b,c)", "~(a <= b) | ~(p(a,c))", "~(p(b,c))"}


def criterion_1():
    start = time.perf_counter()
    prob = corpus("fol_presburger.nst")
    rep = run_pipeline(prob, Flags(no_chi=True, window=4))
    elapsed = time.perf_counter() - start
    got = texts(rep.ground_clauses)
    problems = []
    if got != FIRST_EXPECTED:
        problems.append(f"ground set {sorted(got)}")
    if rep.verdict != bk.UNSAT_WITHIN_BOUNDS:
        problems.append(f"verdict {rep.verdict}")
    if rep.window is None or rep.window[0] > -2 or rep.window[1] < 4:
        problems.append(f"window {rep.window}")
    if elapsed >= 1.0:
        problems.append("over 1 s")
    detail = "; ".join(problems) or f"4 clauses, {rep.verdict} on window {list(rep.window)}"
    return report("criterion 1 (two-clause example)", not problems, detail, elapsed)


# -- 2: congruence example with a three-place relation -----------------------------------------

SIX = {
    "p(<>,c)",
    "q(<>,d)",
    "~(r(<>,_|_,_|_))",
    "~(r(<>,c,d))",
    "~(p(<>,_|_)) | ~(q(<>,_|_)) | r(<>,_|_,_|_)",
    "~(p(<>,c)) | ~(q(<>,d)) | r(<>,c,d)",
}


def twenty_four(p_fourth):
    out = set()
    for g in ("a", "b-1", "a-1", "b-2"):
        out |= {
            f"~(p({g},_|_)) | ~(q({g},_|_)) | r({g},_|_,_|_)",
            f"~(r({g},_|_,_|_))",
            f"~(r({g},c,d))",
            f"~(p({g},c)) | ~(q({g},d)) | r({g},c,d)",
            f"q({g},d)",
        }
    return out | {"p(a,c)", "p(b-1,c)", "p(a-1,c)", p_fourth}


def criterion_2():
    start = time.perf_counter()
    prob = corpus("presburger_modulo.nst")
    problems = []
    patterns = diamond_ground([decompose(c).target_part for c in normalize_literals(prob.clauses)])
    six = texts(theta_fol(patterns).instances)
    if six != SIX:
        problems.append(f"target instances {sorted(six)}")
    clauses, proc = prepared(prob, no_chi=True)
    out = combine(proc, clauses)
    nat = prob.signature.sort("nat")
    a, b = const("a", nat), const("b", nat)
    want_pool = {LinearForm.atom(a), LinearForm.atom(b).shift(-1), LinearForm.atom(a).shift(-1), LinearForm.atom(b).shift(-2)}
    pool = {normalize_linear(t) for t in out.pool["nat@0"]}
    if pool != want_pool:
        problems.append(f"pool {sorted(map(str, out.pool['nat@0']))}")
    # the listed clauses are target parts: base guards are left out of the table
    parts = texts(Clause.of(l for l in c if l.left.sort.kind != BASE) for c in out.instances)
    missing = min((twenty_four(p) - parts for p in ("p(a-2,c)", "p(b-2,c)")), key=len)
    if missing:
        problems.append(f"missing {sorted(missing)}")
    bounded = run_pipeline(prob, Flags(no_chi=True)).verdict
    external = run_pipeline(prob, Flags(no_chi=True, backend="external", solver=Z3)).verdict if Z3 else "no solver"
    if bounded != bk.UNSAT_WITHIN_BOUNDS:
        problems.append(f"bounded verdict {bounded}")
    if external != bk.UNSAT_EXTERNAL:
        problems.append(f"external verdict {external}")
    elapsed = time.perf_counter() - start
    if elapsed >= 5.0:
        problems.append("over 5 s")
    detail = "; ".join(problems) or "6 target clauses, pool {a,b-1,a-1,b-2}, 24 listed clauses, unsat on both routes"
    return report("criterion 2 (congruence example)", not problems, detail, elapsed)


# -- 3: shifted arrays ---------------------------------------------------------------------------

SHIFTED_HEADER = """
  (sorts (nat base int) (arr target) (elem target))
  (functions (a () nat) (b () nat) (c () nat) (s' () arr) (t' () arr) (u' () arr) (select (arr nat) elem))
  (theory (base presburger) (target ground-arrays))
"""
LISTED_SHIFTED = [
    "(forall ((i nat) (j nat)) (or (not (<= 0 i)) (not (<= i (- b a))) (not (= j i)) (= (select s' i) (select t' j))))",
    "(forall ((i nat) (j nat)) (or (not (<= 0 i)) (not (<= i (- b a))) (not (= j i)) (= (select u' i) (select s' j))))",
    "(>= c (+ a a))",
    "(<= c b)",
    "(forall ((i nat) (j nat)) (or (not (= i c)) (not (= j (- (- c a) a))) (not (= (select u' c) (select t' j)))))",
]


def criterion_3():
    start = time.perf_counter()
    prob = corpus("shift_arrays.nst")
    problems = []
    lam = shiftability_check(prob.clauses)
    nat = prob.signature.sort("nat")
    a = LinearForm.atom(const("a", nat))
    if lam is None or lam["s"] - lam["t"] != a or lam["u"] - lam["s"] != a or lam["t"] != LinearForm():
        problems.append(f"lambda {lam}")
    else:
        res = shift(prob.clauses, lam, prob.signature)
        names = {v: k for k, v in res.renaming.items()}
        got = texts(res.clauses)
        want = texts(problem(*LISTED_SHIFTED, header=SHIFTED_HEADER).clauses)
        if names != {"s'": "s", "t'": "t", "u'": "u"} or got != want:
            problems.append(f"shift(S) differs: extra {sorted(got - want)}, missing {sorted(want - got)}")
    verdict = run_pipeline(prob).verdict
    if verdict not in (bk.UNSAT_WITHIN_BOUNDS, bk.UNSAT_EXTERNAL):
        problems.append(f"verdict {verdict}")
    elapsed = time.perf_counter() - start
    if elapsed >= 1.0:
        problems.append("over 1 s")
    detail = "; ".join(problems) or "lambda s->a, t->0, u->a+a; shifted set as listed; unsat"
    return report("criterion 3 (shift example)", not problems, detail, elapsed)


# -- 4: nested arrays ----------------------------------------------------------------------------

NESTED_HEADER = """
  (sorts (nat base int) (nat1 base int level 1 copy-of nat) (nat2 target int copy-of nat)
    (arr target) (arr1 target))
  (functions (a () nat) (b () nat) (t () arr) (t1 () arr1)
    (select (arr nat) nat1) (select1 (arr1 nat1) nat2))
  (theory (base presburger) (target (nested (base presburger) (target ground-arrays))))
"""
TA, TB = "(select t a)", "(select t b)"
LISTED_NESTED = [
    "(or (<= a b) (<= (select t a) (select t b)))",
    "(or (<= b a) (<= (select t b) (select t a)))",
    f"(or (<= {TA} {TA}) (<= (select1 t1 {TA}) (select1 t1 {TA})))",
    f"(or (<= {TA} {TB}) (<= (select1 t1 {TA}) (select1 t1 {TB})))",
    f"(or (<= {TB} {TB}) (<= (select1 t1 {TB}) (select1 t1 {TB})))",
    f"(or (<= {TB} {TA}) (<= (select1 t1 {TA}) (select1 t1 {TA})))",
    "(<= a b)",
    f"(> (select1 t1 {TA}) (select1 t1 {TB}))",
]


def criterion_4():
    start = time.perf_counter()
    prob = corpus("nested_arrays.nst")
    rep = run_pipeline(prob)
    got = texts(rep.ground_clauses)
    listed = problem(*LISTED_NESTED, header=NESTED_HEADER).clauses
    missing = sorted(str(c) for c in listed if str(c) not in got)
    problems = []
    if missing:
        problems.append(f"{len(missing)} of 8 listed instances missing: {missing}")
    if rep.verdict not in (bk.UNSAT_WITHIN_BOUNDS, bk.UNSAT_EXTERNAL):
        problems.append(f"verdict {rep.verdict}")
    elapsed = time.perf_counter() - start
    if elapsed >= 5.0:
        problems.append("over 5 s")
    detail = "; ".join(problems) or f"all 8 listed instances present; {rep.verdict}"
    return report("criterion 4 (nested arrays)", not problems, detail, elapsed)


# -- 5: property suites --------------------------------------------------------------------------


def run_property(name, check, count, seed):
    start = time.perf_counter()
    failures = []
    for k in range(count):
        msg = check(random.Random(seed * 100_000 + k))
        if msg:
            failures.append(f"#{k}: {msg}")
    elapsed = time.perf_counter() - start
    detail = f"{count - len(failures)}/{count} examples" + (f"; first failure {failures[0]}" if failures else "")
    return report(name, not failures, detail, elapsed)


def criterion_5_soundness():
    start = time.perf_counter()
    failures = []
    for path in corpus_files():
        msg = checks.check_sound_problem(corpus(path.name))
        if msg:
            failures.append(f"{path.stem}: {msg}")
    for k in range(200):
        msg = checks.check_soundness(random.Random(500_000 + k))
        if msg:
            failures.append(f"random #{k}: {msg}")
    elapsed = time.perf_counter() - start
    n = len(corpus_files()) + 200
    detail = f"{n - len(failures)}/{n} problems with every instance matched" + (f"; {failures[0]}" if failures else "")
    return report("criterion 5 (soundness)", not failures, detail, elapsed)


PROPERTIES = [
    ("criterion 5 (pool monotonicity)", checks.check_monotone, 100, 1),
    ("criterion 5 (pool stable under pure disjunctions)", checks.check_disjunction_stable, 100, 2),
    ("criterion 5 (B-preservation, hyper-linking)", checks.check_b_preserving_fol, 100, 3),
    ("criterion 5 (B-preservation, combined)", checks.check_b_preserving_combined, 100, 4),
    ("criterion 5 (equisatisfiability oracle)", checks.check_equisatisfiable, 50, 6),
    ("criterion 5 (membership witnesses and oracle)", checks.check_membership, 50, 7),
]


# -- 6: determinism ------------------------------------------------------------------------------


def _corpus_run(path, script):
    prob = corpus(path.name)
    flags = replace(Flags.from_options(prob.options), emit_smtlib=str(script))
    js = run_pipeline(prob, flags).to_json()
    return js.encode(), Path(script).read_bytes()


def criterion_6():
    start = time.perf_counter()
    differing = []
    with tempfile.TemporaryDirectory() as tmp:
        for path in corpus_files():
            script = Path(tmp) / f"{path.stem}.smt2"
            if _corpus_run(path, script) != _corpus_run(path, script):
                differing.append(path.stem)
    elapsed = time.perf_counter() - start
    n = len(corpus_files())
    detail = f"{n - len(differing)}/{n} corpus files byte-identical" + (f"; differing {differing}" if differing else "")
    return report("criterion 6 (determinism)", not differing, detail, elapsed)


# -- pytest entry points ---------------------------------------------------------------------------


def test_criterion_1_two_clause_example():
    assert criterion_1(), RESULTS["criterion 1 (two-clause example)"]


def test_criterion_2_congruence_example():
    assert criterion_2(), RESULTS["criterion 2 (congruence example)"]


def test_criterion_3_shift_example():
    assert criterion_3(), RESULTS["criterion 3 (shift example)"]


def test_criterion_4_nested_arrays():
    assert criterion_4(), RESULTS["criterion 4 (nested arrays)"]


def test_criterion_5_soundness():
    assert criterion_5_soundness(), RESULTS["criterion 5 (soundness)"]


@pytest.mark.parametrize("name,check,count,seed", PROPERTIES, ids=[p[0][13:-1] for p in PROPERTIES])
def test_criterion_5_properties(name, check, count, seed):
    assert run_property(name, check, count, seed), RESULTS[name]


def test_criterion_6_determinism():
    assert criterion_6(), RESULTS["criterion 6 (determinism)"]


if __name__ == "__main__":
    outcomes = [criterion_1(), criterion_2(), criterion_3(), criterion_4(), criterion_5_soundness()]
    outcomes += [run_property(*p) for p in PROPERTIES]
    outcomes.append(criterion_6())
    print(f"{sum(outcomes)}/{len(outcomes)} criteria passed")
    sys.exit(0 if all(outcomes) else 1)
