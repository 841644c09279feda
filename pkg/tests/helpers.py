import pathlib
import shutil

import pytest

from nestinst.problem import parse_problem

ROOT = pathlib.Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"
Z3 = shutil.which("z3") or ("/usr/local/bin/z3" if pathlib.Path("/usr/local/bin/z3").exists() else None)

requires_z3 = pytest.mark.skipif(Z3 is None, reason="z3 not installed")

FOL_HEADER = """
  (sorts (nat base int) (elem target))
  (functions (a () nat) (b () nat) (c () elem) (d () elem)
    (f (elem) elem) (p (nat elem) bool) (q (nat elem) bool) (r (nat elem elem) bool) (g (nat) nat))
  (theory (base presburger) (target fol))
"""


def problem(*clauses, header=FOL_HEADER, options=""):
    """Parse a problem built from clause s-expressions under a fixed header."""
    opts = f"(options {options})" if options else ""
    return parse_problem(f"(problem {header} (clauses {' '.join(clauses)}) {opts})")


def corpus_files():
    return sorted(CORPUS.glob("*.nst"))


def corpus(name):
    return parse_problem((CORPUS / name).read_text())


def texts(clauses):
    return {str(c) for c in clauses}


def prepared(prob, no_chi=False):
    """Clauses and procedure exactly as the pipeline hands them to the combiner."""
    from dataclasses import replace

    from nestinst.pipeline import Flags, _copy_target, build_procedure
    from nestinst.shift import shift, shiftability_check
    from nestinst.theory import copy_sorts, eliminate_store, normalize_literals

    flags = Flags.from_options(prob.options, no_chi=no_chi or None)
    sig = prob.signature
    clauses = eliminate_store(list(prob.clauses), sig)
    if flags.copy_elements:
        res = copy_sorts(sig, clauses, _copy_target(sig, flags.copy_elements))
        sig, clauses = res.signature, res.clauses
    if flags.shift:
        lam = shiftability_check(clauses, 0)
        res = shift(clauses, lam, sig, 0)
        clauses, sig = res.clauses, res.signature or sig
    clauses = normalize_literals(clauses)
    return clauses, build_procedure(prob.theory, replace(prob, signature=sig), flags)
