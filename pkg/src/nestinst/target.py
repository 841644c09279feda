"""Target-complete procedures: hyper-linking and the identity.

Hyper-linking: given a nucleus clause l_1 | ... | l_n and partner clauses
m_1 | C_1, ..., m_n | C_n (renamed apart) such that the pairs (l_i, m_i^c)
have a simultaneous mgu sigma, add the instance (l_1 | ... | l_n)sigma.
The closure is computed round by round; variables left at the end are
replaced by a per-sort constant.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .errors import FragmentViolation
from .outcome import InstantiationOutcome
from .terms import (
    Clause,
    Var,
    apply,
    bottom,
    canonical_variant,
    is_base,
    is_ground,
    match_clause,
    mgu,
    sorted_clauses,
    variables,
)

DEFAULT_ROUND_LIMIT = 16

ALWAYS = "always"
HERBRAND_FINITE = "herbrand-finite"
BOUNDED_ROUNDS = "bounded-rounds"


@dataclass(frozen=True)
class TargetProcedure:
    """A target-complete procedure: clause set (and level) -> outcome."""

    name: str
    run: Callable
    termination: str = ALWAYS

    def apply(self, clauses, level: int = 0) -> InstantiationOutcome:
        return self.run(list(clauses), level)


def _check_no_equality(clauses) -> None:
    for clause in clauses:
        for lit in clause:
            if lit.is_equational:
                raise FragmentViolation("equational atom in a hyper-linking input", lit)


def _partner_index(clauses) -> dict:
    """(predicate symbol, polarity) -> list of (clause index, literal)."""
    index: dict[tuple, list] = {}
    for ci, clause in enumerate(clauses):
        for lit in clause:
            index.setdefault((lit.left.fn, lit.pos), []).append((ci, lit))
    return index


def _conclusions(nucleus: Clause, index: dict, fresh: set, nucleus_fresh: bool):
    """Hyper-link instances of `nucleus`; with `fresh` given, only those that
    use the nucleus or at least one partner from it (the others were found
    in an earlier round)."""
    lits = list(nucleus.lits)
    if not lits:
        if nucleus_fresh:
            yield nucleus
        return
    options = []
    for k, li in enumerate(lits):
        opts = index.get((li.left.fn, not li.pos), [])
        if not opts:
            return
        renamed = []
        for ci, m in opts:
            if not is_ground(m):
                m = apply({v: Var(f"{v.name}~{k}", v.sort) for v in variables(m)}, m)
            renamed.append((ci in fresh, m.left))
        options.append(renamed)

    def go(k: int, pairs: list, sigma: dict, used_fresh: bool):
        if k == len(lits):
            yield apply(sigma, nucleus)
            return
        last = k == len(lits) - 1
        for is_fresh, partner in options[k]:
            if last and not (used_fresh or is_fresh):
                continue
            extended = pairs + [(lits[k].left, partner)]
            unifier = mgu(extended)
            if unifier is not None:
                yield from go(k + 1, extended, unifier, used_fresh or is_fresh)

    yield from go(0, [], {}, nucleus_fresh)


def hyperlink_round(clauses, fresh=None) -> list[Clause]:
    """All new hyper-link instances (up to variants) derivable in one round.

    `fresh` optionally restricts the search to conclusions involving at least
    one of these clauses; by default every clause counts as fresh.
    """
    clauses = sorted_clauses(clauses)
    _check_no_equality(clauses)
    seen = {canonical_variant(c) for c in clauses}
    index = _partner_index(clauses)
    fresh_ids = set(range(len(clauses))) if fresh is None else {i for i, c in enumerate(clauses) if c in fresh}
    new: dict[Clause, None] = {}
    for ni, nucleus in enumerate(clauses):
        for concl in _conclusions(nucleus, index, fresh_ids, ni in fresh_ids):
            key = canonical_variant(concl)
            if key not in seen:
                seen.add(key)
                new[key] = None
    return sorted(new, key=Clause.key)


def _ground_with_bottom(clause: Clause) -> Clause:
    return apply({v: bottom(v.sort) for v in variables(clause)}, clause)


def theta_fol(clauses, level: int = 0, round_limit: int = DEFAULT_ROUND_LIMIT) -> InstantiationOutcome:
    """Hyper-linking closure, then remaining variables grounded by bottom constants."""
    originals = sorted_clauses(clauses)
    _check_no_equality(originals)
    current: list[Clause] = [canonical_variant(c) for c in originals]
    current = sorted(set(current), key=Clause.key)
    incomplete = False
    rounds = 0
    fresh = None
    while True:
        if rounds >= round_limit:
            incomplete = bool(hyperlink_round(current, fresh))
            break
        new = hyperlink_round(current, fresh)
        rounds += 1
        if not new:
            break
        fresh = set(new)
        current = sorted(set(current) | fresh, key=Clause.key)
    out = InstantiationOutcome(incomplete=incomplete)
    for c in current:
        ground = _ground_with_bottom(c)
        for origin, orig in enumerate(originals):
            matches = match_clause(orig, ground)
            if matches:
                out.add(ground, origin, matches[0])
                break
        else:  # pragma: no cover - every derived clause is an instance of some input
            raise AssertionError(f"derived clause {ground} matches no input clause")
    return out.finish()


def theta_id(clauses, level: int = 0) -> InstantiationOutcome:
    """The identity; the input must already be ground."""
    out = InstantiationOutcome()
    for origin, clause in enumerate(sorted_clauses(clauses)):
        for v in variables(clause):
            if not is_base(v.sort, level):
                raise FragmentViolation(f"variable {v} of sort {v.sort} left for the identity procedure")
            raise FragmentViolation(f"base variable {v} reached the identity procedure")
        out.add(clause, origin, {})
    return out.finish()


def fol_procedure(round_limit: int = DEFAULT_ROUND_LIMIT) -> TargetProcedure:
    return TargetProcedure(
        "fol",
        lambda clauses, level: theta_fol(clauses, level, round_limit),
        BOUNDED_ROUNDS,
    )


IDENTITY = TargetProcedure("ground-arrays", theta_id, ALWAYS)


__all__ = [
    "TargetProcedure",
    "hyperlink_round",
    "theta_fol",
    "theta_id",
    "fol_procedure",
    "IDENTITY",
    "DEFAULT_ROUND_LIMIT",
]
