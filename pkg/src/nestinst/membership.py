"""Term algebras with membership constraints given by tree automata.

A base sort of this kind is interpreted as the free term algebra over its
constructors.  Unary predicates are regular tree languages.  Non-ground
literals must be ``~p(x)`` or ``x != t`` with t ground; the instantiation
pool holds those t plus one accepted witness per satisfiable conjunction of
predicates.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import FragmentViolation, ResourceLimit
from .outcome import InstantiationOutcome
from .presburger import instantiate
from .terms import App, Clause, Literal, Sort, Term, Var, is_base, is_ground, render_term, variables

DEFAULT_PREDICATE_CAP = 12


@dataclass(frozen=True)
class TreeAutomaton:
    """Bottom-up automaton; rules are (symbol, argument states, target state)."""

    states: tuple
    final: frozenset
    rules: tuple

    @classmethod
    def of(cls, states, final, rules) -> "TreeAutomaton":
        rules = tuple(sorted({(f, tuple(qs), q) for f, qs, q in rules}, key=repr))
        return cls(tuple(states), frozenset(final), rules)

    @classmethod
    def for_terms(cls, terms, sigma: dict) -> "TreeAutomaton":
        """Automaton accepting exactly a finite set of ground terms."""
        states: dict[str, None] = {}
        rules = []
        finals = set()

        def build(t: App) -> str:
            q = f"[{render_term(t)}]"
            if q not in states:
                states[q] = None
                rules.append((t.fn, tuple(build(a) for a in t.args), q))
            return q

        for t in terms:
            finals.add(build(t))
        return cls.of(states, finals, rules)

    def run(self, t: Term) -> frozenset:
        """States reachable at the root of t."""
        if not isinstance(t, App):
            raise ValueError(f"cannot run an automaton on variable {t}")
        child = [self.run(a) for a in t.args]
        out = set()
        for f, qs, q in self.rules:
            if f == t.fn and len(qs) == len(child) and all(s in c for s, c in zip(qs, child)):
                out.add(q)
        return frozenset(out)

    def accepts(self, t: Term) -> bool:
        return bool(self.run(t) & self.final)


def universal(sigma: dict) -> TreeAutomaton:
    """The automaton accepting every ground term over sigma (name -> arity)."""
    return TreeAutomaton.of(("*",), {"*"}, [(f, ("*",) * n, "*") for f, n in sorted(sigma.items())])


def intersect(automata, sigma: dict) -> TreeAutomaton:
    """Product automaton restricted to reachable state tuples."""
    automata = list(automata)
    if not automata:
        return universal(sigma)
    if len(automata) == 1:
        return automata[0]
    by_symbol = []
    for a in automata:
        table: dict[tuple, list] = {}
        for f, qs, q in a.rules:
            table.setdefault((f, len(qs)), []).append((qs, q))
        by_symbol.append(table)
    reached: dict[tuple, None] = {}
    rules = set()
    changed = True
    while changed:
        changed = False
        current = list(reached)
        for f, n in sorted(sigma.items()):
            for args in itertools.product(current, repeat=n):
                per = []
                for i, table in enumerate(by_symbol):
                    targets = [q for qs, q in table.get((f, n), ()) if all(qs[k] == args[k][i] for k in range(n))]
                    per.append(targets)
                for combo in itertools.product(*per):
                    rules.add((f, args, combo))
                    if combo not in reached:
                        reached[combo] = None
                        changed = True
    final = {q for q in reached if all(q[i] in a.final for i, a in enumerate(automata))}
    return TreeAutomaton.of(list(reached), final, rules)


def _size(t: Term) -> int:
    return 1 + sum(_size(a) for a in t.args)


def _rank(t: Term) -> tuple:
    return (_size(t), render_term(t))


def minimal_terms(automaton: TreeAutomaton, sort: Sort) -> dict:
    """State -> minimal accepted term (size, then text), by fixpoint iteration."""
    best: dict = {}
    changed = True
    while changed:
        changed = False
        for f, qs, q in automaton.rules:
            if all(s in best for s in qs):
                t = App(f, tuple(best[s] for s in qs), sort)
                if q not in best or _rank(t) < _rank(best[q]):
                    best[q] = t
                    changed = True
    return best


def emptiness_witness(automaton: TreeAutomaton, sort: Sort) -> Term | None:
    best = minimal_terms(automaton, sort)
    found = [best[q] for q in automaton.final if q in best]
    return min(found, key=_rank) if found else None


@dataclass(frozen=True)
class MembershipFragment:
    """Constructors (name -> arity) and predicate automata for one sort."""

    sort: Sort
    sigma: dict
    predicates: dict = field(default_factory=dict)  # name -> TreeAutomaton


def _predicate_atom(lit: Literal, fragment: MembershipFragment):
    t = lit.left
    if not lit.is_equational and isinstance(t, App) and t.fn in fragment.predicates and len(t.args) == 1:
        return t
    return None


def validate_membership(clauses, fragment: MembershipFragment, level: int = 0) -> None:
    for clause in clauses:
        for lit in clause:
            if is_ground(lit):
                continue
            atom = _predicate_atom(lit, fragment)
            if atom is not None:
                if lit.pos or not isinstance(atom.args[0], Var):
                    raise FragmentViolation("only ~p(x) membership literals may contain variables", lit)
                continue
            if lit.is_equational and lit.left.sort == fragment.sort:
                if lit.pos:
                    raise FragmentViolation("positive equation with a variable is outside the fragment", lit)
                l, r = lit.left, lit.right
                if (isinstance(l, Var) and is_ground(r)) or (isinstance(r, Var) and is_ground(l)):
                    continue
                raise FragmentViolation("disequation must relate a variable and a ground term", lit)
            if any(v.sort == fragment.sort for v in variables(lit)):
                raise FragmentViolation("literal outside the membership fragment", lit)


def compute_G_in(clauses, fragment: MembershipFragment, cap: int = DEFAULT_PREDICATE_CAP) -> tuple:
    """Ground right-hand sides of x != t plus one witness per non-empty predicate conjunction."""
    names = sorted(fragment.predicates)
    if len(names) > cap:
        raise ResourceLimit(f"{len(names)} membership predicates exceed the cap of {cap}")
    pool: dict[Term, None] = {}
    for clause in clauses:
        for lit in clause:
            if lit.is_equational and not lit.pos and lit.left.sort == fragment.sort:
                l, r = lit.left, lit.right
                if isinstance(l, Var) and is_ground(r):
                    pool.setdefault(r, None)
                elif isinstance(r, Var) and is_ground(l):
                    pool.setdefault(l, None)
    for w in subset_witnesses(fragment).values():
        pool.setdefault(w, None)
    return tuple(sorted(pool, key=_rank))


def subset_witnesses(fragment: MembershipFragment) -> dict:
    """frozenset of predicate names -> witness, for every non-empty intersection."""
    names = sorted(fragment.predicates)
    out = {}
    for r in range(len(names) + 1):
        for combo in itertools.combinations(names, r):
            auto = intersect([fragment.predicates[n] for n in combo], fragment.sigma)
            w = emptiness_witness(auto, fragment.sort)
            if w is not None:
                out[frozenset(combo)] = w
    return out


def theta_in(clauses, fragment: MembershipFragment, level: int = 0, cap: int = DEFAULT_PREDICATE_CAP) -> InstantiationOutcome:
    clauses = list(clauses)
    validate_membership(clauses, fragment, level)
    G = compute_G_in(clauses, fragment, cap)
    out = InstantiationOutcome(pool={fragment.sort.name: G})
    instantiate(clauses, {fragment.sort.name: G}, level, out)
    return out.finish()


@dataclass(frozen=True)
class MembershipProcedure:
    """Base procedure interface used by the combiner (one sort per fragment)."""

    fragments: tuple  # MembershipFragment per base sort
    cap: int = DEFAULT_PREDICATE_CAP
    name: str = "membership"

    def _fragment(self, sort_name: str) -> MembershipFragment:
        for f in self.fragments:
            if f.sort.name == sort_name:
                return f
        raise KeyError(sort_name)

    def validate(self, clauses, level: int):
        for f in self.fragments:
            validate_membership(clauses, f, level)

    def pool(self, clauses, level: int, extra_sorts=()) -> dict:
        self.validate(clauses, level)
        return {f.sort.name: compute_G_in(clauses, f, self.cap) for f in self.fragments if is_base(f.sort, level)}

    def aux(self, clauses, level: int) -> list[Clause]:
        return []

    def modulus(self, clauses, level: int) -> int:
        return 1

    def bounds(self, clauses, level: int) -> dict:
        return {}


__all__ = [
    "TreeAutomaton",
    "MembershipFragment",
    "universal",
    "intersect",
    "emptiness_witness",
    "compute_G_in",
    "subset_witnesses",
    "validate_membership",
    "theta_in",
    "MembershipProcedure",
]
