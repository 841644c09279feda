"""Multi-sorted terms, literals, clauses, substitutions and unification.

Everything here is immutable.  Clauses are canonical: literals are
deduplicated and sorted, so two clauses with the same literal set compare
equal and hash identically.
"""
from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

from .errors import SortError

BASE = "base"
TARGET = "target"

# Reserved symbol prefixes.  Users cannot declare names starting with "$".
DIAMOND = "$dia"
BOTTOM = "$bot"
CHI = "$chi"


@dataclass(frozen=True)
class Sort:
    name: str
    kind: str = TARGET
    level: int = 0
    is_int: bool = False
    copy_of: str | None = None
    is_real: bool = False

    def __post_init__(self):
        if self.kind not in (BASE, TARGET):
            raise ValueError(f"bad sort kind {self.kind!r}")

    def __str__(self):
        return self.name


def bool_sort(kind: str = TARGET, level: int = 0) -> Sort:
    return Sort("bool", kind, level)


TARGET_BOOL = bool_sort()


def is_base(sort: Sort, level: int) -> bool:
    """True iff `sort` is a base sort of the combination level `level`."""
    return sort.kind == BASE and sort.level == level


@dataclass(frozen=True, eq=False)
class Var:
    name: str
    sort: Sort
    _hash: int = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash(("V", self.name, self.sort)))

    def __eq__(self, other):
        return (
            self is other
            or isinstance(other, Var)
            and self._hash == other._hash
            and self.name == other.name
            and self.sort == other.sort
        )

    def __hash__(self):
        return self._hash

    def __str__(self):
        return self.name


@dataclass(frozen=True, eq=False)
class App:
    fn: str
    args: tuple = ()
    sort: Sort = TARGET_BOOL
    _hash: int = field(init=False, repr=False)
    _ground: bool = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        object.__setattr__(self, "_hash", hash(("A", self.fn, self.args, self.sort)))
        object.__setattr__(
            self, "_ground", all(not isinstance(a, Var) and a._ground for a in self.args)
        )

    def __eq__(self, other):
        return (
            self is other
            or isinstance(other, App)
            and self._hash == other._hash
            and self.fn == other.fn
            and self.sort == other.sort
            and self.args == other.args
        )

    def __hash__(self):
        return self._hash

    def __str__(self):
        return render_term(self)


Term = Union[Var, App]


def const(name: str, sort: Sort) -> App:
    return App(name, (), sort)


def true_of(sort: Sort) -> App:
    return App("true", (), sort)


def is_true(t: Term) -> bool:
    return isinstance(t, App) and t.fn == "true" and not t.args


def diamond(sort: Sort) -> App:
    return App(f"{DIAMOND}.{sort.name}", (), sort)


def bottom(sort: Sort) -> App:
    return App(f"{BOTTOM}.{sort.name}", (), sort)


def chi(sort: Sort) -> App:
    return App(f"{CHI}.{sort.name}", (), sort)


def is_diamond(t: Term) -> bool:
    return isinstance(t, App) and t.fn.startswith(DIAMOND + ".")


def is_chi(t: Term) -> bool:
    return isinstance(t, App) and t.fn.startswith(CHI + ".")


def numeral_value(t: Term) -> int | None:
    if isinstance(t, App) and not t.args and t.fn.isdigit():
        return int(t.fn)
    return None


def render_term(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    cached = t.__dict__.get("_text")
    if cached is None:
        cached = _render_app(t)
        object.__setattr__(t, "_text", cached)
    return cached


def _render_app(t: App) -> str:
    fn, args = t.fn, t.args
    if fn in ("+", "-") and len(args) == 2:
        right = render_term(args[1])
        if isinstance(args[1], App) and args[1].fn in ("+", "-") and len(args[1].args) == 2:
            right = f"({right})"
        return f"{render_term(args[0])}{fn}{right}"
    if fn == "neg" and len(args) == 1:
        inner = render_term(args[0])
        return f"-{inner}" if isinstance(args[0], Var) or not args[0].args else f"-({inner})"
    if fn in ("<=", "<") and len(args) == 2:
        return f"{render_term(args[0])} {fn} {render_term(args[1])}"
    if fn.startswith("eqmod.") and len(args) == 2:
        return f"{render_term(args[0])} =_{fn[6:]} {render_term(args[1])}"
    if fn.startswith(DIAMOND + "."):
        name = "<>"
    elif fn.startswith(BOTTOM + "."):
        name = "_|_"
    elif fn.startswith(CHI + "."):
        name = "chi"
    else:
        name = fn
    if not args:
        return name
    return f"{name}({','.join(render_term(a) for a in args)})"


def term_key(t: Term) -> tuple:
    return (render_term(t), t.sort.name, t.sort.level, t.sort.kind)


@dataclass(frozen=True, eq=False)
class Literal:
    """A (possibly negated) equation.  Predicate atoms are `p(...) = true`."""

    pos: bool
    left: Term
    right: Term
    _hash: int = field(init=False, repr=False)

    def __post_init__(self):
        if self.left.sort != self.right.sort:
            raise SortError(f"sides of literal have sorts {self.left.sort} and {self.right.sort}")
        object.__setattr__(self, "_hash", hash((self.pos, self.left, self.right)))

    @classmethod
    def make(cls, pos: bool, left: Term, right: Term) -> "Literal":
        if is_true(left) and not is_true(right):
            left, right = right, left
        elif not is_true(right) and term_key(right) < term_key(left):
            left, right = right, left
        return cls(pos, left, right)

    @classmethod
    def atom(cls, pos: bool, t: Term) -> "Literal":
        return cls(pos, t, true_of(t.sort))

    @property
    def is_equational(self) -> bool:
        return not is_true(self.left) and not is_true(self.right)

    @property
    def predicate(self) -> Term | None:
        return None if self.is_equational else self.left

    def complement(self) -> "Literal":
        return Literal(not self.pos, self.left, self.right)

    def __eq__(self, other):
        return (
            self is other
            or isinstance(other, Literal)
            and self._hash == other._hash
            and self.pos == other.pos
            and self.left == other.left
            and self.right == other.right
        )

    def __hash__(self):
        return self._hash

    def key(self) -> tuple:
        return (term_key(self.left), term_key(self.right), not self.pos)

    def __str__(self):
        if not self.is_equational:
            return str(self.left) if self.pos else f"~({self.left})"
        op = "=" if self.pos else "!="
        return f"{self.left} {op} {self.right}"


@dataclass(frozen=True, eq=False)
class Clause:
    lits: tuple
    _hash: int = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash(self.lits))

    @classmethod
    def of(cls, lits: Iterable[Literal]) -> "Clause":
        return cls(tuple(sorted(set(lits), key=Literal.key)))

    def __iter__(self) -> Iterator[Literal]:
        return iter(self.lits)

    def __len__(self):
        return len(self.lits)

    def __eq__(self, other):
        return self is other or isinstance(other, Clause) and self._hash == other._hash and self.lits == other.lits

    def __hash__(self):
        return self._hash

    def __str__(self):
        if not self.lits:
            return "[]"
        return " | ".join(str(l) for l in self.lits)

    def key(self) -> tuple:
        return (len(self.lits), tuple(l.key() for l in self.lits))


EMPTY_CLAUSE = Clause(())

Expr = Union[Var, App, Literal, Clause]
Substitution = dict  # Var -> Term


def sorted_clauses(clauses: Iterable[Clause]) -> list[Clause]:
    return sorted(set(clauses), key=Clause.key)


# -- traversal ---------------------------------------------------------------


def subterms(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, App):
        for a in t.args:
            yield from subterms(a)


def expr_terms(e) -> Iterator[Term]:
    """Top-level terms of an expression (both sides of every literal)."""
    if isinstance(e, (Var, App)):
        yield e
    elif isinstance(e, Literal):
        yield e.left
        yield e.right
    elif isinstance(e, Clause):
        for l in e.lits:
            yield l.left
            yield l.right
    else:
        for x in e:
            yield from expr_terms(x)


def variables(e) -> list[Var]:
    """Variables of an expression, in first-occurrence order."""
    seen: dict[Var, None] = {}
    for t in expr_terms(e):
        for s in subterms(t):
            if isinstance(s, Var):
                seen.setdefault(s, None)
    return list(seen)


def is_ground(e) -> bool:
    if isinstance(e, Var):
        return False
    if isinstance(e, App):
        return e._ground
    return all(is_ground(t) for t in expr_terms(e))


# -- substitutions -------------------------------------------------------------


def check_substitution(subst: Substitution) -> None:
    for v, t in subst.items():
        if v.sort != t.sort:
            raise SortError(f"substitution maps {v}:{v.sort} to {t}:{t.sort}")


def apply_term(subst: Substitution, t: Term) -> Term:
    if isinstance(t, Var):
        return subst.get(t, t)
    if t._ground or not subst:
        return t
    return App(t.fn, tuple(apply_term(subst, a) for a in t.args), t.sort)


def apply_literal(subst: Substitution, lit: Literal) -> Literal:
    if not lit.is_equational:
        return Literal(lit.pos, apply_term(subst, lit.left), lit.right)
    return Literal.make(lit.pos, apply_term(subst, lit.left), apply_term(subst, lit.right))


def apply(subst: Substitution, e):
    """Apply a substitution homomorphically to a term, literal or clause."""
    if isinstance(e, (Var, App)):
        return apply_term(subst, e)
    if isinstance(e, Literal):
        return apply_literal(subst, e)
    if isinstance(e, Clause):
        if not subst:
            return e
        return Clause.of(apply_literal(subst, l) for l in e.lits)
    raise TypeError(f"cannot apply substitution to {type(e).__name__}")


def compose(first: Substitution, second: Substitution) -> Substitution:
    """The substitution x -> (x first) second."""
    out = {v: apply_term(second, t) for v, t in first.items()}
    for v, t in second.items():
        out.setdefault(v, t)
    return {v: t for v, t in out.items() if v != t}


def rename_apart(clause: Clause, suffix: str) -> tuple[Clause, Substitution]:
    ren = {v: Var(f"{v.name}{suffix}", v.sort) for v in variables(clause)}
    return apply(ren, clause), ren


def canonical_variant(clause: Clause) -> Clause:
    """Rename variables to v0, v1, ... in a deterministic order.

    Literals are first ordered with variables blanked out so that the
    numbering does not depend on the original names.
    """
    vs = variables(clause)
    if not vs:
        return clause
    blank = {v: Var("_", v.sort) for v in vs}
    order = sorted(clause.lits, key=lambda l: (apply_literal(blank, l).key(), l.key()))
    ren: dict[Var, Var] = {}
    for lit in order:
        for t in (lit.left, lit.right):
            for s in subterms(t):
                if isinstance(s, Var) and s not in ren:
                    ren[s] = Var(f"v{len(ren)}", s.sort)
    return apply(ren, clause)


# -- unification and matching ------------------------------------------------------


def _occurs(v: Var, t: Term, subst: Substitution) -> bool:
    stack = [t]
    while stack:
        s = stack.pop()
        if isinstance(s, Var):
            if s == v:
                return True
            if s in subst:
                stack.append(subst[s])
        elif not s._ground:
            stack.extend(s.args)
    return False


def _walk(t: Term, subst: Substitution) -> Term:
    while isinstance(t, Var) and t in subst:
        t = subst[t]
    return t


def mgu(pairs: Iterable[tuple[Term, Term]]) -> Substitution | None:
    """Most general unifier of a list of term pairs, or None.

    Raises SortError if a pair relates terms of different sorts.  The result
    is idempotent.
    """
    pairs = list(pairs)
    for l, r in pairs:
        if l.sort != r.sort:
            raise SortError(f"cannot unify {l}:{l.sort} with {r}:{r.sort}")
    subst: Substitution = {}
    stack = list(pairs)
    while stack:
        l, r = stack.pop()
        l, r = _walk(l, subst), _walk(r, subst)
        if l == r:
            continue
        if isinstance(l, Var):
            if _occurs(l, r, subst):
                return None
            subst[l] = r
        elif isinstance(r, Var):
            if _occurs(r, l, subst):
                return None
            subst[r] = l
        elif l.fn != r.fn or l.sort != r.sort or len(l.args) != len(r.args):
            return None
        else:
            stack.extend(zip(l.args, r.args))
    # resolve the triangular form into an idempotent substitution
    out = {}
    for v in subst:
        t = subst[v]
        while True:
            t2 = apply_term(subst, t)
            if t2 == t:
                break
            t = t2
        out[v] = t
    return out


def literal_pairs(l1: Literal, l2: Literal) -> list[list[tuple[Term, Term]]]:
    """Ways of making two literals syntactically equal (ignoring polarity)."""
    if l1.is_equational != l2.is_equational:
        return []
    if not l1.is_equational:
        return [[(l1.left, l2.left)]]
    return [[(l1.left, l2.left), (l1.right, l2.right)], [(l1.left, l2.right), (l1.right, l2.left)]]


def match_term(pattern: Term, ground: Term, subst: Substitution) -> Substitution | None:
    stack = [(pattern, ground)]
    subst = dict(subst)
    while stack:
        p, g = stack.pop()
        if isinstance(p, Var):
            if p.sort != g.sort:
                return None
            bound = subst.get(p)
            if bound is None:
                subst[p] = g
            elif bound != g:
                return None
        elif p._ground:
            if p != g:
                return None
        elif not isinstance(g, App) or p.fn != g.fn or p.sort != g.sort or len(p.args) != len(g.args):
            return None
        else:
            stack.extend(zip(p.args, g.args))
    return subst


def match_literal(pattern: Literal, ground: Literal, subst: Substitution) -> list[Substitution]:
    if pattern.pos != ground.pos:
        return []
    out = []
    for pairs in literal_pairs(pattern, ground):
        s = subst
        for p, g in pairs:
            s = match_term(p, g, s)
            if s is None:
                break
        if s is not None and s not in out:
            out.append(s)
    return out


def match_clause(pattern: Clause, ground: Clause) -> list[Substitution]:
    """All θ with apply(θ, pattern) == ground as literal sets.

    Search assigns each pattern literal to a ground literal; a candidate θ is
    accepted when the image covers the ground clause exactly.
    """
    plits = sorted(pattern.lits, key=lambda l: -len(variables(l)))
    target = set(ground.lits)
    if len(target) > len(plits):
        return []
    found: list[Substitution] = []

    def go(i: int, subst: Substitution):
        if i == len(plits):
            if {apply_literal(subst, l) for l in pattern.lits} == target and subst not in found:
                found.append(subst)
            return
        for g in ground.lits:
            for s in match_literal(plits[i], g, subst):
                go(i + 1, s)

    go(0, {})
    return found


# -- base / target structure ---------------------------------------------------------


def b_ground_instance(e, assignment: Substitution, level: int = 0):
    """Replace exactly the base variables of `e` by the given ground terms."""
    base_vars = {v for v in variables(e) if is_base(v.sort, level)}
    for v, t in assignment.items():
        if not is_base(v.sort, level):
            raise SortError(f"assignment touches non-base variable {v}")
        if not is_ground(t):
            raise SortError(f"assignment maps {v} to non-ground {t}")
    if set(assignment) != base_vars:
        missing = sorted(str(v) for v in base_vars - set(assignment))
        extra = sorted(str(v) for v in set(assignment) - base_vars)
        raise ValueError(f"assignment must cover exactly the base variables (missing {missing}, extra {extra})")
    check_substitution(assignment)
    return apply(assignment, e)


def _fresh_name(t: Term) -> str:
    return "v_" + hashlib.sha1(render_term(t).encode()).hexdigest()[:8]


def _maximal_base_subterms(t: Term, level: int) -> Iterator[Term]:
    if is_base(t.sort, level):
        yield t
    elif isinstance(t, App):
        for a in t.args:
            yield from _maximal_base_subterms(a, level)


def _replace_base(t: Term, nu: dict, level: int) -> Term:
    if is_base(t.sort, level):
        return nu[t]
    if isinstance(t, Var):
        return t
    return App(t.fn, tuple(_replace_base(a, nu, level) for a in t.args), t.sort)


def decompose_ground_subst(sigma: Substitution, level: int = 0) -> tuple[Substitution, Substitution]:
    """Split a ground substitution into a target part and a base part.

    Returns (sigma_N, sigma_B) with sigma == compose(sigma_N, sigma_B)
    restricted to dom(sigma).
    """
    for v, t in sigma.items():
        if not is_ground(t):
            raise ValueError(f"substitution is not ground at {v}")
    dom = sorted(sigma, key=lambda v: (v.name, v.sort.name))
    maximal: dict[Term, None] = {}
    for v in dom:
        for t in _maximal_base_subterms(sigma[v], level):
            maximal.setdefault(t, None)
    nu: dict[Term, Var] = {}
    for t in maximal:
        for v in dom:
            if sigma[v] == t:
                nu[t] = v
                break
        else:
            nu[t] = Var(_fresh_name(t), t.sort)
    sigma_n = {}
    for v in dom:
        if not is_base(v.sort, level):
            image = _replace_base(sigma[v], nu, level)
            if image != v:
                sigma_n[v] = image
    sigma_b = {v: sigma[v] for v in dom if is_base(v.sort, level)}
    for t, v in nu.items():
        sigma_b[v] = t
    return sigma_n, sigma_b


@dataclass(frozen=True)
class BMapping:
    """A map on ground base terms, identity outside its finite table."""

    table: tuple = ()
    level: int = 0

    @classmethod
    def of(cls, mapping: dict, level: int = 0) -> "BMapping":
        for k, v in mapping.items():
            if k.sort != v.sort:
                raise SortError(f"B-mapping relates {k} and {v} of different sorts")
        return cls(tuple(sorted(mapping.items(), key=lambda kv: term_key(kv[0]))), level)

    def term(self, t: Term) -> Term:
        if isinstance(t, Var):
            return t
        table = self.__dict__.get("_map")
        if table is None:
            table = dict(self.table)
            object.__setattr__(self, "_map", table)
        if t._ground and t in table:
            return table[t]
        if not t.args:
            return t
        return App(t.fn, tuple(self.term(a) for a in t.args), t.sort)

    def __call__(self, e):
        if isinstance(e, (Var, App)):
            return self.term(e)
        if isinstance(e, Literal):
            if not e.is_equational:
                return Literal(e.pos, self.term(e.left), e.right)
            return Literal.make(e.pos, self.term(e.left), self.term(e.right))
        if isinstance(e, Clause):
            return Clause.of(self(l) for l in e.lits)
        return {self(c) for c in e}


def cartesian(choices: list[list]) -> Iterator[tuple]:
    return itertools.product(*choices)
