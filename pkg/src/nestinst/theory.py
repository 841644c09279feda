"""Hierarchic structure of clauses and the preprocessing passes.

A combination level L splits sorts into base sorts (kind base, level L)
and everything else.  Ground terms of a base sort are treated as opaque
constants when classifying clauses, which is how terms built by an
enclosing level (``select(t,<>)`` and the like) flow into an inner level.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .arith import (
    COMPARISONS,
    LinearForm,
    eqmod_modulus,
    is_eqmod,
    le,
    le_shape,
    normalize_linear,
    num,
    pred_sort,
    to_term,
)
from .errors import FragmentViolation, Unsupported
from .signature import Signature
from .terms import (
    BASE,
    BOTTOM,
    TARGET,
    App,
    Clause,
    Literal,
    Sort,
    Term,
    Var,
    is_base,
    is_ground,
    is_true,
    render_term,
    subterms,
    variables,
)

VALIDATORS = ("presburger-fragment", "membership-fragment", "fol-no-equality", "ground-arrays", "nested")


@dataclass(frozen=True)
class TheorySpec:
    """A theory in the stack: its role, sorts and clause-fragment validator."""

    name: str
    role: str
    sorts: frozenset = frozenset()
    validator: str = "fol-no-equality"
    params: tuple = ()

    def __post_init__(self):
        if self.role not in (BASE, TARGET):
            raise ValueError(f"bad role {self.role!r}")
        if self.validator not in VALIDATORS:
            raise ValueError(f"unknown validator {self.validator!r}")
        if self.role == BASE and any(s.kind != BASE for s in self.sorts):
            raise ValueError(f"base theory {self.name} has non-base sorts")


@dataclass(frozen=True)
class DecomposedClause:
    base_part: Clause
    target_part: Clause
    origin: int = 0


# -- classification -------------------------------------------------------------------


def _base_term(t: Term, level: int) -> bool:
    if not is_base(t.sort, level):
        return False
    if isinstance(t, Var) or t._ground:
        return True
    return all(_base_term(a, level) for a in t.args)


def _target_term(t: Term, level: int) -> bool:
    if is_base(t.sort, level):
        return False
    if isinstance(t, Var):
        return True
    return all(isinstance(a, Var) or _target_term(a, level) for a in t.args)


def literal_is_base(lit: Literal, level: int = 0) -> bool:
    return _base_term(lit.left, level) and _base_term(lit.right, level)


def literal_is_target(lit: Literal, level: int = 0) -> bool:
    return _target_term(lit.left, level) and _target_term(lit.right, level)


def validate_omega_B(clause: Clause, level: int = 0) -> bool:
    return all(literal_is_base(l, level) for l in clause)


def validate_omega_N(clause: Clause, level: int = 0) -> bool:
    return all(literal_is_target(l, level) for l in clause)


def decompose(clause: Clause, level: int = 0, origin: int = 0) -> DecomposedClause:
    base, target = [], []
    for lit in clause:
        if literal_is_base(lit, level):
            base.append(lit)
        elif literal_is_target(lit, level):
            target.append(lit)
        else:
            raise FragmentViolation("literal mixes base and target symbols", lit)
    return DecomposedClause(Clause.of(base), Clause.of(target), origin)


# -- ground simplification --------------------------------------------------------------


def literal_truth(lit: Literal) -> bool | None:
    """Truth value of a literal decidable without a model, else None."""
    atom_value = None
    if lit.is_equational:
        if lit.left == lit.right:
            atom_value = True
        elif lit.left.sort.is_int:
            diff = normalize_linear(lit.left) - normalize_linear(lit.right)
            if diff.is_constant:
                atom_value = diff.offset == 0
    else:
        t = lit.left
        if is_true(t):
            atom_value = True
        elif isinstance(t, App) and len(t.args) == 2 and (t.fn in COMPARISONS or is_eqmod(t.fn)):
            a, b = t.args
            if a.sort.is_int:
                diff = normalize_linear(a) - normalize_linear(b)
                if diff.is_constant:
                    d = diff.offset
                    if t.fn == "<=":
                        atom_value = d <= 0
                    elif t.fn == "<":
                        atom_value = d < 0
                    else:
                        atom_value = d % eqmod_modulus(t.fn) == 0
    if atom_value is None:
        return None
    return atom_value if lit.pos else not atom_value


def simplify_clause(clause: Clause) -> Clause | None:
    """Drop false literals; return None if the clause is trivially true."""
    kept = []
    lits = set(clause.lits)
    for lit in clause:
        v = literal_truth(lit)
        if v is True or lit.complement() in lits:
            return None
        if v is None:
            kept.append(lit)
    return Clause.of(kept)


def simplify(clauses) -> list[Clause]:
    out = {}
    for c in clauses:
        s = simplify_clause(c)
        if s is not None:
            out[s] = None
    return sorted(out, key=Clause.key)


def _is_bottom(t: Term) -> bool:
    return isinstance(t, App) and not t.args and t.fn.startswith(BOTTOM + ".")


def _free_sort(sort: Sort) -> bool:
    return sort.kind == TARGET and not sort.is_int and not sort.is_real and sort.name != "bool"


def _bottom_sorts(clauses) -> set:
    out = set()
    for c in clauses:
        for lit in c:
            for side in (lit.left, lit.right):
                out.update(s.sort for s in subterms(side) if _is_bottom(s))
    return out


def _eliminable(clauses, sort: Sort) -> bool:
    bot = f"{BOTTOM}.{sort.name}"
    polarity: dict[str, bool] = {}
    for c in clauses:
        for lit in c:
            occurs = any(isinstance(s, App) and s.fn == bot for side in (lit.left, lit.right) for s in subterms(side))
            if not occurs:
                continue
            t = lit.left
            if lit.is_equational or t.sort.name != "bool" or not t.args or t.fn in COMPARISONS or is_eqmod(t.fn):
                return False
            for a in t.args:
                if not (isinstance(a, App) and a.fn == bot) and any(isinstance(s, App) and s.fn == bot for s in subterms(a)):
                    return False
            if polarity.setdefault(t.fn, lit.pos) != lit.pos:
                return False
    return True


def eliminate_bottom(clauses) -> list[Clause]:
    """Drop clauses whose bottom constants can be made true by a fresh domain element.

    Applies to a free sort whose bottom constant occurs only as a direct
    argument of uninterpreted predicates, each used with a single polarity
    on such atoms.  Interpreting bottom as a new element on which every such
    predicate takes that polarity satisfies all those clauses without
    affecting the rest, so the result is equisatisfiable.
    """
    clauses = sorted(set(clauses), key=Clause.key)
    changed = True
    while changed:
        changed = False
        for sort in sorted(_bottom_sorts(clauses), key=lambda s: s.name):
            if _free_sort(sort) and _eliminable(clauses, sort):
                bot = f"{BOTTOM}.{sort.name}"
                clauses = [
                    c for c in clauses
                    if not any(isinstance(s, App) and s.fn == bot for l in c for side in (l.left, l.right) for s in subterms(side))
                ]
                changed = True
                break
    return clauses


# -- literal normalization ------------------------------------------------------------------


def _le_from_shape(shape, sort: Sort) -> Term | None:
    kind = shape[0]
    if kind == "var_le":
        return le(shape[1], to_term(shape[2], sort))
    if kind == "le_var":
        return le(to_term(shape[1], sort), shape[2])
    if kind == "var_le_var":
        _, x, y, g = shape
        return le(x, to_term(LinearForm.atom(y) + g, sort))
    return None


def _is_base_int(sort: Sort) -> bool:
    return sort.is_int and sort.kind == BASE


def _normalize_comparison(lit: Literal) -> list[Literal]:
    """Rewrite one base-integer literal into the allowed shapes."""
    if lit.is_equational:
        if _is_base_int(lit.left.sort) and not lit.pos and not is_ground(lit):
            l, r = lit.left, lit.right
            out = []
            for a, b in ((l, r), (r, l)):
                out.extend(_normalize_comparison(Literal.atom(False, le(a, b))))
            return out
        return [lit]
    t = lit.left
    if not (isinstance(t, App) and t.fn in COMPARISONS and _is_base_int(t.args[0].sort)):
        return [lit]
    if is_ground(t):
        return [lit]
    a, b = t.args
    sort = a.sort
    if t.fn == "<":
        b = to_term(normalize_linear(b).shift(-1), sort)  # a < b  iff  a <= b-1
    shape = le_shape(a, b)
    if shape is None:
        return [Literal.atom(lit.pos, le(a, b))] if t.fn == "<" else [lit]
    pos = lit.pos
    if pos and shape[0] != "ground":
        # x <= g  iff  not(g+1 <= x); likewise for the other shapes
        diff = normalize_linear(a) - normalize_linear(b)  # atom: diff <= 0
        neg_diff = (-diff).shift(1)  # negation: -diff + 1 <= 0
        flipped = le_shape(to_term(neg_diff, sort), num(0, sort))
        if flipped is not None:
            shape, pos = flipped, False
    atom = _le_from_shape(shape, sort)
    if atom is None:
        atom = le(a, b)
    return [Literal.atom(pos, atom)]


class _Fresh:
    def __init__(self, taken: set[str], prefix: str = "k"):
        self.taken = set(taken)
        self.prefix = prefix
        self.n = 0

    def __call__(self, sort: Sort) -> Var:
        while True:
            name = f"{self.prefix}{self.n}"
            self.n += 1
            if name not in self.taken:
                self.taken.add(name)
                return Var(name, sort)


def _needs_abstraction(parent: Sort, arg: Term) -> bool:
    if isinstance(arg, Var) or arg.sort.kind != BASE:
        return False
    return not (parent.kind == BASE and parent.level == arg.sort.level)


def _guards(v: Var, t: Term) -> list[Literal]:
    if t.sort.is_int:
        return [Literal.atom(False, le(v, t)), Literal.atom(False, le(t, v))]
    return [Literal.make(False, v, t)]


def _abstract_clause(lits: list[Literal], fresh: _Fresh) -> list[Literal]:
    memo: dict[Term, Var] = {}
    pending = list(lits)
    done: list[Literal] = []

    def walk(t: Term) -> Term:
        if isinstance(t, Var) or not t.args:
            return t
        new_args = []
        for a in t.args:
            if _needs_abstraction(t.sort, a):
                v = memo.get(a)
                if v is None:
                    v = memo[a] = fresh(a.sort)
                    pending.extend(_guards(v, a))
                new_args.append(v)
            else:
                new_args.append(walk(a))
        return App(t.fn, tuple(new_args), t.sort)

    while pending:
        lit = pending.pop(0)
        if lit.is_equational:
            l, r = lit.left, lit.right
            # a top-level equation side is abstracted when the equation is a
            # target atom holding a base-sorted non-variable side of another level
            new = Literal.make(lit.pos, walk(l), walk(r))
        else:
            new = Literal(lit.pos, walk(lit.left), lit.right)
        done.append(new)
    return done


def normalize_literals(clauses) -> list[Clause]:
    """Rewrite clauses into the literal shapes the fragment validators accept.

    * x < t becomes x <= t-1, t < x becomes t+1 <= x;
    * positive x <= t (x a variable) becomes the negative literal t+1 </= x;
    * x != t over a base integer sort becomes x </= t | t </= x;
    * a non-variable base argument a inside a target term is replaced by a
      fresh variable i with guards i </= a | a </= i.
    """
    out = []
    for clause in clauses:
        fresh = _Fresh({v.name for v in variables(clause)})
        lits = _abstract_clause(list(clause.lits), fresh)
        rewritten: list[Literal] = []
        for lit in lits:
            rewritten.extend(_normalize_comparison(lit))
        out.append(Clause.of(rewritten))
    return out


# -- store elimination ----------------------------------------------------------------


def _contains_store(t: Term) -> bool:
    return any(isinstance(s, App) and s.fn == "store" for s in subterms(t))


def _select_symbol(signature: Signature, array: Sort, index: Sort, elem: Sort) -> str:
    candidates = [
        name
        for name, (args, res) in sorted(signature.functions.items())
        if args == (array, index) and res == elem
    ]
    if "select" in candidates:
        return "select"
    if not candidates:
        raise Unsupported(f"no select symbol for array sort {array}")
    return candidates[0]


def eliminate_store(clauses, signature: Signature) -> list[Clause]:
    """Replace ground definitions s = store(t,i,a) by select-only clauses."""
    out = []
    for clause in clauses:
        if not any(_contains_store(t) for l in clause for t in (l.left, l.right)):
            out.append(clause)
            continue
        if len(clause) != 1:
            raise Unsupported(f"store outside a unit definition: {clause}")
        (lit,) = clause.lits
        if not lit.pos or not lit.is_equational:
            raise Unsupported(f"store outside a definition: {clause}")
        l, r = lit.left, lit.right
        if isinstance(l, App) and l.fn == "store":
            l, r = r, l
        if not (isinstance(r, App) and r.fn == "store") or _contains_store(l):
            raise Unsupported(f"store must appear as s = store(t,i,a): {clause}")
        t, i, a = r.args
        if any(_contains_store(x) for x in (t, i, a)):
            raise Unsupported(f"nested store; name the intermediate array: {clause}")
        if not is_ground(lit):
            raise Unsupported(f"non-ground store definition: {clause}")
        sel = _select_symbol(signature, t.sort, i.sort, a.sort)
        z = Var("z", i.sort)

        def select(arr, idx):
            return App(sel, (arr, idx), a.sort)

        frame = Literal.make(True, select(l, z), select(t, z))
        out.append(Clause.of([Literal.make(True, select(l, i), a)]))
        out.append(Clause.of([Literal.atom(False, le(to_term(normalize_linear(i).shift(1), i.sort), z)), frame]))
        out.append(Clause.of([Literal.atom(False, le(z, to_term(normalize_linear(i).shift(-1), i.sort))), frame]))
    return out


# -- sort copying ----------------------------------------------------------------------


@dataclass
class CopyResult:
    signature: Signature
    clauses: list
    links: dict = field(default_factory=dict)  # primed constant name -> original name
    copied: Sort | None = None


class _UnionFind:
    def __init__(self):
        self.parent: dict[int, int] = {}

    def find(self, x: int) -> int:
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def copy_sorts(signature: Signature, clauses, sort_name: str) -> CopyResult:
    """Move element-side occurrences of an integer sort to a primed copy.

    Element producers are the user functions with result `sort_name` taking
    at least one argument of a non-integer target sort (``select``).  Their
    results and everything arithmetically connected to them move to the
    copy; their integer arguments stay on the index side.
    """
    nat = signature.sort(sort_name)
    producers = {
        name
        for name, (args, res) in signature.functions.items()
        if res == nat and args and any(a.kind == TARGET and not a.is_int for a in args)
    }
    if not producers:
        return CopyResult(signature, list(clauses))
    primed = Sort(nat.name + "'", TARGET, nat.level, True, copy_of=nat.name)
    sig = signature.copy()
    sig.sorts[primed.name] = primed
    for name in producers:
        args, _ = sig.functions[name]
        sig.functions[name] = (args, primed)
    links: dict[str, str] = {}
    out = []
    for clause in clauses:
        out.append(_copy_clause(clause, nat, primed, producers, sig, links))
    return CopyResult(sig, out, links, primed)


def _copy_clause(clause, nat, primed, producers, sig, links) -> Clause:
    uf = _UnionFind()
    nodes: dict[int, Term] = {}
    side: dict[int, set] = {}
    var_node: dict[Var, int] = {}
    counter = [0]

    def new_node(t):
        counter[0] += 1
        nodes[counter[0]] = t
        return counter[0]

    def force(n, s):
        side.setdefault(n, set()).add(s)

    # annotated tree: (term, node or None, children)
    def walk(t: Term):
        if t.sort != nat and not (isinstance(t, App) and t.fn in producers):
            if isinstance(t, Var):
                return (t, None, ())
            kids = tuple(walk(a) for a in t.args)
            if isinstance(t, App) and (t.fn in COMPARISONS or is_eqmod(t.fn)) and t.args and t.args[0].sort == nat:
                a, b = kids
                uf.union(a[1], b[1])
            elif isinstance(t, App) and t.fn not in producers:
                for k in kids:
                    if k[1] is not None:
                        force(k[1], "I")
            return (t, None, kids)
        if isinstance(t, Var):
            if t not in var_node:
                var_node[t] = new_node(t)
            return (t, var_node[t], ())
        n = new_node(t)
        kids = tuple(walk(a) for a in t.args)
        if t.fn in producers:
            force(n, "E")
            for k in kids:
                if k[1] is not None:
                    force(k[1], "I")
        elif t.args:
            for k in kids:
                if k[1] is not None:
                    uf.union(n, k[1])
        return (t, n, kids)

    trees = []
    for lit in clause:
        lt_, rt_ = walk(lit.left), walk(lit.right)
        if lit.is_equational and lt_[1] is not None and rt_[1] is not None:
            uf.union(lt_[1], rt_[1])
        trees.append((lit, lt_, rt_))
    group_side: dict[int, set] = {}
    for n, ss in side.items():
        group_side.setdefault(uf.find(n), set()).update(ss)
    for root, ss in group_side.items():
        if ss == {"I", "E"}:
            culprit = next(t for n, t in nodes.items() if uf.find(n) == root)
            raise FragmentViolation("term used both as index and as element", culprit)

    def is_elem(n):
        return n is not None and "E" in group_side.get(uf.find(n), set())

    def rebuild(tree) -> Term:
        t, n, kids = tree
        if isinstance(t, Var):
            return Var(t.name, primed) if is_elem(n) else t
        args = tuple(rebuild(k) for k in kids)
        if t.fn in producers:
            return App(t.fn, args, primed)
        if is_elem(n):
            if not t.args and not t.fn.isdigit() and t.fn in sig.functions:
                name = t.fn + "'"
                links[name] = t.fn
                sig.functions.setdefault(name, ((), primed))
                return App(name, (), primed)
            return App(t.fn, args, primed)
        if (t.fn in COMPARISONS or is_eqmod(t.fn)) and args and args[0].sort == primed:
            return App(t.fn, args, pred_sort(primed))
        return App(t.fn, args, t.sort)

    new_lits = []
    for lit, lt_, rt_ in trees:
        l, r = rebuild(lt_), rebuild(rt_)
        if lit.is_equational:
            new_lits.append(Literal.make(lit.pos, l, r))
        else:
            new_lits.append(Literal.atom(lit.pos, l))
    return Clause.of(new_lits)


def unprime(clauses, sorts: dict, links: dict | None = None) -> list[Clause]:
    """Merge copied sorts back into their originals; c' becomes c."""
    links = links or {}

    def base_sort(s: Sort) -> Sort:
        seen = set()
        while s.copy_of is not None and s.copy_of in sorts and s.name not in seen:
            seen.add(s.name)
            s = sorts[s.copy_of]
        return s

    def term(t: Term) -> Term:
        if isinstance(t, Var):
            return Var(t.name, base_sort(t.sort))
        args = tuple(term(a) for a in t.args)
        fn = links.get(t.fn, t.fn) if not t.args else t.fn
        if (t.fn in COMPARISONS or is_eqmod(t.fn)) and args and args[0].sort.is_int:
            return App(t.fn, args, pred_sort(args[0].sort))
        if t.fn == "true":
            return t
        return App(fn, args, base_sort(t.sort))

    out = {}
    for c in clauses:
        lits = []
        for lit in c:
            if lit.is_equational:
                lits.append(Literal.make(lit.pos, term(lit.left), term(lit.right)))
            else:
                lits.append(Literal.atom(lit.pos, term(lit.left)))
        out[Clause.of(lits)] = None
    return list(out)


def describe(clause: Clause) -> str:
    return " | ".join(str(l) for l in clause) or "[]"


__all__ = [
    "TheorySpec",
    "DecomposedClause",
    "validate_omega_B",
    "validate_omega_N",
    "decompose",
    "literal_truth",
    "simplify_clause",
    "simplify",
    "eliminate_bottom",
    "normalize_literals",
    "eliminate_store",
    "copy_sorts",
    "unprime",
    "render_term",
]
