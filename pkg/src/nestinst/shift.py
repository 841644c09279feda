"""Absorbing constant index offsets into per-array translations.

A clause such as ``a </= i | j != i-a | select(s,i) = select(t,j)`` relates
two arrays read at indices that differ by a ground offset.  If every such
offset can be explained by a translation lambda(T) per array constant T,
replacing each array by a shifted copy removes the offsets and puts the
clause set back into the index fragment.

Convention: a clause mentioning ``select(T,x)`` for a variable x is
instantiated with ``x -> x + lambda(T)``, and ``select(T,s)`` is then read as
``select(T', s - lambda(T))`` where ``T'(k) = T(k + lambda(T))``.  A
literal ``x </= y + g`` with ``select(T1,x)`` and ``select(T2,y)`` in the
clause therefore requires ``lambda(T1) - lambda(T2) = g``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .arith import LinearForm, is_eqmod, le, le_shape, normalize_linear, to_term
from .errors import FragmentViolation
from .signature import Signature
from .terms import (
    App,
    Clause,
    Literal,
    Term,
    Var,
    apply,
    is_base,
    is_ground,
    subterms,
)

ZERO = "$zero"


def _is_array_const(t: Term, level: int) -> bool:
    return isinstance(t, App) and not t.args and not t.sort.is_int and not is_base(t.sort, level)


def _is_select(t: Term, level: int) -> bool:
    return (
        isinstance(t, App)
        and len(t.args) == 2
        and _is_array_const(t.args[0], level)
        and is_base(t.args[1].sort, level)
        and t.args[1].sort.is_int
    )


def _selects(clause: Clause, level: int) -> list[App]:
    out = []
    for lit in clause:
        for side in (lit.left, lit.right):
            for s in subterms(side):
                if _is_select(s, level):
                    out.append(s)
    return out


def _is_index_literal(lit: Literal, level: int) -> bool:
    t = lit.left
    if lit.is_equational:
        return is_base(t.sort, level) and t.sort.is_int
    return isinstance(t, App) and len(t.args) == 2 and is_base(t.args[0].sort, level) and t.args[0].sort.is_int


class _OffsetUnionFind:
    """Union-find over names with LinearForm offsets: value(n) = value(parent(n)) + off(n)."""

    def __init__(self):
        self.parent: dict[str, str] = {}
        self.off: dict[str, LinearForm] = {}

    def add(self, n: str) -> None:
        if n not in self.parent:
            self.parent[n] = n
            self.off[n] = LinearForm()

    def find(self, n: str) -> tuple[str, LinearForm]:
        self.add(n)
        path = []
        while self.parent[n] != n:
            path.append(n)
            n = self.parent[n]
        root = n
        acc = LinearForm()
        for m in reversed(path):
            acc = acc + self.off[m]
            self.parent[m] = root
            self.off[m] = acc
        return root, (self.off[path[0]] if path else LinearForm())

    def relate(self, a: str, b: str, d: LinearForm) -> bool:
        """Record value(a) - value(b) = d; False on a clash."""
        ra, oa = self.find(a)
        rb, ob = self.find(b)
        if ra == rb:
            return oa - ob == d
        # value(ra) = value(a) - oa = value(b) + d - oa = value(rb) + ob + d - oa
        if ra == ZERO or (rb != ZERO and rb > ra):
            self.parent[rb] = ra
            self.off[rb] = oa - ob - d
        else:
            self.parent[ra] = rb
            self.off[ra] = ob + d - oa
        return True


def _index_constraints(lit: Literal, level: int):
    """Yield (x, y, g) for x <= y + g bounds of a two-variable index literal.

    Raises FragmentViolation when a non-ground literal falls outside the
    allowed shapes x </= y+s, x </= s, s </= x, x !=_k s.
    """
    t = lit.left
    if lit.is_equational:
        if lit.pos and not is_ground(lit):
            raise FragmentViolation("positive index equation is not allowed", lit)
        if is_ground(lit):
            return
        pairs = [(lit.left, lit.right), (lit.right, lit.left)]
    elif is_eqmod(t.fn):
        if lit.pos and not is_ground(lit):
            raise FragmentViolation("positive congruence on a variable is not allowed", lit)
        if len(normalize_linear(t.args[0]).variables() + normalize_linear(t.args[1]).variables()) > 1:
            raise FragmentViolation("congruence between variables is not allowed", lit)
        return
    else:
        a, b = t.args
        if t.fn == "<":
            b = to_term(normalize_linear(b).shift(-1), b.sort)
        pairs = [(a, b)] if not lit.pos else [(b, to_term(normalize_linear(a).shift(-1), a.sort))]
    for a, b in pairs:
        shape = le_shape(a, b)
        if shape is None:
            raise FragmentViolation("index literal outside the shiftable shapes", lit)
        if shape[0] == "var_le_var":
            yield shape[1], shape[2], shape[3]


def shiftability_check(clauses, level: int = 0) -> dict | None:
    """Find lambda: array constant name -> LinearForm, or None if none exists."""
    uf = _OffsetUnionFind()
    uf.add(ZERO)
    arrays: dict[str, None] = {}
    for clause in clauses:
        var_node: dict[Var, str] = {}
        for sel in _selects(clause, level):
            arr, idx = sel.args
            arrays.setdefault(arr.fn, None)
            uf.add(arr.fn)
            if isinstance(idx, Var):
                prev = var_node.setdefault(idx, arr.fn)
                if not uf.relate(prev, arr.fn, LinearForm()):
                    return None
            elif not is_ground(idx):
                raise FragmentViolation(f"array read at a non-variable, non-ground index: {sel}")
        for lit in clause:
            if is_equational_array(lit, level):
                a, b = lit.left.fn, lit.right.fn
                for n in (a, b):
                    arrays.setdefault(n, None)
                if not uf.relate(a, b, LinearForm()):
                    return None
                continue
            if not _is_index_literal(lit, level):
                continue
            for x, y, g in _index_constraints(lit, level):
                nx, ny = var_node.get(x, ZERO), var_node.get(y, ZERO)
                if not uf.relate(nx, ny, g):
                    return None
    return _pin(uf, list(arrays))


def is_equational_array(lit: Literal, level: int) -> bool:
    return lit.is_equational and _is_array_const(lit.left, level) and _is_array_const(lit.right, level)


def _negativity(lf: LinearForm) -> int:
    if lf.is_constant:
        return int(lf.offset < 0)
    return sum(1 for _, c in lf.coeffs if c < 0)


def _pin(uf: _OffsetUnionFind, arrays: list[str]) -> dict:
    """Assign concrete forms; components not tied to zero put their lowest member at 0."""
    groups: dict[str, list[tuple[str, LinearForm]]] = {}
    for n in arrays:
        root, off = uf.find(n)
        groups.setdefault(root, []).append((n, off))
    lam = {}
    for root, members in groups.items():
        if root == ZERO:
            for n, off in members:
                lam[n] = off
            continue
        best = min(
            members,
            key=lambda m: (sum(_negativity(o - m[1]) for _, o in members), m[0]),
        )
        for n, off in members:
            lam[n] = off - best[1]
    return dict(sorted(lam.items()))


@dataclass
class ShiftResult:
    clauses: list
    renaming: dict = field(default_factory=dict)  # array name -> shifted copy name
    signature: Signature | None = None


def _fresh_array_names(names, taken: set[str]) -> dict[str, str]:
    out = {}
    for n in sorted(names):
        new = n + "'"
        while new in taken:
            new += "'"
        taken.add(new)
        out[n] = new
    return out


def _canonical_index_literal(lit: Literal, level: int) -> Literal:
    t = lit.left
    if lit.is_equational:
        if not (is_base(t.sort, level) and t.sort.is_int):
            return lit
        d = normalize_linear(lit.left) - normalize_linear(lit.right)
        solvable = [v for v in d.variables() if abs(d.coeff(v)) == 1]
        if not solvable:
            return Literal.make(lit.pos, to_term(normalize_linear(lit.left), t.sort), to_term(normalize_linear(lit.right), t.sort))
        # solve for one variable: v = v - d (coefficient +1) or v = v + d (coefficient -1)
        v = min(solvable, key=lambda x: x.name)
        rest = LinearForm.atom(v) - d if d.coeff(v) == 1 else LinearForm.atom(v) + d
        return Literal.make(lit.pos, v, to_term(rest, t.sort))
    if not (isinstance(t, App) and len(t.args) == 2 and t.args[0].sort.is_int and is_base(t.args[0].sort, level)):
        return lit
    a, b = t.args
    sort = a.sort
    if t.fn == "<=" and not is_ground(t):
        shape = le_shape(a, b)
        if shape is not None and shape[0] == "var_le":
            return Literal.atom(lit.pos, le(shape[1], to_term(shape[2], sort)))
        if shape is not None and shape[0] == "le_var":
            return Literal.atom(lit.pos, le(to_term(shape[1], sort), shape[2]))
        if shape is not None and shape[0] == "var_le_var":
            _, x, y, g = shape
            return Literal.atom(lit.pos, le(x, to_term(LinearForm.atom(y) + g, sort)))
    return Literal.atom(lit.pos, App(t.fn, (to_term(normalize_linear(a), sort), to_term(normalize_linear(b), sort)), t.sort))


def shift(clauses, lam: dict, signature: Signature | None = None, level: int = 0) -> ShiftResult:
    """Apply the translation lambda and rename every array constant to a fresh copy."""
    clauses = list(clauses)
    arrays = {s.args[0].fn for c in clauses for s in _selects(c, level)}
    arrays |= {
        n for c in clauses for l in c if is_equational_array(l, level) for n in (l.left.fn, l.right.fn)
    }
    taken = set(signature.functions) if signature is not None else set()
    taken |= arrays
    renaming = _fresh_array_names(arrays, taken)
    sig = signature.copy() if signature is not None else None
    if sig is not None:
        for old, new in renaming.items():
            sig.functions[new] = sig.functions[old]

    def lam_of(name: str) -> LinearForm:
        return lam.get(name, LinearForm())

    def rewrite(t: Term) -> Term:
        if isinstance(t, Var):
            return t
        args = tuple(rewrite(a) for a in t.args)
        if _is_select(t, level):
            arr, idx = t.args
            new_idx = to_term(normalize_linear(idx) - lam_of(arr.fn), idx.sort)
            return App(t.fn, (App(renaming[arr.fn], (), arr.sort), new_idx), t.sort)
        if _is_array_const(t, level) and t.fn in renaming:
            return App(renaming[t.fn], (), t.sort)
        return App(t.fn, args, t.sort)

    out = []
    for clause in clauses:
        delta: dict[Var, Term] = {}
        for sel in _selects(clause, level):
            arr, idx = sel.args
            if isinstance(idx, Var) and idx not in delta:
                lf = LinearForm.atom(idx) + lam_of(arr.fn)
                if lf != LinearForm.atom(idx):
                    delta[idx] = to_term(lf, idx.sort)
        shifted = apply(delta, clause)
        lits = []
        for lit in shifted:
            if lit.is_equational:
                lit = Literal.make(lit.pos, rewrite(lit.left), rewrite(lit.right))
            else:
                lit = Literal.atom(lit.pos, rewrite(lit.left))
            lits.append(_canonical_index_literal(lit, level))
        out.append(Clause.of(lits))
    return ShiftResult(out, renaming, sig)


def lambda_text(lam: dict, sort) -> dict[str, str]:
    return {n: str(to_term(lf, sort)) for n, lf in sorted(lam.items(), key=lambda kv: kv[0])}


__all__ = ["shiftability_check", "shift", "ShiftResult", "lambda_text"]
