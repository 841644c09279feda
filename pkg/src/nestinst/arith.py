"""Integer-sort symbols and linear normal forms.

Terms of an integer sort are built from numerals, ``s``, ``p``, ``+``, ``-``
(binary), ``neg`` (unary) and uninterpreted atoms (constants, variables,
applications such as ``select(t,i)``).  `normalize_linear` maps such a term
to a canonical `LinearForm`; two terms are arithmetically equivalent iff
their forms are equal.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import Unsupported
from .terms import BASE, App, Sort, Term, TARGET_BOOL, Var, bool_sort, numeral_value, term_key

ARITH_FUNS = frozenset({"+", "-", "neg", "s", "p"})
COMPARISONS = frozenset({"<=", "<"})


def is_eqmod(fn: str) -> bool:
    return fn.startswith("eqmod.")


def eqmod_modulus(fn: str) -> int:
    return int(fn[len("eqmod."):])


def is_interpreted(fn: str) -> bool:
    return fn in ARITH_FUNS or fn in COMPARISONS or is_eqmod(fn) or fn.isdigit()


def pred_sort(int_sort: Sort) -> Sort:
    """Boolean sort owning comparisons over `int_sort`."""
    if int_sort.kind == BASE:
        return bool_sort(BASE, int_sort.level)
    return TARGET_BOOL


def num(k: int, sort: Sort) -> Term:
    if k >= 0:
        return App(str(k), (), sort)
    return App("neg", (App(str(-k), (), sort),), sort)


def plus(a: Term, b: Term) -> Term:
    return App("+", (a, b), a.sort)


def minus(a: Term, b: Term) -> Term:
    return App("-", (a, b), a.sort)


def le(a: Term, b: Term) -> Term:
    return App("<=", (a, b), pred_sort(a.sort))


def lt(a: Term, b: Term) -> Term:
    return App("<", (a, b), pred_sort(a.sort))


def eqmod(k: int, a: Term, b: Term) -> Term:
    return App(f"eqmod.{k}", (a, b), pred_sort(a.sort))


@dataclass(frozen=True)
class LinearForm:
    """offset + sum(coeff * atom); atoms are non-arithmetic terms."""

    offset: int = 0
    coeffs: tuple = ()

    @classmethod
    def of(cls, coeffs: dict, offset: int = 0) -> "LinearForm":
        items = sorted(((t, c) for t, c in coeffs.items() if c), key=lambda tc: term_key(tc[0]))
        return cls(offset, tuple(items))

    @classmethod
    def atom(cls, t: Term) -> "LinearForm":
        return cls(0, ((t, 1),))

    def as_dict(self) -> dict:
        return dict(self.coeffs)

    def __add__(self, other: "LinearForm") -> "LinearForm":
        d = self.as_dict()
        for t, c in other.coeffs:
            d[t] = d.get(t, 0) + c
        return LinearForm.of(d, self.offset + other.offset)

    def __neg__(self) -> "LinearForm":
        return LinearForm(-self.offset, tuple((t, -c) for t, c in self.coeffs))

    def __sub__(self, other: "LinearForm") -> "LinearForm":
        return self + (-other)

    def shift(self, k: int) -> "LinearForm":
        return LinearForm(self.offset + k, self.coeffs)

    @property
    def is_constant(self) -> bool:
        return not self.coeffs

    def variables(self) -> list:
        return [t for t, _ in self.coeffs if isinstance(t, Var)]

    def without(self, t: Term) -> "LinearForm":
        return LinearForm.of({u: c for u, c in self.coeffs if u != t}, self.offset)

    def coeff(self, t: Term) -> int:
        return self.as_dict().get(t, 0)

    def __str__(self):
        parts = [f"{c}*{t}" for t, c in self.coeffs]
        return " + ".join(parts + [str(self.offset)])


def normalize_linear(t: Term) -> LinearForm:
    """Canonical linear form of an integer-sorted term."""
    if not t.sort.is_int:
        raise Unsupported(f"{t} is not of an integer sort")
    if isinstance(t, Var):
        return LinearForm.atom(t)
    k = numeral_value(t)
    if k is not None:
        return LinearForm(k)
    fn, args = t.fn, t.args
    if fn == "+" and len(args) == 2:
        return normalize_linear(args[0]) + normalize_linear(args[1])
    if fn == "-" and len(args) == 2:
        return normalize_linear(args[0]) - normalize_linear(args[1])
    if fn == "neg" and len(args) == 1:
        return -normalize_linear(args[0])
    if fn == "s" and len(args) == 1:
        return normalize_linear(args[0]).shift(1)
    if fn == "p" and len(args) == 1:
        return normalize_linear(args[0]).shift(-1)
    if fn in ARITH_FUNS:
        raise Unsupported(f"malformed arithmetic term {t}")
    return LinearForm.atom(t)


def to_term(lf: LinearForm, sort: Sort) -> Term:
    """Render a linear form as a term: variables first, then positive atoms,
    then negative atoms, then the numeric offset (a+a, c-a-a, b-1, ...)."""
    vars_first = sorted(lf.coeffs, key=lambda tc: (not isinstance(tc[0], Var), tc[1] < 0, term_key(tc[0])))
    out: Term | None = None
    for t, c in vars_first:
        for _ in range(abs(c)):
            if out is None:
                out = t if c > 0 else App("neg", (t,), sort)
            else:
                out = plus(out, t) if c > 0 else minus(out, t)
    if out is None:
        return num(lf.offset, sort)
    if lf.offset > 0:
        out = plus(out, num(lf.offset, sort))
    elif lf.offset < 0:
        out = minus(out, num(-lf.offset, sort))
    return out


def canonical(t: Term) -> Term:
    return to_term(normalize_linear(t), t.sort)


def le_shape(left: Term, right: Term):
    """Classify the atom left <= right by its variables.

    Returns one of
      ("ground", None, None)
      ("var_le", x, g)         x <= g
      ("le_var", g, x)         g <= x
      ("var_le_var", x, y, g)  x <= y + g
    or None when the atom has another shape (coefficients other than +-1,
    more than two variables, ...).  g is a LinearForm over ground atoms.
    """
    diff = normalize_linear(left) - normalize_linear(right)  # diff <= 0
    if any(not isinstance(t, Var) and not t._ground for t, _ in diff.coeffs):
        return None
    vs = diff.variables()
    if not vs:
        return ("ground", None, None)
    if len(vs) == 1:
        x = vs[0]
        c = diff.coeff(x)
        rest = diff.without(x)
        if c == 1:
            return ("var_le", x, -rest)
        if c == -1:
            return ("le_var", rest, x)
        return None
    if len(vs) == 2:
        c0, c1 = diff.coeff(vs[0]), diff.coeff(vs[1])
        if {c0, c1} != {1, -1}:
            return None
        x, y = (vs[0], vs[1]) if c0 == 1 else (vs[1], vs[0])
        rest = diff.without(x).without(y)
        return ("var_le_var", x, y, -rest)
    return None
