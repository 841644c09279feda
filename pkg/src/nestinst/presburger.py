"""Uniform instantiation for the Presburger index fragment.

Non-ground literals over a base integer sort must have one of the shapes
``x </= t``, ``t </= x``, ``x </= y`` or ``x !=_k t`` with t ground.  Every
variable is then instantiated over the pool ``{t - l | t in B_S, 0 <= l < m}``
where B_S holds chi and the upper bounds t of atoms ``x <= t``, and m is the
lcm of the moduli k.  The fresh constant chi is constrained by
``t + m < chi`` for every bound term t.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .arith import eqmod_modulus, is_eqmod, le_shape, lt, normalize_linear, to_term
from .errors import FragmentViolation
from .outcome import InstantiationOutcome
from .terms import (
    App,
    Clause,
    Literal,
    Sort,
    Term,
    Var,
    apply,
    cartesian,
    chi,
    is_base,
    is_chi,
    is_ground,
    subterms,
    term_key,
    variables,
)


@dataclass(frozen=True)
class PresburgerFragment:
    """Bound terms T and modulus m per base integer sort of one level."""

    T: dict  # sort name -> tuple of ground terms
    m: int = 1
    sorts: tuple = ()  # Sort objects seen at this level
    level: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("modulus must be positive")
        for ts in self.T.values():
            if any(any(is_chi(s) for s in subterms(t)) for t in ts):
                raise ValueError("chi may not occur in the bound terms")


@dataclass(frozen=True)
class GroundPool:
    B: dict  # sort name -> tuple of terms
    G: dict  # sort name -> tuple of terms


def _int_base(sort: Sort, level: int) -> bool:
    return sort.is_int and is_base(sort, level)


def _atom_args(lit: Literal, level: int):
    """(fn, left, right) of an integer comparison of this level, else None."""
    t = lit.left
    if lit.is_equational:
        if _int_base(t.sort, level):
            return ("=", lit.left, lit.right)
        return None
    if isinstance(t, App) and len(t.args) == 2 and _int_base(t.args[0].sort, level):
        if t.fn in ("<=", "<") or is_eqmod(t.fn):
            return (t.fn, t.args[0], t.args[1])
    return None


def _classify(lit: Literal, level: int):
    """Return (kind, data) for a non-ground literal, raising on violations.

    kind is "upper" (x <= t atom, data t), "lower" (t <= x atom, data t),
    "vars" (x <= y atom) or "mod" (data (k, t)).
    """
    parts = _atom_args(lit, level)
    if parts is None:
        raise FragmentViolation("not an integer literal of this level", lit)
    fn, a, b = parts
    if fn == "=":
        raise FragmentViolation("equations with variables are outside the fragment; use two </= literals", lit)
    if fn == "<":
        raise FragmentViolation("strict comparison with variables; normalize to <= first", lit)
    if is_eqmod(fn):
        if lit.pos:
            raise FragmentViolation("positive congruence with a variable is outside the fragment", lit)
        k = eqmod_modulus(fn)
        va, vb = isinstance(a, Var), isinstance(b, Var)
        if va and is_ground(b):
            return "mod", (k, b)
        if vb and is_ground(a):
            return "mod", (k, a)
        raise FragmentViolation("congruence must relate a variable and a ground term", lit)
    if lit.pos:
        raise FragmentViolation("positive comparison with a variable is outside the fragment", lit)
    if isinstance(a, Var) and isinstance(b, Var):
        return "vars", None
    if isinstance(a, Var) and is_ground(b):
        return "upper", b
    if isinstance(b, Var) and is_ground(a):
        return "lower", a
    shape = le_shape(a, b)
    raise FragmentViolation(
        "comparison must be x </= t, t </= x or x </= y" + ("" if shape is None else f" (shape {shape[0]})"),
        lit,
    )


def _base_literals(clauses, level: int):
    for clause in clauses:
        for lit in clause:
            parts = _atom_args(lit, level)
            if parts is not None:
                yield lit, parts
            elif any(isinstance(v, Var) and _int_base(v.sort, level) for v in variables(lit)):
                raise FragmentViolation("integer variable outside an integer literal", lit)


def validate_fragment(clauses, level: int = 0) -> PresburgerFragment:
    """Check the fragment shapes; infer T (per sort) and m."""
    T: dict[str, dict] = {}
    sorts: dict[str, Sort] = {}
    moduli = []
    for clause in clauses:
        for v in variables(clause):
            if _int_base(v.sort, level):
                sorts.setdefault(v.sort.name, v.sort)
    for lit, (fn, a, b) in _base_literals(clauses, level):
        sorts.setdefault(a.sort.name, a.sort)
        if is_eqmod(fn):
            moduli.append(eqmod_modulus(fn))
        if is_ground(lit):
            continue
        kind, data = _classify(lit, level)
        bucket = T.setdefault(a.sort.name, {})
        if kind in ("upper", "lower"):
            bucket.setdefault(data, None)
        elif kind == "mod":
            bucket.setdefault(data[1], None)
    m = 1
    for k in moduli:
        m = math.lcm(m, k)
    T_sorted = {s: tuple(sorted(ts, key=term_key)) for s, ts in sorted(T.items())}
    return PresburgerFragment(T_sorted, m, tuple(sorts[n] for n in sorted(sorts)), level)


def compute_pool(clauses, fragment: PresburgerFragment, no_chi: bool = False, extra_sorts=()) -> GroundPool:
    """B_S and G = {t - l | t in B_S, 0 <= l < m} for every base integer sort."""
    level = fragment.level
    uppers: dict[str, dict] = {s.name: {} for s in fragment.sorts}
    sorts = {s.name: s for s in fragment.sorts}
    for s in extra_sorts:
        sorts.setdefault(s.name, s)
        uppers.setdefault(s.name, {})
    for lit, (fn, a, b) in _base_literals(clauses, level):
        if fn == "<=" and isinstance(a, Var) and is_ground(b):
            uppers.setdefault(a.sort.name, {})[b] = None
            sorts.setdefault(a.sort.name, a.sort)
    B, G = {}, {}
    for name in sorted(uppers):
        sort = sorts[name]
        bounds = sorted(uppers[name], key=term_key)
        b_terms = bounds if no_chi and bounds else [chi(sort)] + bounds
        B[name] = tuple(b_terms)
        pool: dict[Term, None] = {}
        for t in b_terms:
            base = normalize_linear(t)
            for l in range(fragment.m):
                pool.setdefault(to_term(base.shift(-l), sort), None)
        G[name] = tuple(sorted(pool, key=term_key))
    return GroundPool(B, G)


def chi_axioms(fragment: PresburgerFragment, pool: GroundPool | None = None) -> list[Clause]:
    """One unit clause t + m < chi per bound term t, for sorts whose pool uses chi."""
    out = []
    for sort in fragment.sorts:
        c = chi(sort)
        if pool is not None and c not in pool.B.get(sort.name, ()):
            continue
        for t in fragment.T.get(sort.name, ()):
            bound = to_term(normalize_linear(t).shift(fragment.m), sort)
            out.append(Clause.of([Literal.atom(True, lt(bound, c))]))
    return out


def instantiate(clauses, pools: dict, level: int, outcome: InstantiationOutcome, origins=None) -> None:
    """inst(S, G): all maps from each clause's base variables into the pool."""
    for idx, clause in enumerate(clauses):
        origin = idx if origins is None else origins[idx]
        vs = [v for v in variables(clause) if is_base(v.sort, level)]
        choices = [pools[v.sort.name] for v in vs]
        for combo in cartesian(choices):
            subst = dict(zip(vs, combo))
            outcome.add(apply(subst, clause), origin, subst)


def theta_Z(clauses, level: int = 0, no_chi: bool = False) -> InstantiationOutcome:
    clauses = list(clauses)
    fragment = validate_fragment(clauses, level)
    pool = compute_pool(clauses, fragment, no_chi)
    out = InstantiationOutcome(pool=dict(pool.G), aux_axioms=chi_axioms(fragment, pool))
    instantiate(clauses, pool.G, level, out)
    return out.finish()


@dataclass(frozen=True)
class PresburgerProcedure:
    """Base procedure interface used by the combiner."""

    no_chi: bool = False
    name: str = "presburger"

    def validate(self, clauses, level: int):
        return validate_fragment(clauses, level)

    def pool(self, clauses, level: int, extra_sorts=()) -> dict:
        fragment = validate_fragment(clauses, level)
        return dict(compute_pool(clauses, fragment, self.no_chi, extra_sorts).G)

    def aux(self, clauses, level: int) -> list[Clause]:
        fragment = validate_fragment(clauses, level)
        return chi_axioms(fragment, compute_pool(clauses, fragment, self.no_chi))

    def modulus(self, clauses, level: int) -> int:
        return validate_fragment(clauses, level).m

    def bounds(self, clauses, level: int) -> dict:
        return compute_pool(clauses, validate_fragment(clauses, level), True).B


__all__ = [
    "PresburgerFragment",
    "GroundPool",
    "validate_fragment",
    "compute_pool",
    "chi_axioms",
    "theta_Z",
    "instantiate",
    "PresburgerProcedure",
]
