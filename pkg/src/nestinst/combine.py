"""Combining a base procedure with a target procedure.

For each clause C = C^B | C^N of the input:

1. base variables of C^N are replaced by per-sort placeholders <>;
2. the target procedure runs on the placeholder-ground target parts;
3. every theta with C^N<> theta among its outputs is recovered by matching,
   and each <> occurrence in theta's range becomes a fresh base variable;
4. all remaining (base) variables range over the base procedure's pool.

A combined procedure is itself a target procedure for an enclosing level.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigurationError, ContractError
from .outcome import InstantiationOutcome
from .target import TargetProcedure
from .terms import (
    App,
    Clause,
    Term,
    Var,
    apply,
    cartesian,
    diamond,
    is_base,
    is_diamond,
    match_clause,
    sorted_clauses,
    term_key,
    variables,
)
from .theory import decompose


@dataclass(frozen=True)
class CombinedProcedure:
    base: object  # PresburgerProcedure or MembershipProcedure
    target: TargetProcedure
    level: int = 0

    @property
    def name(self) -> str:
        return f"{self.base.name}*{self.target.name}"


@dataclass(frozen=True)
class LiftedSubstitution:
    theta: dict
    theta_prime: dict


def diamond_ground(clauses, level: int = 0) -> list[Clause]:
    """Replace every base variable of this level by the placeholder of its sort."""
    out = []
    for c in clauses:
        gamma = {v: diamond(v.sort) for v in variables(c) if is_base(v.sort, level)}
        out.append(apply(gamma, c))
    return out


def _heads(clause: Clause) -> frozenset:
    return frozenset((None if l.is_equational else l.left.fn, l.pos) for l in clause)


def _subst_key(theta: dict) -> tuple:
    return tuple(sorted((v.name, v.sort.name, term_key(t)) for v, t in theta.items()))


def recover_thetas(patterns, outcome: InstantiationOutcome) -> list[list[dict]]:
    """For each pattern, every theta mapping it onto some output instance."""
    by_heads: dict[frozenset, list[Clause]] = {}
    for inst in outcome.instances:
        by_heads.setdefault(_heads(inst), []).append(inst)
    result = []
    for pattern in patterns:
        found: dict[tuple, dict] = {}
        for inst in by_heads.get(_heads(pattern), ()):
            if len(inst) > len(pattern):
                continue
            for theta in match_clause(pattern, inst):
                found.setdefault(_subst_key(theta), theta)
        result.append([found[k] for k in sorted(found)])
    return result


class _FreshBase:
    def __init__(self, taken: set[str]):
        self.taken = set(taken)
        self.n = 0

    def __call__(self, sort) -> Var:
        while True:
            name = f"d{self.n}"
            self.n += 1
            if name not in self.taken:
                self.taken.add(name)
                return Var(name, sort)


def _lift_term(t: Term, fresh: _FreshBase, level: int) -> Term:
    if isinstance(t, Var):
        return t
    if is_diamond(t) and is_base(t.sort, level):
        return fresh(t.sort)
    if not t.args:
        return t
    return App(t.fn, tuple(_lift_term(a, fresh, level) for a in t.args), t.sort)


def lift_theta(theta: dict, taken: set[str], level: int = 0) -> LiftedSubstitution:
    """theta' = theta with each placeholder occurrence replaced by its own fresh variable."""
    fresh = _FreshBase(taken)
    prime = {}
    for v in sorted(theta, key=lambda v: (v.name, v.sort.name)):
        prime[v] = _lift_term(theta[v], fresh, level)
    return LiftedSubstitution(theta, prime)


def _lift_clause(clause: Clause, level: int) -> Clause:
    fresh = _FreshBase({v.name for v in variables(clause)})
    lits = []
    for lit in clause:
        if lit.is_equational:
            lits.append(type(lit).make(lit.pos, _lift_term(lit.left, fresh, level), _lift_term(lit.right, fresh, level)))
        else:
            lits.append(type(lit)(lit.pos, _lift_term(lit.left, fresh, level), lit.right))
    return Clause.of(lits)


def _ground_over(clause: Clause, pools: dict, level: int):
    vs = [v for v in variables(clause) if is_base(v.sort, level)]
    for combo in cartesian([pools[v.sort.name] for v in vs]):
        subst = dict(zip(vs, combo))
        yield apply(subst, clause), subst


def combine(proc: CombinedProcedure, clauses) -> InstantiationOutcome:
    level = proc.level
    clauses = list(clauses)
    parts = [decompose(c, level, k) for k, c in enumerate(clauses)]
    base_parts = [p.base_part for p in parts]
    proc.base.validate(base_parts, level)
    patterns = diamond_ground([p.target_part for p in parts], level)
    target_out = proc.target.apply(sorted_clauses(patterns), level)
    thetas = recover_thetas(patterns, target_out)

    lifted: list[tuple[int, Clause, dict]] = []
    sorts = {}
    for k, clause in enumerate(clauses):
        taken = {v.name for v in variables(clause)}
        for theta in thetas[k]:
            lt = lift_theta(theta, taken, level)
            c1 = apply(lt.theta_prime, clause)
            for v in variables(c1):
                if not is_base(v.sort, level):
                    raise ContractError(
                        f"target procedure {proc.target.name} left variable {v}:{v.sort} in an instance of clause {k}"
                    )
                sorts.setdefault(v.sort.name, v.sort)
            lifted.append((k, c1, lt.theta_prime))

    aux_target = [_lift_clause(c, level) for c in target_out.aux_axioms]
    for c in aux_target:
        for v in variables(c):
            sorts.setdefault(v.sort.name, v.sort)
    pools = proc.base.pool(base_parts, level, tuple(sorts[n] for n in sorted(sorts)))
    out = InstantiationOutcome(pool={f"{n}@{level}": g for n, g in pools.items()}, incomplete=target_out.incomplete)
    for prefix, inner in target_out.pool.items():
        out.pool.setdefault(prefix, inner)
    for k, c1, theta_prime in lifted:
        for inst, sigma in _ground_over(c1, pools, level):
            full = {v: apply(sigma, t) for v, t in theta_prime.items()}
            full.update(sigma)
            out.add(inst, k, full)
    aux = list(proc.base.aux(base_parts, level))
    for c in aux_target:
        aux.extend(inst for inst, _ in _ground_over(c, pools, level))
    out.aux_axioms = sorted(set(aux), key=Clause.key)
    return out.finish()


def as_target_procedure(proc: CombinedProcedure, outer_level: int | None = None) -> TargetProcedure:
    """Wrap a combined procedure so an enclosing level can use it as its target."""
    if outer_level is not None and outer_level >= proc.level:
        raise ConfigurationError(
            f"inner combination at level {proc.level} must be nested strictly below level {outer_level}"
        )

    def run(clauses, level):
        if level >= proc.level:
            raise ConfigurationError(f"combination at level {proc.level} used as target of level {level}")
        return combine(proc, clauses)

    return TargetProcedure(proc.name, run, proc.target.termination)


__all__ = [
    "CombinedProcedure",
    "LiftedSubstitution",
    "diamond_ground",
    "recover_thetas",
    "lift_theta",
    "combine",
    "as_target_procedure",
]
