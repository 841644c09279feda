"""Deciding ground clause sets.

Three routes: a native bounded model finder (exhaustive inside an integer
window), an SMT-LIB2 emitter, and a client running an external solver on
the emitted script.  A bounded search that finds no model reports
``unsat-within-bounds``; it never claims plain unsatisfiability.
"""
from __future__ import annotations

import os
import re
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field

from .arith import ARITH_FUNS, eqmod_modulus, is_eqmod
from .errors import NestInstError
from .terms import (
    App,
    Clause,
    Literal,
    Term,
    Var,
    is_chi,
    is_diamond,
    numeral_value,
    render_term,
    sorted_clauses,
    subterms,
    term_key,
)

SAT = "sat"
UNSAT_WITHIN_BOUNDS = "unsat-within-bounds"
UNSAT_EXTERNAL = "unsat-external"
UNKNOWN = "unknown"

DEFAULT_NODE_LIMIT = 3_000_000
SOLVER_ENV = "NESTINST_SOLVER"


class _Unassigned(Exception):
    pass


@dataclass
class GroundProblem:
    """A ground clause set plus the side information the backends need."""

    clauses: list
    aux: list = field(default_factory=list)  # chi axioms, kept apart for reporting
    membership: dict = field(default_factory=dict)  # sort name -> MembershipFragment
    modulus: int = 1
    bound_count: int = 0

    def __post_init__(self):
        self.clauses = sorted_clauses(self.clauses)
        self.aux = sorted_clauses(self.aux)
        for c in self.clauses + self.aux:
            for lit in c:
                for side in (lit.left, lit.right):
                    if any(isinstance(s, Var) for s in subterms(side)):
                        raise NestInstError(f"ground problem contains a variable: {c}")

    def all_clauses(self) -> list:
        return self.clauses + self.aux

    def numerals(self) -> list[int]:
        out = set()
        for c in self.all_clauses():
            for lit in c:
                for side in (lit.left, lit.right):
                    for s in subterms(side):
                        k = numeral_value(s)
                        if k is not None:
                            out.add(k)
        return sorted(out)

    def default_window(self) -> tuple[int, int]:
        nums = self.numerals() or [0]
        m = max(1, self.modulus)
        lo = min(0, min(nums)) - m
        hi = max(nums) + (self.bound_count + 2) * m
        return lo, hi


@dataclass
class Model:
    """Values of the uninterpreted symbols; `table` is keyed by (symbol, sort, argument values)."""

    table: dict = field(default_factory=dict)
    chi: dict = field(default_factory=dict)  # chi term -> int

    def constants(self) -> dict:
        out = {}
        for (fn, _sort, args), v in sorted(self.table.items(), key=lambda kv: repr(kv[0])):
            if not args:
                out[fn] = v
        for t, v in self.chi.items():
            out[render_term(t) + ":" + t.sort.name] = v
        return out

    def describe(self) -> dict:
        out = {}
        for (fn, _sort, args), v in sorted(self.table.items(), key=lambda kv: repr(kv[0])):
            key = fn if not args else f"{fn}({','.join(str(_show(a)) for a in args)})"
            out[key] = _show(v)
        for t, v in sorted(self.chi.items(), key=lambda kv: term_key(kv[0])):
            out[f"chi[{t.sort.name}]"] = v
        return out


def _show(v) -> object:
    if isinstance(v, (App, Var)):
        return render_term(v)
    if isinstance(v, bool):
        return v
    if isinstance(v, int):
        return v
    return str(v)


@dataclass
class Verdict:
    status: str
    model: Model | None = None
    window: tuple | None = None
    reason: str = ""

    @property
    def exit_code(self) -> int:
        return {SAT: 0, UNSAT_WITHIN_BOUNDS: 1, UNSAT_EXTERNAL: 1}.get(self.status, 2)


# -- evaluation ----------------------------------------------------------------------


class Evaluator:
    def __init__(self, membership: dict | None = None, model: Model | None = None):
        self.membership = membership or {}
        self.model = model if model is not None else Model()
        self._predicates = {}
        for f in self.membership.values():
            for name, auto in f.predicates.items():
                self._predicates[(name, f.sort.name)] = auto

    def is_constructor(self, t: App) -> bool:
        f = self.membership.get(t.sort.name)
        return f is not None and t.fn in f.sigma

    def membership_predicate(self, t: App):
        if len(t.args) != 1:
            return None
        return self._predicates.get((t.fn, t.args[0].sort.name))

    def key(self, t: App) -> tuple:
        return (t.fn, t.sort.name, tuple(self.value(a) for a in t.args))

    def value(self, t: Term):
        if isinstance(t, Var):
            raise NestInstError(f"cannot evaluate variable {t}")
        fn, args = t.fn, t.args
        if not args:
            k = numeral_value(t)
            if k is not None:
                return k
            if fn == "true":
                return True
            if is_chi(t):
                try:
                    return self.model.chi[t]
                except KeyError:
                    raise _Unassigned(t) from None
        if t.sort.is_int and fn in ARITH_FUNS:
            vs = [self.value(a) for a in args]
            if fn == "+":
                return vs[0] + vs[1]
            if fn == "-":
                return vs[0] - vs[1]
            if fn == "neg":
                return -vs[0]
            if fn == "s":
                return vs[0] + 1
            return vs[0] - 1
        if len(args) == 2 and args[0].sort.is_int and (fn in ("<=", "<") or is_eqmod(fn)):
            x, y = self.value(args[0]), self.value(args[1])
            if fn == "<=":
                return x <= y
            if fn == "<":
                return x < y
            return (x - y) % eqmod_modulus(fn) == 0
        if self.is_constructor(t):
            return App(fn, tuple(self.value(a) for a in args), t.sort)
        auto = self.membership_predicate(t)
        if auto is not None:
            return auto.accepts(self.value(args[0]))
        k = self.key(t)
        try:
            return self.model.table[k]
        except KeyError:
            raise _Unassigned(t) from None

    def literal(self, lit: Literal) -> bool:
        if not lit.is_equational:
            v = bool(self.value(lit.left))
        else:
            v = self.value(lit.left) == self.value(lit.right)
        return v if lit.pos else not v

    def clause(self, clause: Clause) -> bool:
        return any(self.literal(l) for l in clause)


def evaluate_clause(model: Model, clause: Clause, membership: dict | None = None) -> bool:
    """Truth of a ground clause in a model (raises if a symbol has no value)."""
    try:
        return Evaluator(membership, model).clause(clause)
    except _Unassigned as e:
        raise NestInstError(f"model has no value for {e.args[0]}") from None


# -- bounded model search --------------------------------------------------------------------


def _chi_axiom(clause: Clause):
    """(lhs, chi) when the clause is a unit t < chi, else None."""
    if len(clause) != 1:
        return None
    (lit,) = clause.lits
    t = lit.left
    if lit.pos and not lit.is_equational and isinstance(t, App) and t.fn == "<" and is_chi(t.args[1]):
        return t.args[0], t.args[1]
    return None


_CONST = object()


class _Search:
    """Depth-first assignment of slots (uninterpreted ground terms, chi, booleans).

    Terms are compiled to closures over the list of current slot values;
    a clause is checked as soon as its last slot is assigned.
    """

    def __init__(self, problem: GroundProblem, window, free_domain, node_limit):
        self.problem = problem
        self.lo, self.hi = window
        self.node_limit = node_limit
        self.nodes = 0
        self.ev = Evaluator(problem.membership)
        self.model = self.ev.model
        clauses = problem.all_clauses()
        self.chi_lhs: dict[Term, list[Term]] = {}
        for c in clauses:
            ax = _chi_axiom(c)
            if ax is not None:
                self.chi_lhs.setdefault(ax[1], []).append(ax[0])
        self.slots: list[Term] = []
        self.index: dict[Term, int] = {}
        for c in sorted(clauses, key=lambda c: (len(c), c.key())):
            for lit in c:
                for side in (lit.left, lit.right):
                    self._add_slots(side)
        self.free_domain = free_domain or {}
        self._exprs: dict[Term, str] = {}
        self._consts: list = []
        self.slot_args = [
            self._function("(" + "".join(self._expr(a) + ", " for a in t.args) + ")") for t in self.slots
        ]
        self.chi_bounds = {}
        for t in self.slots:
            if is_chi(t):
                lhs = [self._expr(x) for x in self.chi_lhs.get(t, ())]
                self.chi_bounds[self.index[t]] = self._function(f"max([{', '.join(lhs)}], default=None)")
        pending: list[list[str]] = [[] for _ in self.slots]
        self.upfront: list[Clause] = []
        for c in clauses:
            deps = set()
            for lit in c:
                for side in (lit.left, lit.right):
                    deps.update(self._deps(side))
            if deps:
                pending[max(deps)].append(self._clause_expr(c))
            else:
                self.upfront.append(c)
        self.check_at = [self._function(" and ".join(p)) if p else None for p in pending]

    def _interpreted(self, t: App) -> bool:
        fn, args = t.fn, t.args
        if not args and (numeral_value(t) is not None or fn == "true"):
            return True
        if t.sort.is_int and fn in ARITH_FUNS:
            return True
        if len(args) == 2 and args[0].sort.is_int and (fn in ("<=", "<") or is_eqmod(fn)):
            return True
        return self.ev.is_constructor(t) or self.ev.membership_predicate(t) is not None

    def _add_slots(self, t: Term) -> None:
        if t in self.index:
            return
        if is_chi(t):
            for lhs in self.chi_lhs.get(t, ()):
                if not any(s == t for s in subterms(lhs)):
                    self._add_slots(lhs)
            self.index[t] = len(self.slots)
            self.slots.append(t)
            return
        for a in t.args:
            self._add_slots(a)
        if not self._interpreted(t):
            if t.sort.is_real:
                raise NestInstError("real-valued symbols are not supported by the bounded search")
            self.index[t] = len(self.slots)
            self.slots.append(t)

    def _deps(self, t: Term):
        if t in self.index:
            yield self.index[t]
        for a in t.args:
            yield from self._deps(a)

    # -- compilation: terms become Python expressions over the slot-value list `c`

    def _const(self, v) -> str:
        if isinstance(v, bool) or isinstance(v, int):
            return repr(v)
        self._consts.append(v)
        return f"K[{len(self._consts) - 1}]"

    def _expr(self, t: Term) -> str:
        got = self._exprs.get(t)
        if got is None:
            got = self._exprs[t] = self._build(t)
        return got

    def _build(self, t: Term) -> str:
        if t in self.index:
            return f"c[{self.index[t]}]"
        fn, args = t.fn, t.args
        if not any(s in self.index for s in subterms(t)):
            return self._const(self.ev.value(t))
        xs = [self._expr(a) for a in args]
        if t.sort.is_int and fn in ARITH_FUNS:
            if fn in ("+", "-"):
                return f"({xs[0]} {fn} {xs[1]})"
            if fn == "neg":
                return f"(-{xs[0]})"
            return f"({xs[0]} {'+' if fn == 's' else '-'} 1)"
        if len(args) == 2 and args[0].sort.is_int and (fn in ("<=", "<") or is_eqmod(fn)):
            if is_eqmod(fn):
                return f"(({xs[0]} - {xs[1]}) % {eqmod_modulus(fn)} == 0)"
            return f"({xs[0]} {fn} {xs[1]})"
        auto = self.ev.membership_predicate(t)
        if auto is not None:
            return f"{self._const(auto)}.accepts({xs[0]})"
        raise NestInstError(f"cannot compile {t}")  # pragma: no cover - slots cover the rest

    def _clause_expr(self, clause: Clause) -> str:
        parts = []
        for lit in clause:
            if lit.is_equational:
                op = "==" if lit.pos else "!="
                parts.append(f"({self._expr(lit.left)} {op} {self._expr(lit.right)})")
            else:
                e = self._expr(lit.left)
                parts.append(e if lit.pos else f"(not {e})")
        return "(" + " or ".join(parts) + ")" if parts else "False"

    def _function(self, body: str):
        return eval(f"lambda c: {body}", {"K": self._consts})  # noqa: S307 - generated from our own terms

    def _domain(self, i: int, t: Term, cur: list, used_free: dict):
        if is_chi(t):
            top = self.chi_bounds[i](cur)
            base = self.hi if top is None else max(self.hi, top)
            m = max(1, self.problem.modulus)
            return range(base + 1, base + 1 + m)
        if t.sort.name == "bool":
            return (False, True)
        if t.sort.is_int:
            return range(self.lo, self.hi + 1)
        if t.sort.name in self.problem.membership:
            raise NestInstError(f"uninterpreted symbol {t} of a term-algebra sort")
        size = self.free_domain.get(t.sort.name, 1)
        # symmetry breaking: a new element is at most one above the largest used so far
        bound = min(size, used_free.get(t.sort.name, -1) + 2)
        return range(bound)

    def run(self) -> Verdict:
        for c in self.upfront:
            if not self.ev.clause(c):
                return Verdict(UNSAT_WITHIN_BOUNDS, window=(self.lo, self.hi), reason=f"clause {c} is false")
        cur = [None] * len(self.slots)
        try:
            found = self._dfs(0, cur, {})
        except _NodeLimit:
            return Verdict(UNKNOWN, window=(self.lo, self.hi), reason="bound")
        if found:
            model = Model(dict(self.model.table), dict(self.model.chi))
            for c in self.problem.all_clauses():
                if not evaluate_clause(model, c, self.problem.membership):
                    raise AssertionError(f"bounded search produced a model violating {c}")
            return Verdict(SAT, model=model, window=(self.lo, self.hi))
        return Verdict(UNSAT_WITHIN_BOUNDS, window=(self.lo, self.hi))

    def _ok(self, i: int, cur: list) -> bool:
        check = self.check_at[i]
        return check is None or check(cur)

    def _dfs(self, i: int, cur: list, used_free: dict) -> bool:
        if i == len(self.slots):
            return True
        self.nodes += 1
        if self.nodes > self.node_limit:
            raise _NodeLimit
        t = self.slots[i]
        if is_chi(t):
            for v in self._domain(i, t, cur, used_free):
                cur[i] = self.model.chi[t] = v
                if self._ok(i, cur) and self._dfs(i + 1, cur, used_free):
                    return True
            del self.model.chi[t]
            return False
        key = (t.fn, t.sort.name, self.slot_args[i](cur))
        table = self.model.table
        if key in table:
            cur[i] = table[key]
            return self._ok(i, cur) and self._dfs(i + 1, cur, used_free)
        free = not (t.sort.name == "bool" or t.sort.is_int)
        for v in self._domain(i, t, cur, used_free):
            cur[i] = table[key] = v
            nxt = used_free
            if free and v > used_free.get(t.sort.name, -1):
                nxt = dict(used_free)
                nxt[t.sort.name] = v
            if self._ok(i, cur) and self._dfs(i + 1, cur, nxt):
                return True
        del table[key]
        return False


class _NodeLimit(Exception):
    pass


def free_sort_sizes(problem: GroundProblem) -> dict:
    """Distinct ground terms per uninterpreted (non-integer, non-boolean) sort."""
    seen: dict[str, set] = {}
    for c in problem.all_clauses():
        for lit in c:
            for side in (lit.left, lit.right):
                for s in subterms(side):
                    if isinstance(s, App) and not s.sort.is_int and s.sort.name != "bool":
                        if s.sort.name not in problem.membership:
                            seen.setdefault(s.sort.name, set()).add(s)
    return {k: max(1, len(v)) for k, v in seen.items()}


def bounded_model_search(
    problem: GroundProblem,
    window: tuple[int, int] | None = None,
    free_domain: int | dict | None = None,
    node_limit: int = DEFAULT_NODE_LIMIT,
) -> Verdict:
    """Exhaustive model search with integers in `window` and finite free-sort domains."""
    window = window or problem.default_window()
    if window[0] > window[1]:
        raise ValueError(f"empty window {window}")
    sizes = free_sort_sizes(problem)
    if isinstance(free_domain, int):
        sizes = {k: free_domain for k in sizes}
    elif isinstance(free_domain, dict):
        sizes.update(free_domain)
    try:
        search = _Search(problem, window, sizes, node_limit)
    except NestInstError as e:
        return Verdict(UNKNOWN, window=window, reason=str(e))
    return search.run()


# -- SMT-LIB2 ------------------------------------------------------------------------------------

_SIMPLE = re.compile(r"^[A-Za-z~!@%^&*_+=<>.?/-][A-Za-z0-9~!@%^&*_+=<>.?/-]*$")
_RESERVED_WORDS = {"and", "or", "not", "distinct", "ite", "let", "true", "false", "mod", "div", "abs", "par", "_", "!", "as"}


def _quote(name: str) -> str:
    if _SIMPLE.match(name) and name not in _RESERVED_WORDS:
        return name
    return "|" + name.replace("|", "/").replace("\\", "/") + "|"


class _SmtNames:
    def __init__(self, problem: GroundProblem):
        self.problem = problem
        self.decls: dict[tuple, str] = {}
        self.sorts: dict[str, str] = {}
        self.members: dict[Term, str] = {}
        self.used: set[str] = set()

    def reserved_name(self, t: App) -> str:
        kind = "chi" if is_chi(t) else "dia" if is_diamond(t) else "bot"
        return f"{kind}_{t.fn.split('.', 1)[1]}"

    def sort(self, s) -> str:
        if s.is_int:
            return "Int"
        if s.is_real:
            return "Real"
        if s.name == "bool":
            return "Bool"
        return self.sorts.setdefault(s.name, _quote(s.name))

    def symbol(self, t: App) -> str:
        sig = (t.fn, tuple(self.sort(a.sort) for a in t.args), self.sort(t.sort))
        name = self.decls.get(sig)
        if name is None:
            base = self.reserved_name(t) if t.fn.startswith("$") else t.fn
            name = base
            k = 1
            while name in self.used:
                name = f"{base}_{k}"
                k += 1
            self.used.add(name)
            self.decls[sig] = name
        return _quote(name)


def _smt_term(t: Term, names: _SmtNames, ev: Evaluator) -> str:
    fn, args = t.fn, t.args
    if not args:
        k = numeral_value(t)
        if k is not None:
            return f"{k}.0" if t.sort.is_real else str(k)
        if fn == "true":
            return "true"
    if (t.sort.is_int or t.sort.is_real) and fn in ARITH_FUNS:
        xs = [_smt_term(a, names, ev) for a in args]
        one = "1.0" if t.sort.is_real else "1"
        if fn == "+":
            return f"(+ {xs[0]} {xs[1]})"
        if fn == "-":
            return f"(- {xs[0]} {xs[1]})"
        if fn == "neg":
            return f"(- {xs[0]})"
        if fn == "s":
            return f"(+ {xs[0]} {one})"
        return f"(- {xs[0]} {one})"
    if len(args) == 2 and (args[0].sort.is_int or args[0].sort.is_real) and (fn in ("<=", "<") or is_eqmod(fn)):
        x, y = (_smt_term(a, names, ev) for a in args)
        if is_eqmod(fn):
            return f"(= (mod (- {x} {y}) {eqmod_modulus(fn)}) 0)"
        return f"({fn} {x} {y})"
    if ev.is_constructor(t):
        if t not in names.members:
            names.members[t] = f"m!{render_term(t)}"
        return _quote(names.members[t])
    auto = ev.membership_predicate(t)
    if auto is not None:
        return "true" if auto.accepts(args[0]) else "false"
    sym = names.symbol(t)
    if not args:
        return sym
    return f"({sym} {' '.join(_smt_term(a, names, ev) for a in args)})"


def _smt_literal(lit: Literal, names: _SmtNames, ev: Evaluator) -> str:
    if not lit.is_equational:
        atom = _smt_term(lit.left, names, ev)
    elif ev.is_constructor(lit.left) and ev.is_constructor(lit.right):
        atom = "true" if lit.left == lit.right else "false"
    else:
        atom = f"(= {_smt_term(lit.left, names, ev)} {_smt_term(lit.right, names, ev)})"
    return atom if lit.pos else f"(not {atom})"


def _smt_clause(c: Clause, names: _SmtNames, ev: Evaluator) -> str:
    lits = [_smt_literal(l, names, ev) for l in c]
    if not lits:
        return "false"
    if len(lits) == 1:
        return lits[0]
    return f"(or {' '.join(lits)})"


def emit_smtlib(problem: GroundProblem) -> str:
    """A deterministic quantifier-free SMT-LIB2 script for the problem."""
    ev = Evaluator(problem.membership)
    names = _SmtNames(problem)
    body = [f"(assert {_smt_clause(c, names, ev)})" for c in problem.clauses]
    if problem.aux:
        body.append("; chi axioms")
        body.extend(f"(assert {_smt_clause(c, names, ev)})" for c in problem.aux)
    reals = any(s == "Real" for sig in names.decls for s in sig[1] + (sig[2],))
    lines = [f"(set-logic {'QF_UFLIRA' if reals else 'QF_UFLIA'})"]
    for sname in sorted(set(names.sorts.values()) | ({_quote(s) for s in problem.membership} if names.members else set())):
        lines.append(f"(declare-sort {sname} 0)")
    for sig, name in sorted(names.decls.items(), key=lambda kv: kv[1]):
        _, args, res = sig
        lines.append(f"(declare-fun {_quote(name)} ({' '.join(args)}) {res})")
    by_sort: dict[str, list[str]] = {}
    for t, name in sorted(names.members.items(), key=lambda kv: kv[1]):
        lines.append(f"(declare-fun {_quote(name)} () {_quote(t.sort.name)})")
        by_sort.setdefault(t.sort.name, []).append(_quote(name))
    for sname in sorted(by_sort):
        if len(by_sort[sname]) > 1:
            lines.append(f"(assert (distinct {' '.join(by_sort[sname])}))")
    lines.extend(body)
    lines.append("(check-sat)")
    lines.append("(exit)")
    return "\n".join(lines) + "\n"


def default_solver_command() -> str | None:
    return os.environ.get(SOLVER_ENV) or None


def external_check(problem: GroundProblem, solver_command: str | None = None, timeout: float = 60.0) -> Verdict:
    """Run an SMT solver on the emitted script; the script path is appended to the command."""
    command = solver_command or default_solver_command()
    if not command:
        return Verdict(UNKNOWN, reason=f"no solver configured (set {SOLVER_ENV})")
    script = emit_smtlib(problem)
    with tempfile.NamedTemporaryFile("w", suffix=".smt2", delete=False) as fh:
        fh.write(script)
        path = fh.name
    try:
        proc = subprocess.run(shlex.split(command) + [path], capture_output=True, text=True, timeout=timeout)
    except subprocess.TimeoutExpired:
        return Verdict(UNKNOWN, reason=f"solver timed out after {timeout}s")
    except OSError as e:
        return Verdict(UNKNOWN, reason=f"could not run solver: {e}")
    finally:
        os.unlink(path)
    first = next((ln.strip() for ln in proc.stdout.splitlines() if ln.strip()), "")
    if first == "unsat":
        return Verdict(UNSAT_EXTERNAL)
    if first == "sat":
        return Verdict(SAT, reason="model not reconstructed from external solver")
    err = proc.stderr.strip().splitlines()
    detail = first or (err[0] if err else f"exit status {proc.returncode}")
    return Verdict(UNKNOWN, reason=f"solver answered {detail!r}")


__all__ = [
    "GroundProblem",
    "Model",
    "Verdict",
    "Evaluator",
    "evaluate_clause",
    "bounded_model_search",
    "emit_smtlib",
    "external_check",
    "free_sort_sizes",
    "SAT",
    "UNSAT_WITHIN_BOUNDS",
    "UNSAT_EXTERNAL",
    "UNKNOWN",
]
