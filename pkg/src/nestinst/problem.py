"""Problem files: an s-expression format, its parser and printer.

    (problem
      (sorts (nat base int) (elem target))
      (functions (a () nat) (c () elem) (p (nat elem) bool))
      (theory (base presburger) (target fol))
      (options (window 6))
      (clauses
        (forall ((x nat) (y elem)) (or (not (<= x a)) (p x y)))
        (p a c)))

Sort entries take the flags ``base``/``target``, ``int``/``real``,
``level k`` and ``copy-of s``.  A nested target is written
``(nested (base ...) (target ...))`` and lives one level deeper.  Membership
bases list their predicates as tree automata:

    (base (membership (even tree (states q0 q1) (final q0)
                            (rules (z -> q0) (s q0 -> q1) (s q1 -> q0)))))

Numerals take the sort of the term they are compared or added to.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .arith import eqmod, le, lt, num
from .errors import ParseError
from .membership import MembershipFragment, TreeAutomaton
from .signature import Signature
from .terms import (
    BASE,
    BOTTOM,
    CHI,
    DIAMOND,
    TARGET,
    TARGET_BOOL,
    App,
    Clause,
    Literal,
    Sort,
    Term,
    Var,
    bool_sort,
    variables,
)

TARGET_KINDS = ("fol", "ground-arrays")
OPTION_KEYS = {
    "backend": str,
    "window": int,
    "free-domain": int,
    "max-rounds": int,
    "no-chi": bool,
    "shift": bool,
    "copy-elements": str,
}
_RESERVED_FUNS = {"<=", "<", ">=", ">", "=", "not", "or", "forall", "eqmod", "+", "-", "true", "bool", "neg"}


# -- reader ------------------------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    text: str
    line: int
    col: int


@dataclass(frozen=True)
class SList:
    items: tuple
    line: int
    col: int


_TOKEN = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s();]+")


def read_sexprs(text: str) -> list:
    stack: list[list] = [[]]
    opens: list[tuple[int, int]] = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:  # pragma: no cover - the pattern matches every character
            raise ParseError("unexpected character", line, col)
        tok = m.group(0)
        if tok == "(":
            stack.append([])
            opens.append((line, col))
        elif tok == ")":
            if not opens:
                raise ParseError("unbalanced ')'", line, col)
            items = stack.pop()
            l0, c0 = opens.pop()
            stack[-1].append(SList(tuple(items), l0, c0))
        elif not tok[0].isspace() and tok[0] != ";":
            stack[-1].append(Atom(tok, line, col))
        nl = tok.count("\n")
        if nl:
            line += nl
            col = len(tok) - tok.rfind("\n")
        else:
            col += len(tok)
        pos = m.end()
    if opens:
        l0, c0 = opens[-1]
        raise ParseError("unclosed '('", l0, c0)
    return stack[0]


def _fail(node, message: str):
    raise ParseError(message, node.line, node.col)


def _head(node) -> str | None:
    if isinstance(node, SList) and node.items and isinstance(node.items[0], Atom):
        return node.items[0].text
    return None


def _atom(node, what: str) -> str:
    if not isinstance(node, Atom):
        _fail(node, f"expected {what}")
    return node.text


def _int(node, what: str) -> int:
    text = _atom(node, what)
    try:
        return int(text)
    except ValueError:
        _fail(node, f"expected {what}, got {text!r}")


# -- problem model -------------------------------------------------------------------


@dataclass(frozen=True)
class BaseDecl:
    kind: str  # "presburger" | "membership"
    modulus_cap: int | None = None
    predicates: tuple = ()  # (name, sort name, TreeAutomaton)


@dataclass(frozen=True)
class TheoryDecl:
    """base procedure at `level`; target is a leaf name or a nested TheoryDecl."""

    base: BaseDecl
    target: object
    level: int = 0

    def layers(self) -> list["TheoryDecl"]:
        out = [self]
        if isinstance(self.target, TheoryDecl):
            out.extend(self.target.layers())
        return out

    @property
    def leaf(self) -> str:
        return self.layers()[-1].target


@dataclass(frozen=True)
class ProblemFile:
    signature: Signature
    theory: TheoryDecl
    clauses: tuple
    options: dict = field(default_factory=dict)

    def membership_fragments(self, level: int) -> tuple:
        """Fragments for the membership base of `level` (one per sort with predicates)."""
        layer = next((l for l in self.theory.layers() if l.level == level), None)
        if layer is None or layer.base.kind != "membership":
            return ()
        by_sort: dict[str, dict] = {}
        for name, sort_name, auto in layer.base.predicates:
            by_sort.setdefault(sort_name, {})[name] = auto
        for s in self.signature.sorts.values():
            if s.kind == BASE and s.level == level and not s.is_int and not s.is_real:
                by_sort.setdefault(s.name, {})
        out = []
        for sort_name in sorted(by_sort):
            sort = self.signature.sort(sort_name)
            sigma = {
                n: len(args) for n, (args, res) in self.signature.functions.items() if res == sort
            }
            out.append(MembershipFragment(sort, dict(sorted(sigma.items())), by_sort[sort_name]))
        return tuple(out)

    def membership_map(self) -> dict:
        out = {}
        for layer in self.theory.layers():
            for f in self.membership_fragments(layer.level):
                out[f.sort.name] = f
        return out


# -- parsing -------------------------------------------------------------------------


def _parse_sort(node, sig: Signature) -> Sort:
    if not isinstance(node, SList) or len(node.items) < 2:
        _fail(node, "sort entry must be (name base|target ...)")
    name = _atom(node.items[0], "sort name")
    kind = _atom(node.items[1], "base or target")
    if kind not in (BASE, TARGET):
        _fail(node.items[1], f"sort kind must be base or target, got {kind!r}")
    is_int = is_real = False
    level = 0
    copy_of = None
    rest = list(node.items[2:])
    while rest:
        flag = rest.pop(0)
        word = _atom(flag, "sort flag")
        if word == "int":
            is_int = True
        elif word == "real":
            is_real = True
        elif word in ("level", "copy-of"):
            if not rest:
                _fail(flag, f"{word} needs an argument")
            arg = rest.pop(0)
            if word == "level":
                level = _int(arg, "level number")
                if level < 0:
                    _fail(arg, "level must be non-negative")
            else:
                copy_of = _atom(arg, "sort name")
                if copy_of not in sig.sorts:
                    _fail(arg, f"unknown sort {copy_of}")
        else:
            _fail(flag, f"unknown sort flag {word!r}")
    if is_int and is_real:
        _fail(node, "a sort cannot be both int and real")
    if name == "bool" or name.startswith("$"):
        _fail(node.items[0], f"sort name {name} is reserved")
    if name in sig.sorts:
        _fail(node.items[0], f"sort {name} declared twice")
    return sig.add_sort(Sort(name, kind, level, is_int, copy_of, is_real))


def _sort_ref(node, sig: Signature, allow_bool: bool = False) -> Sort:
    name = _atom(node, "sort name")
    if allow_bool and name == "bool":
        return TARGET_BOOL
    if name not in sig.sorts:
        _fail(node, f"unknown sort {name}")
    return sig.sorts[name]


def _parse_function(node, sig: Signature) -> None:
    if not isinstance(node, SList) or len(node.items) != 3:
        _fail(node, "function entry must be (name (arg sorts) result)")
    name = _atom(node.items[0], "function name")
    if name in _RESERVED_FUNS or name.startswith("$") or name.isdigit() or name.lstrip("-").isdigit():
        _fail(node.items[0], f"function name {name} is reserved")
    if name in sig.functions:
        _fail(node.items[0], f"function {name} declared twice")
    args_node = node.items[1]
    if not isinstance(args_node, SList):
        _fail(args_node, "argument sorts must be a list")
    args = tuple(_sort_ref(a, sig) for a in args_node.items)
    result = _sort_ref(node.items[2], sig, allow_bool=True)
    if name in ("s", "p") and (result.is_int or result.is_real):
        _fail(node.items[0], f"{name} with a numeric result is reserved for successor/predecessor")
    sig.add_function(name, args, result)


def _parse_automaton(node, sig: Signature) -> tuple:
    items = node.items if isinstance(node, SList) else ()
    if len(items) < 2:
        _fail(node, "predicate must be (name sort (states ...) (final ...) (rules ...))")
    name = _atom(items[0], "predicate name")
    sort = _sort_ref(items[1], sig)
    if sort.kind != BASE or sort.is_int or sort.is_real:
        _fail(items[1], f"membership predicates need a base term sort, got {sort.name}")
    states, final, rules = [], [], []
    for part in items[2:]:
        h = _head(part)
        if h == "states":
            states = [_atom(s, "state") for s in part.items[1:]]
        elif h == "final":
            final = [_atom(s, "state") for s in part.items[1:]]
        elif h == "rules":
            for r in part.items[1:]:
                words = [_atom(w, "rule symbol") for w in r.items] if isinstance(r, SList) else []
                if len(words) < 3 or words[-2] != "->":
                    _fail(r, "rule must be (f q1 ... qn -> q)")
                f, qs, q = words[0], words[1:-2], words[-1]
                if f not in sig.functions or sig.functions[f][1] != sort:
                    _fail(r, f"{f} is not a constructor of {sort.name}")
                if len(sig.functions[f][0]) != len(qs):
                    _fail(r, f"{f} has arity {len(sig.functions[f][0])}")
                for s in qs + [q]:
                    if s not in states:
                        _fail(r, f"undeclared state {s}")
                rules.append((f, tuple(qs), q))
        else:
            _fail(part, "expected states, final or rules")
    for s in final:
        if s not in states:
            _fail(node, f"undeclared final state {s}")
    return name, sort.name, TreeAutomaton.of(states, final, rules)


def _parse_base(node, sig: Signature) -> BaseDecl:
    if isinstance(node, Atom):
        if node.text == "presburger":
            return BaseDecl("presburger")
        _fail(node, f"unknown base theory {node.text!r}")
    h = _head(node)
    if h == "presburger":
        rest = node.items[1:]
        if len(rest) == 2 and _atom(rest[0], ":modulus-cap") == ":modulus-cap":
            return BaseDecl("presburger", modulus_cap=_int(rest[1], "modulus cap"))
        if rest:
            _fail(node, "expected (presburger) or (presburger :modulus-cap N)")
        return BaseDecl("presburger")
    if h == "membership":
        preds = []
        for p in node.items[1:]:
            name, sort_name, auto = _parse_automaton(p, sig)
            if name in sig.functions or any(name == q[0] for q in preds):
                _fail(p, f"predicate {name} clashes with a declared symbol")
            preds.append((name, sort_name, auto))
        return BaseDecl("membership", predicates=tuple(preds))
    _fail(node, "unknown base theory")


def _parse_theory(node, sig: Signature, level: int = 0) -> TheoryDecl:
    parts = {_head(p): p for p in node.items[1:]}
    if set(parts) != {"base", "target"} or len(node.items) != 3:
        _fail(node, "theory needs exactly (base ...) and (target ...)")
    b, t = parts["base"], parts["target"]
    if len(b.items) != 2 or len(t.items) != 2:
        _fail(node, "base and target take one argument each")
    base = _parse_base(b.items[1], sig)
    tnode = t.items[1]
    if isinstance(tnode, Atom):
        if tnode.text not in TARGET_KINDS:
            _fail(tnode, f"unknown target theory {tnode.text!r}")
        target: object = tnode.text
    elif _head(tnode) == "nested":
        target = _parse_theory(tnode, sig, level + 1)
    else:
        _fail(tnode, "target must be fol, ground-arrays or (nested ...)")
    return TheoryDecl(base, target, level)


def _parse_options(node) -> dict:
    out = {}
    for entry in node.items[1:]:
        if isinstance(entry, Atom):
            key, args = entry.text, []
        else:
            key = _atom(entry.items[0] if entry.items else entry, "option name")
            args = list(entry.items[1:])
        kind = OPTION_KEYS.get(key)
        if kind is None:
            _fail(entry, f"unknown option {key!r}")
        if kind is bool:
            if args:
                _fail(entry, f"option {key} takes no argument")
            out[key] = True
        elif len(args) != 1:
            _fail(entry, f"option {key} takes one argument")
        elif kind is int:
            out[key] = _int(args[0], f"integer for {key}")
        else:
            out[key] = _atom(args[0], f"value for {key}")
    return out


def _is_reserved(text: str) -> bool:
    return any(text.startswith(prefix + ".") and len(text) > len(prefix) + 1 for prefix in (DIAMOND, BOTTOM, CHI))


class _ClauseParser:
    def __init__(self, sig: Signature, predicates: dict):
        self.sig = sig
        self.predicates = predicates  # name -> Sort of its argument

    def clause(self, node) -> Clause:
        scope: dict[str, Var] = {}
        if _head(node) == "forall":
            if len(node.items) != 3 or not isinstance(node.items[1], SList):
                _fail(node, "forall needs a binder list and a body")
            for b in node.items[1].items:
                if not isinstance(b, SList) or len(b.items) != 2:
                    _fail(b, "binder must be (name sort)")
                name = _atom(b.items[0], "variable name")
                if name in scope:
                    _fail(b, f"variable {name} bound twice")
                scope[name] = Var(name, _sort_ref(b.items[1], self.sig))
            node = node.items[2]
        if _head(node) == "or":
            lits = [self.literal(l, scope) for l in node.items[1:]]
        elif isinstance(node, Atom) and node.text == "false":
            lits = []
        else:
            lits = [self.literal(node, scope)]
        clause = Clause.of(lits)
        unused = set(scope.values()) - set(variables(clause))
        if unused:
            _fail(node, f"bound variable {sorted(v.name for v in unused)[0]} does not occur")
        return clause

    def literal(self, node, scope) -> Literal:
        if _head(node) == "not":
            if len(node.items) != 2:
                _fail(node, "not takes one argument")
            return self.literal(node.items[1], scope).complement()
        h = _head(node)
        if h in ("<=", "<", ">=", ">", "="):
            if len(node.items) != 3:
                _fail(node, f"{h} takes two arguments")
            a, b = self.pair(node.items[1], node.items[2], scope)
            if h == "=":
                if a.sort.name == "bool":
                    _fail(node, "equations between formulas are not supported")
                return Literal.make(True, a, b)
            if not (a.sort.is_int or a.sort.is_real):
                _fail(node, f"{h} needs numeric arguments, got sort {a.sort}")
            if h == "<=":
                return Literal.atom(True, le(a, b))
            if h == "<":
                return Literal.atom(True, lt(a, b))
            if h == ">=":
                return Literal.atom(True, le(b, a))
            return Literal.atom(True, lt(b, a))
        if h == "eqmod":
            if len(node.items) != 4:
                _fail(node, "eqmod takes a modulus and two terms")
            k = _int(node.items[1], "positive modulus")
            if k < 1:
                _fail(node.items[1], "modulus must be positive")
            a, b = self.pair(node.items[2], node.items[3], scope)
            if not a.sort.is_int:
                _fail(node, "eqmod needs integer arguments")
            return Literal.atom(True, eqmod(k, a, b))
        if isinstance(node, Atom) and node.text == "true":
            return Literal.atom(True, App("true", (), TARGET_BOOL))
        t = self.term(node, scope, None)
        if t.sort.name != "bool":
            _fail(node, f"expected a formula, got a term of sort {t.sort}")
        return Literal.atom(True, t)

    def pair(self, n1, n2, scope) -> tuple[Term, Term]:
        if self._is_numeral(n1) and not self._is_numeral(n2):
            b = self.term(n2, scope, None)
            return self.term(n1, scope, b.sort), b
        a = self.term(n1, scope, None)
        return a, self.term(n2, scope, a.sort)

    def _is_numeral(self, node) -> bool:
        """True when the node's sort can only come from its context."""
        if isinstance(node, Atom):
            text = node.text
            if _is_reserved(text):
                return text.split(".", 1)[1] not in self.sig.sorts
            return text.lstrip("-").isdigit()
        h = _head(node)
        if h in ("+", "-"):
            return all(self._is_numeral(a) for a in node.items[1:])
        return False

    def term(self, node, scope, expected: Sort | None) -> Term:
        if isinstance(node, Atom):
            text = node.text
            if text.lstrip("-").isdigit() and text not in ("-",):
                if expected is None:
                    _fail(node, f"cannot infer the sort of numeral {text}")
                if not (expected.is_int or expected.is_real):
                    _fail(node, f"numeral {text} where sort {expected} is expected")
                return self._check(node, num(int(text), expected), expected)
            if text in scope:
                return self._check(node, scope[text], expected)
            if _is_reserved(text):
                # the suffix names the sort unless the context fixes it (merged copies)
                sname = text.split(".", 1)[1]
                if expected is None and sname not in self.sig.sorts:
                    _fail(node, f"cannot infer the sort of {text}")
                return App(text, (), expected or self.sig.sorts[sname])
            return self.app(node, text, [], scope, expected)
        if not isinstance(node, SList) or not node.items:
            _fail(node, "empty term")
        h = _head(node)
        if h is None:
            _fail(node, "expected a function symbol")
        args = node.items[1:]
        if h in ("+", "-"):
            if h == "-" and len(args) == 1:
                x = self.term(args[0], scope, expected)
                self._numeric(node, x)
                return self._check(node, App("neg", (x,), x.sort), expected)
            if len(args) != 2:
                _fail(node, f"{h} takes two arguments")
            if self._is_numeral(args[0]) and not self._is_numeral(args[1]):
                b = self.term(args[1], scope, expected)
                a = self.term(args[0], scope, b.sort)
            else:
                a = self.term(args[0], scope, expected)
                b = self.term(args[1], scope, a.sort)
            self._numeric(node, a)
            return self._check(node, App(h, (a, b), a.sort), expected)
        return self.app(node, h, args, scope, expected)

    def _numeric(self, node, t: Term) -> None:
        if not (t.sort.is_int or t.sort.is_real):
            _fail(node, f"arithmetic on non-numeric sort {t.sort}")

    def app(self, node, name, args, scope, expected) -> Term:
        if name in self.predicates:
            if len(args) != 1:
                _fail(node, f"predicate {name} takes one argument")
            x = self.term(args[0], scope, self.predicates[name])
            return self._check(node, App(name, (x,), bool_sort(BASE, x.sort.level)), expected)
        if name not in self.sig.functions:
            _fail(node, f"unknown function {name}")
        argsorts, result = self.sig.functions[name]
        if len(args) != len(argsorts):
            _fail(node, f"{name} expects {len(argsorts)} arguments, got {len(args)}")
        xs = tuple(self.term(a, scope, s) for a, s in zip(args, argsorts))
        return self._check(node, App(name, xs, result), expected)

    @staticmethod
    def _check(node, t: Term, expected: Sort | None) -> Term:
        if expected is not None and t.sort != expected:
            _fail(node, f"term of sort {t.sort} where sort {expected} is expected")
        return t


def parse_problem(text: str) -> ProblemFile:
    nodes = read_sexprs(text)
    if len(nodes) != 1 or _head(nodes[0]) != "problem":
        where = nodes[0] if nodes else Atom("", 1, 1)
        _fail(where, "expected a single (problem ...) form")
    top = nodes[0]
    sections: dict[str, SList] = {}
    for part in top.items[1:]:
        h = _head(part)
        if h not in ("sorts", "functions", "theory", "options", "clauses"):
            _fail(part, f"unknown section {h or part!r}")
        if h in sections:
            _fail(part, f"section {h} given twice")
        sections[h] = part
    for required in ("sorts", "theory", "clauses"):
        if required not in sections:
            _fail(top, f"missing ({required} ...) section")
    sig = Signature()
    for s in sections["sorts"].items[1:]:
        _parse_sort(s, sig)
    if "functions" in sections:
        for f in sections["functions"].items[1:]:
            _parse_function(f, sig)
    theory = _parse_theory(sections["theory"], sig)
    predicates = {}
    for layer in theory.layers():
        for name, sort_name, _ in layer.base.predicates:
            predicates[name] = sig.sorts[sort_name]
    options = _parse_options(sections["options"]) if "options" in sections else {}
    cp = _ClauseParser(sig, predicates)
    clauses = tuple(cp.clause(c) for c in sections["clauses"].items[1:])
    return ProblemFile(sig, theory, clauses, options)


# -- printing ------------------------------------------------------------------------


def print_term(t: Term) -> str:
    if isinstance(t, Var) or not t.args:
        return t.name if isinstance(t, Var) else t.fn
    fn = t.fn
    if fn == "neg":
        return f"(- {print_term(t.args[0])})"
    if fn in ("s", "p") and t.sort.is_int:
        one = num(1, t.sort)
        return f"({'+' if fn == 's' else '-'} {print_term(t.args[0])} {print_term(one)})"
    if fn.startswith("eqmod."):
        return f"(eqmod {fn[6:]} {print_term(t.args[0])} {print_term(t.args[1])})"
    return f"({fn} {' '.join(print_term(a) for a in t.args)})"


def print_literal(lit: Literal) -> str:
    if lit.is_equational:
        atom = f"(= {print_term(lit.left)} {print_term(lit.right)})"
    else:
        atom = print_term(lit.left)
    return atom if lit.pos else f"(not {atom})"


def print_clause(clause: Clause) -> str:
    lits = [print_literal(l) for l in clause]
    body = "false" if not lits else lits[0] if len(lits) == 1 else f"(or {' '.join(lits)})"
    vs = sorted(variables(clause), key=lambda v: v.name)
    if not vs:
        return body
    binders = " ".join(f"({v.name} {v.sort.name})" for v in vs)
    return f"(forall ({binders}) {body})"


def _print_sort(s: Sort) -> str:
    words = [s.name, s.kind]
    if s.is_int:
        words.append("int")
    if s.is_real:
        words.append("real")
    if s.level:
        words += ["level", str(s.level)]
    if s.copy_of:
        words += ["copy-of", s.copy_of]
    return "(" + " ".join(words) + ")"


def _print_automaton(name: str, sort_name: str, a: TreeAutomaton) -> str:
    rules = " ".join("(" + " ".join([f, *qs, "->", q]) + ")" for f, qs, q in a.rules)
    final = " ".join(q for q in a.states if q in a.final)
    return f"({name} {sort_name} (states {' '.join(a.states)}) (final {final}) (rules {rules}))"


def _print_base(b: BaseDecl) -> str:
    if b.kind == "presburger":
        return "presburger" if b.modulus_cap is None else f"(presburger :modulus-cap {b.modulus_cap})"
    return "(membership " + " ".join(_print_automaton(*p) for p in b.predicates) + ")"


def _print_theory(t: TheoryDecl, head: str = "theory") -> str:
    target = t.target if isinstance(t.target, str) else _print_theory(t.target, "nested")
    return f"({head} (base {_print_base(t.base)}) (target {target}))"


def print_problem(problem: ProblemFile) -> str:
    sig = problem.signature
    lines = ["(problem"]
    lines.append("  (sorts " + " ".join(_print_sort(s) for s in sig.sorts.values()) + ")")
    funs = []
    for name, (args, res) in sig.functions.items():
        funs.append(f"({name} ({' '.join(a.name for a in args)}) {res.name})")
    lines.append("  (functions" + "".join("\n    " + f for f in funs) + ")")
    lines.append("  " + _print_theory(problem.theory))
    if problem.options:
        opts = []
        for k, v in problem.options.items():
            opts.append(f"({k})" if v is True else f"({k} {v})")
        lines.append("  (options " + " ".join(opts) + ")")
    lines.append("  (clauses" + "".join("\n    " + print_clause(c) for c in problem.clauses) + "))")
    return "\n".join(lines) + "\n"


def clauses_problem(problem: ProblemFile, clauses, theory: TheoryDecl | None = None) -> ProblemFile:
    """The same declarations with another clause list (used to emit ground instances)."""
    return ProblemFile(problem.signature, theory or problem.theory, tuple(clauses), dict(problem.options))


__all__ = [
    "Atom",
    "SList",
    "read_sexprs",
    "BaseDecl",
    "TheoryDecl",
    "ProblemFile",
    "parse_problem",
    "print_problem",
    "print_term",
    "print_literal",
    "print_clause",
    "clauses_problem",
]
