"""From a parsed problem to a verdict: preprocessing, instantiation, backend."""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace

from . import backend as bk
from .arith import eqmod_modulus, is_eqmod
from .combine import CombinedProcedure, as_target_procedure, combine
from .errors import NestInstError, ResourceLimit
from .membership import MembershipProcedure
from .presburger import PresburgerProcedure
from .outcome import InstantiationOutcome
from .problem import BaseDecl, ProblemFile, TheoryDecl, print_problem
from .signature import Signature
from .shift import lambda_text, shift, shiftability_check
from .target import DEFAULT_ROUND_LIMIT, IDENTITY, fol_procedure
from .terms import App, Clause, Sort, is_base, render_term, sorted_clauses, subterms, variables
from .theory import copy_sorts, eliminate_bottom, eliminate_store, normalize_literals, simplify, unprime

REPORT_VERSION = 1
BACKENDS = ("bounded", "smtlib", "external")


@dataclass(frozen=True)
class Flags:
    backend: str = "bounded"
    window: int | None = None
    free_domain: int | None = None
    max_rounds: int = DEFAULT_ROUND_LIMIT
    no_chi: bool = False
    shift: bool = False
    copy_elements: str | None = None
    emit_instances: str | None = None
    emit_smtlib: str | None = None
    solver: str | None = None
    timeout: float = 60.0
    node_limit: int = bk.DEFAULT_NODE_LIMIT

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.window is not None and self.window < 0:
            raise ValueError("window must be non-negative")
        if self.max_rounds < 0:
            raise ValueError("max-rounds must be non-negative")

    @classmethod
    def from_options(cls, options: dict, **overrides) -> "Flags":
        """Problem-file options, then explicit (non-None) overrides."""
        names = {"free-domain": "free_domain", "max-rounds": "max_rounds", "no-chi": "no_chi", "copy-elements": "copy_elements"}
        kw = {names.get(k, k): v for k, v in options.items()}
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)


class StageError(NestInstError):
    def __init__(self, stage: str, error: Exception):
        super().__init__(f"{stage}: {error}")
        self.stage = stage
        self.error = error


@dataclass
class Report:
    verdict: str
    reason: str = ""
    instance_count: int = 0
    ground_clauses: list = field(default_factory=list)
    pool: dict = field(default_factory=dict)  # level -> sort -> terms
    chi_axioms: list = field(default_factory=list)
    incomplete: bool = False
    window: tuple | None = None
    model: dict | None = None
    shift: dict | None = None
    script_path: str | None = None
    instances_path: str | None = None
    timings: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return bk.Verdict(self.verdict).exit_code

    def to_dict(self, timings: bool = False) -> dict:
        out = {
            "report_version": REPORT_VERSION,
            "verdict": self.verdict,
            "exit_code": self.exit_code,
            "reason": self.reason,
            "instance_count": self.instance_count,
            "ground_clause_count": len(self.ground_clauses),
            "ground_clauses": [str(c) for c in self.ground_clauses],
            "pool": self.pool,
            "chi_axioms": [str(c) for c in self.chi_axioms],
            "incomplete": self.incomplete,
            "window": list(self.window) if self.window else None,
            "model": self.model,
            "shift": self.shift,
            "script_path": self.script_path,
            "instances_path": self.instances_path,
        }
        if timings:
            out["timings"] = {k: round(v, 6) for k, v in self.timings.items()}
        return out

    def to_json(self, timings: bool = False) -> str:
        return json.dumps(self.to_dict(timings), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = [f"verdict: {self.verdict}" + (f" ({self.reason})" if self.reason else "")]
        if self.shift is not None:
            lines.append("shift lambda: " + ", ".join(f"{k} -> {v}" for k, v in self.shift["lambda"].items()))
            lines.extend("  " + c for c in self.shift["clauses"])
        lines.append(f"instances: {self.instance_count}, ground clauses after simplification: {len(self.ground_clauses)}")
        for level, pools in self.pool.items():
            for sort, terms in pools.items():
                lines.append(f"pool level {level} {sort}: {{{', '.join(terms)}}}")
        if self.chi_axioms:
            lines.append("chi axioms: " + "; ".join(str(c) for c in self.chi_axioms))
        if self.incomplete:
            lines.append("warning: instantiation stopped at the round limit")
        if self.window:
            lines.append(f"integer window: [{self.window[0]}, {self.window[1]}]")
        if self.model:
            lines.append("model: " + ", ".join(f"{k}={v}" for k, v in self.model.items()))
        if self.script_path:
            lines.append(f"smt-lib script: {self.script_path}")
        if self.instances_path:
            lines.append(f"ground instances: {self.instances_path}")
        lines.extend("  " + str(c) for c in self.ground_clauses)
        return "\n".join(lines) + "\n"


def build_procedure(theory: TheoryDecl, problem: ProblemFile, flags: Flags) -> CombinedProcedure:
    if theory.base.kind == "presburger":
        base = PresburgerProcedure(no_chi=flags.no_chi)
    else:
        base = MembershipProcedure(problem.membership_fragments(theory.level))
    if isinstance(theory.target, TheoryDecl):
        target = as_target_procedure(build_procedure(theory.target, problem, flags), theory.level)
    elif theory.target == "fol":
        target = fol_procedure(flags.max_rounds)
    else:
        target = IDENTITY
    return CombinedProcedure(base, target, theory.level)


class _Stages:
    def __init__(self):
        self.timings: dict[str, float] = {}

    def run(self, name: str, fn, *args, **kwargs):
        start = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        except StageError:
            raise
        except (NestInstError, ValueError) as e:
            raise StageError(name, e) from e
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start


def _level_modulus(clauses, level: int) -> int:
    m = 1
    for c in clauses:
        for lit in c:
            for s in subterms(lit.left):
                if isinstance(s, App) and is_eqmod(s.fn) and is_base(s.args[0].sort, level):
                    m = math.lcm(m, eqmod_modulus(s.fn))
    return m


def _check_modulus_caps(clauses, theory: TheoryDecl) -> None:
    for layer in theory.layers():
        cap = layer.base.modulus_cap
        if layer.base.kind == "presburger" and cap is not None:
            m = _level_modulus(clauses, layer.level)
            if m > cap:
                raise ResourceLimit(f"modulus {m} at level {layer.level} exceeds the cap {cap}")


def _copy_target(sig, name: str) -> str:
    if name != "auto":
        return name
    ints = sorted(s.name for s in sig.sorts.values() if s.is_int and s.kind == "base" and s.level == 0)
    if len(ints) != 1:
        raise ValueError(f"--copy-elements needs a sort name (level-0 integer sorts: {ints})")
    return ints[0]


def _ground_modulus(clauses) -> int:
    m = 1
    for c in clauses:
        for lit in c:
            for s in subterms(lit.left):
                if isinstance(s, App) and is_eqmod(s.fn):
                    m = math.lcm(m, eqmod_modulus(s.fn))
    return m


def _pool_by_level(pool: dict) -> dict:
    out: dict[str, dict] = {}
    for key in sorted(pool, key=lambda k: (int(k.rsplit("@", 1)[1]), k) if "@" in k else (0, k)):
        sort, _, level = key.rpartition("@")
        out.setdefault(level or "0", {})[sort or key] = [render_term(t) for t in pool[key]]
    return out


def run_pipeline(problem: ProblemFile, flags: Flags | None = None) -> Report:
    flags = flags or Flags.from_options(problem.options)
    st = _Stages()
    sig = problem.signature
    links: dict = {}
    clauses = list(problem.clauses)
    shift_info = None

    clauses = st.run("eliminate-store", eliminate_store, clauses, sig)
    if flags.copy_elements:
        res = st.run("copy-sorts", copy_sorts, sig, clauses, _copy_target(sig, flags.copy_elements))
        sig, clauses, links = res.signature, res.clauses, res.links
    if flags.shift:
        lam = st.run("shift", shiftability_check, clauses, 0)
        if lam is None:
            shift_info = {"lambda": {}, "clauses": [], "shiftable": False}
        else:
            res = st.run("shift", shift, clauses, lam, sig, 0)
            clauses = res.clauses
            sig = res.signature or sig
            arr_sort = next((s for s in sig.sorts.values() if s.is_int and s.kind == "base" and s.level == 0), None)
            shift_info = {
                "lambda": lambda_text(lam, arr_sort) if arr_sort else {},
                "renaming": dict(sorted(res.renaming.items())),
                "clauses": [str(c) for c in clauses],
                "shiftable": True,
            }
    try:
        if any(variables(c) for c in clauses):
            clauses = st.run("normalize", normalize_literals, clauses)
            # the hierarchy condition is what instantiation relies on; ground sets need not meet it
            st.run("validate", sig.check_hierarchy)
            st.run("validate", _check_modulus_caps, clauses, problem.theory)
            proc = build_procedure(problem.theory, replace(problem, signature=sig), flags)
            outcome = st.run("combine", combine, proc, clauses)
        else:
            # a ground set is its own instance set; abstraction would only reintroduce variables
            outcome = InstantiationOutcome()
            for k, c in enumerate(clauses):
                outcome.add(c, k, {})
            outcome.finish()
    except StageError as e:
        if isinstance(e.error, ResourceLimit):
            return Report(bk.UNKNOWN, reason=str(e), shift=shift_info, timings=st.timings)
        raise

    def ground_stage():
        g = eliminate_bottom(simplify(outcome.instances))
        g = simplify(unprime(g, sig.sorts, links))
        aux = sorted_clauses(unprime(outcome.aux_axioms, sig.sorts, links))
        return g, aux

    ground, aux = st.run("simplify", ground_stage)
    report = Report(
        bk.UNKNOWN,
        instance_count=len(outcome.instances),
        ground_clauses=ground,
        pool=_pool_by_level(outcome.pool),
        chi_axioms=aux,
        incomplete=outcome.incomplete,
        shift=shift_info,
        timings=st.timings,
    )
    membership = problem.membership_map()
    gp = st.run(
        "backend",
        bk.GroundProblem,
        ground,
        aux,
        membership,
        _ground_modulus(ground),
        sum(len(ts) for ts in outcome.pool.values()),
    )
    if flags.emit_instances:
        st.run("emit", _write_instances, flags.emit_instances, problem, sig, ground + aux)
        report.instances_path = flags.emit_instances
    if flags.emit_smtlib or flags.backend == "smtlib":
        script = st.run("backend", bk.emit_smtlib, gp)
        if flags.emit_smtlib:
            with open(flags.emit_smtlib, "w", encoding="utf-8") as fh:
                fh.write(script)
            report.script_path = flags.emit_smtlib
    if flags.backend == "bounded":
        window = (-flags.window, flags.window) if flags.window is not None else None
        verdict = st.run("backend", bk.bounded_model_search, gp, window, flags.free_domain, flags.node_limit)
    elif flags.backend == "external":
        verdict = st.run("backend", bk.external_check, gp, flags.solver, flags.timeout)
    else:
        verdict = bk.Verdict(bk.UNKNOWN, reason="script emitted, not solved")
    if verdict.status == bk.SAT and outcome.incomplete:
        verdict = bk.Verdict(bk.UNKNOWN, verdict.model, verdict.window, "model of an incomplete instance set")
    report.verdict = verdict.status
    report.reason = verdict.reason
    report.window = verdict.window
    report.model = verdict.model.describe() if verdict.model is not None else None
    return report


def _merged(sort: Sort, sorts: dict) -> Sort:
    seen = set()
    while sort.copy_of is not None and sort.copy_of in sorts and sort.name not in seen:
        seen.add(sort.name)
        sort = sorts[sort.copy_of]
    return sort


def _write_instances(path: str, problem: ProblemFile, sig, clauses: list[Clause]) -> None:
    """Ground set as a problem file over the merged sorts, decided by the identity target."""
    sorts = {n: s for n, s in sig.sorts.items() if _merged(s, sig.sorts) == s}
    emitted = Signature(dict(sorts))
    for name, (args, res) in sig.functions.items():
        emitted.functions[name] = (tuple(_merged(a, sig.sorts) for a in args), _merged(res, sig.sorts) if res.name != "bool" else res)
    used = {s.fn for c in clauses for l in c for side in (l.left, l.right) for s in subterms(side) if isinstance(s, App)}
    emitted.functions = {n: d for n, d in emitted.functions.items() if n in used or n in problem.signature.functions}
    top = problem.theory
    theory = TheoryDecl(top.base if top.base.kind == "membership" else BaseDecl("presburger"), "ground-arrays", 0)
    text = print_problem(ProblemFile(emitted, theory, tuple(clauses), {}))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


__all__ = ["Flags", "Report", "StageError", "run_pipeline", "build_procedure", "REPORT_VERSION", "BACKENDS"]
