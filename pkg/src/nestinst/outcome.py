"""Result type shared by every instantiation procedure."""
from __future__ import annotations

from dataclasses import dataclass, field

from .terms import Clause, render_term, term_key


@dataclass
class InstantiationOutcome:
    """Instances produced from a clause set, with where each one came from.

    `provenance` maps an instance to a list of (origin index, substitution)
    pairs; `pool` maps a sort name to the ground terms used for
    instantiation; `aux_axioms` holds ground side conditions (chi bounds).
    """

    instances: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    pool: dict = field(default_factory=dict)
    aux_axioms: list = field(default_factory=list)
    incomplete: bool = False

    def add(self, clause: Clause, origin: int, subst: dict) -> None:
        entry = (origin, tuple(sorted(subst.items(), key=lambda kv: (kv[0].name, term_key(kv[1])))))
        prov = self.provenance.get(clause)
        if prov is None:
            self.instances.append(clause)
            self.provenance[clause] = [entry]
        elif entry not in prov:
            prov.append(entry)

    def finish(self) -> "InstantiationOutcome":
        self.instances = sorted(set(self.instances), key=Clause.key)
        return self

    def pool_text(self) -> dict:
        return {s: [render_term(t) for t in ts] for s, ts in sorted(self.pool.items())}
