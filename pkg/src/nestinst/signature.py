"""Signatures: declared sorts and function symbols."""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import SortError
from .terms import BASE, TARGET, App, Sort, Term


@dataclass
class Signature:
    sorts: dict = field(default_factory=dict)  # name -> Sort
    functions: dict = field(default_factory=dict)  # name -> (arg sorts, result sort)

    def add_sort(self, sort: Sort) -> Sort:
        if sort.name in self.sorts and self.sorts[sort.name] != sort:
            raise SortError(f"sort {sort.name} declared twice")
        if sort.name.startswith("$") or sort.name == "bool":
            raise SortError(f"sort name {sort.name} is reserved")
        self.sorts[sort.name] = sort
        return sort

    def add_function(self, name: str, args: tuple, result: Sort) -> None:
        if name in self.functions and self.functions[name] != (tuple(args), result):
            raise SortError(f"function {name} declared twice")
        self.functions[name] = (tuple(args), result)

    def sort(self, name: str) -> Sort:
        try:
            return self.sorts[name]
        except KeyError:
            raise SortError(f"unknown sort {name}") from None

    def app(self, name: str, *args: Term) -> App:
        argsorts, result = self.functions[name]
        if len(args) != len(argsorts):
            raise SortError(f"{name} expects {len(argsorts)} arguments, got {len(args)}")
        for a, s in zip(args, argsorts):
            if a.sort != s:
                raise SortError(f"argument {a} of {name} has sort {a.sort}, expected {s}")
        return App(name, tuple(args), result)

    def int_sorts(self) -> list[Sort]:
        return [s for s in self.sorts.values() if s.is_int]

    def check_hierarchy(self) -> None:
        """A function with a base result of level L takes only base arguments
        of level <= L or sorts of a strictly lower level."""
        for name, (args, result) in self.functions.items():
            if result.kind != BASE:
                continue
            for a in args:
                ok = (a.kind == BASE and a.level <= result.level) or a.level < result.level
                if not ok:
                    raise SortError(
                        f"function {name} maps {a.kind} sort {a} to base sort {result}"
                    )

    def levels(self) -> list[int]:
        return sorted({s.level for s in self.sorts.values() if s.kind == BASE})

    def copy(self) -> "Signature":
        return Signature(dict(self.sorts), dict(self.functions))


__all__ = ["Signature", "BASE", "TARGET"]
