"""Named state predicates closed under union.

A predicate is a union of registered atoms.  Two predicates are equal when
their atom sets are equal, which is how statements are matched when they
are chained.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable

UNIVERSAL = "all"


@dataclass(frozen=True)
class Predicate:
    atoms: frozenset[str]
    tests: tuple[tuple[str, Callable[[Hashable], bool]], ...] = field(
        default=(), compare=False, hash=False, repr=False
    )
    order: tuple[str, ...] = field(default=(), compare=False, hash=False, repr=False)

    @property
    def universal(self) -> bool:
        return UNIVERSAL in self.atoms

    @property
    def name(self) -> str:
        if self.universal:
            return UNIVERSAL
        if not self.atoms:
            return "empty"
        rank = {a: k for k, a in enumerate(self.order)}
        return "|".join(sorted(self.atoms, key=lambda a: (rank.get(a, len(rank)), a)))

    def __call__(self, state) -> bool:
        if self.universal:
            return True
        return any(test(state) for _, test in self.tests)

    def __or__(self, other: "Predicate") -> "Predicate":
        return self.union(other)

    def union(self, other: "Predicate") -> "Predicate":
        if self.universal or other.universal:
            return ALL if self.universal else other
        tests = dict(self.tests)
        tests.update(other.tests)
        order = self.order + tuple(a for a in other.order if a not in self.order)
        return Predicate(self.atoms | other.atoms, tuple(sorted(tests.items())), order)

    def __str__(self) -> str:
        return self.name


ALL = Predicate(frozenset({UNIVERSAL}))
EMPTY = Predicate(frozenset())


class PredicateRegistry:
    """Atom name -> test function, with parsing of ``"A|B"`` expressions."""

    def __init__(self, atoms: Iterable[tuple[str, Callable[[Hashable], bool]]] = ()):
        self._atoms: dict[str, Callable[[Hashable], bool]] = {}
        for name, fn in atoms:
            self.register(name, fn)

    def register(self, name: str, fn: Callable[[Hashable], bool]) -> Predicate:
        if "|" in name or name in (UNIVERSAL, "empty"):
            raise ValueError(f"reserved predicate name {name!r}")
        self._atoms[name] = fn
        return self[name]

    def names(self) -> list[str]:
        return list(self._atoms)

    def __contains__(self, name: str) -> bool:
        return name in self._atoms

    def __getitem__(self, name: str) -> Predicate:
        if name == UNIVERSAL:
            return ALL
        if name == "empty":
            return EMPTY
        if name not in self._atoms:
            raise KeyError(f"unknown predicate {name!r}")
        return Predicate(frozenset({name}), ((name, self._atoms[name]),), tuple(self._atoms))

    def parse(self, expr: str) -> Predicate:
        """Parse ``"RT|C"`` (``∪`` also accepted) into a predicate."""
        out = EMPTY
        for part in expr.replace("∪", "|").split("|"):
            part = part.strip()
            if part:
                out = out | self[part]
        return out
