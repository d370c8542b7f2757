"""Time-bound statements ``U --t,p--> U'`` and the rules for combining them."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

from .adversary import get_schema
from .errors import ChainError, CompositionForbiddenError, DivergentRecurrenceError
from .predicates import Predicate
from .pta import ONE, ZERO


@dataclass(frozen=True)
class TimeBoundStatement:
    """From every ``source`` state, under every adversary of ``schema``,
    ``target`` is reached within time ``time`` with probability at least ``prob``."""

    source: Predicate
    target: Predicate
    time: Fraction
    prob: Fraction
    schema: str = "unit-time"
    label: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "time", Fraction(self.time))
        object.__setattr__(self, "prob", Fraction(self.prob))
        if self.time < 0:
            raise ValueError("time bound must be non-negative")
        if not ZERO <= self.prob <= ONE:
            raise ValueError("probability must lie in [0, 1]")

    def __str__(self) -> str:
        return f"{self.source} --[t={self.time}, p={self.prob}]--> {self.target}"

    def describe(self) -> dict:
        out = {
            "from": self.source.name,
            "to": self.target.name,
            "time": self.time,
            "prob": self.prob,
            "schema": self.schema,
        }
        if self.label:
            out["label"] = self.label
        return out


def compose(first: TimeBoundStatement, second: TimeBoundStatement) -> TimeBoundStatement:
    """U -t1,p1-> U' and U' -t2,p2-> U'' give U -(t1+t2),(p1 p2)-> U''."""
    if first.schema != second.schema:
        raise ChainError(f"schemas differ: {first.schema} vs {second.schema}")
    if not get_schema(first.schema).execution_closed:
        raise CompositionForbiddenError(f"schema {first.schema} is not execution closed")
    if first.target != second.source:
        raise ChainError(f"junction mismatch: {first.target} vs {second.source}")
    return TimeBoundStatement(
        first.source,
        second.target,
        first.time + second.time,
        first.prob * second.prob,
        first.schema,
    )


def union_lift(stmt: TimeBoundStatement, extra: Predicate) -> TimeBoundStatement:
    """U -t,p-> U' gives (U ∪ extra) -t,p-> (U' ∪ extra)."""
    return replace(stmt, source=stmt.source | extra, target=stmt.target | extra, label="")


@dataclass(frozen=True)
class ChainStep:
    statement: TimeBoundStatement
    lifted: TimeBoundStatement
    extra: Predicate
    composed: TimeBoundStatement


@dataclass(frozen=True)
class PhaseChain:
    statements: tuple[TimeBoundStatement, ...]

    def __post_init__(self):
        if not self.statements:
            raise ChainError("empty chain")

    def steps(self) -> list[ChainStep]:
        """Compose left to right, lifting each statement by what it lacks.

        Statement k+1 is lifted by the atoms of the running target that its
        source does not mention; its source must be covered by that target.
        """
        out = []
        head = self.statements[0]
        out.append(ChainStep(head, head, Predicate(frozenset()), head))
        current = head
        for k, stmt in enumerate(self.statements[1:], start=1):
            if stmt.schema != current.schema:
                raise ChainError(
                    f"link {k}: schema {stmt.schema} differs from {current.schema}"
                )
            have = current.target
            if have.universal or not stmt.source.atoms <= have.atoms:
                raise ChainError(f"link {k}: {stmt.source} is not covered by {have}")
            missing = have.atoms - stmt.source.atoms
            extra = Predicate(
                frozenset(missing),
                tuple((a, t) for a, t in have.tests if a in missing),
                have.order,
            )
            lifted = union_lift(stmt, extra)
            if lifted.source != have:
                raise ChainError(f"link {k}: lifted source {lifted.source} != {have}")
            current = compose(current, lifted)
            out.append(ChainStep(stmt, lifted, extra, current))
        return out

    def composed(self) -> TimeBoundStatement:
        return self.steps()[-1].composed


@dataclass(frozen=True)
class Branch:
    prob: Fraction
    time: Fraction
    success: bool


@dataclass(frozen=True)
class RecurrenceSpec:
    """Expected time of a retry loop: V = sum_k p_k (t_k + [retry] V)."""

    branches: tuple[Branch, ...]
    entry: Fraction = ZERO
    exit: Fraction = ZERO

    def __post_init__(self):
        if sum((b.prob for b in self.branches), ZERO) != ONE:
            raise ValueError("branch probabilities must sum to 1")
        if not any(b.success and b.prob > 0 for b in self.branches):
            raise DivergentRecurrenceError("no success branch with positive probability")


def solve_recurrence(spec: RecurrenceSpec) -> Fraction:
    retry = sum((b.prob for b in spec.branches if not b.success), ZERO)
    if retry >= 1:
        raise DivergentRecurrenceError("retry probability is 1")
    mean_round = sum((b.prob * b.time for b in spec.branches), ZERO)
    return spec.entry + mean_round / (1 - retry) + spec.exit


def recurrence_from_chain(statements: Sequence[TimeBoundStatement]) -> RecurrenceSpec:
    """Retry loop over the middle of a chain.

    The first statement is paid once on entry and the last once on exit.
    Each middle statement with p < 1 contributes a failure branch that costs
    the time spent so far and restarts the loop.
    """
    if len(statements) < 3:
        raise ChainError("need an entry, at least one middle statement and an exit")
    middle = statements[1:-1]
    branches = []
    reach = ONE
    spent = ZERO
    for stmt in middle:
        spent += stmt.time
        if stmt.prob < 1:
            branches.append(Branch(reach * (1 - stmt.prob), spent, False))
        reach *= stmt.prob
    branches.append(Branch(reach, spent, True))
    return RecurrenceSpec(tuple(branches), statements[0].time, statements[-1].time)


def simulate_recurrence(spec: RecurrenceSpec, samples: int, rng) -> list[float]:
    """Sample the loop directly; returns one total time per sample."""
    probs = [float(b.prob) for b in spec.branches]
    cum = []
    acc = 0.0
    for p in probs:
        acc += p
        cum.append(acc)
    out = []
    for _ in range(samples):
        total = float(spec.entry + spec.exit)
        while True:
            x = rng.random()
            k = next((j for j, c in enumerate(cum) if x < c), len(cum) - 1)
            b = spec.branches[k]
            total += float(b.time)
            if b.success:
                break
        out.append(total)
    return out

