"""Prefix-determined event schemas and their exact probabilities.

Each schema is evaluated by an incremental monitor: ``initial`` looks at the
first state, ``advance`` at every later transition, and ``final`` resolves
a still-pending status once the horizon is reached or the execution is
maximal.  A status of ``True`` or ``False`` is decided; anything else is
pending and must be hashable so that it can take part in memo keys.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Hashable, Sequence

from .errors import BudgetExceededError, InsufficientPrefixError
from .pta import (
    ONE,
    ZERO,
    Action,
    ExecutionFragment,
    Horizon,
    Model,
    State,
    build_tree,
    check_choice,
)

PENDING = None


def decided(status) -> bool:
    return status is True or status is False


class EventSchema:
    horizon: Horizon

    def initial(self, state: State, time: Fraction, index: int = 0):
        return PENDING

    def advance(self, status, action: Action, state: State, time: Fraction, index: int):
        raise NotImplementedError

    def final(self, status) -> bool:
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ReachWithin(EventSchema):
    """Some state within the horizon satisfies ``target``; the first state counts."""

    target: Callable[[State], bool]
    within: Fraction
    measure: str = "time"

    @property
    def horizon(self) -> Horizon:
        return Horizon(self.within, self.measure)

    def initial(self, state, time, index=0):
        if self.horizon.covers(time, index) and self.target(state):
            return True
        return PENDING

    def advance(self, status, action, state, time, index):
        if status is not PENDING:
            return status
        return self.initial(state, time, index)

    def final(self, status):
        return status is True

    def describe(self):
        return {"kind": "reach-within", "target": str(self.target), "within": self.within,
                "measure": self.measure}


@dataclass(frozen=True)
class NeverWithin(EventSchema):
    """Complement of :class:`ReachWithin` over the same horizon."""

    target: Callable[[State], bool]
    within: Fraction
    measure: str = "time"

    @property
    def horizon(self) -> Horizon:
        return Horizon(self.within, self.measure)

    def initial(self, state, time, index=0):
        if self.horizon.covers(time, index) and self.target(state):
            return False
        return PENDING

    def advance(self, status, action, state, time, index):
        if status is not PENDING:
            return status
        return self.initial(state, time, index)

    def final(self, status):
        return status is not False

    def describe(self):
        return {"kind": "never-within", "target": str(self.target), "within": self.within,
                "measure": self.measure}


@dataclass(frozen=True)
class First(EventSchema):
    """``action`` does not occur, or the state after its first occurrence is in ``target``."""

    action: str
    target: Callable[[State], bool]
    horizon: Horizon

    def advance(self, status, action, state, time, index):
        if status is not PENDING:
            return status
        if action.name == self.action and self.horizon.covers(time, index):
            return bool(self.target(state))
        return PENDING

    def final(self, status):
        return status is not False

    def describe(self):
        return {"kind": "first", "action": self.action, "target": str(self.target)}


@dataclass(frozen=True)
class Next(EventSchema):
    """No listed action occurs, or the earliest one lands in its paired set."""

    pairs: tuple[tuple[str, Callable[[State], bool]], ...]
    horizon: Horizon

    def __post_init__(self):
        names = [a for a, _ in self.pairs]
        if len(set(names)) != len(names):
            raise ValueError("NEXT requires pairwise distinct actions")

    def advance(self, status, action, state, time, index):
        if status is not PENDING:
            return status
        if self.horizon.covers(time, index):
            for name, target in self.pairs:
                if action.name == name:
                    return bool(target(state))
        return PENDING

    def final(self, status):
        return status is not False

    def describe(self):
        return {"kind": "next", "pairs": [[a, str(u)] for a, u in self.pairs]}


@dataclass(frozen=True)
class Occurs(EventSchema):
    """``action`` occurs within the horizon."""

    action: str
    horizon: Horizon

    def advance(self, status, action, state, time, index):
        if status is not PENDING:
            return status
        if action.name == self.action and self.horizon.covers(time, index):
            return True
        return PENDING

    def final(self, status):
        return status is True

    def describe(self):
        return {"kind": "occurs", "action": self.action}


@dataclass(frozen=True)
class AllOf(EventSchema):
    """Pointwise conjunction of events sharing a horizon measure."""

    parts: tuple[EventSchema, ...]

    def __post_init__(self):
        if not self.parts:
            raise ValueError("empty conjunction")
        if len({p.horizon.measure for p in self.parts}) != 1:
            raise ValueError("conjoined events must share a horizon measure")

    @property
    def horizon(self) -> Horizon:
        return Horizon(max(p.horizon.bound for p in self.parts), self.parts[0].horizon.measure)

    @staticmethod
    def _fold(statuses):
        if any(s is False for s in statuses):
            return False
        if all(s is True for s in statuses):
            return True
        return tuple(statuses)

    def initial(self, state, time, index=0):
        return self._fold([p.initial(state, time, index) for p in self.parts])

    def advance(self, status, action, state, time, index):
        if decided(status):
            return status
        return self._fold(
            [
                s if decided(s) else p.advance(s, action, state, time, index)
                for p, s in zip(self.parts, status)
            ]
        )

    def final(self, status):
        if decided(status):
            return status
        return all(s if decided(s) else p.final(s) for p, s in zip(self.parts, status))

    def describe(self):
        return {"kind": "all-of", "parts": [p.describe() for p in self.parts]}


def eval_event(schema: EventSchema, execution: ExecutionFragment, complete: bool = False) -> bool:
    """Truth of ``schema`` on an execution.

    The fragment must either reach past the schema's horizon or be marked
    ``complete`` (maximal, or cut exactly at the horizon).
    """
    nodes = execution.nodes()
    status = schema.initial(nodes[0].state, nodes[0].time, 0)
    for k, node in enumerate(nodes[1:], start=1):
        if decided(status):
            break
        status = schema.advance(status, node.step.action, node.state, node.time, k)
    if decided(status):
        return status
    h = schema.horizon
    if h.measure == "steps":
        long_enough = execution.length >= h.bound
    else:
        long_enough = execution.time > h.bound
    if not (complete or long_enough):
        raise InsufficientPrefixError("execution ends before the event's horizon")
    return schema.final(status)


@dataclass(frozen=True)
class EventProbability:
    value: Fraction
    nodes: int
    horizon: Horizon

    def __post_init__(self):
        assert ZERO <= self.value <= ONE


def exact_probability(
    model: Model,
    adversary,
    start: State | ExecutionFragment,
    schema: EventSchema,
    horizon: Horizon | None = None,
    max_nodes: int = 2_000_000,
    memo: bool | None = None,
) -> EventProbability:
    """Probability of ``schema`` in the execution of ``model`` under ``adversary``.

    Walks the execution tree depth first.  When the adversary is
    memoizable, subtrees are shared on (state, adversary phase, time, step
    count, monitor status).
    """
    horizon = horizon or schema.horizon
    use_memo = getattr(adversary, "memoizable", False) if memo is None else memo
    cache: dict = {}
    count = 0
    by_steps = horizon.measure == "steps"

    def value(frag: ExecutionFragment, status) -> Fraction:
        nonlocal count
        if decided(status):
            return ONE if status else ZERO
        key = None
        if use_memo:
            key = (
                frag.state,
                adversary.phase_key(frag),
                frag.time,
                frag.length if by_steps else 0,
                status,
            )
            hit = cache.get(key)
            if hit is not None:
                return hit
        count += 1
        if count > max_nodes:
            raise BudgetExceededError(f"event evaluation exceeds {max_nodes} nodes", count)
        choice = adversary.decide(frag)
        check_choice(model, frag.state, choice)
        if choice is None or not horizon.allows(frag, choice):
            result = ONE if schema.final(status) else ZERO
        else:
            result = ZERO
            for s, w in choice.next.support:
                child = frag.extend(choice, s)
                st = schema.advance(status, choice.action, s, child.time, child.length)
                result += w * value(child, st)
        if key is not None:
            cache[key] = result
        return result

    frag = start if isinstance(start, ExecutionFragment) else ExecutionFragment(start)
    status0 = schema.initial(frag.state, frag.time, frag.length)
    p = value(frag, status0)
    return EventProbability(p, count, horizon)


def conditional_probability(
    model: Model,
    adversary,
    start: State,
    event: EventSchema,
    given: EventSchema,
    horizon: Horizon,
) -> Fraction:
    """P(event and given) / P(given), from the leaves of the execution tree."""
    tree = build_tree(model, adversary, start, horizon)
    joint = ZERO
    cond = ZERO
    for leaf in tree.leaves():
        if eval_event(given, leaf.fragment, complete=True):
            cond += leaf.probability
            if eval_event(event, leaf.fragment, complete=True):
                joint += leaf.probability
    if cond == 0:
        raise ZeroDivisionError("conditioning event has probability zero")
    return joint / cond


def steps_horizon(n: int) -> Horizon:
    return Horizon(n, "steps")


def first_all(pairs: Sequence[tuple[str, Callable[[Hashable], bool]]], horizon: Horizon) -> AllOf:
    """FIRST(a1, U1) ∩ ... ∩ FIRST(an, Un)."""
    return AllOf(tuple(First(a, u, horizon) for a, u in pairs))
