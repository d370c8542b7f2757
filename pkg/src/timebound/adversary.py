"""Deterministic adversaries, adversary schemas and the Unit-Time monitor.

An adversary maps a finite execution fragment to ``None`` (halt) or to one
step enabled at the fragment's last state.  The built-in adversaries work
in unit rounds: each round opens with a time passage of 1, after which every
process that was ready when the round opened takes exactly one step.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Iterator

from .errors import SchemaViolationError, UnsupportedModelError, UnitTimeViolation
from .events import EventSchema, decided
from .pta import (
    ONE,
    ZERO,
    ExecutionFragment,
    Model,
    State,
    Step,
    check_choice,
    concat,
    enabled_steps,
)

HALT = None


class Adversary:
    name = "adversary"
    schemas: tuple[str, ...] = ()
    memoizable = False

    def decide(self, frag: ExecutionFragment) -> Step | None:
        raise NotImplementedError

    def phase_key(self, frag: ExecutionFragment) -> Hashable:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name}>"


def resolve(adversary: Adversary, frag: ExecutionFragment, model: Model) -> Step | None:
    """The adversary's choice at ``frag``, re-validated against the model."""
    choice = adversary.decide(frag)
    try:
        check_choice(model, frag.state, choice)
    except SchemaViolationError as exc:
        raise SchemaViolationError(f"{adversary.name}: {exc}") from None
    return choice


class FunctionAdversary(Adversary):
    def __init__(self, fn: Callable[[ExecutionFragment], Step | None], name: str = "function",
                 schemas: tuple[str, ...] = ()):
        self.fn = fn
        self.name = name
        self.schemas = schemas

    def decide(self, frag):
        return self.fn(frag)


class TableAdversary(Adversary):
    """Explicit choice per fragment; fragments absent from the table halt."""

    def __init__(self, table: dict, name: str = "table"):
        self.table = table
        self.name = name

    def decide(self, frag):
        return self.table.get(frag.key(), HALT)


class ShiftedAdversary(Adversary):
    """A'(a') = A(prefix ^ a')."""

    def __init__(self, base: Adversary, prefix: ExecutionFragment):
        self.base = base
        self.prefix = prefix
        self.name = f"shift({base.name}, |{prefix.length}|)"
        self.schemas = base.schemas

    def decide(self, frag):
        if frag.start_time != self.prefix.time:
            frag = frag.rebased(self.prefix.time)
        return self.base.decide(concat(self.prefix, frag))


def shift(adversary: Adversary, prefix: ExecutionFragment) -> Adversary:
    return ShiftedAdversary(adversary, prefix)


# --- Unit-Time ---------------------------------------------------------------


@dataclass(frozen=True)
class ViolationWitness:
    prefix: ExecutionFragment
    process: int
    gap: Fraction

    def describe(self, model: Model | None = None) -> dict:
        out = {"process": self.process, "gap": self.gap, "prefix_length": self.prefix.length,
               "time": self.prefix.time}
        if model is not None:
            out["state"] = model.encode(self.prefix.state).hex()
        return out


class UnitTimeMonitor:
    """Incremental check that every ready process steps within time 1."""

    def __init__(self, model: Model, frag: ExecutionFragment):
        if not model.processes:
            raise UnsupportedModelError(f"{model.name} has no process metadata")
        self.model = model
        self.ready_since = {i: frag.time for i in model.ready_processes(frag.state)}

    def observe(self, frag: ExecutionFragment) -> ViolationWitness | None:
        """Account for the last transition of ``frag``."""
        step = frag.step
        now = frag.time
        if step.is_time_advance:
            for i in sorted(self.ready_since):
                gap = now - self.ready_since[i]
                if gap > 1:
                    return ViolationWitness(frag, i, gap)
            return None
        ready = self.model.ready_processes(frag.state)
        mover = step.action.process
        for i in list(self.ready_since):
            if i not in ready:
                del self.ready_since[i]
        for i in ready:
            if i == mover or i not in self.ready_since:
                self.ready_since[i] = now
        return None


def check_unit_time(frag: ExecutionFragment, model: Model) -> ViolationWitness | None:
    """First witness of a ready process left idle for more than time 1, if any."""
    nodes = frag.nodes()
    monitor = UnitTimeMonitor(model, nodes[0])
    for node in nodes[1:]:
        w = monitor.observe(node)
        if w is not None:
            return w
    return None


# --- schemas -----------------------------------------------------------------


@dataclass(frozen=True)
class AdversarySchema:
    name: str
    execution_closed: bool
    note: str
    # (model, fragment, choice) -> violation message or None
    check: Callable[[Model, ExecutionFragment, Step | None], str | None] = field(
        default=lambda m, f, c: None, compare=False
    )

    def violation(self, model: Model, frag: ExecutionFragment, choice: Step | None) -> str | None:
        return self.check(model, frag, choice)


def _unit_time_check(model, frag, choice):
    if choice is None:
        if model.ready_processes(frag.state):
            return "halted while a process is ready"
        return None
    probe = frag.extend(choice, choice.next.support[0][0]) if choice.is_time_advance else frag
    w = check_unit_time(probe, model)
    if w is not None:
        return f"process {w.process} idle for {w.gap}"
    return None


def _non_halting_check(model, frag, choice):
    if choice is None and enabled_steps(model, frag.state):
        return "halted with enabled steps"
    return None


def _single_shot_check(model, frag, choice):
    if frag.length == 0 and choice is None and enabled_steps(model, frag.state):
        return "must take its first step"
    if frag.length >= 1 and choice is not None:
        return "takes more than one step"
    return None


SCHEMAS: dict[str, AdversarySchema] = {
    s.name: s
    for s in (
        AdversarySchema(
            "unit-time",
            True,
            "every ready process steps within time 1; conditioning on a past prefix only "
            "tightens that constraint",
            _unit_time_check,
        ),
        AdversarySchema("all", True, "every deterministic adversary"),
        AdversarySchema(
            "non-halting", True, "halts only where nothing is enabled", _non_halting_check
        ),
        AdversarySchema(
            "single-shot",
            False,
            "exactly one step then halt; a shifted member halts at once",
            _single_shot_check,
        ),
    )
}


def get_schema(name: str) -> AdversarySchema:
    try:
        return SCHEMAS[name]
    except KeyError:
        raise KeyError(f"unknown adversary schema {name!r}") from None


# --- round adversaries -------------------------------------------------------


def processes_of(model: Model) -> tuple:
    return tuple(range(model.processes)) if model.processes else (None,)


def program_steps(model: Model, state: State, i) -> list[Step]:
    if i is None:
        return [st for st in enabled_steps(model, state) if not st.action.user]
    return model.program_steps(state, i)


def user_steps(model: Model, state: State, i) -> list[Step]:
    if i is None:
        return [st for st in enabled_steps(model, state) if st.action.user]
    return model.user_steps(state, i)


def ready_set(model: Model, state: State) -> frozenset:
    if model.processes:
        return model.ready_processes(state)
    return frozenset({None}) if program_steps(model, state, None) else frozenset()


@dataclass(frozen=True)
class RoundPhase:
    pending: frozenset
    inserted: frozenset


def round_phase(model: Model, frag: ExecutionFragment) -> RoundPhase | None:
    """Pending and already-inserted processes of the current round.

    ``None`` means no round has opened yet.
    """
    stepped = set()
    inserted = set()
    node = frag
    while node.parent is not None and not node.step.is_time_advance:
        action = node.step.action
        (inserted if action.user else stepped).add(action.process)
        node = node.parent
    if node.parent is None:
        return None
    return RoundPhase(
        frozenset(ready_set(model, node.parent.state) - stepped), frozenset(inserted)
    )


def round_options(model: Model, state: State, pending: frozenset, inserted: frozenset) -> list:
    """Adversary options inside a round in canonical (process, step) order.

    Each option is ``(kind, process, step)`` with kind ``"step"``, ``"user"``
    or ``"close"``; closing is possible only once nothing is pending.
    """
    options = []
    for i in processes_of(model):
        if i in pending:
            options.extend(("step", i, st) for st in program_steps(model, state, i))
        if i not in inserted:
            options.extend(("user", i, st) for st in user_steps(model, state, i))
    if not pending:
        options.append(("close", None, None))
    return options


class RoundAdversary(Adversary):
    """Template for round-based policies; subclasses pick the next program step."""

    schemas = ("unit-time",)
    memoizable = True

    def __init__(self, model: Model, eager_user: bool = True):
        self.model = model
        self.eager_user = eager_user

    def phase_key(self, frag):
        phase = round_phase(self.model, frag)
        return None if phase is None else (phase.pending, phase.inserted)

    def decide(self, frag):
        model = self.model
        phase = round_phase(model, frag)
        if phase is None:
            return model.time_step(frag.state, 1)
        state = frag.state
        if self.eager_user:
            for i in processes_of(model):
                if i not in phase.inserted:
                    us = user_steps(model, state, i)
                    if us:
                        return us[0]
        if not phase.pending:
            return model.time_step(state, 1)
        return self.pick(state, phase)

    def pick(self, state: State, phase: RoundPhase) -> Step:
        raise NotImplementedError


def _ordered(pending) -> list:
    return sorted(pending, key=lambda i: -1 if i is None else i)


class RoundRobin(RoundAdversary):
    """Pending processes in increasing index order, first step variant."""

    name = "round-robin"

    def pick(self, state, phase):
        i = _ordered(phase.pending)[0]
        return program_steps(self.model, state, i)[0]


class ReverseRoundRobin(RoundAdversary):
    name = "reverse-round-robin"

    def pick(self, state, phase):
        i = _ordered(phase.pending)[-1]
        return program_steps(self.model, state, i)[-1]


class GreedyBlocker(RoundAdversary):
    """Schedules steps that keep committed processes blocked before progress steps.

    Relies on the model's ``blocking_rank(state, i)`` (lower runs earlier);
    models without it are scheduled round-robin.
    """

    name = "greedy-blocker"

    def pick(self, state, phase):
        rank = getattr(self.model, "blocking_rank", None)
        order = _ordered(phase.pending)
        if rank is not None:
            order.sort(key=lambda i: (rank(state, i), i))
        return program_steps(self.model, state, order[0])[0]


class PolicyTableAdversary(RoundAdversary):
    """Plays a solved game policy; unknown situations fall back to round-robin.

    ``table`` maps ``(untimed state, pending, inserted, round)`` to an index
    into :func:`round_options`.
    """

    name = "policy-table"

    def __init__(self, model: Model, table: dict, name: str = "policy-table"):
        super().__init__(model)
        self.table = table
        self.name = name
        self._fallback = RoundRobin(model)

    def phase_key(self, frag):
        base = super().phase_key(frag)
        return None if base is None else base + (frag.time - frag.start_time,)

    def decide(self, frag):
        model = self.model
        phase = round_phase(model, frag)
        if phase is None:
            return model.time_step(frag.state, 1)
        rnd = frag.time - frag.start_time
        key = (model.untimed(frag.state), phase.pending, phase.inserted, int(rnd))
        idx = self.table.get(key)
        if idx is None:
            return self._fallback.decide(frag)
        kind, _, step = round_options(model, frag.state, phase.pending, phase.inserted)[idx]
        if kind == "close":
            return model.time_step(frag.state, 1)
        return step

    def rows(self) -> list[dict]:
        """Serializable rows: (state key, round-phase key) -> option index."""
        out = []
        for (state, pending, inserted, rnd), idx in self.table.items():
            out.append(
                {
                    "state": self.model.encode(state).hex(),
                    "phase": _phase_label(pending, inserted, rnd),
                    "choice": idx,
                }
            )
        out.sort(key=lambda r: (r["state"], r["phase"]))
        return out


def _phase_label(pending, inserted, rnd) -> str:
    def fmt(xs):
        return ",".join(str(x) for x in _ordered(xs))

    return f"round={rnd};pending={fmt(pending)};inserted={fmt(inserted)}"


class IdleViolator(Adversary):
    """Lets time pass in steps of 2 without scheduling anyone; breaks Unit-Time."""

    name = "idle-violator"

    def __init__(self, model: Model):
        self.model = model

    def decide(self, frag):
        return self.model.time_step(frag.state, 2)


def builtin_adversaries(model: Model, policy: dict | None = None) -> list[Adversary]:
    advs: list[Adversary] = [RoundRobin(model), ReverseRoundRobin(model), GreedyBlocker(model)]
    if policy is not None:
        advs.append(PolicyTableAdversary(model, policy))
    return advs


ADVERSARY_FACTORIES: dict[str, Callable[[Model], Adversary]] = {
    "round-robin": RoundRobin,
    "reverse-round-robin": ReverseRoundRobin,
    "greedy-blocker": GreedyBlocker,
    "idle-violator": IdleViolator,
}


def make_adversary(name: str, model: Model) -> Adversary:
    try:
        return ADVERSARY_FACTORIES[name](model)
    except KeyError:
        raise KeyError(f"unknown adversary {name!r}") from None


# --- exhaustive enumeration --------------------------------------------------


def _choices(model, frag, allow_halt):
    steps = enabled_steps(model, frag.state)
    if allow_halt or not steps:
        return [HALT] + steps
    return steps


def enumerate_adversaries(
    model: Model, start: State, horizon: int, allow_halt: bool = True
) -> Iterator[TableAdversary]:
    """Every deterministic adversary, up to behaviour on fragments of < ``horizon`` steps.

    Fragments that cannot occur under an adversary are left out of its
    table, so each yielded adversary is behaviourally distinct.
    """

    def tables(frag: ExecutionFragment) -> list[dict]:
        if frag.length >= horizon:
            return [{}]
        out = []
        for choice in _choices(model, frag, allow_halt):
            if choice is None:
                out.append({frag.key(): None})
                continue
            subs = [tables(frag.extend(choice, s)) for s, _ in choice.next.support]
            for combo in itertools.product(*subs):
                table = {frag.key(): choice}
                for part in combo:
                    table.update(part)
                out.append(table)
        return out

    for k, table in enumerate(tables(ExecutionFragment(start))):
        yield TableAdversary(table, name=f"enum-{k}")


def adversary_outcomes(
    model: Model, start: State, event: EventSchema, horizon: int, allow_halt: bool = True
) -> list[Fraction]:
    """P(event) under each adversary of :func:`enumerate_adversaries`, same order.

    Step-count horizons only.
    """

    def outcomes(frag: ExecutionFragment, status) -> list[Fraction]:
        if frag.length >= horizon:
            v = status if decided(status) else event.final(status)
            return [ONE if v else ZERO]
        out = []
        for choice in _choices(model, frag, allow_halt):
            if choice is None:
                v = status if decided(status) else event.final(status)
                out.append(ONE if v else ZERO)
                continue
            subs = []
            for s, w in choice.next.support:
                child = frag.extend(choice, s)
                st = status if decided(status) else event.advance(
                    status, choice.action, s, child.time, child.length)
                subs.append([(w * p) for p in outcomes(child, st)])
            out.extend(sum(combo, ZERO) for combo in itertools.product(*subs))
        return out

    frag = ExecutionFragment(start)
    return outcomes(frag, event.initial(start, frag.time, 0))


def min_over_adversaries(
    model: Model, start: State, event: EventSchema, horizon: int, allow_halt: bool = True
) -> Fraction:
    """Minimum of P(event) over all deterministic adversaries (history recursion)."""

    def best(frag: ExecutionFragment, status) -> Fraction:
        if decided(status):
            return ONE if status else ZERO
        if frag.length >= horizon:
            return ONE if event.final(status) else ZERO
        vals = []
        for choice in _choices(model, frag, allow_halt):
            if choice is None:
                vals.append(ONE if event.final(status) else ZERO)
                continue
            v = ZERO
            for s, w in choice.next.support:
                child = frag.extend(choice, s)
                v += w * best(child, event.advance(status, choice.action, s, child.time,
                                                   child.length))
            vals.append(v)
        return min(vals)

    frag = ExecutionFragment(start)
    return best(frag, event.initial(start, frag.time, 0))


def count_adversaries(model: Model, start: State, horizon: int, allow_halt: bool = True) -> int:
    """How many adversaries :func:`enumerate_adversaries` would yield."""

    def count(frag: ExecutionFragment) -> int:
        if frag.length >= horizon:
            return 1
        total = 0
        for choice in _choices(model, frag, allow_halt):
            if choice is None:
                total += 1
                continue
            prod = 1
            for s, _ in choice.next.support:
                prod *= count(frag.extend(choice, s))
            total += prod
        return total

    return count(ExecutionFragment(start))
