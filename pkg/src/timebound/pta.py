"""Probabilistic automata, execution fragments and finite execution trees.

A model is presented lazily: start states plus a function returning the
steps enabled at a state.  Every step carries a finite distribution with
exact rational weights.  Time lives on fragment entries; time passage is a
family of non-probabilistic ``nu`` steps that the model supplies on demand.
"""

from __future__ import annotations

import enum
import struct
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Hashable, Iterable, Iterator, Sequence

from .errors import (
    BudgetExceededError,
    JunctionError,
    ModelDomainError,
    SchemaViolationError,
)

State = Hashable
ZERO = Fraction(0)
ONE = Fraction(1)


def length_prefixed(parts: Iterable[bytes]) -> bytes:
    """Concatenate byte strings, each preceded by its 4-byte big-endian length."""
    return b"".join(struct.pack(">I", len(p)) + p for p in parts)


def split_length_prefixed(data: bytes) -> list[bytes]:
    parts = []
    pos = 0
    while pos < len(data):
        if pos + 4 > len(data):
            raise ModelDomainError("truncated length prefix")
        (size,) = struct.unpack_from(">I", data, pos)
        pos += 4
        if pos + size > len(data):
            raise ModelDomainError("truncated encoded part")
        parts.append(data[pos : pos + size])
        pos += size
    return parts


class ActionKind(enum.Enum):
    EXTERNAL = "external"
    INTERNAL = "internal"
    TIME = "time-advance"


@dataclass(frozen=True)
class Action:
    """A labelled action.

    ``process`` names the process performing the action in multi-process
    models; ``user`` marks actions under the environment's control (they
    never make a process ready).
    """

    name: str
    kind: ActionKind = ActionKind.INTERNAL
    process: int | None = None
    user: bool = False


NU = Action("nu", ActionKind.TIME)


@dataclass(frozen=True)
class Distribution:
    """Finite distribution over states with exact weights summing to one."""

    support: tuple[tuple[State, Fraction], ...]

    def __post_init__(self):
        if not self.support:
            raise ValueError("empty distribution")
        seen = set()
        total = ZERO
        for state, weight in self.support:
            if not isinstance(weight, Fraction):
                raise TypeError(f"weight {weight!r} is not a Fraction")
            if not ZERO < weight <= ONE:
                raise ValueError(f"weight {weight} outside (0, 1]")
            if state in seen:
                raise ValueError(f"duplicate support state {state!r}")
            seen.add(state)
            total += weight
        if total != ONE:
            raise ValueError(f"weights sum to {total}, not 1")

    @classmethod
    def point(cls, state: State) -> "Distribution":
        return cls(((state, ONE),))

    @classmethod
    def uniform(cls, states: Sequence[State]) -> "Distribution":
        w = Fraction(1, len(states))
        return cls(tuple((s, w) for s in states))

    @classmethod
    def of(cls, mapping: dict) -> "Distribution":
        return cls(tuple((s, Fraction(w)) for s, w in mapping.items()))

    def states(self) -> tuple[State, ...]:
        return tuple(s for s, _ in self.support)

    def weight(self, state: State) -> Fraction:
        for s, w in self.support:
            if s == state:
                return w
        return ZERO

    def __contains__(self, state: State) -> bool:
        return any(s == state for s, _ in self.support)

    def __len__(self) -> int:
        return len(self.support)


@dataclass(frozen=True)
class Step:
    source: State
    action: Action
    next: Distribution
    duration: Fraction = ZERO

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("negative duration")
        if self.duration > 0 and self.action.kind is not ActionKind.TIME:
            raise ValueError("only time-advance steps may take time")
        if self.action.kind is ActionKind.TIME and len(self.next) != 1:
            raise ValueError("time-advance steps are not probabilistic")

    @property
    def is_time_advance(self) -> bool:
        return self.action.kind is ActionKind.TIME


class Model:
    """Base class for lazily presented probabilistic automata.

    Subclasses implement :meth:`start_states`, :meth:`enabled`,
    :meth:`contains`, :meth:`encode` and :meth:`decode`.  Models with
    processes set ``processes`` to the process count and tag each action
    with its process.
    """

    name = "model"
    processes = 0

    def start_states(self) -> tuple[State, ...]:
        raise NotImplementedError

    def enabled(self, state: State) -> list[Step]:
        raise NotImplementedError

    def contains(self, state: State) -> bool:
        raise NotImplementedError

    def encode(self, state: State) -> bytes:
        raise NotImplementedError

    def decode(self, data: bytes) -> State:
        raise NotImplementedError

    # time ------------------------------------------------------------------
    def advance(self, state: State, delta: Fraction) -> State:
        """State reached after ``delta`` time passes; untimed states are unchanged."""
        return state

    def untimed(self, state: State) -> State:
        """The state with any stored clock reset, for time-independent keys."""
        return state

    def clock(self, state: State) -> Fraction | None:
        """Time stored in the state, if the model keeps one."""
        return None

    def time_step(self, state: State, delta) -> Step:
        delta = Fraction(delta)
        if delta <= 0:
            raise ValueError("time passage must be positive")
        return Step(state, NU, Distribution.point(self.advance(state, delta)), delta)

    # processes -------------------------------------------------------------
    def program_steps(self, state: State, i: int) -> list[Step]:
        return [
            st
            for st in enabled_steps(self, state)
            if st.action.process == i and not st.action.user
        ]

    def user_steps(self, state: State, i: int) -> list[Step]:
        return [
            st for st in enabled_steps(self, state) if st.action.process == i and st.action.user
        ]

    def is_ready(self, state: State, i: int) -> bool:
        return bool(self.program_steps(state, i))

    def ready_processes(self, state: State) -> frozenset[int]:
        return frozenset(i for i in range(self.processes) if self.is_ready(state, i))

    def permits(self, state: State, step: "Step") -> bool:
        """Whether ``step`` is one of the steps enabled at ``state``."""
        return step in self.enabled(state)

    def is_fully_probabilistic(self) -> bool:
        if len(self.start_states()) != 1:
            return False
        return all(len(self.enabled(s)) <= 1 for s in reachable_states(self))


def _distribution_key(model: Model, dist: Distribution) -> tuple:
    return tuple(
        sorted((model.encode(s), w.numerator, w.denominator) for s, w in dist.support)
    )


def step_sort_key(model: Model, step: Step) -> tuple:
    return (step.action.name, _distribution_key(model, step.next))


def enabled_steps(model: Model, state: State) -> list[Step]:
    """All steps enabled at ``state`` in canonical order."""
    if not model.contains(state):
        raise ModelDomainError(f"{state!r} is not a state of {model.name}")
    steps = model.enabled(state)
    for st in steps:
        if st.source != state:
            raise ModelDomainError(f"step {st.action.name} has foreign source")
    return sorted(steps, key=lambda st: step_sort_key(model, st))


def is_valid_choice(model: Model, state: State, step: Step) -> bool:
    if step.source != state:
        return False
    if step.is_time_advance:
        return step.duration > 0 and step.next == Distribution.point(
            model.advance(state, step.duration)
        )
    return model.permits(state, step)


def check_choice(model: Model, state: State, choice: Step | None) -> None:
    if choice is not None and not is_valid_choice(model, state, choice):
        name = getattr(choice, "action", None)
        raise SchemaViolationError(f"choice {name} is not enabled at {state!r}")


def sample_step(step: Step, rng) -> State:
    """Draw the target state of ``step`` using ``rng.random()``."""
    support = step.next.support
    if len(support) == 1:
        return support[0][0]
    x = rng.random()
    acc = 0.0
    for state, weight in support:
        acc += weight.numerator / weight.denominator
        if x < acc:
            return state
    return support[-1][0]


def reachable_states(
    model: Model, starts: Iterable[State] | None = None, max_states: int | None = None
) -> list[State]:
    """Closure of the start states under all enabled (non-time) steps, BFS order."""
    frontier = deque(model.start_states() if starts is None else starts)
    seen = set(frontier)
    order = list(frontier)
    while frontier:
        s = frontier.popleft()
        for st in model.enabled(s):
            for t, _ in st.next.support:
                if t not in seen:
                    seen.add(t)
                    order.append(t)
                    frontier.append(t)
                    if max_states is not None and len(order) > max_states:
                        raise BudgetExceededError(
                            f"more than {max_states} reachable states", len(order)
                        )
    return order


class ExecutionFragment:
    """Immutable alternating sequence s0 a1 s1 ... with a time per state.

    Stored as a parent-linked chain so that extension is O(1) and shares
    the prefix.
    """

    __slots__ = ("parent", "step", "state", "time", "length", "root")

    def __init__(self, state: State, time=ZERO):
        self.parent: ExecutionFragment | None = None
        self.step: Step | None = None
        self.state = state
        self.time = Fraction(time)
        if self.time < 0:
            raise ValueError("negative time")
        self.length = 0
        self.root = self

    def extend(self, step: Step, state: State) -> "ExecutionFragment":
        if step.source != self.state:
            raise JunctionError(f"step {step.action.name} does not start at last state")
        if state not in step.next:
            raise JunctionError(f"{state!r} is not in the support of {step.action.name}")
        child = object.__new__(ExecutionFragment)
        child.parent = self
        child.step = step
        child.state = state
        child.time = self.time + step.duration if step.duration else self.time
        child.length = self.length + 1
        child.root = self.root
        return child

    @property
    def fstate(self) -> State:
        return self.root.state

    @property
    def lstate(self) -> State:
        return self.state

    @property
    def start_time(self) -> Fraction:
        return self.root.time

    def nodes(self) -> list["ExecutionFragment"]:
        out = []
        node: ExecutionFragment | None = self
        while node is not None:
            out.append(node)
            node = node.parent
        out.reverse()
        return out

    def states(self) -> list[State]:
        return [n.state for n in self.nodes()]

    def steps(self) -> list[Step]:
        return [n.step for n in self.nodes()[1:]]

    def actions(self) -> list[Action]:
        return [st.action for st in self.steps()]

    def times(self) -> list[Fraction]:
        return [n.time for n in self.nodes()]

    def entries(self) -> tuple:
        """(s0, t0, a1, s1, t1, ...) flattened."""
        out: list[Any] = []
        for node in self.nodes():
            if node.step is not None:
                out.append(node.step.action)
            out.append(node.state)
            out.append(node.time)
        return tuple(out)

    def key(self) -> tuple:
        """Hashable identity including the chosen steps."""
        return tuple((n.step, n.state, n.time) for n in self.nodes())

    def __len__(self) -> int:
        return self.length

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExecutionFragment):
            return NotImplemented
        return self.length == other.length and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        parts = [repr(self.fstate)]
        for st, s in zip(self.steps(), self.states()[1:]):
            parts.append(st.action.name)
            parts.append(repr(s))
        return f"ExecutionFragment({' '.join(parts)})"

    def prefix(self, length: int) -> "ExecutionFragment":
        if not 0 <= length <= self.length:
            raise ValueError("prefix length out of range")
        node = self
        while node.length > length:
            node = node.parent
        return node

    def is_prefix_of(self, other: "ExecutionFragment") -> bool:
        return self.length <= other.length and other.prefix(self.length) == self

    def rebased(self, start_time) -> "ExecutionFragment":
        """Same states and steps, shifted so that the first entry has ``start_time``."""
        out = ExecutionFragment(self.fstate, start_time)
        for st, s in zip(self.steps(), self.states()[1:]):
            out = out.extend(st, s)
        return out

    def validate(self, model: Model) -> None:
        """Check every transition against the model and the clock hook."""
        for node in self.nodes():
            if not model.contains(node.state):
                raise ModelDomainError(f"{node.state!r} not in model")
            clock = model.clock(node.state)
            if clock is not None and clock != node.time:
                raise JunctionError(f"state clock {clock} disagrees with time {node.time}")
            if node.parent is not None:
                check_choice(model, node.parent.state, node.step)


def concat(prefix: ExecutionFragment, suffix: ExecutionFragment) -> ExecutionFragment:
    """prefix followed by suffix; they must meet at the same state and time."""
    if prefix.lstate != suffix.fstate:
        raise JunctionError("last state of prefix differs from first state of suffix")
    if prefix.time != suffix.start_time:
        raise JunctionError(f"time mismatch at junction: {prefix.time} vs {suffix.start_time}")
    out = prefix
    for st, s in zip(suffix.steps(), suffix.states()[1:]):
        out = out.extend(st, s)
    return out


@dataclass(frozen=True)
class Horizon:
    """How far an execution is explored: by total time or by step count."""

    bound: Fraction
    measure: str = "time"

    def __post_init__(self):
        object.__setattr__(self, "bound", Fraction(self.bound))
        if self.measure not in ("time", "steps"):
            raise ValueError(f"unknown horizon measure {self.measure!r}")

    def allows(self, frag: ExecutionFragment, step: Step) -> bool:
        """Whether appending ``step`` to ``frag`` stays within the horizon."""
        if self.measure == "steps":
            return frag.length + 1 <= self.bound
        return frag.time + step.duration <= self.bound

    def covers(self, time: Fraction, index: int) -> bool:
        if self.measure == "steps":
            return index <= self.bound
        return time <= self.bound


@dataclass
class TreeNode:
    fragment: ExecutionFragment
    probability: Fraction
    choice: Step | None = None
    children: list["TreeNode"] = field(default_factory=list)
    truncated: bool = False

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class ExecutionTree:
    """Finite-horizon execution of a model under one adversary."""

    root: TreeNode
    horizon: Horizon
    size: int

    def leaves(self) -> Iterator[TreeNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                yield node
            else:
                stack.extend(reversed(node.children))

    def nodes(self) -> Iterator[TreeNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))


def build_tree(
    model: Model,
    adversary,
    start: State | ExecutionFragment,
    horizon: Horizon,
    max_nodes: int = 1_000_000,
) -> ExecutionTree:
    """Unfold ``start`` under ``adversary`` until the horizon.

    Leaves are fragments where the adversary halts or the next chosen step
    would leave the horizon (``truncated``).
    """
    frag = start if isinstance(start, ExecutionFragment) else ExecutionFragment(start)
    root = TreeNode(frag, ONE)
    size = 1
    stack = [root]
    while stack:
        node = stack.pop()
        choice = adversary.decide(node.fragment)
        check_choice(model, node.fragment.lstate, choice)
        if choice is None:
            continue
        if not horizon.allows(node.fragment, choice):
            node.truncated = True
            continue
        node.choice = choice
        for s, w in choice.next.support:
            child = TreeNode(node.fragment.extend(choice, s), node.probability * w)
            node.children.append(child)
            size += 1
            if size > max_nodes:
                raise BudgetExceededError(f"execution tree exceeds {max_nodes} nodes", size)
        stack.extend(node.children)
    return ExecutionTree(root, horizon, size)


class ExplicitModel(Model):
    """Model given by explicit tables; states are strings or ints.

    ``transitions`` maps a state to a list of ``(action, {target: weight})``
    pairs, where ``action`` is an :class:`Action` or a bare name.
    """

    def __init__(
        self,
        states: Sequence[State],
        start: Sequence[State],
        transitions: dict[State, list],
        name: str = "explicit",
        processes: int = 0,
    ):
        if not start:
            raise ModelDomainError("a model needs at least one start state")
        self.name = name
        self.processes = processes
        self._states = tuple(states)
        self._index = {s: k for k, s in enumerate(self._states)}
        self._start = tuple(start)
        for s in self._start:
            if s not in self._index:
                raise ModelDomainError(f"start state {s!r} unknown")
        self._steps: dict[State, list[Step]] = {s: [] for s in self._states}
        for s, entries in transitions.items():
            if s not in self._index:
                raise ModelDomainError(f"unknown state {s!r}")
            for action, dist in entries:
                if isinstance(action, str):
                    action = Action(action)
                d = dist if isinstance(dist, Distribution) else Distribution.of(dist)
                for t in d.states():
                    if t not in self._index:
                        raise ModelDomainError(f"unknown target {t!r}")
                self._steps[s].append(Step(s, action, d))

    @property
    def states(self) -> tuple[State, ...]:
        return self._states

    def start_states(self):
        return self._start

    def contains(self, state):
        try:
            return state in self._index
        except TypeError:
            return False

    def enabled(self, state):
        return list(self._steps[state])

    def encode(self, state):
        return length_prefixed([repr(state).encode()])

    def decode(self, data):
        (body,) = split_length_prefixed(data)
        text = body.decode()
        for s in self._states:
            if repr(s) == text:
                return s
        raise ModelDomainError(f"no state encodes as {text}")

