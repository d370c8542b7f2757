"""Exact min-max solver for time-bound statements under round semantics.

Time advances in unit rounds.  Within a round every process that was ready
when the round opened takes exactly one step, in an order the adversary
picks adaptively; the adversary also resolves step variants and may insert
user actions (at most one per process per round).  A state reached during
round ``r`` counts as reached at time ``r``; the start state counts at 0.

Game nodes are ``(state, pending, inserted, round, event status, consumed
conditions)``.  Adversary nodes minimise, chance nodes average.  Because
the horizon is finite and the game is turn based, policies that depend only
on the node attain the minimum over all history-dependent adversaries.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .adversary import ready_set, round_options
from .calculus import TimeBoundStatement
from .errors import BudgetExceededError, UnsupportedModelError
from .events import EventSchema, First, ReachWithin, decided
from .pta import ONE, ZERO, Model, State, reachable_states

DEFAULT_MAX_NODES = 5_000_000


@dataclass
class GameResult:
    value: Fraction
    nodes: int
    starts: int
    rounds: int
    worst_start: State | None = None
    policy: dict | None = None
    statement: TimeBoundStatement | None = None
    per_start: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        assert ZERO <= self.value <= ONE

    @property
    def holds(self) -> bool:
        if self.statement is None:
            raise ValueError("no statement attached")
        return self.value >= self.statement.prob


class RoundGame:
    def __init__(
        self,
        model: Model,
        event: EventSchema,
        rounds: int,
        conditions: Sequence[First] = (),
        memo: bool = True,
        max_nodes: int = DEFAULT_MAX_NODES,
    ):
        if not model.processes:
            raise UnsupportedModelError(f"{model.name} has no process metadata")
        self.model = model
        self.event = event
        self.rounds = rounds
        self.conditions = {c.action: c for c in conditions}
        if len(self.conditions) != len(conditions):
            raise ValueError("at most one condition per action")
        self.memo = memo
        self.max_nodes = max_nodes
        self.cache: dict = {}
        self.choice: dict = {}
        self.count = 0

    # ------------------------------------------------------------------
    def value_from(self, start: State) -> Fraction:
        model = self.model
        start = model.untimed(start)
        status = self.event.initial(start, ZERO, 0)
        if decided(status):
            return ONE if status else ZERO
        if self.rounds <= 0:
            return ONE if self.event.final(status) else ZERO
        return self._adv(start, ready_set(model, start), frozenset(), 1, status, frozenset())

    def _adv(self, state, pending, inserted, rnd, status, consumed) -> Fraction:
        key = (state, pending, inserted, rnd, status, consumed)
        if self.memo:
            hit = self.cache.get(key)
            if hit is not None:
                return hit
        self.count += 1
        if self.count > self.max_nodes:
            raise BudgetExceededError(f"game exceeds {self.max_nodes} nodes", self.count)
        best = None
        best_idx = -1
        for idx, (kind, proc, step) in enumerate(
            round_options(self.model, state, pending, inserted)
        ):
            if kind == "close":
                if rnd >= self.rounds:
                    v = ONE if self.event.final(status) else ZERO
                else:
                    v = self._adv(
                        state, ready_set(self.model, state), frozenset(), rnd + 1, status,
                        consumed,
                    )
            else:
                v = self._chance(step, kind, proc, pending, inserted, rnd, status, consumed)
            if best is None or v < best:
                best, best_idx = v, idx
                if best == 0:
                    break
        if best is None:
            raise RuntimeError("adversary node without options")
        if self.memo:
            self.cache[key] = best
            self.choice[key] = best_idx
        return best

    def _chance(self, step, kind, proc, pending, inserted, rnd, status, consumed) -> Fraction:
        support = step.next.support
        name = step.action.name
        cond = self.conditions.get(name)
        if cond is not None and name not in consumed:
            kept = [(s, w) for s, w in support if cond.target(s)]
            if not kept:
                return ONE
            mass = sum((w for _, w in kept), ZERO)
            support = [(s, w / mass) for s, w in kept]
            consumed = consumed | {name}
        if kind == "step":
            pending = pending - {proc}
        else:
            inserted = inserted | {proc}
        time = Fraction(rnd)
        total = ZERO
        for s, w in support:
            st = self.event.advance(status, step.action, s, time, 0)
            if decided(st):
                if st:
                    total += w
            else:
                total += w * self._adv(s, pending, inserted, rnd, st, consumed)
        return total

    # ------------------------------------------------------------------
    def witness_policy(self, start: State) -> dict:
        """Minimising choices at every node reachable from ``start`` under them.

        Keys are ``(state, pending, inserted, round)``.
        """
        if not self.memo:
            raise ValueError("witness policies need memoization")
        model = self.model
        start = model.untimed(start)
        table: dict = {}
        status = self.event.initial(start, ZERO, 0)
        if decided(status) or self.rounds <= 0:
            return table
        stack = [(start, ready_set(model, start), frozenset(), 1, status, frozenset())]
        seen = set()
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            state, pending, inserted, rnd, status, consumed = node
            idx = self.choice.get(node)
            if idx is None:
                self._adv(*node)
                idx = self.choice[node]
            table.setdefault((state, pending, inserted, rnd), idx)
            kind, proc, step = round_options(model, state, pending, inserted)[idx]
            if kind == "close":
                if rnd < self.rounds:
                    stack.append(
                        (state, ready_set(model, state), frozenset(), rnd + 1, status, consumed)
                    )
                continue
            support = step.next.support
            cond = self.conditions.get(step.action.name)
            if cond is not None and step.action.name not in consumed:
                support = [(s, w) for s, w in support if cond.target(s)]
                consumed = consumed | {step.action.name}
            p2 = pending - {proc} if kind == "step" else pending
            i2 = inserted | {proc} if kind == "user" else inserted
            for s, _ in support:
                st = self.event.advance(status, step.action, s, Fraction(rnd), 0)
                if not decided(st):
                    stack.append((s, p2, i2, rnd, st, consumed))
        return table


def _sorted_states(model: Model, states) -> list:
    return sorted(states, key=model.encode)


def start_states_for(model: Model, predicate, max_states: int = 2_000_000) -> list:
    """Reachable states satisfying ``predicate``, in canonical order."""
    return _sorted_states(
        model, [s for s in reachable_states(model, max_states=max_states) if predicate(s)]
    )


def solve(
    model: Model,
    starts: Sequence[State],
    event: EventSchema,
    rounds: int,
    conditions: Sequence[First] = (),
    memo: bool = True,
    max_nodes: int = DEFAULT_MAX_NODES,
    witness: bool = False,
    statement: TimeBoundStatement | None = None,
) -> GameResult:
    """Minimum over ``starts`` and all round adversaries of P(event)."""
    game = RoundGame(model, event, rounds, conditions, memo, max_nodes)
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 20_000))
    try:
        best = None
        worst = None
        per_start = {}
        for s in starts:
            v = game.value_from(s)
            per_start[s] = v
            if best is None or v < best:
                best, worst = v, s
        policy = game.witness_policy(worst) if (witness and worst is not None) else None
    finally:
        sys.setrecursionlimit(limit)
    if best is None:
        best = ONE  # vacuous: no start states
    return GameResult(
        value=best,
        nodes=game.count,
        starts=len(per_start),
        rounds=rounds,
        worst_start=worst,
        policy=policy,
        statement=statement,
        per_start=per_start,
    )


def verify_exact(
    model: Model,
    stmt: TimeBoundStatement,
    starts: Sequence[State] | None = None,
    memo: bool = True,
    max_nodes: int = DEFAULT_MAX_NODES,
    witness: bool = False,
) -> GameResult:
    """Check ``stmt`` under round semantics; ``result.holds`` gives the verdict.

    Without explicit ``starts`` every reachable state in the source set is
    tried, which is only feasible for small rings.
    """
    if stmt.time.denominator != 1:
        raise UnsupportedModelError("round semantics needs an integral time bound")
    if starts is None:
        starts = start_states_for(model, stmt.source)
    event = ReachWithin(stmt.target, stmt.time)
    return solve(
        model, starts, event, int(stmt.time), memo=memo, max_nodes=max_nodes,
        witness=witness, statement=stmt,
    )


def brute_force_value(
    model: Model,
    stmt: TimeBoundStatement,
    allow_halt: bool = False,
    literal: bool = False,
) -> Fraction:
    """Min over source states and all deterministic adversaries, steps as time.

    For explicit models without time passage: ``stmt.time`` counts steps.
    With ``literal`` every adversary is enumerated one by one; otherwise the
    minimum is taken by recursion over execution histories.
    """
    from .adversary import adversary_outcomes, min_over_adversaries

    horizon = int(stmt.time)
    event = ReachWithin(stmt.target, stmt.time, measure="steps")
    best = ONE
    for s in model.states:
        if not stmt.source(s):
            continue
        if literal:
            v = min(adversary_outcomes(model, s, event, horizon, allow_halt))
        else:
            v = min_over_adversaries(model, s, event, horizon, allow_halt)
        best = min(best, v)
    return best
