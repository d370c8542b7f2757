"""Machine-checkable case lemmas about the Lehmann-Rabin ring.

Each scenario is a family of instances, one per process index ``i``.  An
instance gives the start states (reachable states meeting the lemma's
precondition), the conclusion as a reach-within or NEXT event, the time
bound in rounds, and the FIRST conditions on coin flips under which the
conclusion is claimed.  Conditioned instances are solved on the branch set
where every conditioned flip comes out as required.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

from .errors import UnknownScenarioError
from .events import EventSchema, First, Next, ReachWithin
from .lehmann_rabin import (
    EF,
    ER,
    ES,
    LEFT,
    RIGHT,
    D,
    F,
    LRModel,
    LRState,
    P,
    POTENTIAL,
    R,
    S,
    TRYING,
    W,
    in_F,
    in_G,
    in_P,
    in_RT,
    lr_model,
)
from .pta import ONE, Horizon, reachable_states
from .solver import DEFAULT_MAX_NODES, GameResult, solve

Cond = Callable[[int, int], bool]  # (pc, u) -> bool


def is_(*pcs: int, side: int | None = None) -> Cond:
    """Local-state test: pc among ``pcs`` and, if given, ``u == side``."""
    allowed = frozenset(pcs)
    if side is None:
        return lambda pc, u: pc in allowed
    return lambda pc, u: pc in allowed and u == side


def either(*conds: Cond) -> Cond:
    return lambda pc, u: any(c(pc, u) for c in conds)


IDLE = is_(ER, R, F)  # E_R, R, F
IDLE_OR_TRYING = is_(ER, R, *TRYING)  # E_R, R, T


@dataclass(frozen=True)
class Instance:
    index: int
    starts: tuple[LRState, ...]
    event: EventSchema
    rounds: int
    conditions: tuple[First, ...] = ()


@dataclass(frozen=True)
class Scenario:
    name: str
    summary: str
    n: int
    rounds: int
    floor: Fraction
    instances: tuple[Instance, ...] = field(repr=False)

    @property
    def start_count(self) -> int:
        return sum(len(inst.starts) for inst in self.instances)


@lru_cache(maxsize=4)
def _reachable(n: int) -> tuple[LRState, ...]:
    model = lr_model(n)
    return tuple(sorted(reachable_states(model), key=model.encode))


def _flip(i: int, n: int, side: int) -> First:
    j = i % n
    return First(f"flip_{j}", lambda s: s.u[j] == side, Horizon(Fraction(10**6)))


def _local_family(n: int, conds: dict[int, Cond], extra=None) -> tuple[LRState, ...]:
    """Reachable states whose local states at offsets ``conds`` pass their tests."""
    out = []
    for s in _reachable(n):
        if all(c(s.pc[k % n], s.u[k % n]) for k, c in conds.items()):
            if extra is None or extra(s):
                out.append(s)
    return tuple(out)


def _reach(target, rounds: int) -> ReachWithin:
    return ReachWithin(target, Fraction(rounds))


def _some_in_p(*procs: int) -> Callable[[LRState], bool]:
    return lambda s: any(s.pc[j % s.n] == P for j in procs)


# --- individual lemmas -------------------------------------------------------


def _exit_drains(n):
    for i in range(n):
        starts = _local_family(n, {i: is_(EF, ES, ER)})
        yield Instance(i, starts, _reach(lambda s, i=i: s.pc[i] == R, 3), 3)


def _left_neighbour_case(pre: Cond, rounds: int):
    """i waits for its left resource while i-1 flips left first."""

    def build(n):
        for i in range(n):
            starts = _local_family(n, {i - 1: pre, i: is_(W, side=LEFT)})
            target = lambda s, i=i: s.pc[(i - 1) % n] == P or s.pc[i] == S
            yield Instance(i, starts, _reach(target, rounds), rounds, (_flip(i - 1, n, LEFT),))

    return build


def _first_tester_wins(n):
    """Whichever of i, i+1 tests resource i first enters P."""
    rounds = 6
    left_alts = ((is_(W, S, side=LEFT), False), (either(IDLE, is_(D, side=LEFT)), True))
    right_alts = ((is_(W, S, side=RIGHT), False), (either(IDLE, is_(D, side=RIGHT)), True))
    for i in range(n):
        j = (i + 1) % n
        event = Next(
            ((f"second_{i}", lambda s, i=i: s.pc[i] == P),
             (f"second_{j}", lambda s, j=j: s.pc[j] == P)),
            Horizon(Fraction(rounds)),
        )
        for ci, flip_i in left_alts:
            for cj, flip_j in right_alts:
                conds = []
                if flip_i:
                    conds.append(_flip(i, n, LEFT))
                if flip_j:
                    conds.append(_flip(j, n, RIGHT))
                starts = _local_family(n, {i: ci, i + 1: cj})
                yield Instance(i, starts, event, rounds, tuple(conds))


def _committed_pair(n):
    for i in range(n):
        target = _reach(_some_in_p(i, i + 1), 1)
        yield Instance(i, _local_family(n, {i: is_(S, side=LEFT), i + 1: is_(W, S, side=RIGHT)}),
                       target, 1)
        yield Instance(i, _local_family(n, {i: is_(W, S, side=LEFT), i + 1: is_(S, side=RIGHT)}),
                       target, 1)


def _committed_and_free(n):
    for i in range(n):
        target = _reach(_some_in_p(i, i + 1), 1)
        yield Instance(
            i,
            _local_family(n, {i: is_(S, side=LEFT), i + 1: either(IDLE, is_(D, side=RIGHT))}),
            target, 1, (_flip(i + 1, n, RIGHT),),
        )
        yield Instance(
            i,
            _local_family(n, {i: either(IDLE, is_(D, side=LEFT)), i + 1: is_(S, side=RIGHT)}),
            target, 1, (_flip(i, n, LEFT),),
        )


def _three_waiting_left(n):
    for i in range(n):
        starts = _local_family(
            n,
            {
                i - 1: IDLE_OR_TRYING,
                i: is_(W, side=LEFT),
                i + 1: either(IDLE, is_(W, D, side=RIGHT)),
            },
        )
        yield Instance(i, starts, _reach(_some_in_p(i - 1, i, i + 1), 5), 5,
                       (_flip(i - 1, n, LEFT), _flip(i + 1, n, RIGHT)))


def _three_waiting_right(n):
    for i in range(n):
        starts = _local_family(
            n,
            {
                i: either(IDLE, is_(W, D, side=LEFT)),
                i + 1: is_(W, side=RIGHT),
                i + 2: IDLE_OR_TRYING,
            },
        )
        yield Instance(i, starts, _reach(_some_in_p(i, i + 1, i + 2), 5), 5,
                       (_flip(i, n, LEFT), _flip(i + 2, n, RIGHT)))


def _pincered(s: LRState, i: int) -> bool:
    """Both neighbours of ``i`` are in W/S/D pointing at ``i``."""
    n = s.n
    a, b = (i - 1) % n, (i + 1) % n
    return (s.pc[a] in POTENTIAL and s.u[a] == RIGHT
            and s.pc[b] in POTENTIAL and s.u[b] == LEFT)


def _g_or_p(s: LRState) -> bool:
    return in_G(s) or in_P(s)


def _flip_unpincered(n):
    starts = tuple(
        s for s in _reachable(n)
        if in_F(s) and any(s.pc[i] == F and not _pincered(s, i) for i in range(n))
    )
    yield Instance(-1, starts, _reach(_g_or_p, 1), 1)


def _flip_pincered(n):
    starts = tuple(
        s for s in _reachable(n)
        if in_F(s) and any(s.pc[i] == F and _pincered(s, i) for i in range(n))
    )
    yield Instance(-1, starts, _reach(_g_or_p, 2), 2)


def _rt_progress(n):
    def fgp(s):
        return in_F(s) or in_G(s) or in_P(s)

    starts = tuple(s for s in _reachable(n) if in_RT(s) and not fgp(s))
    yield Instance(-1, starts, _reach(fgp, 3), 3)


_HALF = Fraction(1, 2)

_REGISTRY = {
    "A.2": ("a process in its exit region reaches R within 3", 3, ONE, _exit_drains),
    "A.4.1": ("i-1 idle, i waits left: i-1 eats or i holds its first within 1",
              1, ONE, _left_neighbour_case(IDLE, 1)),
    "A.4.2": ("i-1 dropping, i waits left: within 2", 2, ONE, _left_neighbour_case(is_(D), 2)),
    "A.4.3": ("i-1 testing second, i waits left: within 3", 3, ONE,
              _left_neighbour_case(is_(S), 3)),
    "A.4.4": ("i-1 waiting, i waits left: within 4", 4, ONE, _left_neighbour_case(is_(W), 4)),
    "A.5": ("i-1 anywhere in E_R, R or trying, i waits left: within 4", 4, ONE,
            _left_neighbour_case(IDLE_OR_TRYING, 4)),
    "A.6": ("first of i, i+1 to test resource i enters P", 6, ONE, _first_tester_wins),
    "A.7": ("committed pair facing each other: one enters P within 1", 1, ONE,
            _committed_pair),
    "A.8": ("one in S facing a neighbour that flips away: one enters P within 1", 1, ONE,
            _committed_and_free),
    "A.9": ("i waits left with i-1 flipping left, i+1 right: one of three eats within 5",
            5, ONE, _three_waiting_left),
    "A.10": ("mirror of A.9: one of i, i+1, i+2 eats within 5", 5, ONE, _three_waiting_right),
    "A.12": ("flipper without pincer reaches G or P within 1 w.p. 1/2", 1, _HALF,
             _flip_unpincered),
    "A.13": ("pincered flipper reaches G or P within 2 w.p. 1/2", 2, _HALF, _flip_pincered),
    "A.15": ("RT outside F, G, P reaches F, G or P within 3", 3, ONE, _rt_progress),
}

SCENARIO_IDS = tuple(_REGISTRY)


def scenario(name: str, n: int = 3) -> Scenario:
    try:
        summary, rounds, floor, build = _REGISTRY[name]
    except KeyError:
        raise UnknownScenarioError(f"unknown scenario {name!r}") from None
    return Scenario(name, summary, n, rounds, floor, tuple(build(n)))


@dataclass
class ScenarioResult:
    scenario: Scenario
    value: Fraction
    nodes: int
    starts: int
    worst: GameResult | None

    @property
    def holds(self) -> bool:
        return self.value >= self.scenario.floor


def check_scenario(
    sc: Scenario, memo: bool = True, max_nodes: int = DEFAULT_MAX_NODES
) -> ScenarioResult:
    """Minimum over instances, start states and round adversaries."""
    model: LRModel = lr_model(sc.n)
    value = ONE
    nodes = 0
    worst = None
    for inst in sc.instances:
        if not inst.starts:
            continue
        res = solve(model, inst.starts, inst.event, inst.rounds, inst.conditions,
                    memo=memo, max_nodes=max_nodes)
        nodes += res.nodes
        if worst is None or res.value < value:
            value, worst = res.value, res
    return ScenarioResult(sc, value, nodes, sc.start_count, worst)
