"""Lehmann-Rabin randomized dining philosophers as a probabilistic automaton.

Processes are numbered 0..n-1 around the ring.  Resource ``i`` sits between
process ``i`` and process ``i+1``; it is the right resource of ``i`` and the
left resource of ``i+1``.  Each process holds a program counter (table rows
0-9 below) and a side variable ``u`` naming the resource it handles first.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

from .errors import ModelDomainError
from .predicates import PredicateRegistry
from .pta import (
    ZERO,
    Action,
    ActionKind,
    Distribution,
    Model,
    Step,
    length_prefixed,
    split_length_prefixed,
)

R, F, W, S, D, P, C, EF, ES, ER = range(10)
PC_NAMES = ("R", "F", "W", "S", "D", "P", "C", "E_F", "E_S", "E_R")
PC_BY_NAME = {name: k for k, name in enumerate(PC_NAMES)}
ACTION_NAMES = ("try", "flip", "wait", "second", "drop", "crit", "exit", "dropf", "drops", "rem")
LEFT, RIGHT = 0, 1
SIDE_NAMES = ("left", "right")

TRYING = frozenset({F, W, S, D, P})
COMMITTED = frozenset({W, S})
POTENTIAL = frozenset({W, S, D})
# pcs holding both adjacent resources / the resource on side u
HOLDS_BOTH = frozenset({P, C, EF})
HOLDS_FIRST = frozenset({S, D, ES})
_USER_PCS = frozenset({R, C})
_EXTERNAL = frozenset({"try", "crit", "exit", "rem"})
_HALF = Fraction(1, 2)


class LRState(NamedTuple):
    pc: tuple[int, ...]
    u: tuple[int, ...]
    res: tuple[bool, ...]
    clock: Fraction = ZERO

    @property
    def n(self) -> int:
        return len(self.pc)

    def local(self, i: int) -> tuple[int, int]:
        return self.pc[i % len(self.pc)], self.u[i % len(self.pc)]

    def describe(self) -> str:
        procs = " ".join(
            f"{PC_NAMES[p]}{'<' if u == LEFT else '>'}" for p, u in zip(self.pc, self.u)
        )
        res = "".join("x" if r else "." for r in self.res)
        return f"[{procs} | {res} | t={self.clock}]"


def make_state(locals_, res=None, clock=ZERO) -> LRState:
    """Build a state from ``[(pc, side), ...]``; pcs and sides may be names.

    When ``res`` is omitted the resource vector is derived from the holders,
    which is the only consistent choice for reachable states.
    """
    pcs = []
    us = []
    for pc, side in locals_:
        pcs.append(PC_BY_NAME[pc] if isinstance(pc, str) else pc)
        us.append(SIDE_NAMES.index(side) if isinstance(side, str) else side)
    pcs_t, us_t = tuple(pcs), tuple(us)
    if res is None:
        n = len(pcs)
        res = tuple(
            holds_right(pcs_t[i], us_t[i]) or holds_left(pcs_t[(i + 1) % n], us_t[(i + 1) % n])
            for i in range(n)
        )
    return LRState(pcs_t, us_t, tuple(bool(r) for r in res), Fraction(clock))


def res_index(n: int, i: int, side: int) -> int:
    """Index of the resource on ``side`` of process ``i``."""
    return i if side == RIGHT else (i - 1) % n


def holds_right(pc: int, u: int) -> bool:
    return pc in HOLDS_BOTH or (pc in HOLDS_FIRST and u == RIGHT)


def holds_left(pc: int, u: int) -> bool:
    return pc in HOLDS_BOTH or (pc in HOLDS_FIRST and u == LEFT)


class LRModel(Model):
    """The ring of ``n`` processes running the Lehmann-Rabin code."""

    def __init__(self, n: int):
        if not isinstance(n, int) or n < 2:
            raise ModelDomainError("ring size must be an integer >= 2")
        self.n = n
        self.processes = n
        self.name = f"lehmann-rabin(n={n})"
        self._actions = {
            (name, i): Action(
                f"{name}_{i}",
                ActionKind.EXTERNAL if name in _EXTERNAL else ActionKind.INTERNAL,
                process=i,
                user=name in ("try", "exit"),
            )
            for name in ACTION_NAMES
            for i in range(n)
        }
        self._cache: dict = {}

    def action(self, name: str, i: int) -> Action:
        return self._actions[(name, i)]

    def start_states(self):
        n = self.n
        return (LRState((R,) * n, (LEFT,) * n, (False,) * n, ZERO),)

    def contains(self, state) -> bool:
        if not isinstance(state, LRState):
            return False
        n = self.n
        return (
            len(state.pc) == n
            and len(state.u) == n
            and len(state.res) == n
            and all(p in range(10) for p in state.pc)
            and all(u in (LEFT, RIGHT) for u in state.u)
            and all(isinstance(r, bool) for r in state.res)
            and isinstance(state.clock, Fraction)
            and state.clock >= 0
        )

    # steps -----------------------------------------------------------------
    def process_steps(self, s: LRState, i: int) -> list[Step]:
        key = (s, i)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        steps = self._compute_steps(s, i)
        if len(self._cache) > 400_000:
            self._cache.clear()
        self._cache[key] = steps
        return steps

    def _with(self, s: LRState, i: int, pc: int, u: int | None = None, free=(), take=()):
        pcs = list(s.pc)
        pcs[i] = pc
        us = s.u
        if u is not None and u != s.u[i]:
            us = list(us)
            us[i] = u
            us = tuple(us)
        res = s.res
        if free or take:
            res = list(res)
            for r in free:
                res[r] = False
            for r in take:
                res[r] = True
            res = tuple(res)
        return LRState(tuple(pcs), us, res, s.clock)

    def _compute_steps(self, s: LRState, i: int) -> list[Step]:
        n = self.n
        pc, u = s.pc[i], s.u[i]
        act = self._actions
        if pc == R:
            return [Step(s, act[("try", i)], Distribution.point(self._with(s, i, F)))]
        if pc == F:
            left = self._with(s, i, W, LEFT)
            right = self._with(s, i, W, RIGHT)
            return [Step(s, act[("flip", i)], Distribution(((left, _HALF), (right, _HALF))))]
        if pc == W:
            r = res_index(n, i, u)
            nxt = s if s.res[r] else self._with(s, i, S, take=(r,))
            return [Step(s, act[("wait", i)], Distribution.point(nxt))]
        if pc == S:
            r2 = res_index(n, i, 1 - u)
            nxt = self._with(s, i, D) if s.res[r2] else self._with(s, i, P, take=(r2,))
            return [Step(s, act[("second", i)], Distribution.point(nxt))]
        if pc == D:
            nxt = self._with(s, i, F, free=(res_index(n, i, u),))
            return [Step(s, act[("drop", i)], Distribution.point(nxt))]
        if pc == P:
            return [Step(s, act[("crit", i)], Distribution.point(self._with(s, i, C)))]
        if pc == C:
            return [Step(s, act[("exit", i)], Distribution.point(self._with(s, i, EF)))]
        if pc == EF:
            # keep the right resource for later / keep the left one
            a = self._with(s, i, ES, RIGHT, free=(res_index(n, i, LEFT),))
            b = self._with(s, i, ES, LEFT, free=(res_index(n, i, RIGHT),))
            steps = [
                Step(s, act[("dropf", i)], Distribution.point(a)),
                Step(s, act[("dropf", i)], Distribution.point(b)),
            ]
            steps.sort(key=lambda st: self.encode(st.next.support[0][0]))
            return steps
        if pc == ES:
            nxt = self._with(s, i, ER, free=(res_index(n, i, u),))
            return [Step(s, act[("drops", i)], Distribution.point(nxt))]
        if pc == ER:
            return [Step(s, act[("rem", i)], Distribution.point(self._with(s, i, R)))]
        raise ModelDomainError(f"bad program counter {pc}")

    def enabled(self, state):
        out = []
        for i in range(self.n):
            out.extend(self.process_steps(state, i))
        return out

    def permits(self, state, step):
        i = step.action.process
        if i is None or not 0 <= i < self.n:
            return False
        return step in self.process_steps(state, i)

    def program_steps(self, state, i):
        if state.pc[i] in _USER_PCS:
            return []
        return self.process_steps(state, i)

    def user_steps(self, state, i):
        if state.pc[i] in _USER_PCS:
            return self.process_steps(state, i)
        return []

    def is_ready(self, state, i):
        return state.pc[i] not in _USER_PCS

    def ready_processes(self, state):
        return frozenset(i for i, p in enumerate(state.pc) if p not in _USER_PCS)

    # time ------------------------------------------------------------------
    def advance(self, state, delta):
        return state._replace(clock=state.clock + delta)

    def clock(self, state):
        return state.clock

    def untimed(self, state):
        return state if state.clock == 0 else state._replace(clock=ZERO)

    # encoding --------------------------------------------------------------
    def encode(self, state) -> bytes:
        locals_ = bytes(b for p, u in zip(state.pc, state.u) for b in (p, u))
        return length_prefixed(
            [
                b"LR",
                state.n.to_bytes(2, "big"),
                locals_,
                bytes(int(r) for r in state.res),
                str(state.clock.numerator).encode(),
                str(state.clock.denominator).encode(),
            ]
        )

    def decode(self, data: bytes) -> LRState:
        try:
            tag, nb, locals_, res, num, den = split_length_prefixed(data)
        except ValueError:
            raise ModelDomainError("malformed state encoding") from None
        if tag != b"LR":
            raise ModelDomainError("not a Lehmann-Rabin state")
        n = int.from_bytes(nb, "big")
        state = LRState(
            tuple(locals_[0::2]),
            tuple(locals_[1::2]),
            tuple(bool(b) for b in res),
            Fraction(int(num.decode()), int(den.decode())),
        )
        if n != self.n or not self.contains(state):
            raise ModelDomainError("encoded state does not belong to this ring")
        return state

    # adversary hint --------------------------------------------------------
    def blocking_rank(self, s: LRState, i: int) -> int:
        """Scheduling priority used by the greedy blocker; lower goes first."""
        n = self.n
        pc, u = s.pc[i], s.u[i]
        if pc == S:
            return 0 if s.res[res_index(n, i, 1 - u)] else 6
        if pc == W:
            first = res_index(n, i, u)
            if s.res[first]:
                return 1
            for j in ((i - 1) % n, (i + 1) % n):
                if s.pc[j] == S and res_index(n, j, 1 - s.u[j]) == first:
                    return 2
            return 5
        if pc == P:
            return 7
        return 3


# --- regions -----------------------------------------------------------------


def potentially_controls(s: LRState, j: int, resource: int) -> bool:
    """Process ``j`` holds or will first seek ``resource``."""
    n = s.n
    j %= n
    return s.pc[j] in POTENTIAL and res_index(n, j, s.u[j]) == resource


def is_good(s: LRState, i: int) -> bool:
    """Committed process whose second resource its neighbour does not potentially control.

    The neighbour must be in E_R, R, F or in W/S/D pointing away; a
    neighbour in P is excluded (that state is in P anyway).
    """
    n = s.n
    pc, u = s.pc[i], s.u[i]
    if pc not in COMMITTED:
        return False
    j = (i + 1) % n if u == LEFT else (i - 1) % n
    pj, uj = s.pc[j], s.u[j]
    if pj in (ER, R, F):
        return True
    away = RIGHT if u == LEFT else LEFT
    return pj in POTENTIAL and uj == away


def in_T(s: LRState) -> bool:
    return any(p in TRYING for p in s.pc)


def in_RT(s: LRState) -> bool:
    return in_T(s) and all(p in TRYING or p in (ER, R) for p in s.pc)


def in_F(s: LRState) -> bool:
    return in_RT(s) and F in s.pc


def in_G(s: LRState) -> bool:
    return in_RT(s) and any(is_good(s, i) for i in range(s.n))


def in_P(s: LRState) -> bool:
    return P in s.pc


def in_C(s: LRState) -> bool:
    return C in s.pc


@dataclass(frozen=True)
class RegionReport:
    memberships: frozenset[str]
    good: tuple[int, ...]

    def __contains__(self, name: str) -> bool:
        return name in self.memberships


def classify(s: LRState) -> RegionReport:
    members = set()
    if in_T(s):
        members.add("T")
    rt = in_RT(s)
    if rt:
        members.add("RT")
        if F in s.pc:
            members.add("F")
    good = tuple(i for i in range(s.n) if is_good(s, i)) if rt else ()
    if good:
        members.add("G")
    if P in s.pc:
        members.add("P")
    if C in s.pc:
        members.add("C")
    return RegionReport(frozenset(members), good)


def lemma_6_1_violations(s: LRState) -> list[tuple[int, str]]:
    """Resources whose value or holders break the holder invariant."""
    n = s.n
    out = []
    for i in range(n):
        mine = holds_right(s.pc[i], s.u[i])
        theirs = holds_left(s.pc[(i + 1) % n], s.u[(i + 1) % n])
        if s.res[i] != (mine or theirs):
            out.append((i, "taken-iff-held"))
        if mine and theirs:
            out.append((i, "single-holder"))
    return out


def check_lemma_6_1(s: LRState) -> bool:
    return not lemma_6_1_violations(s)


REGIONS = PredicateRegistry(
    [("T", in_T), ("RT", in_RT), ("F", in_F), ("G", in_G), ("P", in_P), ("C", in_C)]
)


def lr_model(n: int) -> LRModel:
    return LRModel(n)


def phase_statements(n: int = 3) -> "PhaseChain":
    """The five progress statements whose composition gives T --13, 1/8--> C."""
    from .calculus import PhaseChain, TimeBoundStatement

    if n < 2:
        raise ModelDomainError("ring size must be an integer >= 2")
    p = REGIONS.parse
    half, quarter = Fraction(1, 2), Fraction(1, 4)
    return PhaseChain(
        (
            TimeBoundStatement(p("T"), p("RT|C"), 2, 1, label="exit regions drain"),
            TimeBoundStatement(p("RT"), p("F|G|P"), 3, 1, label="someone flips or commits"),
            TimeBoundStatement(p("F"), p("G|P"), 2, half, label="a flip makes a good process"),
            TimeBoundStatement(p("G"), p("P"), 5, quarter, label="a good process eats"),
            TimeBoundStatement(p("P"), p("C"), 1, 1, label="critical section entry"),
        )
    )
