"""Small demonstration models: the two-coin example and random automata."""

from __future__ import annotations

from fractions import Fraction

from .adversary import HALT, Adversary
from .errors import ModelDomainError
from .predicates import Predicate
from .pta import Action, ActionKind, ExplicitModel

UNFLIPPED, HEAD, TAIL = "-", "head", "tail"
FLIP_P = Action("flip_P", ActionKind.INTERNAL, process=0)
FLIP_Q = Action("flip_Q", ActionKind.INTERNAL, process=1)
_HALF = Fraction(1, 2)


def two_coin_model() -> ExplicitModel:
    """Processes P (0) and Q (1) each flip one fair coin, in any order.

    A state is the pair of coin faces, ``"-"`` before the flip.
    """
    faces = (UNFLIPPED, HEAD, TAIL)
    states = [(p, q) for p in faces for q in faces]
    transitions = {}
    for p, q in states:
        steps = []
        if p == UNFLIPPED:
            steps.append((FLIP_P, {(HEAD, q): _HALF, (TAIL, q): _HALF}))
        if q == UNFLIPPED:
            steps.append((FLIP_Q, {(p, HEAD): _HALF, (p, TAIL): _HALF}))
        transitions[(p, q)] = steps
    return ExplicitModel(states, [(UNFLIPPED, UNFLIPPED)], transitions, "two-coin", processes=2)


def p_head(s) -> bool:
    return s[0] == HEAD


def q_tail(s) -> bool:
    return s[1] == TAIL


class PeekingAdversary(Adversary):
    """Flips P's coin, then flips Q's only if P showed head."""

    name = "peeking"
    schemas = ("all",)

    def __init__(self, model: ExplicitModel):
        self.model = model

    def decide(self, frag):
        p, q = frag.state
        if p == UNFLIPPED:
            return self.model.enabled(frag.state)[0]
        if p == HEAD and q == UNFLIPPED:
            return next(st for st in self.model.enabled(frag.state) if st.action == FLIP_Q)
        return HALT


# --- random automata -------------------------------------------------------

_WEIGHTS = (
    (Fraction(1),),
    (_HALF, _HALF),
    (_HALF, _HALF),
    (Fraction(1, 3), Fraction(2, 3)),
    (Fraction(1, 4), Fraction(3, 4)),
)


def random_model(
    rng, max_states: int = 6, min_steps: int = 1, max_steps: int = 2, actions=("a", "b", "c")
):
    """A random automaton on states ``0..k-1`` with one start state ``0``.

    Every state enables between ``min_steps`` and ``max_steps`` steps, each with a
    one- or two-point distribution drawn from a few exact weight patterns.
    """
    if max_states < 1:
        raise ModelDomainError("need at least one state")
    k = int(rng.integers(2, max_states + 1)) if max_states >= 2 else 1
    states = list(range(k))
    transitions = {}
    for s in states:
        steps = []
        for _ in range(int(rng.integers(min_steps, max_steps + 1))):
            pattern = _WEIGHTS[int(rng.integers(len(_WEIGHTS)))]
            targets = rng.choice(k, size=min(len(pattern), k), replace=False)
            if len(targets) < len(pattern):
                pattern = (Fraction(1),)
            dist = {int(t): w for t, w in zip(targets, pattern)}
            steps.append((str(actions[int(rng.integers(len(actions)))]), dist))
        transitions[s] = _dedupe(steps)
    return ExplicitModel(states, [0], transitions, f"random-{k}")


def _dedupe(steps):
    seen = set()
    out = []
    for action, dist in steps:
        key = (action, tuple(sorted(dist.items())))
        if key not in seen:
            seen.add(key)
            out.append((action, dist))
    return out


def state_set(states) -> Predicate:
    """Predicate for an explicit set of states, one atom per state."""
    tests = tuple((f"s{x}", (lambda s, x=x: s == x)) for x in sorted(states))
    return Predicate(frozenset(a for a, _ in tests), tests, tuple(a for a, _ in tests))


def random_state_set(rng, model: ExplicitModel) -> Predicate:
    chosen = [s for s in model.states if rng.random() < 0.5]
    if not chosen:
        chosen = [model.states[int(rng.integers(len(model.states)))]]
    return state_set(chosen)
