from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timebound.adversary import (
    FunctionAdversary,
    RoundRobin,
    adversary_outcomes,
    enumerate_adversaries,
    min_over_adversaries,
)
from timebound.errors import InsufficientPrefixError
from timebound.events import (
    AllOf,
    First,
    NeverWithin,
    Next,
    Occurs,
    ReachWithin,
    conditional_probability,
    eval_event,
    exact_probability,
    first_all,
    steps_horizon,
)
from timebound.lehmann_rabin import LEFT, lr_model, make_state
from timebound.models import (
    HEAD,
    TAIL,
    PeekingAdversary,
    p_head,
    q_tail,
    random_model,
    random_state_set,
    two_coin_model,
)
from timebound.pta import ExecutionFragment, ExplicitModel, Horizon, enabled_steps

HALF, QUARTER = Fraction(1, 2), Fraction(1, 4)


def line_model():
    """0 -a-> 1 -b-> 2, deterministic."""
    return ExplicitModel([0, 1, 2], [0], {0: [("a", {1: 1})], 1: [("b", {2: 1})]}, "line")


def walk(model, names, start=0):
    frag = ExecutionFragment(start)
    for name in names:
        step = next(s for s in enabled_steps(model, frag.state) if s.action.name == name)
        frag = frag.extend(step, step.next.support[0][0])
    return frag


def first_step(model):
    return FunctionAdversary(lambda f: (enabled_steps(model, f.state) or [None])[0], "first")


# --- eval_event --------------------------------------------------------------


def test_reach_counts_the_first_state():
    ev = ReachWithin(lambda s: s == 0, 0, "steps")
    assert eval_event(ev, ExecutionFragment(0), complete=True)


def test_reach_respects_the_step_horizon():
    m = line_model()
    frag = walk(m, ["a", "b"])
    assert eval_event(ReachWithin(lambda s: s == 2, 2, "steps"), frag)
    assert not eval_event(ReachWithin(lambda s: s == 2, 1, "steps"), frag)
    assert eval_event(NeverWithin(lambda s: s == 2, 1, "steps"), frag)


def test_short_prefix_is_insufficient():
    m = line_model()
    ev = ReachWithin(lambda s: s == 9, 5, "steps")
    with pytest.raises(InsufficientPrefixError):
        eval_event(ev, walk(m, ["a"]))
    assert not eval_event(ev, walk(m, ["a", "b"]), complete=True)


def test_first_and_next_examples():
    m = line_model()
    frag = walk(m, ["a", "b"])
    h = steps_horizon(5)
    assert eval_event(First("a", lambda s: s == 1, h), frag, complete=True)
    assert not eval_event(First("b", lambda s: s == 1, h), frag, complete=True)
    # an action that never occurs satisfies FIRST vacuously
    assert eval_event(First("z", lambda s: False, h), frag, complete=True)
    nxt = Next((("b", lambda s: s == 2), ("a", lambda s: False)), h)
    assert not eval_event(nxt, frag, complete=True)
    assert eval_event(Occurs("b", h), frag, complete=True)
    assert not eval_event(Occurs("b", steps_horizon(1)), frag, complete=True)


def test_next_needs_distinct_actions():
    with pytest.raises(ValueError):
        Next((("a", bool), ("a", bool)), steps_horizon(1))


def test_conjunction_needs_one_measure():
    with pytest.raises(ValueError):
        AllOf((Occurs("a", Horizon(1)), Occurs("b", steps_horizon(1))))
    with pytest.raises(ValueError):
        AllOf(())


def test_time_horizon_on_the_ring():
    m = lr_model(3)
    s = make_state([("F", "left"), ("R", "left"), ("R", "left")])
    tick = m.time_step(s, 1)
    frag = ExecutionFragment(s).extend(tick, tick.next.support[0][0])
    flip = m.process_steps(frag.state, 0)[0]
    frag = frag.extend(flip, flip.next.support[0][0])
    went_left = First("flip_0", lambda x: x.u[0] == LEFT, Horizon(1))
    assert eval_event(went_left, frag, complete=True)
    # the flip happens at time 1, outside a zero horizon
    assert eval_event(First("flip_0", lambda x: False, Horizon(0)), frag, complete=True)


# --- exact probabilities -----------------------------------------------------


def test_peeking_adversary_conditional_and_joint():
    m = two_coin_model()
    start = m.start_states()[0]
    adv = PeekingAdversary(m)
    h = steps_horizon(2)
    q = ReachWithin(q_tail, 2, "steps")
    p = ReachWithin(p_head, 2, "steps")
    assert conditional_probability(m, adv, start, q, p, h) == HALF
    both = ReachWithin(lambda s: s == (HEAD, TAIL), 2, "steps")
    assert exact_probability(m, adv, start, both).value == QUARTER
    pair = first_all([("flip_P", p_head), ("flip_Q", q_tail)], h)
    # a tail on P already falsifies the first conjunct, so peeking meets the floor exactly
    assert exact_probability(m, adv, start, pair).value == QUARTER


def test_exact_probability_on_ring_is_a_probability(lr3):
    s = make_state([("F", "left"), ("F", "left"), ("R", "left")])
    ev = First("flip_0", lambda x: x.u[0] == LEFT, Horizon(3))
    v = exact_probability(lr3, RoundRobin(lr3), s, ev).value
    assert v == HALF


def test_memo_does_not_change_the_value(lr3):
    s = make_state([("F", "left"), ("W", "right"), ("R", "left")])
    ev = ReachWithin(lambda x: 5 in x.pc, 3)
    a = exact_probability(lr3, RoundRobin(lr3), s, ev, memo=True).value
    b = exact_probability(lr3, RoundRobin(lr3), s, ev, memo=False).value
    assert a == b


def test_two_coin_first_conjunction_floor():
    """Every adversary, halting or not, gives FIRST(P, head) and FIRST(Q, tail) at least 1/4."""
    m = two_coin_model()
    start = m.start_states()[0]
    ev = first_all([("flip_P", p_head), ("flip_Q", q_tail)], steps_horizon(2))
    values = adversary_outcomes(m, start, ev, 2)
    assert min(values) == QUARTER
    assert min_over_adversaries(m, start, ev, 2) == QUARTER
    advs = list(enumerate_adversaries(m, start, 2))
    assert len(advs) == len(values)
    for adv, v in zip(advs, values):
        assert exact_probability(m, adv, start, ev, steps_horizon(2)).value == v


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 3))
def test_first_conjunction_floor_on_random_models(seed, horizon):
    rng = np.random.default_rng(seed)
    model = random_model(rng, max_states=4)
    pairs = []
    floor = Fraction(1)
    for name in ("a", "b"):
        u = random_state_set(rng, model)
        pairs.append((name, u))
        worst = Fraction(1)
        for s in model.states:
            for step in enabled_steps(model, s):
                if step.action.name == name:
                    worst = min(worst, sum((w for t, w in step.next.support if u(t)), Fraction(0)))
        floor *= worst
    ev = first_all(pairs, steps_horizon(horizon))
    assert min(adversary_outcomes(model, 0, ev, horizon)) >= floor


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 4))
def test_reach_and_never_are_complements(seed, horizon):
    rng = np.random.default_rng(seed)
    model = random_model(rng, max_states=5)
    target = random_state_set(rng, model)
    adv = first_step(model)
    reach = exact_probability(model, adv, 0, ReachWithin(target, horizon, "steps")).value
    never = exact_probability(model, adv, 0, NeverWithin(target, horizon, "steps")).value
    assert reach + never == 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 3))
def test_reach_is_monotone_in_the_horizon(seed, horizon):
    rng = np.random.default_rng(seed)
    model = random_model(rng, max_states=5)
    target = random_state_set(rng, model)
    outs = [adversary_outcomes(model, 0, ReachWithin(target, h, "steps"), h, allow_halt=False)
            for h in (horizon, horizon + 1)]
    assert min(outs[1]) >= min(outs[0])
    adv = first_step(model)
    a = exact_probability(model, adv, 0, ReachWithin(target, horizon, "steps")).value
    b = exact_probability(model, adv, 0, ReachWithin(target, horizon + 1, "steps")).value
    assert b >= a
