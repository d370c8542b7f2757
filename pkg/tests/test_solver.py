from __future__ import annotations

from dataclasses import replace
from fractions import Fraction

import pytest

from timebound.adversary import PolicyTableAdversary, builtin_adversaries
from timebound.calculus import TimeBoundStatement, compose, union_lift
from timebound.errors import BudgetExceededError, UnsupportedModelError
from timebound.events import ReachWithin, exact_probability
from timebound.lehmann_rabin import REGIONS, make_state, phase_statements
from timebound.pta import ExplicitModel
from timebound.scenarios import check_scenario, scenario
from timebound.solver import RoundGame, solve, start_states_for, verify_exact

F = Fraction


def stmt(src, dst, t, p=0):
    return TimeBoundStatement(REGIONS.parse(src), REGIONS.parse(dst), t, p)


# Values of the five phase statements at n=3, frozen from the solver and
# cross-checked below against witness replay and the built-in adversaries.
PHASE_VALUES = [F(1), F(1), F(1), F(1, 2), F(1)]


@pytest.fixture(scope="module")
def phase_results(lr3):
    return [verify_exact(lr3, s, witness=True) for s in phase_statements().statements]


def test_phase_statement_values(phase_results):
    assert [r.value for r in phase_results] == PHASE_VALUES
    assert all(r.holds for r in phase_results)


def test_witness_policy_reproduces_the_value(lr3, phase_results):
    for s, r in zip(phase_statements().statements, phase_results):
        adv = PolicyTableAdversary(lr3, r.policy)
        ev = ReachWithin(s.target, s.time)
        assert exact_probability(lr3, adv, r.worst_start, ev).value == r.value


def test_builtin_adversaries_never_beat_the_game(lr3, phase_results):
    advs = [a for a in builtin_adversaries(lr3) if a.name != "idle-violator"]
    for s, r in zip(phase_statements().statements, phase_results):
        ev = ReachWithin(s.target, s.time)
        starts = sorted(r.per_start, key=lr3.encode)[:: max(1, len(r.per_start) // 6)]
        for start in starts:
            for adv in advs:
                assert exact_probability(lr3, adv, start, ev).value >= r.per_start[start]


def test_start_in_target_is_certain(lr3):
    s = make_state([("C", "left"), ("R", "left"), ("R", "left")])
    assert verify_exact(lr3, stmt("C", "C", 0, 1), starts=[s]).value == 1


def test_zero_rounds_from_outside_the_target(lr3):
    s = make_state([("P", "left"), ("R", "left"), ("R", "left")])
    assert verify_exact(lr3, stmt("P", "C", 0), starts=[s]).value == 0
    assert verify_exact(lr3, stmt("P", "C", 1), starts=[s]).value == 1


def test_empty_start_set_is_vacuous(lr3):
    r = solve(lr3, [], ReachWithin(REGIONS.parse("C"), 1), 1)
    assert r.value == 1 and r.worst_start is None


@pytest.mark.parametrize("src,dst,t", [("P", "C", 1), ("RT", "F|G|P", 3)])
def test_memo_on_and_off_agree(lr3, src, dst, t):
    s = stmt(src, dst, t)
    starts = start_states_for(lr3, s.source)[:12]
    on = verify_exact(lr3, s, starts=starts, memo=True)
    off = verify_exact(lr3, s, starts=starts, memo=False)
    assert on.value == off.value
    assert on.per_start == off.per_start


def test_memo_on_and_off_agree_on_a_conditioned_scenario():
    sc = scenario("A.4.1")
    first = replace(sc.instances[0], starts=sc.instances[0].starts[:3])
    small = replace(sc, instances=(first,))
    assert first.conditions
    assert check_scenario(small, memo=True).value == check_scenario(small, memo=False).value


def test_value_is_monotone_in_time(lr3):
    starts = start_states_for(lr3, REGIONS.parse("G"))[::7]
    values = [verify_exact(lr3, stmt("G", "P", t), starts=starts).value for t in range(6)]
    assert values == sorted(values)
    assert values[0] == 0


def test_composition_is_sound_at_n3(lr3, phase_results):
    links = phase_statements().statements
    f_gp = TimeBoundStatement(links[2].source, links[2].target, 2, phase_results[2].value)
    gp_p = union_lift(
        TimeBoundStatement(links[3].source, links[3].target, 5, phase_results[3].value),
        REGIONS.parse("P"),
    )
    combined = compose(f_gp, gp_p)
    assert combined.target.name == "P"
    assert verify_exact(lr3, combined).value >= combined.prob


def test_union_lift_is_sound_at_n3(lr3):
    base = stmt("G", "P", 5)
    p = verify_exact(lr3, base).value
    lifted = union_lift(TimeBoundStatement(base.source, base.target, 5, p), REGIONS.parse("C"))
    assert verify_exact(lr3, lifted).value >= p


def test_budget_is_enforced(lr3):
    with pytest.raises(BudgetExceededError) as info:
        verify_exact(lr3, stmt("G", "P", 5), max_nodes=50)
    assert info.value.nodes > 50


def test_round_semantics_needs_integral_time_and_processes(lr3):
    with pytest.raises(UnsupportedModelError):
        verify_exact(lr3, stmt("G", "P", F(5, 2)))
    with pytest.raises(UnsupportedModelError):
        RoundGame(ExplicitModel([0], [0], {}, "bare"), None, 1)


def test_result_without_statement_has_no_verdict(lr3):
    r = solve(lr3, [], ReachWithin(REGIONS.parse("C"), 1), 1)
    with pytest.raises(ValueError):
        r.holds
