from __future__ import annotations

from fractions import Fraction

import pytest

from timebound.errors import BudgetExceededError, UnknownScenarioError
from timebound.lehmann_rabin import in_G, in_P
from timebound.scenarios import SCENARIO_IDS, check_scenario, scenario

QUICK = ["A.4.1", "A.4.2", "A.7", "A.8", "A.12", "A.15"]


def test_registry_lists_every_case():
    assert len(SCENARIO_IDS) == 14
    assert SCENARIO_IDS[0] == "A.2" and "A.13" in SCENARIO_IDS


def test_unknown_scenario():
    with pytest.raises(UnknownScenarioError):
        scenario("A.99")


@pytest.mark.parametrize("name", SCENARIO_IDS)
def test_scenarios_are_well_formed(name):
    sc = scenario(name)
    assert sc.n == 3 and sc.rounds >= 1
    assert Fraction(0) < sc.floor <= 1
    assert sc.instances and all(inst.rounds == sc.rounds for inst in sc.instances)
    assert sc.start_count == sum(len(i.starts) for i in sc.instances)


@pytest.mark.parametrize("name", QUICK)
def test_quick_scenarios_hold(name):
    res = check_scenario(scenario(name))
    assert res.holds and res.value >= res.scenario.floor


def test_flip_scenario_meets_its_floor_exactly():
    res = check_scenario(scenario("A.12"))
    assert res.value == Fraction(1, 2)


def test_pincered_flip_is_vacuous_on_three_processes():
    sc = scenario("A.13")
    assert all(in_G(s) or in_P(s) for inst in sc.instances for s in inst.starts)
    res = check_scenario(sc)
    assert res.value == 1 and res.nodes == 0


def test_scenario_budget_is_enforced():
    with pytest.raises(BudgetExceededError):
        check_scenario(scenario("A.2"), max_nodes=100)
