"""The ten acceptance criteria, each printing one PASS/FAIL line."""

from __future__ import annotations

import time
from fractions import Fraction

import numpy as np
import pytest

from timebound.adversary import adversary_outcomes, make_adversary
from timebound.calculus import (
    RecurrenceSpec,
    TimeBoundStatement,
    compose,
    recurrence_from_chain,
    solve_recurrence,
    union_lift,
)
from timebound.cli import main
from timebound.events import (
    Next,
    ReachWithin,
    conditional_probability,
    exact_probability,
    first_all,
    steps_horizon,
)
from timebound.lehmann_rabin import (
    REGIONS,
    in_C,
    in_T,
    lemma_6_1_violations,
    lr_model,
    phase_statements,
)
from timebound.models import (
    HEAD,
    TAIL,
    UNFLIPPED,
    PeekingAdversary,
    p_head,
    q_tail,
    random_model,
    random_state_set,
    two_coin_model,
)
from timebound.montecarlo import sample_states, verify_monte_carlo, worst_start
from timebound.pta import reachable_states
from timebound.scenarios import SCENARIO_IDS, check_scenario, scenario
from timebound.solver import brute_force_value, verify_exact

F = Fraction


def test_chain_arithmetic(verdict):
    t0 = time.perf_counter()
    chain = phase_statements()
    steps = chain.steps()
    current = steps[0].statement
    for st in steps[1:]:
        current = compose(current, union_lift(st.statement, st.extra))
    ok = current == chain.composed()
    elapsed = time.perf_counter() - t0
    ok &= (current.time, current.prob) == (13, F(1, 8)) and elapsed < 1
    ok &= (current.source.name, current.target.name) == ("T", "C")
    assert verdict(1, "chain arithmetic gives t=13, p=1/8", ok,
                   f"got t={current.time}, p={current.prob}, {elapsed:.3f}s")


def test_expected_time(verdict):
    spec = recurrence_from_chain(phase_statements().statements)
    inner = solve_recurrence(RecurrenceSpec(spec.branches))
    total = solve_recurrence(spec)
    ok = inner == 60 and total == 63 and (spec.entry, spec.exit) == (2, 1)
    assert verdict(2, "expected time 60 inside the loop, 63 end to end", ok,
                   f"got {inner} and {total}")


def test_phase_verification_n3(verdict):
    model = lr_model(3)
    floors = [F(1), F(1), F(1, 2), F(1, 4), F(1)]
    details = []
    ok = True
    for stmt, floor in zip(phase_statements().statements, floors):
        t0 = time.perf_counter()
        res = verify_exact(model, stmt)
        elapsed = time.perf_counter() - t0
        ok &= res.value >= floor and elapsed <= 300
        if floor == 1:
            ok &= res.value == 1
        details.append(f"{stmt.source.name}->{stmt.target.name}: {res.value} "
                       f"over {res.starts} starts")
    assert verdict(3, "exact phase statements at n=3", ok, "; ".join(details))


def test_end_to_end_n3(verdict):
    model = lr_model(3)
    t0 = time.perf_counter()
    stmt = TimeBoundStatement(REGIONS.parse("T"), REGIONS.parse("C"), 13, F(1, 8))
    res = verify_exact(model, stmt)
    elapsed = time.perf_counter() - t0
    ok = res.value >= F(1, 8) and elapsed <= 1800
    assert verdict(4, "T reaches C within 13 rounds w.p. >= 1/8 at n=3", ok,
                   f"value {res.value} over {res.starts} starts, {res.nodes} nodes, "
                   f"{elapsed:.1f}s")


def test_two_coin_brute_force(verdict):
    t0 = time.perf_counter()
    model = two_coin_model()
    start = model.start_states()[0]
    h = steps_horizon(2)
    pair = first_all([("flip_P", p_head), ("flip_Q", q_tail)], h)
    nxt = Next((("flip_P", p_head), ("flip_Q", q_tail)), h)
    first_values = adversary_outcomes(model, start, pair, 2)
    next_values = adversary_outcomes(model, start, nxt, 2)
    peek = PeekingAdversary(model)
    both = ReachWithin(lambda s: UNFLIPPED not in s, 2, "steps")
    head_tail = ReachWithin(lambda s: s == (HEAD, TAIL), 2, "steps")
    cond = conditional_probability(model, peek, start, head_tail, both, h)
    joint = exact_probability(model, peek, start, pair).value
    elapsed = time.perf_counter() - t0
    ok = min(first_values) >= F(1, 4) and min(next_values) >= F(1, 2)
    ok &= cond == F(1, 2) and joint == F(1, 4) and elapsed < 1
    assert verdict(5, "two-coin adversaries meet the FIRST and NEXT floors", ok,
                   f"{len(first_values)} adversaries, min FIRST {min(first_values)}, "
                   f"min NEXT {min(next_values)}, peeking {cond} / {joint}")


def test_invariant_exhaustive(verdict):
    t0 = time.perf_counter()
    counts = {}
    bad = 0
    for n in (3, 4):
        states = reachable_states(lr_model(n))
        counts[n] = len(states)
        bad += sum(1 for s in states if lemma_6_1_violations(s))
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and elapsed <= 300
    assert verdict(6, "resource-holder invariant on every reachable state, n=3 and n=4", ok,
                   f"{counts[3]} + {counts[4]} states, {bad} violations, {elapsed:.1f}s")


def test_scenario_suite(verdict):
    t0 = time.perf_counter()
    failed = []
    for name in SCENARIO_IDS:
        res = check_scenario(scenario(name, 3))
        if not res.holds:
            failed.append(f"{name}={res.value}")
    # the pincered-flip case has no non-trivial start on three processes
    extra = check_scenario(scenario("A.13", 4))
    if not extra.holds:
        failed.append(f"A.13@n4={extra.value}")
    elapsed = time.perf_counter() - t0
    ok = not failed and elapsed <= 600
    assert verdict(7, "every case scenario holds at n=3", ok,
                   f"{len(SCENARIO_IDS)} scenarios plus A.13 at n=4, {elapsed:.1f}s"
                   + (f", failing {failed}" if failed else ""))


MC_SEED = 20240607
MC_TRIALS = 100_000


@pytest.mark.parametrize("adversary", ["greedy-blocker", "round-robin"])
def test_monte_carlo_n5(verdict, adversary):
    t0 = time.perf_counter()
    model = lr_model(5)
    stmt = TimeBoundStatement(REGIONS.parse("T"), REGIONS.parse("C"), 13, F(1, 8))
    adv = make_adversary(adversary, model)
    candidates = sample_states(model, in_T, 20, MC_SEED)
    start, _ = worst_start(model, adv, candidates, in_C, 13, 50, MC_SEED)
    slow, _ = worst_start(model, adv, candidates, in_C, 200, 50, MC_SEED, by="time")
    rep = verify_monte_carlo(model, stmt, adv, MC_TRIALS, MC_SEED, [start], cap=200)
    mean = rep.mean_time_report()
    if slow != start:
        slow_rep = verify_monte_carlo(model, stmt, adv, MC_TRIALS // 10, MC_SEED, [slow], cap=200)
        slow_mean = slow_rep.mean_time_report()
    else:
        slow_mean = mean
    elapsed = time.perf_counter() - t0
    ok = rep.lower_bound >= 1 / 8 and mean.ci_high <= 63 and slow_mean.ci_high <= 63
    assert verdict(8, f"Monte Carlo at n=5 under {adversary}", ok,
                   f"{rep.successes}/{rep.trials} within 13, 99% lower bound "
                   f"{rep.lower_bound:.4f}, mean first hit {mean.mean:.2f} "
                   f"(99% CI up to {mean.ci_high:.3f}), slowest start mean "
                   f"{slow_mean.mean:.2f}, {elapsed:.0f}s")


def test_determinism(verdict, tmp_path):
    files = ["paper-chain-n3.json", "end-to-end-n3.json", "scenarios-n3.json",
             "monte-carlo-n5.json"]
    same = []
    for name in files:
        a, b = tmp_path / f"{name}.a", tmp_path / f"{name}.b"
        codes = [main(["verify", name, "--out", str(a)]), main(["verify", name, "--out", str(b)])]
        same.append(codes == [0, 0] and a.read_bytes() == b.read_bytes())
    a, b = tmp_path / "chain.a", tmp_path / "chain.b"
    main(["chain", "paper-chain-n3.json", "--out", str(a)])
    main(["chain", "paper-chain-n3.json", "--out", str(b)])
    same.append(a.read_bytes() == b.read_bytes())
    assert verdict(9, "bundled scenario reports are byte-identical across runs", all(same),
                   f"{sum(same)}/{len(same)} report pairs identical")


def test_calculus_soundness_random_models(verdict):
    t0 = time.perf_counter()
    checked = 0
    nontrivial = 0
    violations = []
    for k in range(20):
        rng = np.random.default_rng([2024, k])
        model = random_model(rng, max_states=6)
        u, v, w, x = (random_state_set(rng, model) for _ in range(4))
        t1 = int(rng.integers(0, 3))
        t2 = int(rng.integers(0, 5 - t1))
        # composition, under adversaries that halt only when nothing is enabled
        p1 = brute_force_value(model, TimeBoundStatement(u, v, t1, 0), literal=True)
        p2 = brute_force_value(model, TimeBoundStatement(v, w, t2, 0), literal=True)
        c = compose(TimeBoundStatement(u, v, t1, p1, "non-halting"),
                    TimeBoundStatement(v, w, t2, p2, "non-halting"))
        pc = brute_force_value(model, c, literal=True)
        checked += 1
        nontrivial += 0 < c.prob < 1
        if pc < c.prob:
            violations.append(f"model {k}: composed {pc} < {c.prob}")
        # union lift, for every adversary (halting allowed) and for non-halting ones
        for allow_halt, horizon in ((True, min(t1 + t2, 3)), (False, t1 + t2)):
            base = TimeBoundStatement(u, v, horizon, 0)
            p = brute_force_value(model, base, allow_halt=allow_halt, literal=True)
            lifted = union_lift(TimeBoundStatement(u, v, horizon, p), x)
            pl = brute_force_value(model, lifted, allow_halt=allow_halt, literal=True)
            checked += 1
            nontrivial += 0 < p < 1
            if pl < p:
                violations.append(f"model {k}: lifted {pl} < {p}")
    elapsed = time.perf_counter() - t0
    ok = not violations and elapsed <= 120
    assert verdict(10, "composition and union lift are sound on 20 random models", ok,
                   f"{checked} bounds checked, {nontrivial} strictly between 0 and 1, "
                   f"{elapsed:.1f}s" + (f", {violations}" if violations else ""))
