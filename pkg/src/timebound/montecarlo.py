"""Monte Carlo checks of time-bound statements under deadline semantics.

The adversary drives the simulation: at every point it schedules an enabled
step or lets time pass.  A Unit-Time monitor watches the run; any ready
process left idle for more than time 1 aborts the run with a witness.
Trial ``k`` of a run seeded with ``seed`` draws from its own stream
``default_rng([seed, start index, k])``, so results do not depend on the
order in which trials are executed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .adversary import Adversary, UnitTimeMonitor, resolve
from .calculus import TimeBoundStatement
from .errors import SchemaViolationError, UnitTimeViolation
from .pta import ZERO, ExecutionFragment, Model, State, enabled_steps, sample_step

CONFIDENCE = 0.99
STEPS_PER_UNIT = 10_000


def simulate(
    model: Model,
    adversary: Adversary,
    start: State,
    target: Callable[[State], bool],
    horizon,
    rng,
    monitor: bool = True,
) -> Fraction | None:
    """Elapsed time at which ``target`` is first reached, or ``None``.

    The run stops unsuccessfully when the adversary halts or when time would
    pass beyond ``horizon``.
    """
    horizon = Fraction(horizon)
    t0 = model.clock(start) or ZERO
    frag = ExecutionFragment(start, t0)
    watch = UnitTimeMonitor(model, frag) if monitor else None
    limit = STEPS_PER_UNIT * (int(horizon) + 1)
    for _ in range(limit):
        if target(frag.state):
            return frag.time - t0
        choice = resolve(adversary, frag, model)
        if choice is None:
            return None
        if choice.is_time_advance and frag.time + choice.duration - t0 > horizon:
            return None
        frag = frag.extend(choice, sample_step(choice, rng))
        if watch is not None:
            witness = watch.observe(frag)
            if witness is not None:
                raise UnitTimeViolation(witness)
    raise SchemaViolationError(f"{adversary.name}: time stopped advancing")


def clopper_pearson_lower(successes: int, trials: int, confidence: float = CONFIDENCE) -> float:
    """Exact one-sided lower confidence bound for a binomial proportion."""
    if trials <= 0:
        raise ValueError("need at least one trial")
    if successes == 0:
        return 0.0
    return float(stats.beta.ppf(1 - confidence, successes, trials - successes + 1))


def trial_rng(seed: int, start_index: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, start_index, trial])


def first_hits(
    model: Model,
    adversary: Adversary,
    start: State,
    target: Callable[[State], bool],
    cap,
    trials: int,
    seed: int,
    start_index: int = 0,
) -> list[Fraction | None]:
    """First-hit time of every trial, ``None`` when ``cap`` passed first."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    return [
        simulate(model, adversary, start, target, cap, trial_rng(seed, start_index, trial))
        for trial in range(trials)
    ]


@dataclass
class MeanTimeReport:
    trials: int
    censored: int
    cap: Fraction
    mean: float
    ci_low: float
    ci_high: float

    @property
    def is_lower_bound(self) -> bool:
        """Censored runs count as ``cap``, so the mean only bounds from below."""
        return self.censored > 0

    @classmethod
    def from_hits(cls, hits: Sequence[Fraction | None], cap) -> "MeanTimeReport":
        cap = Fraction(cap)
        times = np.array([float(cap if h is None else h) for h in hits])
        censored = sum(h is None for h in hits)
        mean = float(times.mean())
        if len(times) > 1:
            z = float(stats.norm.ppf(0.5 + CONFIDENCE / 2))
            half = z * float(times.std(ddof=1)) / math.sqrt(len(times))
        else:
            half = math.inf
        return cls(len(times), censored, cap, mean, mean - half, mean + half)


@dataclass
class MonteCarloReport:
    statement: TimeBoundStatement
    adversary: str
    seed: int
    cap: Fraction
    starts: list = field(default_factory=list)
    hits: list = field(default_factory=list, repr=False)

    @property
    def trials(self) -> int:
        return len(self.hits)

    @property
    def successes(self) -> int:
        return sum(1 for h in self.hits if h is not None and h <= self.statement.time)

    @property
    def fraction(self) -> float:
        return self.successes / self.trials

    @property
    def lower_bound(self) -> float:
        return clopper_pearson_lower(self.successes, self.trials)

    @property
    def mean_time(self) -> float | None:
        """Mean first-hit time among runs that succeeded within the bound."""
        ok = [h for h in self.hits if h is not None and h <= self.statement.time]
        if not ok:
            return None
        return float(sum(ok, ZERO) / len(ok))

    def mean_time_report(self) -> MeanTimeReport:
        """First-hit statistics over all runs, censored at ``cap``."""
        return MeanTimeReport.from_hits(self.hits, self.cap)

    @property
    def holds(self) -> bool:
        """Lower bound clears ``p``, or no failing run was seen at all."""
        if self.successes == self.trials:
            return True
        return self.lower_bound >= float(self.statement.prob)


def verify_monte_carlo(
    model: Model,
    stmt: TimeBoundStatement,
    adversary: Adversary,
    trials: int,
    seed: int,
    starts: Sequence[State] | None = None,
    cap=None,
) -> MonteCarloReport:
    """Run ``trials`` simulations from each start and count hits within ``stmt.time``.

    With ``cap`` beyond the time bound, runs continue until ``cap`` so that
    the same runs also yield first-hit time statistics.
    """
    cap = stmt.time if cap is None else max(Fraction(cap), stmt.time)
    if starts is None:
        starts = [s for s in model.start_states() if stmt.source(s)]
    report = MonteCarloReport(stmt, adversary.name, seed, cap, list(starts))
    for k, start in enumerate(starts):
        report.hits.extend(first_hits(model, adversary, start, stmt.target, cap, trials, seed, k))
    return report


def mean_time_to(
    model: Model,
    adversary: Adversary,
    start: State,
    target: Callable[[State], bool],
    trials: int,
    seed: int,
    cap=1000,
    start_index: int = 0,
) -> MeanTimeReport:
    """Sample mean and 99% normal-approximation interval of the first-hit time."""
    hits = first_hits(model, adversary, start, target, cap, trials, seed, start_index)
    return MeanTimeReport.from_hits(hits, cap)


def sample_states(
    model: Model,
    predicate: Callable[[State], bool],
    count: int,
    seed: int,
    walk_length: int = 60,
    max_walks: int = 10_000,
) -> list[State]:
    """Distinct ``predicate`` states ending uniformly random walks from the start.

    Walks pick uniformly among all enabled steps (time does not pass), so
    every state found is reachable.  Returned in canonical encoding order.
    """
    rng = np.random.default_rng([seed, 0xC0FFEE])
    found: dict = {}
    starts = model.start_states()
    for _ in range(max_walks):
        if len(found) >= count:
            break
        s = starts[int(rng.integers(len(starts)))]
        for _ in range(int(rng.integers(1, walk_length + 1))):
            steps = enabled_steps(model, s)
            if not steps:
                break
            s = sample_step(steps[int(rng.integers(len(steps)))], rng)
        if predicate(s):
            found.setdefault(model.encode(s), s)
    return [found[k] for k in sorted(found)]


def worst_start(
    model: Model,
    adversary: Adversary,
    candidates: Sequence[State],
    target: Callable[[State], bool],
    horizon,
    pilot_trials: int,
    seed: int,
    by: str = "probability",
) -> tuple[State, float]:
    """Candidate with the lowest pilot hit rate (or highest pilot mean time).

    Each criterion breaks ties with the other, so that when every candidate
    always succeeds the slowest one is still preferred.  Returns the state
    and its hit rate (``by="probability"``) or mean time (``by="time"``).
    """
    if not candidates:
        raise ValueError("no candidate states")
    if by not in ("probability", "time"):
        raise ValueError(f"unknown criterion {by!r}")
    horizon = Fraction(horizon)
    best = None
    for k, s in enumerate(candidates):
        hits = [
            simulate(model, adversary, s, target, horizon,
                     np.random.default_rng([seed, 0x5EED, k, trial]))
            for trial in range(pilot_trials)
        ]
        rate = sum(h is not None for h in hits) / pilot_trials
        mean = sum(float(horizon if h is None else h) for h in hits) / pilot_trials
        key = (-rate, mean) if by == "probability" else (mean, -rate)
        if best is None or key > best[0]:
            best = (key, s, rate if by == "probability" else mean)
    return best[1], best[2]
