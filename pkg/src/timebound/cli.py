"""Batch front-end: ``timebound {verify,chain,invariants,scenarios}``.

Exit codes: 0 all checked statements hold, 1 some statement fails, 2 a
node or state budget was exceeded, 3 an adversary left its schema, 4 a
chain is broken.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from .adversary import PolicyTableAdversary, make_adversary
from .calculus import (
    Branch,
    PhaseChain,
    RecurrenceSpec,
    TimeBoundStatement,
    recurrence_from_chain,
    solve_recurrence,
)
from .errors import (
    BudgetExceededError,
    ChainError,
    CompositionForbiddenError,
    SchemaViolationError,
    TimeboundError,
    UnitTimeViolation,
)
from .lehmann_rabin import REGIONS, lemma_6_1_violations, lr_model
from .montecarlo import sample_states, verify_monte_carlo, worst_start
from .pta import reachable_states
from .report import dumps, parse_fraction
from .scenarios import SCENARIO_IDS, check_scenario, scenario
from .solver import DEFAULT_MAX_NODES, verify_exact

EXIT_OK, EXIT_FAIL, EXIT_BUDGET, EXIT_VIOLATION, EXIT_CHAIN = 0, 1, 2, 3, 4


class UsageError(TimeboundError):
    pass


# --- scenario files ----------------------------------------------------------


def bundled(name: str) -> Path:
    """Path of a scenario file shipped with the package."""
    return Path(str(resources.files("timebound") / "data" / name))


def load_file(path: str) -> dict:
    p = Path(path)
    if not p.exists() and bundled(path).exists():
        p = bundled(path)
    with open(p, encoding="utf-8") as fh:
        return json.load(fh)


def build_model(spec: dict):
    family = spec.get("family", "lehmann-rabin")
    if family != "lehmann-rabin":
        raise UsageError(f"unsupported model family {family!r}")
    return lr_model(int(spec.get("n", 3)))


def parse_statement(entry: dict) -> TimeBoundStatement:
    return TimeBoundStatement(
        REGIONS.parse(entry["from"]),
        REGIONS.parse(entry["to"]),
        parse_fraction(entry["time"]),
        parse_fraction(entry.get("prob", 0)),
        entry.get("schema", "unit-time"),
        entry.get("label", ""),
    )


def apply_overrides(cfg: dict, args) -> dict:
    cfg = dict(cfg)
    for key in ("seed", "trials", "semantics"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if getattr(args, "budget_nodes", None) is not None:
        cfg["budget_nodes"] = args.budget_nodes
    return cfg


def _stmt_json(stmt: TimeBoundStatement) -> dict:
    return stmt.describe()


# --- verify ------------------------------------------------------------------


def run_verify(cfg: dict) -> tuple[int, dict]:
    model = build_model(cfg.get("model", {}))
    semantics = cfg.get("semantics", "round")
    statements = [parse_statement(e) for e in cfg.get("statements", [])]
    report: dict = {
        "command": "verify",
        "model": model.name,
        "semantics": semantics,
        "results": [],
    }
    code = EXIT_OK
    try:
        if semantics == "round":
            _verify_round(cfg, model, statements, report)
        elif semantics == "deadline":
            _verify_deadline(cfg, model, statements, report)
        else:
            raise UsageError(f"unknown semantics {semantics!r}")
    except BudgetExceededError as exc:
        report["error"] = {"kind": "budget", "message": str(exc), "nodes": exc.nodes}
        code = EXIT_BUDGET
    except UnitTimeViolation as exc:
        report["error"] = {"kind": "schema-violation", "message": str(exc),
                           "witness": exc.witness.describe(model)}
        code = EXIT_VIOLATION
    except SchemaViolationError as exc:
        report["error"] = {"kind": "schema-violation", "message": str(exc)}
        code = EXIT_VIOLATION
    holds = all(r["holds"] for r in report["results"])
    report["all_hold"] = holds and code == EXIT_OK
    if code == EXIT_OK and not holds:
        code = EXIT_FAIL
    return code, report


def _verify_round(cfg, model, statements, report):
    budget = int(cfg.get("budget_nodes", DEFAULT_MAX_NODES))
    witness = bool(cfg.get("witness", False))
    checks = [(stmt, False) for stmt in statements]
    if cfg.get("verify_composed", False):
        try:
            checks.append((PhaseChain(tuple(statements)).composed(), True))
        except (ChainError, CompositionForbiddenError) as exc:
            raise UsageError(f"verify_composed: {exc}") from None
    for stmt, composed in checks:
        res = verify_exact(model, stmt, max_nodes=budget, witness=witness)
        entry = {
            "statement": _stmt_json(stmt),
            "composed": composed,
            "value": res.value,
            "holds": res.holds,
            "horizon": {"rounds": res.rounds},
            "nodes": res.nodes,
            "starts": res.starts,
        }
        if res.worst_start is not None:
            entry["worst_start"] = model.encode(res.worst_start)
        if witness and res.policy is not None:
            entry["witness_policy"] = PolicyTableAdversary(model, res.policy).rows()
        report["results"].append(entry)
    for name in cfg.get("scenarios", []):
        sc = scenario(name, model.n)
        res = check_scenario(sc, max_nodes=budget)
        report["results"].append(
            {
                "scenario": name,
                "summary": sc.summary,
                "value": res.value,
                "floor": sc.floor,
                "holds": res.holds,
                "horizon": {"rounds": sc.rounds},
                "nodes": res.nodes,
                "starts": res.starts,
            }
        )


def _verify_deadline(cfg, model, statements, report):
    seed = int(cfg.get("seed", 0))
    trials = int(cfg.get("trials", 1000))
    names = cfg.get("adversaries", ["round-robin"])
    start_cfg = cfg.get("starts", {})
    count = int(start_cfg.get("sample", 20))
    pilot = int(start_cfg.get("pilot", 50))
    cap = parse_fraction(cfg.get("cap", 0))
    report["seed"] = seed
    for stmt in statements:
        candidates = sample_states(model, stmt.source, count, seed)
        for name in names:
            adv = make_adversary(name, model)
            start, _ = worst_start(model, adv, candidates, stmt.target, stmt.time, pilot, seed)
            mc = verify_monte_carlo(model, stmt, adv, trials, seed, [start], cap=cap or None)
            entry = {
                "statement": _stmt_json(stmt),
                "adversary": name,
                "start": model.encode(start),
                "trials": mc.trials,
                "successes": mc.successes,
                "estimate": mc.fraction,
                "confidence": {"level": 0.99, "method": "clopper-pearson one-sided",
                               "lower_bound": mc.lower_bound},
                "mean_time_successes": mc.mean_time,
                "horizon": {"time": stmt.time},
                "holds": mc.holds,
                "seed": seed,
            }
            if cap:
                mt = mc.mean_time_report()
                entry["first_hit"] = {
                    "cap": mt.cap,
                    "censored": mt.censored,
                    "mean": mt.mean,
                    "ci99": [mt.ci_low, mt.ci_high],
                    "mean_is_lower_bound": mt.is_lower_bound,
                }
            report["results"].append(entry)


# --- chain -------------------------------------------------------------------


def run_chain(cfg: dict) -> tuple[int, dict, list[str]]:
    statements = [parse_statement(e) for e in cfg.get("statements", [])]
    lines = []
    report: dict = {"command": "chain", "links": []}
    try:
        chain = PhaseChain(tuple(statements))
        steps = chain.steps()
    except (ChainError, CompositionForbiddenError) as exc:
        report["error"] = {"kind": "chain", "message": str(exc)}
        lines.append(f"broken chain: {exc}")
        return EXIT_CHAIN, report, lines
    for k, st in enumerate(steps):
        link = {"statement": _stmt_json(st.statement), "composed": _stmt_json(st.composed)}
        lines.append(f"arrow {k + 1}: {st.statement}")
        if st.extra.atoms:
            link["lifted_by"] = st.extra.name
            link["lifted"] = _stmt_json(st.lifted)
            lines.append(f"  lift by {st.extra.name}: {st.lifted}")
        report["links"].append(link)
    composed = steps[-1].composed
    report["composed"] = _stmt_json(composed)
    lines.append(f"composed: {composed}")
    rec = cfg.get("recurrence")
    if rec is not None:
        try:
            spec = _recurrence(rec, statements)
        except ChainError as exc:
            report["error"] = {"kind": "chain", "message": str(exc)}
            lines.append(f"recurrence: {exc}")
            return EXIT_CHAIN, report, lines
        inner = solve_recurrence(RecurrenceSpec(spec.branches))
        total = solve_recurrence(spec)
        report["recurrence"] = {
            "branches": [{"prob": b.prob, "time": b.time, "success": b.success}
                         for b in spec.branches],
            "entry": spec.entry,
            "exit": spec.exit,
            "expected_inner": inner,
            "expected_total": total,
        }
        lines.append(f"expected time: {inner} inside the loop, {total} end to end")
    return EXIT_OK, report, lines


def _recurrence(rec: dict, statements) -> RecurrenceSpec:
    if rec.get("derive", False):
        return recurrence_from_chain(statements)
    branches = tuple(
        Branch(parse_fraction(b["prob"]), parse_fraction(b["time"]), bool(b["success"]))
        for b in rec["branches"]
    )
    return RecurrenceSpec(branches, parse_fraction(rec.get("entry", 0)),
                          parse_fraction(rec.get("exit", 0)))


# --- invariants --------------------------------------------------------------


def run_invariants(
    n: int,
    exhaustive: bool = True,
    samples: int = 2000,
    depth: int = 200,
    seed: int = 0,
    max_states: int | None = None,
    extra_states=(),
) -> tuple[int, dict]:
    """Check the resource-holder invariant on reachable (and injected) states."""
    model = lr_model(n)
    report: dict = {"command": "invariants", "model": model.name}
    if exhaustive:
        try:
            states = reachable_states(model, max_states=max_states)
        except BudgetExceededError as exc:
            report["error"] = {"kind": "budget", "message": str(exc), "nodes": exc.nodes}
            return EXIT_BUDGET, report
        report["mode"] = "exhaustive"
    else:
        states = set(_walk_states(model, samples, depth, seed))
        report["mode"] = f"sampled ({samples} walks of length {depth}, seed {seed})"
    checked = list(states) + list(extra_states)
    bad = [s for s in checked if lemma_6_1_violations(s)]
    bad.sort(key=model.encode)
    report["states"] = len(checked)
    report["violations"] = len(bad)
    report["counterexamples"] = [
        {"state": model.encode(s), "describe": s.describe(),
         "clauses": sorted({c for _, c in lemma_6_1_violations(s)})}
        for s in bad[:10]
    ]
    return (EXIT_OK if not bad else EXIT_FAIL), report


def _walk_states(model, samples, depth, seed):
    import numpy as np

    from .pta import enabled_steps, sample_step

    rng = np.random.default_rng([seed, 0x1A7])
    for _ in range(samples):
        s = model.start_states()[0]
        yield s
        for _ in range(depth):
            steps = enabled_steps(model, s)
            s = sample_step(steps[int(rng.integers(len(steps)))], rng)
            yield s


# --- scenarios ---------------------------------------------------------------


def run_scenarios(names, n: int = 3, check: bool = False, budget: int = DEFAULT_MAX_NODES):
    report: dict = {"command": "scenarios", "n": n, "scenarios": []}
    code = EXIT_OK
    for name in names:
        sc = scenario(name, n)
        entry = {"id": name, "summary": sc.summary, "rounds": sc.rounds, "floor": sc.floor,
                 "instances": len(sc.instances), "starts": sc.start_count}
        if check:
            try:
                res = check_scenario(sc, max_nodes=budget)
            except BudgetExceededError as exc:
                entry["error"] = {"kind": "budget", "message": str(exc)}
                code = EXIT_BUDGET
            else:
                entry.update(value=res.value, holds=res.holds, nodes=res.nodes)
                if not res.holds and code == EXIT_OK:
                    code = EXIT_FAIL
        report["scenarios"].append(entry)
    return code, report


# --- main --------------------------------------------------------------------


def _emit(report: dict, out: str | None, lines: list[str]) -> None:
    text = dumps(report)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    for line in lines:
        print(line, file=sys.stderr)


def _summary(report: dict) -> list[str]:
    out = []
    for r in report.get("results", []):
        label = r.get("scenario") or "{from} -> {to}".format(**r["statement"])
        verdict = "holds" if r["holds"] else "FAILS"
        if "value" in r:
            out.append(f"{label}: value {r['value']} ({verdict})")
        else:
            out.append(f"{label} [{r['adversary']}]: {r['successes']}/{r['trials']}, "
                       f"lower bound {r['confidence']['lower_bound']:.4f} ({verdict})")
    if "error" in report:
        out.append(f"error: {report['error']['message']}")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="timebound", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="write the JSON report here instead of stdout")
        p.add_argument("--budget-nodes", type=int, dest="budget_nodes", default=None)

    p = sub.add_parser("verify", help="check the statements of a scenario file")
    p.add_argument("file")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--semantics", choices=("round", "deadline"))
    p.add_argument("--witness", action="store_true", help="include worst-case policy tables")
    common(p)

    p = sub.add_parser("chain", help="compose the statements of a scenario file")
    p.add_argument("file")
    common(p)

    p = sub.add_parser("invariants", help="check the resource-holder invariant")
    p.add_argument("n", type=int)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exhaustive", action="store_true", default=None)
    mode.add_argument("--sample", action="store_true")
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--depth", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-state", action="append", default=[], metavar="HEX",
                   help="also check this encoded state (testing hook)")
    common(p)

    p = sub.add_parser("scenarios", help="list (and optionally check) case-lemma scenarios")
    p.add_argument("ids", nargs="*")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--check", action="store_true")
    common(p)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            cfg = apply_overrides(load_file(args.file), args)
            if args.witness:
                cfg["witness"] = True
            code, report = run_verify(cfg)
            _emit(report, args.out, _summary(report))
        elif args.command == "chain":
            code, report, lines = run_chain(load_file(args.file))
            _emit(report, args.out, lines)
        elif args.command == "invariants":
            model = lr_model(args.n)
            extra = [model.decode(bytes.fromhex(h)) for h in args.inject_state]
            exhaustive = not args.sample and (args.exhaustive or args.n <= 4)
            code, report = run_invariants(
                args.n, exhaustive, args.samples, args.depth, args.seed,
                max_states=args.budget_nodes, extra_states=extra,
            )
            _emit(report, args.out, [f"{report.get('violations', '?')} violations "
                                     f"in {report.get('states', '?')} states"])
        else:
            names = args.ids or list(SCENARIO_IDS)
            budget = args.budget_nodes or DEFAULT_MAX_NODES
            code, report = run_scenarios(names, args.n, args.check, budget)
            lines = [f"{e['id']}: {e['summary']}" + (
                f" -> {e['value']} ({'holds' if e['holds'] else 'FAILS'})" if "value" in e else "")
                for e in report["scenarios"]]
            _emit(report, args.out, lines)
    except (OSError, json.JSONDecodeError, KeyError, ValueError, UsageError) as exc:
        print(f"timebound: {exc}", file=sys.stderr)
        return 64
    return code


if __name__ == "__main__":
    sys.exit(main())
