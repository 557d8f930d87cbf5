"""Command-line front end: table reproduction, rule evaluation, examples.

Exit codes: 0 success, 2 usage error, 3 numerical failure. Every command
is deterministic given its flags; rerunning with the same configuration
reproduces output files byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

from . import benchmarks, engine, predict, treat, trial
from .core import InputError
from .engine import EngineError, ReplicationPlan, StateGrid


def _predict_panel_b(*point) -> bool:
    return predict.PredictionState(*point).in_panel_b()


def _treat_panel_b(*point) -> bool:
    return treat.TreatmentState(*point).in_panel_b()


FAMILY_PARAMS = {
    "trial": ("p_a", "p_b"),
    "predict": ("q1", "q0", "p_obs"),
    "treat": ("e_a1", "e_a0", "e_b1", "e_b0", "p"),
}

FAMILY_RULES = {
    "trial": trial.TRIAL_RULE_IDS,
    "predict": tuple(predict.PREDICT_RULES),
    "treat": treat.TREAT_RULE_IDS,
}

PANEL_B_CONSTRAINTS = {
    "trial": None,
    "predict": _predict_panel_b,
    "treat": _treat_panel_b,
}


def _family_rule(family: str, rule_id: str, args) -> engine.DecisionRule:
    if family == "trial":
        return trial.get_rule(rule_id, tie=args.tie, alpha=args.alpha)
    if family == "predict":
        return predict.get_rule(rule_id)
    return treat.get_rule(rule_id, tie=args.tie, empty_arm=args.es_empty)


def _family_adapter(family: str) -> engine.ProblemAdapter:
    return {
        "trial": trial.trial_adapter,
        "predict": predict.prediction_adapter,
        "treat": treat.treatment_adapter,
    }[family]()


def _parse_assignments(text: str, what: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise InputError(f"{what} entries must look like name=value, got {part!r}")
        name, _, raw = part.partition("=")
        try:
            out[name.strip()] = float(raw)
        except ValueError:
            raise InputError(f"non-numeric value in {what}: {part!r}") from None
    return out


def _parse_sweep(text: str) -> tuple[str, tuple[float, ...]]:
    name, _, spec = text.partition("=")
    pieces = spec.split(":")
    if len(pieces) != 3:
        raise InputError(f"sweep must look like name=lo:hi:count, got {text!r}")
    try:
        lo, hi, count = float(pieces[0]), float(pieces[1]), int(pieces[2])
    except ValueError:
        raise InputError(f"bad sweep specification {text!r}") from None
    if count < 2 or hi < lo:
        raise InputError(f"bad sweep range in {text!r}")
    step = (hi - lo) / (count - 1)
    return name.strip(), tuple(lo + i * step for i in range(count))


def cmd_reproduce(args) -> int:
    table = benchmarks.reproduce_table(
        args.table,
        replicates=args.replicates,
        master_seed=args.seed,
        grid_density=args.grid,
        grid_mode=args.grid_mode,
        counterfactual=args.counterfactual,
        tie=args.tie,
        es_empty_arm=args.es_empty,
        workers=args.workers,
    )
    out = args.out or f"table_{table.table_id}.csv"
    decimals = None if args.full_precision else 4
    table.to_csv(out, decimals=decimals)
    settings = ", ".join(f"{k}={v}" for k, v in sorted(table.meta.items()))
    print(f"table {table.table_id} ({benchmarks.TABLE_SPECS[table.table_id].description})")
    print(f"  settings: {settings}")
    print(f"  wrote {out}")
    if not args.no_check:
        reference = benchmarks.load_reference(args.reference)
        diff, (n, p) = benchmarks.compare_to_reference(table, reference)
        print(f"  max |cell - reference| = {diff:.4f} at (N={n}, p={p:g})")
    if any(not math.isfinite(cell.value) for row in table.cells for cell in row):
        raise EngineError("table contains non-finite cells")
    return 0


def cmd_eval(args) -> int:
    family = args.family
    rule_id = args.rule.replace("-", "_")
    if rule_id not in FAMILY_RULES[family]:
        raise InputError(
            f"rule {args.rule!r} does not belong to family {family!r}; "
            f"expected one of {FAMILY_RULES[family]}"
        )
    rule = _family_rule(family, rule_id, args)
    adapter = _family_adapter(family)
    params = FAMILY_PARAMS[family]
    plan = ReplicationPlan(n=args.n, replicates=args.replicates, master_seed=args.seed)

    fixed = {}
    for chunk in args.fix or []:
        fixed.update(_parse_assignments(chunk, "--fix"))
    sweeps = dict(_parse_sweep(s) for s in args.sweep or [])

    if args.state:
        if sweeps:
            raise InputError("use either --state or --sweep, not both")
        assigned = {**fixed, **_parse_assignments(args.state, "--state")}
        missing = [p for p in params if p not in assigned]
        if missing or set(assigned) - set(params):
            raise InputError(
                f"state for family {family!r} needs exactly parameters {params}"
            )
        state = adapter.make_state(tuple(assigned[p] for p in params))
        est = engine.estimate_risk(
            rule, state, plan, adapter.simulate, adapter.welfare, adapter.optimum
        )
        print(
            f"{family}/{rule_id} at {args.state}: "
            f"expected_welfare={est.expected_welfare:.6f} "
            f"regret={est.regret:.6f} mc_stderr={est.mc_stderr:.6f}"
        )
        if args.out:
            with open(args.out, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow([*params, "expected_welfare", "regret", "mc_stderr"])
                writer.writerow(
                    [*[repr(assigned[p]) for p in params],
                     repr(est.expected_welfare), repr(est.regret), repr(est.mc_stderr)]
                )
        return 0

    unknown = set(sweeps) | set(fixed)
    if unknown - set(params):
        raise InputError(f"unknown parameters {sorted(unknown - set(params))} for {family!r}")
    values = []
    for p in params:
        if p in sweeps:
            values.append(sweeps[p])
        elif p in fixed:
            values.append((fixed[p],))
        else:
            raise InputError(f"parameter {p!r} needs a --sweep or --fix entry")
    constraint = PANEL_B_CONSTRAINTS[family] if args.panel == "b" else None
    if args.panel == "b" and constraint is None:
        raise InputError(f"family {family!r} has no panel-b constraint")
    grid = StateGrid(params, tuple(values), constraint)
    sweep = engine.max_regret_over_grid(rule, grid, plan, adapter, workers=args.workers)
    arg = ", ".join(f"{k}={v:g}" for k, v in zip(params, sweep.argmax_state))
    print(
        f"{family}/{rule_id}: max regret {sweep.max_regret:.6f} at ({arg}) "
        f"over {len(sweep.rows)} states"
    )
    if args.out:
        sweep.to_csv(args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_sentencing(args) -> int:
    report = treat.sentencing_example()
    for line in report.lines():
        print(line)
    return 0


def cmd_compare_trial(args) -> int:
    result = trial.compare_max_regret(
        args.n_per_arm,
        alpha=args.alpha,
        density=args.grid,
        replicates=args.replicates,
        master_seed=args.seed,
        tie=args.tie,
        workers=args.workers,
    )
    how = "exact enumeration" if result.exact else f"{args.replicates} replicates"
    print(
        f"two-arm comparison, n={args.n_per_arm} per arm, alpha={args.alpha} ({how})"
    )
    print(
        f"  empirical success: max regret {result.max_regret_es:.4f} "
        f"at (p_a={result.argmax_es[0]:g}, p_b={result.argmax_es[1]:g})"
    )
    print(
        f"  test-and-switch:   max regret {result.max_regret_np:.4f} "
        f"at (p_a={result.argmax_np[0]:g}, p_b={result.argmax_np[1]:g})"
    )
    if args.out:
        result.to_csv(args.out)
        print(f"  wrote {args.out}")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--replicates", type=int, default=engine.DEFAULT_REPLICATES,
                        help="Monte Carlo replicates per state (default 5000)")
    parser.add_argument("--seed", type=int, default=engine.DEFAULT_SEED,
                        help="64-bit master seed (default 20191203)")
    parser.add_argument("--tie", choices=("a", "b"), default="a",
                        help="action taken at exact ties (default a)")
    parser.add_argument("--alpha", type=float, default=0.05,
                        help="test size for the test-based trial rule")
    parser.add_argument("--workers", type=int, default=1,
                        help="parallel workers for grid sweeps")
    parser.add_argument("--out", help="output CSV path")
    parser.add_argument("--config", help="JSON file of flag defaults (flags override)")


def build_parser() -> tuple[argparse.ArgumentParser, list[argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="decisionrisk",
        description="Evaluate statistical decision rules by expected welfare "
                    "and maximum regret via seeded Monte Carlo and grid search.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    children = []

    rep = sub.add_parser("reproduce", help="recompute a benchmark table")
    rep.add_argument("table", choices=sorted(benchmarks.TABLE_SPECS),
                     help="benchmark table id")
    rep.add_argument("--grid", type=int, default=None,
                     help="outcome-grid density (defaults per family)")
    rep.add_argument("--grid-mode", choices=("interior", "endpoints"), default=None,
                     help="grid placement override")
    rep.add_argument("--counterfactual", choices=("corners", "full"),
                     default="corners",
                     help="maximize over counterfactual corners or the full grid")
    rep.add_argument("--es-empty", choices=("default", "half"), default="default",
                     help="empty-arm policy of the empirical-success rule")
    rep.add_argument("--reference", default=None,
                     help="reference CSV (defaults to the bundled values)")
    rep.add_argument("--no-check", action="store_true",
                     help="skip the reference comparison")
    rep.add_argument("--full-precision", action="store_true",
                     help="write full-precision cells instead of 4 decimals")
    _add_common(rep)
    rep.set_defaults(func=cmd_reproduce)
    children.append(rep)

    ev = sub.add_parser("eval", help="risk of one rule at a state or over a grid")
    ev.add_argument("--family", choices=sorted(FAMILY_PARAMS), required=True)
    ev.add_argument("--rule", required=True, help="rule id within the family")
    ev.add_argument("--n", type=int, required=True,
                    help="sample size (per arm for trial family)")
    ev.add_argument("--state", help="comma-separated name=value state")
    ev.add_argument("--sweep", action="append",
                    help="name=lo:hi:count grid for one parameter (repeatable)")
    ev.add_argument("--fix", action="append",
                    help="name=value for parameters held fixed (repeatable)")
    ev.add_argument("--panel", choices=("a", "b"), default="a",
                    help="state-space panel for grid sweeps")
    ev.add_argument("--es-empty", choices=("default", "half"), default="half",
                    help="empty-arm policy of the empirical-success rule")
    _add_common(ev)
    ev.set_defaults(func=cmd_eval)
    children.append(ev)

    sent = sub.add_parser("sentencing", help="print the sentencing case study")
    sent.add_argument("--config", help="JSON file of flag defaults (flags override)")
    sent.set_defaults(func=cmd_sentencing)
    children.append(sent)

    cmp_ = sub.add_parser("compare-trial",
                          help="empirical success vs test rule over the state grid")
    cmp_.add_argument("--n-per-arm", type=int, required=True)
    cmp_.add_argument("--grid", type=int, default=101,
                      help="grid density per outcome probability (default 101)")
    _add_common(cmp_)
    cmp_.set_defaults(func=cmd_compare_trial)
    children.append(cmp_)

    return parser, children


def _apply_config(argv: list[str], parser, children) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        with open(known.config) as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {known.config!r}: {exc}") from None
    if not isinstance(config, dict):
        raise InputError("config file must hold a flat JSON object")
    all_dests = set()
    for child in children:
        dests = {action.dest for action in child._actions}
        child.set_defaults(**{k: v for k, v in config.items() if k in dests})
        all_dests |= dests
    unknown = set(config) - all_dests
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, children = build_parser()
    try:
        _apply_config(argv, parser, children)
        args = parser.parse_args(argv)
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EngineError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
