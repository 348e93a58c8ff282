"""Command-line entry point: compare, chain, hyptest, oracle, design."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import estimators as est
from . import harness
from .epidemic import (
    ChainParams,
    chain_complement_prob,
    chain_model,
    chain_pi_2f1,
    chain_pi_analytic,
    chain_schedule,
    model_from_edgelist,
    read_schedule,
)
from .importance import optimal_design, warn_if_uncovered, write_design
from .oracle import EnumerationBudget
from .sample_space import Event, read_distribution

EXIT_OK, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t.strip())


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _names(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _add_chain_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--L", type=int, default=None)
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--p1", type=float, default=None)
    p.add_argument("--p2", type=float, default=None)


def _chain_params(args) -> ChainParams:
    d = harness.ExperimentConfig.__dataclass_fields__
    pick = lambda name: getattr(args, name) if getattr(args, name) is not None else d[name].default
    return ChainParams(pick("L"), pick("T"), pick("p1"), pick("p2"))


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="probinformed", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compare", help="empirical vs exact estimator variances")
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--seed", type=_seed)
    p.add_argument("--out")
    p.add_argument("--reps", type=int)
    p.add_argument("--n", type=_int_list, help="comma-separated sample sizes")
    p.add_argument("--estimators", type=_names)
    p.add_argument("--network", help="edge-list file (with --schedule)")
    p.add_argument("--schedule", help="sentinel CSV node,time")
    p.add_argument("--jackknife", choices=("exact", "approx"))
    _add_chain_flags(p)

    p = sub.add_parser("chain", help="analytic quantities of the chain model")
    _add_chain_flags(p)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--sweep-p1", type=_float_list, help="p1 grid; with --sweep-p2 writes a v1 < v0 sweep")
    p.add_argument("--sweep-p2", type=_float_list)
    p.add_argument("--out")

    p = sub.add_parser("hyptest", help="test 'an outbreak occurred' given all-negative tests")
    _add_chain_flags(p)
    p.add_argument("--network")
    p.add_argument("--schedule")
    p.add_argument("--level", type=float, default=0.01)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--estimators", type=_names, default=("pi1",), help="first entry is used")
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--out")

    p = sub.add_parser("oracle", help="exhaustive-enumeration verification suite")
    p.add_argument("--budget", type=int, default=10**6, help="max |Omega|**n per cell")
    p.add_argument("--out")

    p = sub.add_parser("design", help="optimal importance-sampling design for an event")
    p.add_argument("--dist", required=True, help="CSV outcome_id,p")
    p.add_argument("--event", type=_int_list, required=True, help="comma-separated outcome ids")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", help="CSV outcome_id,p,p_prime")
    return parser


def _cmd_compare(args) -> int:
    overrides = {
        "seed": args.seed,
        "reps": args.reps,
        "n_grid": args.n,
        "estimators": args.estimators,
        "network": args.network,
        "schedule": args.schedule,
        "jackknife": args.jackknife,
        "L": args.L,
        "T": args.T,
        "p1": args.p1,
        "p2": args.p2,
        "out": args.out,
    }
    if args.config:
        config = harness.ExperimentConfig.from_json(args.config, **overrides)
    else:
        if args.seed is None:
            raise UsageError("--seed is required (or give it in --config)")
        config = harness.ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})
    rows = harness.run_compare(config)
    _emit(harness.rows_to_csv(rows, harness.COMPARE_COLUMNS), config.out)
    return EXIT_OK


def _cmd_chain(args) -> int:
    params = _chain_params(args)
    if (args.sweep_p1 is None) != (args.sweep_p2 is None):
        raise UsageError("--sweep-p1 and --sweep-p2 go together")
    if args.sweep_p1 is not None:
        rows = harness.chain_sweep(params.L, params.T, args.n, args.sweep_p1, args.sweep_p2)
        cols = ("p1", "p2", "pi", "v0", "v1", "v1_below_v0")
        _emit(harness.rows_to_csv(rows, cols), args.out)
        return EXIT_OK
    pi = chain_pi_analytic(params)
    report = {
        "L": params.L,
        "T": params.T,
        "p1": params.p1,
        "p2": params.p2,
        "n": args.n,
        "pi": pi,
        "pi_2f1": chain_pi_2f1(params) if 0 < params.q2 < 1 else None,
        "complement": chain_complement_prob(params) if params.q2 > 0 else 1.0 - pi,
        "v0": est.v0_exact(pi, args.n),
        "v1": harness.chain_v1(params, args.n),
        "detected_outcomes": harness.chain_event_size(params),
    }
    report["v1_below_v0"] = report["v1"] < report["v0"]
    _emit(_dumps(report), args.out)
    return EXIT_OK


def _cmd_hyptest(args) -> int:
    if (args.network is None) != (args.schedule is None):
        raise UsageError("--network and --schedule go together")
    params = _chain_params(args)
    m = None
    if args.network is not None:
        model = model_from_edgelist(args.network, params.T, params.p1, params.p2)
        schedule = read_schedule(args.schedule)
    else:
        model, schedule = chain_model(params), chain_schedule(params)
        m = harness.chain_event_size(params, detected=False)
    result = harness.run_hypothesis_test(
        model, schedule, args.level, args.n, args.estimators[0], args.seed, m=m
    )
    _emit(_dumps(result.to_dict()), args.out)
    return EXIT_OK


def _cmd_oracle(args) -> int:
    report = harness.run_oracle_suite(EnumerationBudget(args.budget))
    _emit(_dumps(report), args.out)
    summary = (
        f"oracle: {report['checked']} checked, {report['failed']} failed, "
        f"{report['unattainable']} unattainable, max discrepancy {report['max_discrepancy']:.3g}\n"
    )
    sys.stderr.write(summary)
    return EXIT_VERIFY if report["failed"] else EXIT_OK


def _cmd_design(args) -> int:
    dist = read_distribution(args.dist)
    event = Event.of(args.event)
    dist.check_event(event)
    design = optimal_design(dist, event, args.n)
    warn_if_uncovered(design)
    if args.out:
        write_design(design, dist, event, args.out)
    summary = {
        "n": design.n,
        "support": list(design.support),
        "weights": {str(k): v for k, v in design.weights.items()},
        "alpha": design.alpha,
        "C": design.C,
        "objective": design.objective,
        "exact_v1": design.exact_v1,
        "v1_plain": est.v1_exact(dist, event, args.n),
        "excluded_mass": design.excluded_mass,
        "feasible_sizes": list(design.feasible_sizes),
    }
    sys.stdout.write(_dumps(summary))
    return EXIT_OK


COMMANDS = {
    "compare": _cmd_compare,
    "chain": _cmd_chain,
    "hyptest": _cmd_hyptest,
    "oracle": _cmd_oracle,
    "design": _cmd_design,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help exits 0, parse errors exit EXIT_USAGE via _Parser.error
        return exc.code
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValueError, OSError) as exc:
        sys.stderr.write(f"probinformed {args.command}: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
