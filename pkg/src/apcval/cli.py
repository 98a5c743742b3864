"""Command line orchestration of the validation workflows.

Subcommands: plan, optimize, classify, sample, evaluate, simulate, cost.
Flag overrides (`--set key=value`) win over the configuration file. A
failed equivalence test is a result, not a program error: the exit code is
nonzero only for hard errors (and, with --strict, for validation
violations).
"""

from __future__ import annotations

import argparse
import csv
import io as _stringio
import sys
from dataclasses import replace
from pathlib import Path

from . import cost as cost_mod
from . import io as io_mod
from . import planner, simulate
from .classify import (
    KIND_COMBINED,
    KIND_RULE_OF_THUMB,
    ClassifierSpec,
    combined_classify,
    draw_sample,
)
from .classify import classify as run_classifier
from .domain import SAFE, UNLABELED, UNSAFE, DopRecord
from .estimator import evaluate_classic, evaluate_partitioned


def _add_common(p: argparse.ArgumentParser, campaign: bool = False) -> None:
    p.add_argument("--config", help="configuration file path")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--out", help="write the report/output to this path")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--strict", action="store_true",
                   help="treat validation violations as errors")
    if campaign:
        p.add_argument("--campaign", required=True, help="campaign file path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="apcval",
        description="Plan, cost-optimize, run and stress-test partitioned "
        "equivalence tests for passenger counting validation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="sample/record size and quota planning")
    _add_common(p)

    p = sub.add_parser("optimize", help="cost-optimal quota from campaign costs")
    _add_common(p, campaign=True)

    p = sub.add_parser("classify", help="assign safe/unsafe labels")
    _add_common(p, campaign=True)

    p = sub.add_parser("sample", help="draw the counted subset of the safe partition")
    _add_common(p, campaign=True)

    p = sub.add_parser("evaluate", help="run the equivalence test on a campaign")
    _add_common(p, campaign=True)
    p.add_argument("--mode", choices=("auto", "classic", "partitioned"), default="auto")
    p.add_argument("--details", help="write the per-record spreadsheet CSV here")

    p = sub.add_parser("simulate", help="Monte Carlo test success study")
    _add_common(p)
    p.add_argument("--test", choices=(simulate.TEST_CLASSIC, simulate.TEST_PARTITIONED),
                   default=simulate.TEST_CLASSIC)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--n-grid", required=True,
                   help="comma-separated sample sizes, e.g. 500,1000,2000")
    p.add_argument("--bias-grid", help="comma-separated target mean errors")
    p.add_argument("--pool-s", help="comma-separated resampling pool (safe stratum)")
    p.add_argument("--pool-u", help="comma-separated resampling pool (unsafe stratum)")
    p.add_argument("--audit", action="store_true",
                   help="report worst-case pass rate per n (user risk audit)")

    p = sub.add_parser("cost", help="cost parameters from a campaign")
    _add_common(p, campaign=True)
    return parser


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load(args) -> io_mod.Config:
    config = io_mod.load_config_with_overrides(args.config, args.overrides)
    if args.seed is not None:
        if args.seed < 0:
            raise io_mod.ConfigError(f"seed must be >= 0, got {args.seed}")
        config = replace(config, seed=args.seed)
    return config


def _load_campaign(args) -> list[DopRecord]:
    records, violations = io_mod.load_campaign(args.campaign, strict=args.strict)
    if violations:
        for v in violations:
            print(f"violation: {v}", file=sys.stderr)
    return records


def _classifier(config: io_mod.Config) -> ClassifierSpec:
    if config.classifier is None:
        raise io_mod.ConfigError("classifier.kind is not configured")
    return config.classifier


def _classify_records(
    records: list[DopRecord], config: io_mod.Config
) -> tuple[list[DopRecord], dict[str, int] | None]:
    """Apply the configured classifier; combined uses the two-stage flow."""
    spec = _classifier(config)
    if spec.kind == KIND_COMBINED:
        first = ClassifierSpec(
            kind=KIND_RULE_OF_THUMB,
            threshold=spec.threshold,
            target_share=spec.target_share,
        )
        return combined_classify(records, first)
    labeled, _ = run_classifier(records, spec)
    return labeled, None


def _cost_params(records: list[DopRecord], config: io_mod.Config):
    reclass_flags = None
    if config.scheme == cost_mod.SCHEME_COMBINED:
        records, reclass_flags = _classify_records(records, config)
    elif any(r.label == UNLABELED for r in records):
        if config.classifier is not None:
            records, reclass_flags = _classify_records(records, config)
        else:
            raise io_mod.CampaignError(
                "campaign has unlabeled records and no classifier is configured"
            )
    return cost_mod.cost_breakdown(records, config.rates, config.scheme, reclass_flags)


def cmd_plan(args) -> int:
    config = _load(args)
    plan = planner.make_plan(config.params, config.partition)
    payload = io_mod.report_to_dict(plan)
    payload["seed"] = config.seed
    _write_or_print(io_mod.emit_report(payload, args.format), args.out)
    return 0


def cmd_optimize(args) -> int:
    config = _load(args)
    records = _load_campaign(args)
    breakdown = _cost_params(records, config)
    costs = breakdown.cost_params()
    plan = planner.make_plan(config.params, config.partition, costs=costs)
    payload = io_mod.report_to_dict(plan)
    payload["seed"] = config.seed
    payload["scheme"] = breakdown.scheme
    n_e = plan.n_e
    payload["total_cost_classic"] = planner.total_cost(
        n_e, 1.0, config.partition, costs
    )
    payload["total_cost_partitioned"] = planner.total_cost(
        plan.n_rec, plan.q_planned, config.partition, costs
    )
    _write_or_print(io_mod.emit_report(payload, args.format), args.out)
    return 0


def cmd_classify(args) -> int:
    config = _load(args)
    records = _load_campaign(args)
    labeled, flags = _classify_records(records, config)
    if not args.out:
        raise io_mod.ConfigError("classify needs --out to write the labeled campaign")
    io_mod.save_campaign(labeled, args.out)
    n = len(labeled)
    payload = {
        "report": "classification",
        "version": io_mod.VERSION,
        "kind": _classifier(config).kind,
        "n": n,
        "n_s": sum(1 for r in labeled if r.label == SAFE),
        "n_u": sum(1 for r in labeled if r.label == UNSAFE),
        "p_hat_s": (sum(1 for r in labeled if r.label == SAFE) / n) if n else 0.0,
        "reclassified": None if flags is None else int(sum(flags.values())),
        "out": str(args.out),
    }
    sys.stdout.write(io_mod.emit_report(payload, args.format))
    return 0


def cmd_sample(args) -> int:
    config = _load(args)
    records = _load_campaign(args)
    safe_ids = [r.dop_id for r in records if r.label == SAFE]
    if not safe_ids:
        raise io_mod.CampaignError("campaign has no safe records to sample from")
    mask = draw_sample(safe_ids, config.partition.q, config.seed)
    chosen = dict(zip(safe_ids, mask))
    updated = [
        replace(r, sampled=bool(chosen[r.dop_id])) if r.label == SAFE else r
        for r in records
    ]
    if not args.out:
        raise io_mod.ConfigError("sample needs --out to write the updated campaign")
    io_mod.save_campaign(updated, args.out)
    n_s = len(safe_ids)
    counted = int(mask.sum())
    payload = {
        "report": "sample",
        "version": io_mod.VERSION,
        "seed": config.seed,
        "q": config.partition.q,
        "n_s": n_s,
        "counted": counted,
        "q_effective": counted / n_s,
        "out": str(args.out),
    }
    sys.stdout.write(io_mod.emit_report(payload, args.format))
    return 0


def _details_csv(records: list[DopRecord], report) -> str:
    """Per-record CSV so the aggregation can be redone in a spreadsheet."""
    m_hat = report.stats.m_hat_q
    q_eff = report.stats.q_effective
    buf = _stringio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dop_id", "d_i", "stratum", "weight"])
    for r in records:
        stratum = {SAFE: "s", UNSAFE: "u", UNLABELED: ""}[r.label]
        if report.stats.n_s == 0 and report.stats.n_u == report.stats.n:
            # classic evaluation: every record counts with weight 1
            d = (r.k_auto - r.m_final) / m_hat
            writer.writerow([r.dop_id, f"{d:.12g}", stratum, "1"])
        elif r.label == UNSAFE:
            d = (r.k_auto - r.m_final) / m_hat
            writer.writerow([r.dop_id, f"{d:.12g}", "u", "1"])
        elif r.sampled:
            d = (r.k_auto - r.m_final) / m_hat
            writer.writerow([r.dop_id, f"{d:.12g}", "s", f"{1.0 / q_eff:.12g}"])
        else:
            writer.writerow([r.dop_id, "", "s", "0"])
    return buf.getvalue()


def cmd_evaluate(args) -> int:
    config = _load(args)
    records = _load_campaign(args)
    labeled = [r for r in records if r.label != UNLABELED]
    if args.mode == "classic":
        mode = "classic"
    elif args.mode == "partitioned":
        mode = "partitioned"
    elif not labeled:
        mode = "classic"
    elif len(labeled) == len(records):
        mode = "partitioned"
    else:
        unl = [r.dop_id for r in records if r.label == UNLABELED]
        raise io_mod.CampaignError(
            f"campaign is partially labeled, records without label: {', '.join(unl)}"
        )
    if mode == "classic":
        report = evaluate_classic(records, config.params)
    else:
        report = evaluate_partitioned(records, config.params, q_planned=config.partition.q)

    payload = io_mod.report_to_dict(report)
    payload["mode"] = mode
    payload["seed"] = config.seed
    payload["params"] = io_mod._params_dict(config.params)
    _write_or_print(io_mod.emit_report(payload, args.format), args.out)

    details_path = args.details
    if details_path is None and args.out:
        details_path = str(Path(args.out)) + ".details.csv"
    if details_path:
        Path(details_path).write_text(_details_csv(records, report), encoding="utf-8")
    return 0


def _float_list(text: str, flag: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip() != "")
    except ValueError:
        raise io_mod.ConfigError(f"{flag} must be a comma-separated number list") from None


def cmd_simulate(args) -> int:
    config = _load(args)
    n_values = tuple(int(v) for v in args.n_grid.split(",") if v.strip() != "")
    bias = _float_list(args.bias_grid, "--bias-grid") if args.bias_grid else None
    if args.pool_s or args.pool_u:
        model: simulate.NormalErrors | simulate.ResamplingErrors = simulate.ResamplingErrors(
            pool_s=_float_list(args.pool_s, "--pool-s") if args.pool_s else (),
            pool_u=_float_list(args.pool_u, "--pool-u") if args.pool_u else (),
        )
    else:
        model = simulate.planning_normal_model(config.params.nu, config.partition)
    sim = simulate.SimConfig(
        error_model=model,
        params=config.params,
        partition=config.partition,
        n_values=n_values,
        bias_sweep=bias,
        trials=args.trials,
        test=args.test,
        seed=config.seed,
    )
    if args.audit:
        audit = simulate.user_risk_audit(sim)
        payload = io_mod.report_to_dict(audit)
        payload["seed"] = config.seed
        payload["trials"] = args.trials
        payload["test"] = args.test
        payload["bias_sweep"] = list(bias or ())
        _write_or_print(io_mod.emit_report(payload, args.format), args.out)
        return 0
    curves = simulate.run_simulation(sim)
    if len(curves) == 1:
        _write_or_print(io_mod.emit_report(curves[0], args.format), args.out)
    elif args.format == "csv":
        text = "".join(
            io_mod.emit_report(c, "csv").splitlines(keepends=True)[1 if i else 0 :]
            for i, c in enumerate(curves)
        )
        _write_or_print(text, args.out)
    else:
        payload = {
            "report": "success_curves",
            "version": io_mod.VERSION,
            "curves": [io_mod.report_to_dict(c) for c in curves],
        }
        _write_or_print(io_mod.emit_report(payload, args.format), args.out)
    return 0


def cmd_cost(args) -> int:
    config = _load(args)
    records = _load_campaign(args)
    breakdown = _cost_params(records, config)
    _write_or_print(io_mod.emit_report(breakdown, args.format), args.out)
    return 0


_COMMANDS = {
    "plan": cmd_plan,
    "optimize": cmd_optimize,
    "classify": cmd_classify,
    "sample": cmd_sample,
    "evaluate": cmd_evaluate,
    "simulate": cmd_simulate,
    "cost": cmd_cost,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (io_mod.CampaignError, io_mod.ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
