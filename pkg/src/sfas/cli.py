"""Command-line front end: single-shot, campaign, crb and validate verbs."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .harness import (
    Campaign,
    ScenarioFileError,
    load_file,
    run_campaign,
    run_single_shot,
    validate_scenario,
    write_crb_csv,
)


def _apply_seed(scenario, seed):
    return scenario if seed is None else replace(scenario, seed=int(seed))


def _cmd_single_shot(args) -> int:
    scenario, settings, campaign = load_file(args.file)
    if campaign is not None:
        scenario = campaign.scenario
    scenario = _apply_seed(scenario, args.seed)
    bundle = run_single_shot(scenario, settings, out_dir=args.out)
    if bundle.estimate is not None:
        print("source  coarse[deg]  range_init[wl]  refined[deg]  range[wl]  flags")
        for i, src in enumerate(bundle.estimate.sources, start=1):
            flags = []
            if src.range_flat:
                flags.append("flat-range")
            if src.boundary_hit:
                flags.append("window-edge")
            print(
                f"{i:6d}  {src.coarse_angle_deg:11.3f}  {src.initial_range:14.2f}"
                f"  {src.refined_angle_deg:12.4f}  {src.refined_range:9.3f}"
                f"  {','.join(flags) or '-'}"
            )
    for err in bundle.errors:
        print(f"note: {err}")
    if args.out:
        print(f"artifacts written to {args.out}")
    return 0


def _as_campaign(scenario, settings, campaign) -> Campaign:
    if campaign is not None:
        return campaign
    return Campaign(scenario=scenario, settings=settings, trials=1)


def _cmd_campaign(args) -> int:
    scenario, settings, campaign = load_file(args.file)
    campaign = _as_campaign(scenario, settings, campaign)
    campaign = replace(campaign, scenario=_apply_seed(campaign.scenario, args.seed))
    if args.trials is not None:
        campaign = replace(campaign, trials=int(args.trials))
    out = args.out or campaign.out_dir
    records = run_campaign(campaign, out_dir=out, threads=args.threads)
    for rec in records:
        acc = (
            f"acc={rec.acc_angle_rmse_pooled:.4g}deg "
            if rec.acc_angle_rmse_pooled is not None
            else ""
        )
        rng = (
            f" range={rec.range_rmse_pooled:.4g}wl"
            if rec.range_rmse_pooled is not None
            else ""
        )
        print(
            f"{campaign.sweep}={rec.sweep_value:g} {rec.estimator}: "
            f"{acc}aar={rec.aar_angle_rmse_pooled:.4g}deg{rng} "
            f"({rec.trials_failed}/{rec.trials_total} failed)"
        )
    if out:
        print(f"artifacts written to {out}")
    return 0


def _cmd_crb(args) -> int:
    scenario, settings, campaign = load_file(args.file)
    campaign = _as_campaign(scenario, settings, campaign)
    campaign = replace(campaign, scenario=_apply_seed(campaign.scenario, args.seed))
    path = write_crb_csv(campaign, args.out)
    print(f"bounds written to {path}")
    return 0


def _cmd_validate(args) -> int:
    scenario, _, campaign = load_file(args.file)
    if campaign is not None:
        scenario = campaign.scenario
    checks = validate_scenario(scenario)
    failed = 0
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
        failed += 0 if ok else 1
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 0 if failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sfas",
        description="Scalable-aperture two-stage source localization experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    single = sub.add_parser("single-shot", help="run the pipeline once, dump spectra")
    single.add_argument("file", type=Path, help="scenario or campaign YAML file")
    single.add_argument("--out", type=Path, default=None, help="output directory")
    single.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    single.set_defaults(fn=_cmd_single_shot)

    camp = sub.add_parser("campaign", help="Monte-Carlo RMSE sweep")
    camp.add_argument("file", type=Path)
    camp.add_argument("--out", type=Path, default=None)
    camp.add_argument("--seed", type=int, default=None)
    camp.add_argument("--trials", type=int, default=None, help="override trial count")
    camp.add_argument("--threads", type=int, default=1, help="worker threads")
    camp.set_defaults(fn=_cmd_campaign)

    crb_cmd = sub.add_parser("crb", help="export Cramer-Rao bound curves")
    crb_cmd.add_argument("file", type=Path)
    crb_cmd.add_argument("--out", type=Path, required=True)
    crb_cmd.add_argument("--seed", type=int, default=None)
    crb_cmd.set_defaults(fn=_cmd_crb)

    val = sub.add_parser("validate", help="check a scenario against the invariant suite")
    val.add_argument("file", type=Path)
    val.set_defaults(fn=_cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ScenarioFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
