"""Command-line entry point.

Eight subcommands cover the pipeline stages individually plus `run` for
the whole thing and `audit` for re-checking emitted plans.  Fatal errors
leave a machine-readable JSON line on stderr naming the failing stage.
"""

from __future__ import annotations

import argparse
import json
import sys

from .audit import audit_run_dir
from .errors import ConfigError, StageError, VegplanError
from .pipeline import (
    RunConfig,
    RunContext,
    config_hash,
    run_pipeline,
    stage_analyze,
    stage_fit_demand,
    stage_forecast,
    stage_ingest,
    stage_plan_categories,
    stage_plan_items,
)


def _common_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # the same flags are accepted before and after the subcommand; the
    # SUPPRESS default lets a post-subcommand value win without clobbering
    # a pre-subcommand one
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, metavar="FILE",
                        help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=default, metavar="N",
                        help="root random seed")
    parser.add_argument("--out", default=default, metavar="DIR",
                        help="output directory")
    parser.add_argument("--verbose", action="store_true",
                        **({"default": default} if suppress else {}),
                        help="report stage progress on stderr")
    parser.add_argument("--catalog", default=default, metavar="FILE")
    parser.add_argument("--transactions", default=default, metavar="FILE")
    parser.add_argument("--wholesale", default=default, metavar="FILE")
    parser.add_argument("--loss", default=default, metavar="FILE")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vegplan",
        description="Vegetable replenishment and pricing planner.",
    )
    _common_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    parent = argparse.ArgumentParser(add_help=False)
    _common_flags(parent, suppress=True)

    sub.add_parser("ingest", parents=[parent],
                   help="load and validate the four input files")

    p = sub.add_parser("analyze", parents=[parent],
                       help="write sales aggregates, correlations, profits")
    p.add_argument("--granularity", choices=("day", "month", "quarter"))
    p.add_argument("--top-n", type=int, dest="top_n", metavar="N")

    p = sub.add_parser("fit-demand", parents=[parent],
                       help="fit category price-demand curves")
    p.add_argument("--family", choices=("auto", "linear", "log", "power"))

    p = sub.add_parser("forecast-wholesale", parents=[parent],
                       help="forecast category wholesale prices")
    p.add_argument("--category", metavar="NAME",
                   help="forecast a single category only")
    p.add_argument("--horizon", type=int, metavar="DAYS")
    p.add_argument("--order", metavar="P,D,Q", help="'auto' or fixed p,d,q")

    p = sub.add_parser("plan-categories", parents=[parent],
                       help="7-day category replenishment and pricing plan")
    p.add_argument("--start", metavar="YYYY-MM-DD", help="first planned day")
    p.add_argument("--days", type=int, metavar="N", help="planning horizon")
    p.add_argument("--order", metavar="P,D,Q")

    p = sub.add_parser("plan-items", parents=[parent],
                       help="single-day item assortment and pricing plan")
    p.add_argument("--date", metavar="YYYY-MM-DD", help="day to plan")
    p.add_argument("--window", type=int, metavar="DAYS",
                   help="lookback window for the candidate pool")
    p.add_argument("--min-items", type=int, dest="min_items")
    p.add_argument("--max-items", type=int, dest="max_items")
    p.add_argument("--min-display", type=float, dest="min_display")
    p.add_argument("--mode", choices=("share", "literal"))
    p.add_argument("--restarts", type=int)

    sub.add_parser("audit", parents=[parent],
                   help="re-check emitted plans against all constraints")
    sub.add_parser("run", parents=[parent], help="full pipeline")
    return parser


def _build_config(args: argparse.Namespace) -> RunConfig:
    def got(name):
        return getattr(args, name, None)

    if got("config"):
        config = RunConfig.from_file(args.config)
    else:
        paths = {k: got(k) for k in ("catalog", "transactions", "wholesale", "loss")}
        missing = [k for k, v in paths.items() if not v]
        if missing and args.command != "audit":
            raise ConfigError(
                "missing input paths (give --config or --catalog/--transactions/"
                f"--wholesale/--loss): {missing}"
            )
        config = RunConfig(
            catalog=paths["catalog"] or "",
            transactions=paths["transactions"] or "",
            wholesale=paths["wholesale"] or "",
            loss=paths["loss"] or "",
        )
    return config.with_overrides(
        seed=got("seed"),
        out_dir=got("out"),
        granularity=got("granularity"),
        top_n=got("top_n"),
        demand_family=got("family"),
        arima_order=got("order"),
        horizon=got("horizon") or got("days"),
        plan_date=got("start") or got("date"),
        item_window_days=got("window"),
        min_items=got("min_items"),
        max_items=got("max_items"),
        min_display_kg=got("min_display"),
        demand_mode=got("mode"),
        restarts=got("restarts"),
    )


def _emit_error(stage: str, exc: Exception) -> None:
    payload = {"stage": stage, "type": type(exc).__name__, "error": str(exc)}
    print(json.dumps(payload, ensure_ascii=False), file=sys.stderr)


def _log(args, message: str) -> None:
    if getattr(args, "verbose", None):
        print(message, file=sys.stderr)


# stage sequences per subcommand; every earlier stage a later one needs
# is included
_STAGE_PLANS = {
    "ingest": (("ingest", stage_ingest),),
    "analyze": (("ingest", stage_ingest), ("analyze", stage_analyze)),
    "fit-demand": (("ingest", stage_ingest), ("fit-demand", stage_fit_demand)),
    "plan-categories": (
        ("ingest", stage_ingest),
        ("fit-demand", stage_fit_demand),
        ("forecast-wholesale", stage_forecast),
        ("plan-categories", stage_plan_categories),
    ),
    "plan-items": (
        ("ingest", stage_ingest),
        ("fit-demand", stage_fit_demand),
        ("plan-items", stage_plan_items),
    ),
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _build_config(args)
    except (ConfigError, VegplanError) as exc:
        _emit_error("config", exc)
        return 1

    if args.command == "run":
        try:
            result = run_pipeline(config)
        except StageError as exc:
            _emit_error(exc.stage, exc.cause)
            return 1
        for name, path in sorted(result.artifacts.items()):
            _log(args, f"{name}: {path}")
        print(f"run complete in {result.elapsed:.2f}s"
              f" (config {config_hash(config)}, audit"
              f" {'ok' if result.audit_ok else 'FAILED'})")
        return 0 if result.audit_ok else 1

    if args.command == "audit":
        try:
            report = audit_run_dir(config.out_dir)
        except VegplanError as exc:
            _emit_error("audit", exc)
            return 1
        ctx = RunContext(config)
        path = ctx.out_path("audit.json")
        with open(path, "w", encoding="utf-8") as fh:
            body = {"provenance": ctx.provenance("audit")}
            body.update(report.to_dict())
            json.dump(body, fh, ensure_ascii=False, sort_keys=True, indent=2)
            fh.write("\n")
        print(f"audit: {report.n_checks} checks,"
              f" {len(report.issues)} issue(s) -> {path}")
        for issue in report.issues:
            print(f"  {issue.constraint} @ {issue.location}: {issue.message}")
        return 0 if report.ok else 1

    if args.command == "forecast-wholesale":
        ctx = RunContext(config)
        steps = (("ingest", stage_ingest),
                 ("forecast-wholesale",
                  lambda c: stage_forecast(c, only_category=args.category)))
    else:
        ctx = RunContext(config)
        steps = _STAGE_PLANS[args.command]
    for name, step in steps:
        _log(args, f"stage {name} ...")
        try:
            step(ctx)
        except VegplanError as exc:
            _emit_error(name, exc)
            return 1
        except OSError as exc:
            _emit_error(name, exc)
            return 1
    for name, path in sorted(ctx.artifacts.items()):
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
