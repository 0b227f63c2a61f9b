"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 stage
failure, 5 llm budget exceeded.  ``LLM_API_KEY`` in the environment is
forwarded to the llm proposer when one is configured.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import AutodsError, BudgetExceededError, ConfigError, DataError
from .pipeline import (
    PipelineConfig,
    ablate,
    propose_only,
    report_only,
    run,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_STAGE = 4
EXIT_BUDGET = 5


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="autods",
        description="Hypothesis-driven tabular analysis pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the full pipeline")
    p_run.add_argument("--config", required=True, help="JSON config path")
    p_run.set_defaults(func=_cmd_run)

    p_ab = sub.add_parser("ablate", help="run stage-toggle configurations "
                                         "on identical data and seed")
    p_ab.add_argument("--config", required=True, help="JSON config path")
    p_ab.add_argument("--grid", required=True,
                      help="JSON list of {name, hypothesis?, "
                           "feature_engineering?} toggle sets")
    p_ab.set_defaults(func=_cmd_ablate)

    p_val = sub.add_parser("validate-config",
                           help="check a config file and echo the "
                                "normalized form")
    p_val.add_argument("--config", required=True, help="JSON config path")
    p_val.set_defaults(func=_cmd_validate)

    p_prop = sub.add_parser("propose-only",
                            help="clean, split, and run one hypothesis "
                                 "cycle; print the verdicts")
    p_prop.add_argument("--config", required=True, help="JSON config path")
    p_prop.set_defaults(func=_cmd_propose)

    p_rep = sub.add_parser("report-only",
                           help="re-render report.md/report.json from a "
                                "previous run's artifacts")
    p_rep.add_argument("--config", required=True, help="JSON config path")
    p_rep.set_defaults(func=_cmd_report)
    return parser


def _cmd_run(args) -> int:
    config = PipelineConfig.load(args.config)
    result = run(config)
    n_acc = sum(1 for v in result.verdicts if v.accepted)
    print(f"run complete: {config.output_dir}")
    print(f"  hypotheses: {n_acc} accepted of {len(result.verdicts)} tested")
    print(f"  features:   {len(result.features)} engineered")
    chosen = result.model_json["chosen"]
    holdout = " ".join(f"{k}={v:.4f}"
                       for k, v in sorted(result.model_json["holdout"].items()))
    print(f"  model:      {chosen['name']} "
          f"(cv {chosen['cv_metric']}={chosen['cv_mean']:.4f})")
    print(f"  holdout:    {holdout}")
    if result.cost["llm_calls"]:
        print(f"  llm cost:   ${result.cost['cost_usd']:.6f} over "
              f"{result.cost['llm_calls']} calls / "
              f"{result.cost['tokens']} tokens")
    times = " ".join(f"{k}={v:.2f}s" for k, v in result.timings.items())
    print(f"  wall time:  {times}")
    return EXIT_OK


def _cmd_ablate(args) -> int:
    config = PipelineConfig.load(args.config)
    try:
        with open(args.grid, "r", encoding="utf-8") as fh:
            grid = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read grid {args.grid}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"grid {args.grid} is not valid JSON: "
                          f"{exc}") from exc
    if not isinstance(grid, list):
        raise ConfigError("grid must be a JSON list of toggle sets")
    rows = ablate(config, grid)
    for row in rows:
        status = row["error"] or "ok"
        metrics = " ".join(
            f"{k}={row[k]:.4f}" for k in sorted(row)
            if isinstance(row[k], float) and k != "wall_time_s")
        print(f"{row['configuration']}: {status} {metrics} "
              f"features={row.get('features', '')} "
              f"wall={row.get('wall_time_s', '')}s")
    print(f"comparison written: {config.output_dir}/ablation.csv "
          f"and ablation.md")
    return EXIT_STAGE if any(r["error"] for r in rows) else EXIT_OK


def _cmd_validate(args) -> int:
    config = PipelineConfig.load(args.config)
    print(json.dumps(config.to_json(), indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_propose(args) -> int:
    config = PipelineConfig.load(args.config)
    print(json.dumps(propose_only(config), indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_report(args) -> int:
    config = PipelineConfig.load(args.config)
    md, _ = report_only(config.output_dir)
    print(md)
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BudgetExceededError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except AutodsError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
