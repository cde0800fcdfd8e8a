"""Command-line interface.

Subcommands cover every pipeline stage plus the synthetic harness:

* ``ingest``      — validate the input files, write rejection logs and
                    cleaned copies
* ``fit``         — propensity models and coefficient tables per wave
* ``match``       — common support and matched pairs
* ``balance``     — covariate balance and score-density profiles
* ``estimate``    — matched ATT, DiD, and the weighting estimators
* ``sensitivity`` — hidden-bias bounds over the gamma grid
* ``run``         — everything above plus the combined summary
* ``sweep``       — per-group effects with difference-from-pooled tests
* ``simulate``    — generate synthetic waves or run a Monte-Carlo study

Options come from a JSON config file (``--config``) whose keys match the
flag names; any flag given on the command line overrides the config. The
``MATCHDID_OUTPUT_DIR`` environment variable sets the default output
directory. Exit status is 0 only when every requested stage completed.
"""

from __future__ import annotations

import argparse
import inspect
import logging
import sys
from pathlib import Path

from .errors import ConfigError, MatchDidError
from .frames import Wave, save_frame
from .pipeline import (
    ENV_OUTPUT_DIR,
    PipelineConfig,
    run_pipeline,
    subgroup_sweep,
    write_clean_copies,
)
from .reports import mc_report_table, write_tsv
from .synthetic import (
    _BENCHMARKS,
    DEFAULT_ESTIMATORS,
    generate,
    monte_carlo,
    spec_from_json,
    spec_to_json,
)

_SUBGROUP_OPS = ("<=", ">=", "==", "!=", "<", ">")


def _parse_predicate(text: str) -> tuple:
    for op in _SUBGROUP_OPS:
        if op in text:
            fld, value = text.split(op, 1)
            fld, value = fld.strip(), value.strip()
            if not fld or not value:
                break
            try:
                value = int(value)
            except ValueError:
                pass
            return (fld, op, value)
    raise argparse.ArgumentTypeError(
        f"predicate {text!r} must look like field==value (ops: {_SUBGROUP_OPS})"
    )


def _csv_list(text: str) -> tuple[str, ...]:
    items = tuple(t.strip() for t in text.split(",") if t.strip())
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return items


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    """Flags mirroring PipelineConfig keys; unset flags stay None so the
    config file value (or default) wins."""
    p.add_argument("--config", metavar="JSON", help="pipeline config file")
    p.add_argument("--pre-csv", help="pre-treatment wave CSV")
    p.add_argument("--post-csv", help="post-treatment wave CSV")
    p.add_argument(
        "--output-dir",
        help=f"artifact directory (default: ${ENV_OUTPUT_DIR} or ./matchdid_out)",
    )
    p.add_argument("--outcome", help="outcome column (default lpg_access)")
    p.add_argument(
        "--covariates", type=_csv_list, help="comma-separated covariate list"
    )
    p.add_argument(
        "--expand-categoricals",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="expand state/religion/caste into indicators",
    )
    p.add_argument("--link", choices=("logit", "probit"), help="propensity link")
    p.add_argument("--caliper", type=float, help="max |score difference| per pair")
    p.add_argument("--estimand", choices=("ate", "atet"))
    p.add_argument(
        "--estimators", type=_csv_list, help="comma-separated estimator list"
    )
    p.add_argument("--trim", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--gamma-start", type=float)
    p.add_argument("--gamma-stop", type=float)
    p.add_argument("--gamma-step", type=float)
    p.add_argument(
        "--stratify-pairs", action=argparse.BooleanOptionalAction, default=None
    )
    p.add_argument(
        "--subgroup",
        type=_parse_predicate,
        action="append",
        metavar="FIELD==VALUE",
        help="restrict the analysis (repeatable)",
    )
    p.add_argument("--group-field", help="field for the sweep subcommand")
    p.add_argument("--min-group-size", type=int)
    p.add_argument("--density-bins", type=int)
    p.add_argument("--delimiter", help="input field delimiter (default ,)")
    p.add_argument("--seed", type=int)


_CONFIG_KEYS = (
    "pre_csv",
    "post_csv",
    "output_dir",
    "outcome",
    "covariates",
    "expand_categoricals",
    "link",
    "caliper",
    "estimand",
    "estimators",
    "trim",
    "gamma_start",
    "gamma_stop",
    "gamma_step",
    "stratify_pairs",
    "subgroup",
    "group_field",
    "min_group_size",
    "density_bins",
    "delimiter",
    "seed",
)


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    cfg = (
        PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    )
    overrides = {}
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is None:
            continue
        if key == "trim":
            value = tuple(value)
        if key == "subgroup":
            value = tuple(value)
        overrides[key] = value
    return cfg.with_overrides(**overrides)


def _cmd_stage(args: argparse.Namespace, through: str) -> int:
    cfg = _config_from_args(args)
    result = run_pipeline(cfg, through=through)
    if through == "ingest":
        write_clean_copies(cfg)
    print(f"completed {len(result.stages)} stage(s); wrote {result.output_dir}")
    if through == "summary":
        print()
        print((result.output_dir / "summary.txt").read_text(encoding="utf-8"), end="")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    result = subgroup_sweep(cfg, group_field=args.group_field)
    for notice in result.notices:
        print(f"notice: {notice}", file=sys.stderr)
    print(
        f"swept {result.field}: {len(result.rows) - 1} group(s); "
        f"wrote {cfg.resolved_output_dir() / 'sweep.tsv'}"
    )
    return 0


def _benchmark_kwargs(factory, args) -> dict:
    accepted = set(inspect.signature(factory).parameters)
    requested = {
        "n_per_wave": args.n_per_wave,
        "seed": args.seed,
        "true_att": args.true_att,
    }
    kwargs = {}
    for key, value in requested.items():
        if value is None:
            continue
        if key not in accepted:
            raise ConfigError(
                f"benchmark {args.benchmark!r} does not take {key!r}"
            )
        kwargs[key] = value
    return kwargs


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    out = cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    if args.spec_json:
        spec = spec_from_json(Path(args.spec_json))
        if args.seed is not None:
            import dataclasses

            spec = dataclasses.replace(spec, seed=args.seed)
    else:
        if args.benchmark not in _BENCHMARKS:
            raise ConfigError(
                f"unknown benchmark {args.benchmark!r}; "
                f"choose from {sorted(_BENCHMARKS)}"
            )
        factory = _BENCHMARKS[args.benchmark]
        spec = factory(**_benchmark_kwargs(factory, args))
    spec_to_json(spec, out / "spec.json")
    if args.replications:
        estimators = args.estimators or DEFAULT_ESTIMATORS
        report = monte_carlo(spec, args.replications, estimators=estimators)
        headers, rows = mc_report_table(report)
        write_tsv(out / "mc_report.tsv", headers, rows)
        print(f"ran {args.replications} replications; wrote {out / 'mc_report.tsv'}")
    else:
        for wave in (Wave.PRE, Wave.POST):
            frame = generate(spec, wave)
            save_frame(frame, out / f"generated_{wave.value}.csv")
        print(f"generated {spec.n_per_wave} rows per wave; wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matchdid",
        description="Propensity-score matching, DiD, weighting estimators, "
        "and sensitivity analysis for two-wave survey data.",
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="log stage progress"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    stage_of = {
        "ingest": "ingest",
        "fit": "fit",
        "match": "match",
        "balance": "balance",
        "estimate": "estimate",
        "sensitivity": "sensitivity",
        "run": "summary",
    }
    helps = {
        "ingest": "validate inputs; write rejection logs and cleaned copies",
        "fit": "fit the propensity models",
        "match": "compute common support and matched pairs",
        "balance": "balance diagnostics and density profiles",
        "estimate": "treatment-effect estimates",
        "sensitivity": "hidden-bias bounds over the gamma grid",
        "run": "full pipeline including the summary report",
    }
    for name, through in stage_of.items():
        p = sub.add_parser(name, help=helps[name])
        _add_config_flags(p)
        p.set_defaults(func=lambda a, t=through: _cmd_stage(a, t))

    p = sub.add_parser("sweep", help="per-group effects (e.g. by zone)")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("simulate", help="synthetic data / Monte-Carlo study")
    _add_config_flags(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument(
        "--benchmark",
        help="named benchmark spec (confounded, randomized, null, "
        "broken_propensity, broken_outcome, zone_effects)",
    )
    group.add_argument("--spec-json", help="full synthetic spec as JSON")
    p.add_argument("--n-per-wave", type=int, help="households per wave")
    p.add_argument("--true-att", type=float, help="true treatment effect")
    p.add_argument(
        "--replications",
        type=int,
        help="run a Monte-Carlo study instead of writing one dataset",
    )
    p.set_defaults(func=_cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except MatchDidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
