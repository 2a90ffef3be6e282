"""Command-line front end for the motion editing pipeline.

Every subcommand operates on a run directory: ``run`` executes the whole
pipeline, the stage commands (``synth`` through ``eval``) execute one step
against an existing directory, and ``sweep`` repeats training at several
training-set fractions. Exit code 0 on success; failures print a
stage-tagged diagnostic to stderr and return a nonzero code.
"""

from __future__ import annotations

import argparse
import sys

from .config import RunConfig
from .errors import ClipFormatError, ConfigError, StageError
from .pipeline import RunPaths, run_pipeline, run_stage, run_sweep

STAGE_COMMANDS = (
    "synth",
    "train-tokenizer",
    "train-infiller",
    "pair",
    "edit",
    "train-classifier",
    "eval",
)


def _parse_fractions(text: str) -> list[float]:
    try:
        fractions = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad fraction list {text!r}; expected e.g. 0.3,0.6,1.0")
    if not fractions:
        raise argparse.ArgumentTypeError("fraction list is empty")
    for f in fractions:
        if not 0.0 < f <= 1.0:
            raise argparse.ArgumentTypeError(f"fractions must be in (0, 1], got {f}")
    return fractions


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--seed", type=int, metavar="N", help="override the configured seed")
    common.add_argument(
        "--out", metavar="DIR", help="run directory (default: runs/<technique>)"
    )
    common.add_argument(
        "--strict-splice",
        action="store_true",
        help="disable the crossfade when splicing decoded frames",
    )

    parser = argparse.ArgumentParser(
        prog="motiontune",
        description="Skill-targeted motion editing: train an expert prior, "
        "then repair novice clips by masked infilling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    helps = {
        "synth": "generate the synthetic expert/novice corpus",
        "train-tokenizer": "fit the pose tokenizer on expert clips",
        "train-infiller": "fit the masked infiller on expert tokens",
        "pair": "retrieve and align expert references for eval novices",
        "edit": "edit eval novices with the trained prior",
        "train-classifier": "fit the expert/novice classifier",
        "eval": "score edits and write report.json",
    }
    for name in STAGE_COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])

    sub.add_parser("run", parents=[common], help="run the full pipeline")
    sweep = sub.add_parser(
        "sweep", parents=[common], help="run at several training-set fractions"
    )
    sweep.add_argument(
        "--fractions",
        type=_parse_fractions,
        default=[0.3, 0.6, 1.0],
        metavar="LIST",
        help="comma-separated training fractions (default 0.3,0.6,1.0)",
    )
    return parser


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.strict_splice:
        overrides["strict_splice"] = True
    if overrides:
        config = RunConfig.from_dict({**config.to_dict(), **overrides})
    return config


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _resolve_config(args)
        out_dir = args.out or f"runs/{config.technique}"
        if args.command == "run":
            report = run_pipeline(config, out_dir, log=_log)
            print(f"P {report['P']:.2f}%  F {report['F']:.2f}%  ({out_dir}/report.json)")
        elif args.command == "sweep":
            sweep = run_sweep(config, out_dir, args.fractions, log=_log)
            for row in sweep["fractions"]:
                print(
                    f"fraction {row['train_fraction']:g}: "
                    f"P {row['P']:.2f}%  F {row['F']:.2f}%"
                )
        else:
            paths = RunPaths.standard(out_dir)
            paths.root.mkdir(parents=True, exist_ok=True)
            config.save(paths.config_file)
            result = run_stage(args.command, config, paths, log=_log)
            if args.command == "eval":
                print(f"P {result['P']:.2f}%  F {result['F']:.2f}%")
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ClipFormatError) as exc:
        print(f"error: [config] {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
