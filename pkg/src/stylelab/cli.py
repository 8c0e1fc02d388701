"""Command-line entry point.

Subcommands mirror the pipeline stages; every run is driven by a JSON
config file, with --seed and --out overriding the config in place.  Exit
codes: 0 success, 2 configuration or missing-input problems, 3 numeric
failure (non-finite loss or values).
"""

from __future__ import annotations

import argparse
import sys

from . import pipeline
from .config import RunConfig, load_config
from .errors import (ConfigError, ContractError, DomainError, MiningError,
                     NotFoundError, NumericsError, ParseError, ShapeError,
                     StylelabError)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_CONFIG_ERRORS = (ConfigError, NotFoundError, MiningError, ParseError,
                  ContractError, ShapeError)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stylelab",
        description="Desk-scale authorship-style laboratory: corpus "
                    "generation, mining, two-stage training, evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=False, default=None,
                       help="path to a JSON run config (defaults apply "
                            "when omitted)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default=None,
                       help="override the config output directory")

    common(sub.add_parser("gen-corpus", help="generate the synthetic corpus"))
    common(sub.add_parser("mine", help="mine hard pairs with explanations"))
    common(sub.add_parser("pretrain", help="contrastive style pretraining"))
    ft = sub.add_parser("finetune", help="variational finetuning")
    common(ft)
    ft.add_argument("--variant", choices=["eavae", "single"], default=None,
                    help="dual-latent model or the single-encoder ablation")
    ea = sub.add_parser("eval-aa", help="attribution retrieval metrics")
    common(ea)
    ea.add_argument("--checkpoint", choices=["pretrain", "eavae", "single"],
                    default=None, help="which checkpoint to evaluate")
    ed = sub.add_parser("eval-detect", help="detection pAUC metrics")
    common(ed)
    ed.add_argument("--checkpoint", choices=["pretrain", "eavae", "single"],
                    default=None, help="which checkpoint to evaluate")
    common(sub.add_parser("report", help="combine metric reports"))
    return parser


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        out = cfg.out_dir
        if args.command == "gen-corpus":
            pipeline.run_gen_corpus(cfg, out)
        elif args.command == "mine":
            pipeline.run_mine(cfg, out)
        elif args.command == "pretrain":
            pipeline.run_pretrain(cfg, out)
        elif args.command == "finetune":
            pipeline.run_finetune(cfg, out, variant=args.variant)
        elif args.command == "eval-aa":
            pipeline.run_eval_aa(cfg, out, which=args.checkpoint)
        elif args.command == "eval-detect":
            pipeline.run_eval_detect(cfg, out, which=args.checkpoint)
        elif args.command == "report":
            pipeline.run_report(cfg, out)
        else:
            print(f"unknown command {args.command!r}", file=sys.stderr)
            return EXIT_CONFIG
    except NumericsError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except _CONFIG_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except StylelabError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
