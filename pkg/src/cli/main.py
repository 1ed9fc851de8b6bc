# src/cli/main.py
"""
Command-line entry point: aasv <subcommand> [options]
Exit codes: 0 ok, 1 pattern/assertion failure, 2 usage or config error, 3 IO error
"""

import argparse
import sys
from typing import List, Optional

from config.logger import AASVLogger
from src.cli.experiment import load_experiment_config
from src.cli.pattern import cmd_reproduce_pattern
from src.cli.stages import cmd_embed, cmd_eval, cmd_finetune, cmd_fuse, cmd_gen, cmd_train, cmd_train_dc
from src.errors import AASVError

logger = AASVLogger.get_logger(__name__)

SUBCOMMANDS = {
    "gen": "Generate the synthetic two-domain corpus and its manifest",
    "train": "Train the adult encoder",
    "finetune": "Fine-tune a copy of the adult encoder on child speech",
    "train-dc": "Train the domain classifier on frozen adult-encoder embeddings",
    "embed": "Extract adult, child and weight-space-ensemble test embeddings",
    "fuse": "Build domain-weighted and plain-concatenation fused embeddings",
    "eval": "Score every system on every test set and write the EER report",
    "reproduce-pattern": "Run the whole pipeline and check the cross-domain pattern",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment config (default: $AASV_CONFIG)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value; may be repeated")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--threads", type=int, help="worker thread cap")
    common.add_argument("--corpus-dir", help="corpus directory")
    common.add_argument("--checkpoints-dir", help="stage output directory")
    common.add_argument("--report-dir", help="report directory")
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(prog="aasv", description="Age agnostic speaker verification toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in SUBCOMMANDS.items():
        cmd = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if name == "gen":
            cmd.add_argument("--virtual", action="store_true", default=None,
                             help="write the manifest only; audio is regenerated on demand")
        if name == "reproduce-pattern":
            cmd.add_argument("--skip-train", action="store_true",
                             help="reuse existing training stages and rerun evaluation only")
    return parser


def run(args: argparse.Namespace):
    if args.log_level:
        AASVLogger.set_level(args.log_level)
    cfg = load_experiment_config(
        args.config, args.overrides, seed=args.seed, threads=args.threads,
        paths={"corpus_dir": args.corpus_dir, "checkpoints_dir": args.checkpoints_dir,
               "report_dir": args.report_dir},
    )
    if args.command == "gen":
        return cmd_gen(cfg, args.virtual)
    if args.command == "reproduce-pattern":
        return cmd_reproduce_pattern(cfg, args.skip_train)
    handlers = {
        "train": cmd_train,
        "finetune": cmd_finetune,
        "train-dc": cmd_train_dc,
        "embed": cmd_embed,
        "fuse": cmd_fuse,
        "eval": cmd_eval,
    }
    return handlers[args.command](cfg)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    try:
        run(args)
    except AASVError as exc:
        logger.error(str(exc))
        return exc.exit_code
    except OSError as exc:
        logger.error(f"IO error: {exc}")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
