"""``qrck`` command line entry point."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time

from ..errors import QRCKError, ValidationError
from . import runner
from .config import load_config

log = logging.getLogger("qrck")

HELP = {
    "gen-data": "write the generated series or reduced classification data",
    "train": "fit the optimal observable and save it as a readout file",
    "decompose": "rank the operators of the optimal observable and export the table",
    "forecast": "closed-loop forecasting trials",
    "classify": "classification accuracy for the configured readouts",
    "sweep": "subset-size sweep over all readout families",
    "report": "mean and standard deviation of every results table",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qrck", description="Kernel-optimized quantum reservoir experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in runner.COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", required=True, help="flat key = value configuration file")
        p.add_argument("--output", help="output directory (overrides output.directory)")
        p.add_argument("--threads", type=int, help="worker threads (default: $QRCK_THREADS or 1)")
        p.add_argument("--seed-offset", type=int, default=0, help="added to every seed")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        value, source = flag, "--threads"
    elif os.environ.get("QRCK_THREADS"):
        source = "QRCK_THREADS"
        try:
            value = int(os.environ["QRCK_THREADS"])
        except ValueError as exc:
            raise ValidationError("not an integer", field=source) from exc
    else:
        return 1
    if value < 1:
        raise ValidationError("must be >= 1", field=source)
    return value


def execute(args: argparse.Namespace) -> int:
    started = time.time()
    config = load_config(args.config)
    output = args.output or config["output.directory"]
    threads = resolve_threads(args.threads)
    if args.seed_offset < 0:
        raise ValidationError("must be >= 0", field="--seed-offset")
    command = args.command

    if command == "report":
        path = runner.write_report(output, config["run_id"] or None)
        log.info("wrote %s", path)
        return 0

    seeds = config.seeds(args.seed_offset)
    run_id = runner.default_run_id(config, command, args.seed_offset)
    run = runner.RunDirectory(output, run_id)
    log.info("run %s -> %s", run_id, run.path)
    info: dict = {}
    if command == "gen-data":
        runner.generate_data(config, run, seeds)
    elif command == "train":
        run.write(runner.train_readouts(config, run, seeds))
    elif command == "decompose":
        runner.decompose_observables(config, run, seeds)
    else:
        run.table(config.task)
        runner.run_experiment(config, command, run_id, threads, args.seed_offset, sink=run.write, info=info)
    manifest = runner.manifest_for(config, command, run_id, seeds, args.seed_offset, threads, started, info)
    path = run.write_manifest(manifest)
    log.info("wrote %s", path)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return execute(args)
    except QRCKError as exc:
        task = getattr(exc, "task", None)
        prefix = f"[{task}] " if task else ""
        print(f"qrck: error: {prefix}{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"qrck: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
