#!/usr/bin/env python3
"""Run every pipeline stage in order against one run directory.

Equivalent to calling the eight subcommands by hand:

    python scripts/run_pipeline.py --config configs/default.yaml --out runs/full
"""
import argparse
import sys

from llmsurv.cli import main as cli_main

STAGES = [
    "synth",
    "ingest",
    "screen",
    "structurize",
    "train",
    "evaluate",
    "importance",
    "report",
]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=None)
    parser.add_argument("--out", default="runs/default")
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args()
    common = ["--out", args.out]
    if args.config:
        common += ["--config", args.config]
    if args.seed is not None:
        common += ["--seed", str(args.seed)]
    for stage in STAGES:
        print(f"== {stage}", flush=True)
        code = cli_main([stage, *common])
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
