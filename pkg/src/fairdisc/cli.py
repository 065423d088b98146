"""Command-line front end: one subcommand per pipeline stage plus sweeps.

Flags mirror ExperimentConfig one-to-one; a JSON config file can supply any
of them, with explicit flags taking precedence.  Exit status is 0 only when
every sub-run converged.
"""
from __future__ import annotations

import argparse
import json
import sys

from .experiments import COMMANDS, ExperimentConfig, records_to_csv, run


def _int_list(text: str) -> list:
    """Parse '4', '2,3,5', or a range 'a:b' (half-open)."""
    text = text.strip()
    if ":" in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi)))
    return [int(part) for part in text.split(",") if part]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairdisc",
        description="Equal-split search, randomized rounding, and fair-division "
                    "measurements over valuation oracles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "split": "search for an equal fractional k-split",
        "round": "split, then round to an integral coloring (best of --trials)",
        "disc": "end-to-end discrepancy of the pipeline coloring",
        "transfer": "pipeline plus transfer-discrepancy of the rounded coloring",
        "subsidy": "pipeline at k=n plus envy-free payments",
        "sweep": "Cartesian grid over n/m/k/seeds, one CSV row per cell",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="JSON file with defaults for any flag")
        p.add_argument("--family", help="instance family, or 'file'")
        p.add_argument("--n", type=_int_list, help="agent count (sweep: list or a:b range)")
        p.add_argument("--m", type=_int_list, help="item count (sweep: list or a:b range)")
        p.add_argument("--k", type=_int_list, help="color count (sweep: list or a:b range)")
        if name == "sweep":
            p.add_argument("--seeds", type=_int_list, help="seed list or a:b range")
            p.add_argument("--with-transfer", action="store_true", dest="with_transfer",
                           default=None, help="also measure transfer discrepancy per cell")
            p.add_argument("--with-subsidy", action="store_true", dest="with_subsidy",
                           default=None, help="also run the subsidy chain per cell (needs k=n)")
        else:
            p.add_argument("--seed", type=int, help="instance and search seed")
        p.add_argument("--trials", type=int, help="roundings per run (default 64)")
        p.add_argument("--restarts", type=int, help="search restarts (default 32)")
        p.add_argument("--tol", type=float, help="imbalance tolerance (default 1e-6)")
        p.add_argument("--workers", type=int, help="recorded worker count")
        p.add_argument("--timing", action="store_true", default=None,
                       help="fill the wall_time_ms column (breaks byte-reproducibility)")
        p.add_argument("--instances", dest="instances_path", help="instance file for family=file")
        p.add_argument("--output", dest="output_path", help="CSV output path (default stdout)")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    doc = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            doc.update(json.load(fh))
    doc["command"] = args.command
    for key in ("family", "n", "m", "k", "trials", "restarts", "tol", "workers",
                "timing", "with_transfer", "with_subsidy", "output_path", "instances_path"):
        val = getattr(args, key, None)
        if val is not None:
            doc[key] = val
    if getattr(args, "seeds", None) is not None:
        doc["seeds"] = args.seeds
    if getattr(args, "seed", None) is not None:
        doc["seeds"] = [args.seed]
    return ExperimentConfig.from_jsonable(doc)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        records = run(config)
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    csv_text = records_to_csv(records, timing=config.timing)
    if config.output_path:
        with open(config.output_path, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    return 0 if all(rec.converged in (True, None) for rec in records) else 1


if __name__ == "__main__":
    raise SystemExit(main())
