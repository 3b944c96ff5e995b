"""Command line: render a figure from a trajectory log."""

from __future__ import annotations

import argparse
import sys

from .render import render
from .schema import SchemaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ogplots",
        description="Render run figures from opiniongames trajectory logs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one multi-panel figure")
    p.add_argument("--csv", required=True, help="trajectory.csv path")
    p.add_argument("--meta", required=True, help="metadata.yaml path")
    p.add_argument("--out", required=True, help="output image path (.png)")
    p.add_argument("--snapshot-interval", type=float, default=3.0,
                   help="seconds between vehicle snapshots (default 3)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        summary = render(args.csv, args.meta, args.out,
                         snapshot_interval=args.snapshot_interval)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SchemaError, ValueError) as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {summary.output} ({summary.rows} rows, "
          f"{len(summary.snapshot_times)} snapshots)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
