"""Command line entry point: render the figure set for a sweep directory.

Exit codes: 0 success, 2 bad input (missing runs, header drift), 3 runtime
failure.
"""

from __future__ import annotations

import argparse
import sys

from .loader import HeaderMismatchError, discover_runs
from .plots import render_all

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RUNTIME = 3


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="figpipe",
        description="Render figures from a couriersim sweep directory.",
    )
    parser.add_argument("sweep_dir", help="directory containing run_* subdirs")
    parser.add_argument("--out", required=True, help="figure output directory")
    parser.add_argument("--group-by", choices=("learning", "memory_model"),
                        default="memory_model")
    args = parser.parse_args(argv)
    try:
        runs = discover_runs(args.sweep_dir)
    except (HeaderMismatchError, ValueError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        drawn = render_all(runs, args.out, key=args.group_by)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"rendered {len(drawn)} figures from {len(runs)} runs into {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
