"""lss-plot: render experiment CSVs into figures.

Usage: lss-plot <figure-type> <csv...> [-o out.png] [--report report.json]
Exit codes: 0 rendered, 1 bad usage / malformed input (no file written).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import FIGURE_TYPES, PlotJob, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="lss-plot", description=__doc__)
    parser.add_argument("figure", choices=sorted(FIGURE_TYPES))
    parser.add_argument("csv", nargs="+", help="experiment CSV file(s)")
    parser.add_argument("-o", "--out", default=None, help="output image (default: <first csv>.png)")
    parser.add_argument("--report", default=None, help="report JSON (contraction annotation)")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    out = Path(args.out) if args.out else Path(args.csv[0]).with_suffix(".png")
    job = PlotJob(
        figure=args.figure,
        csv_paths=tuple(Path(p) for p in args.csv),
        out_path=out,
        report_path=Path(args.report) if args.report else None,
    )
    try:
        path = render(job)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


def entry():
    sys.exit(main())
