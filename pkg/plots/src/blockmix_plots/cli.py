"""blockmix-plots: render figures from blockmix run directories.

One subcommand per figure kind plus `make-all`, which regenerates every
figure a run directory supports.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from .figures import RENDERERS, FigureError, FigureSpec, make_all, render


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blockmix-plots", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)
    for kind in RENDERERS:
        sp = sub.add_parser(kind)
        sp.add_argument("csv", help="input CSV path")
        sp.add_argument("--out", required=True, help="output image path (.png/.svg)")
        if kind == "tail-survival":
            sp.add_argument("--report", default=None, help="percolate-report.json to cross-check the fit")
    ma = sub.add_parser("make-all")
    ma.add_argument("run_dir", help="blockmix run directory")
    ma.add_argument("--out", default=None, help="output directory (default: run dir)")
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "make-all":
            made = make_all(args.run_dir, args.out)
            for path in made:
                print(path)
            return 0
        options = {"report": args.report} if args.cmd == "tail-survival" else None
        out = render(FigureSpec(kind=args.cmd, inputs=[args.csv], output=args.out, options=options))
        print(out)
        return 0
    except FigureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
