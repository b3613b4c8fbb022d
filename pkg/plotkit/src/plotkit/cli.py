"""plotkit command line: render one figure per invocation."""
from __future__ import annotations

import argparse
import sys

from .data import DataError
from .figures import KINDS, PlotSpec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plotkit")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("plot", help="render a figure from a results CSV")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--in", dest="inputs", action="append", required=True,
                   help="input CSV; pass twice for 'compare'")
    p.add_argument("--x", default="dissimilarity")
    p.add_argument("--y", default="f_bar")
    p.add_argument("--bins", help="comma-separated ascending edges ('inf' allowed)")
    p.add_argument("--bin-field", default="f_bar")
    p.add_argument("--title", default="")
    p.add_argument("--out", required=True)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        spec = PlotSpec(
            inputs=args.inputs,
            kind=args.kind,
            x=args.x,
            y=args.y,
            out=args.out,
            bins=[float(e) for e in args.bins.split(",")] if args.bins else [],
            bin_field=args.bin_field,
            title=args.title,
        )
        info = render(spec)
    except (DataError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    summary = ", ".join(f"{k}={v}" for k, v in info.annotations.items())
    print(f"wrote {info.out} ({info.n_points} points{'; ' + summary if summary else ''})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
