"""Thin figure command: kacx-plots <figure-kind> --in ... --out fig.png"""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_KINDS, FigureSpec, render


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="kacx-plots",
                                description="render kacx CSV artifacts")
    p.add_argument("kind", choices=FIGURE_KINDS)
    p.add_argument("--in", dest="inp", help="main input CSV")
    p.add_argument("--hist", help="histogram CSV (histogram-overlay)")
    p.add_argument("--counts", help="count-distribution CSV (histogram-overlay)")
    p.add_argument("--reference",
                   help="density CSV overlay (histogram-overlay, scatter)")
    p.add_argument("--g", help="density CSV (excess-energy)")
    p.add_argument("--w", help="excess-energy density CSV (excess-energy)")
    p.add_argument("--ratio", help="per-particle excess CSV (excess-energy)")
    p.add_argument("--out", required=True, help="output image path")
    args = p.parse_args(argv if argv is not None else sys.argv[1:])

    inputs = {}
    if args.kind == "histogram-overlay":
        inputs = {"hist": args.hist or args.inp, "counts": args.counts,
                  "reference": args.reference}
        if inputs["counts"] is None:
            inputs.pop("counts")
        if inputs["reference"] is None:
            inputs.pop("reference")
    elif args.kind == "excess-energy":
        inputs = {"g": args.g, "w": args.w}
        if args.ratio:
            inputs["ratio"] = args.ratio
    else:
        inputs = {"in": args.inp}
        if args.kind == "scatter-before-after" and args.reference:
            inputs["reference"] = args.reference
    try:
        out = render(FigureSpec(kind=args.kind, inputs=inputs, out=args.out))
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
