"""Command-line wrapper: lpp-plots --in results.csv --kind tail-loglog --out fig.svg"""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, DEFAULT_REFERENCE_SLOPE, PlotError, PlotSpec, render


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="lpp-plots",
                                description="Figures from lppsim result files")
    p.add_argument("--in", dest="input_csv", required=True,
                   help="result CSV (onepoint-hist also reads its JSON mirror)")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--out", dest="output", required=True,
                   help="figure path (.svg or .png)")
    p.add_argument("--reference-slope", type=float, default=DEFAULT_REFERENCE_SLOPE)
    args = p.parse_args(argv)
    try:
        res = render(PlotSpec(args.input_csv, args.kind, args.output,
                              args.reference_slope))
    except PlotError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 1
    note = f" ({res.notice})" if res.notice else ""
    print(f"wrote {res.output}: {res.annotation}{note}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
