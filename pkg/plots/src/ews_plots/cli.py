"""plot: render experiment CSVs to PNG figures.

Two modes::

    plot --spec figure.json          # one explicit figure
    plot --all --in results --out figures

Batch mode walks the input tree, recognizes CSVs by their header, and names
each image after the CSV's relative path, so sweeps that reuse a file name in
different run directories cannot collide.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import pandas as pd

from .figures import PlotSpec, render
from .loading import detect_kind


def _render_spec_file(path: Path) -> int:
    report = render(PlotSpec.from_file(path))
    print(f"wrote {report.out_path} [{report.kind}] "
          f"series={report.n_series} overlays={','.join(report.overlays)}")
    return 0


def _render_all(in_dir: Path, out_dir: Path) -> int:
    csvs = sorted(in_dir.rglob("*.csv"))
    rendered, failures = 0, 0
    for csv in csvs:
        try:
            header = pd.read_csv(csv, nrows=0).columns
        except Exception as exc:
            print(f"skip {csv}: unreadable ({exc})", file=sys.stderr)
            continue
        kind = detect_kind(header)
        if kind is None:
            print(f"skip {csv}: no figure schema matches its columns")
            continue
        rel = csv.relative_to(in_dir).with_suffix("")
        out = out_dir / ("-".join(rel.parts) + ".png")
        try:
            report = render(PlotSpec((csv,), kind, out))
        except Exception as exc:
            print(f"error rendering {csv}: {exc}", file=sys.stderr)
            failures += 1
            continue
        print(f"wrote {report.out_path} [{report.kind}] "
              f"series={report.n_series} "
              f"overlays={','.join(report.overlays)}")
        rendered += 1
    if failures:
        return 1
    if not rendered:
        print(f"error: no plottable CSVs under {in_dir}", file=sys.stderr)
        return 1
    return 0


def run(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot", description=__doc__.splitlines()[0]
    )
    mode = parser.add_mutually_exclusive_group(required=True)
    mode.add_argument("--spec", help="JSON figure spec")
    mode.add_argument("--all", action="store_true",
                      help="render every recognized CSV under --in")
    parser.add_argument("--in", dest="in_dir", help="input tree for --all")
    parser.add_argument("--out", dest="out_dir", help="output dir for --all")
    args = parser.parse_args(argv)

    if args.spec:
        try:
            return _render_spec_file(Path(args.spec))
        except Exception as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    if not args.in_dir or not args.out_dir:
        parser.error("--all needs --in and --out")
    return _render_all(Path(args.in_dir), Path(args.out_dir))


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
