"""Acceptance gate: figures render from the real experiment outputs.

Needs the CSV tree the main package's acceptance suite leaves under
``results/`` (criterion-* run directories); skips with a pointer if that has
not been produced yet.
"""

import sys
from pathlib import Path

import pandas as pd
import pytest

from ews_plots import cli
from ews_plots.figures import PlotSpec, render
from ews_plots.loading import detect_kind

RESULTS = Path(__file__).resolve().parents[2] / "results"


def test_c14_figures_from_experiment_csvs(tmp_path):
    runs = sorted(RESULTS.glob("criterion-*/"))
    if not runs:
        pytest.skip(f"no experiment outputs under {RESULTS}; "
                    "run the main acceptance suite first")

    assert cli.run(["--all", "--in", str(RESULTS),
                    "--out", str(tmp_path / "figures")]) == 0

    reports = []
    for csv in sorted(RESULTS.rglob("*.csv")):
        kind = detect_kind(pd.read_csv(csv, nrows=0).columns)
        if kind is None:
            continue
        out = tmp_path / "direct" / (csv.stem + "-" + kind + ".png")
        reports.append(render(PlotSpec((csv,), kind, out)))

    kinds = {r.kind for r in reports}
    missing_overlay = [r.out_path.name for r in reports if not r.overlays]
    ok = (
        {"gap", "scaling", "autocorr", "branch"} <= kinds
        and not missing_overlay
        and all(r.out_path.stat().st_size > 0 for r in reports)
    )
    print(
        f"[{'PASS' if ok else 'FAIL'}] criterion 14 (figures from experiment "
        f"CSVs): {len(reports)} figures, kinds {sorted(kinds)}, "
        f"overlays missing on {missing_overlay or 'none'}",
        file=sys.stderr, flush=True,
    )
    assert ok
