import json
import shutil

import pytest

from ews_plots import cli


def test_spec_mode(gap_csv, tmp_path, capsys):
    spec = tmp_path / "fig.json"
    out = tmp_path / "gap.png"
    spec.write_text(json.dumps(
        {"kind": "gap", "csv": [str(gap_csv)], "out": str(out)}
    ))
    assert cli.run(["--spec", str(spec)]) == 0
    assert out.exists()
    assert "overlays=marginal-line" in capsys.readouterr().out


def test_spec_mode_error_is_exit_1(tmp_path, capsys):
    spec = tmp_path / "fig.json"
    spec.write_text(json.dumps(
        {"kind": "gap", "csv": [str(tmp_path / "nope.csv")],
         "out": str(tmp_path / "x.png")}
    ))
    assert cli.run(["--spec", str(spec)]) == 1
    assert "error" in capsys.readouterr().err


def test_all_mode_walks_tree(gap_csv, branch_csv, variance_csv, autocorr_csv,
                             tmp_path, capsys):
    indir = tmp_path / "results"
    for i, src in enumerate((gap_csv, branch_csv, variance_csv, autocorr_csv)):
        sub = indir / f"run-{i:02d}"
        sub.mkdir(parents=True)
        shutil.copy(src, sub / src.name)
    # an unknown schema must be reported and skipped, not fail the batch
    (indir / "run-00" / "well.csv").write_text("bc,modes,value\nneumann,8,1.0\n")
    outdir = tmp_path / "figs"

    assert cli.run(["--all", "--in", str(indir), "--out", str(outdir)]) == 0

    pngs = sorted(p.name for p in outdir.glob("*.png"))
    assert pngs == [
        "run-00-eigs.png", "run-01-branch.png", "run-02-variance.png",
        "run-03-autocorr.png",
    ]
    out = capsys.readouterr().out
    assert "skip" in out and "well.csv" in out


def test_all_mode_empty_tree_fails(tmp_path, capsys):
    (tmp_path / "in").mkdir()
    code = cli.run(["--all", "--in", str(tmp_path / "in"),
                    "--out", str(tmp_path / "figs")])
    assert code == 1
    assert "no plottable CSVs" in capsys.readouterr().err


def test_all_mode_render_failure_flagged(tmp_path, capsys):
    indir = tmp_path / "in"
    indir.mkdir()
    # right header, no rows: recognized, then fails to render
    (indir / "empty.csv").write_text("p,rate,value\n")
    code = cli.run(["--all", "--in", str(indir), "--out", str(tmp_path / "o")])
    assert code == 1
    assert "no data rows" in capsys.readouterr().err


def test_all_without_dirs_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.run(["--all"])
    assert exc.value.code == 2


def test_modes_are_exclusive(gap_csv):
    with pytest.raises(SystemExit) as exc:
        cli.run(["--spec", "x.json", "--all"])
    assert exc.value.code == 2
