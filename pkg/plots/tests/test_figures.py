from pathlib import Path

import pytest

from ews_plots.figures import PlotSpec, render

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _spec(csv, kind, out, **kw):
    return PlotSpec(csv_paths=(Path(csv),), kind=kind, out_path=Path(out), **kw)


def test_gap_figure(gap_csv, tmp_path):
    report = render(_spec(gap_csv, "gap", tmp_path / "gap.png"))
    assert report.out_path.read_bytes().startswith(PNG_MAGIC)
    assert report.n_series == 4
    assert "marginal-line" in report.overlays


def test_scaling_figure_with_band_and_theory(variance_csv, tmp_path):
    report = render(_spec(variance_csv, "scaling", tmp_path / "var.png"))
    assert report.n_series == 2  # omega_box + temp_box
    assert "theory-line" in report.overlays
    assert "ensemble-band" in report.overlays
    assert "slope-annotation" in report.overlays


def test_scaling_figure_heat_schema(heat_csv, tmp_path):
    report = render(_spec(heat_csv, "scaling", tmp_path / "heat.png"))
    assert report.n_series == 1
    assert "theory-line" in report.overlays


def test_autocorr_figure(autocorr_csv, tmp_path):
    report = render(_spec(autocorr_csv, "autocorr", tmp_path / "ac.png"))
    assert report.n_series == 2  # one curve per p
    assert report.overlays == ("theory-circles",)


def test_branch_figure_styles_stability(branch_csv, tmp_path):
    report = render(_spec(branch_csv, "branch", tmp_path / "br.png"))
    assert report.n_series == 2
    assert "stability-style" in report.overlays
    assert "stability-change-markers" in report.overlays


def test_render_is_deterministic(autocorr_csv, tmp_path):
    a = render(_spec(autocorr_csv, "autocorr", tmp_path / "a.png"))
    b = render(_spec(autocorr_csv, "autocorr", tmp_path / "b.png"))
    assert a.out_path.read_bytes() == b.out_path.read_bytes()


def test_unknown_kind_rejected(gap_csv, tmp_path):
    with pytest.raises(ValueError, match="unknown figure kind"):
        _spec(gap_csv, "sparkline", tmp_path / "x.png")


def test_no_inputs_rejected(tmp_path):
    with pytest.raises(ValueError, match="no input CSVs"):
        PlotSpec(csv_paths=(), kind="gap", out_path=tmp_path / "x.png")


def test_wrong_schema_fails_with_columns(gap_csv, tmp_path):
    with pytest.raises(ValueError, match="missing columns"):
        render(_spec(gap_csv, "branch", tmp_path / "x.png"))


def test_custom_labels_and_title(gap_csv, tmp_path):
    report = render(
        _spec(gap_csv, "gap", tmp_path / "l.png",
              xlabel="forcing", ylabel="decay", title="sweep")
    )
    assert report.out_path.exists()


def test_spec_file_roundtrip(gap_csv, tmp_path):
    spec_path = tmp_path / "fig.json"
    spec_path.write_text(
        '{"kind": "gap", "csv": "%s", "out": "%s"}'
        % (gap_csv, tmp_path / "from_spec.png")
    )
    spec = PlotSpec.from_file(spec_path)
    assert spec.kind == "gap"
    assert render(spec).out_path.exists()
