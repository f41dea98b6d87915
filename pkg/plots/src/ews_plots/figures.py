"""The four figure kinds: gap, scaling, autocorr, branch.

Each renderer takes a dataframe in the schema the experiment runner wrote and
returns the list of overlay names it drew, so callers (and tests) can verify a
theory overlay made it onto the canvas without parsing pixels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .loading import load_many

_RC = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 9,
}

_DEFAULT_LABELS = {
    "gap": ("p", "Re lambda"),
    "scaling": ("log10 rate", "log10 variance"),
    "autocorr": ("lag tau", "|autocorrelation|"),
    "branch": ("p", "max(psi)"),
}

KINDS = tuple(_DEFAULT_LABELS)


@dataclass(frozen=True)
class PlotSpec:
    """One figure: which CSVs, which kind, where the image goes."""

    csv_paths: tuple[Path, ...]
    kind: str
    out_path: Path
    xlabel: str | None = None
    ylabel: str | None = None
    title: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if not self.csv_paths:
            raise ValueError("spec lists no input CSVs")

    @classmethod
    def from_file(cls, path: Path) -> "PlotSpec":
        doc = json.loads(Path(path).read_text())
        csvs = doc.get("csv", [])
        if isinstance(csvs, (str, Path)):
            csvs = [csvs]
        return cls(
            csv_paths=tuple(Path(c) for c in csvs),
            kind=doc.get("kind", ""),
            out_path=Path(doc["out"]),
            xlabel=doc.get("xlabel"),
            ylabel=doc.get("ylabel"),
            title=doc.get("title"),
        )


@dataclass(frozen=True)
class RenderReport:
    out_path: Path
    kind: str
    n_series: int
    overlays: tuple[str, ...] = field(default_factory=tuple)


def _finish(ax, spec: PlotSpec) -> None:
    xd, yd = _DEFAULT_LABELS[spec.kind]
    ax.set_xlabel(spec.xlabel or xd)
    ax.set_ylabel(spec.ylabel or yd)
    if spec.title:
        ax.set_title(spec.title)
    if ax.get_legend_handles_labels()[0]:
        ax.legend()


def _save(fig, spec: PlotSpec) -> None:
    spec.out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.out_path, metadata={"Software": "ews-plots"})
    plt.close(fig)


# ---------------------------------------------------------------------------
# gap: leading eigenvalue real parts along the parameter sweep
# ---------------------------------------------------------------------------


def _draw_gap(ax, df: pd.DataFrame) -> tuple[int, list[str]]:
    re_cols = sorted(
        (c for c in df.columns if c.startswith("re_lambda")),
        key=lambda c: int(c.removeprefix("re_lambda")),
    )
    d = df.sort_values("p")
    for col in re_cols:
        ax.plot(d["p"], d[col], marker="o", ms=4,
                label=col.replace("re_lambda", "mode "))
    ax.axhline(0.0, color="k", lw=1.0, ls=":", label="marginal (Re = 0)")
    return len(re_cols), ["marginal-line"]


# ---------------------------------------------------------------------------
# scaling: log variance vs log rate, theory line, +-2 std band
# ---------------------------------------------------------------------------


def _scaling_series(df: pd.DataFrame):
    """Normalize the three scaling schemas to (label, x, mean, spread, theory).

    spread is 2 ensemble standard deviations of log10 variance (None when the
    CSV carries no seed dimension); theory is the CSV's own theory column
    (None when it has none).
    """
    out = []
    if "theory_log10_variance" in df.columns:
        for label, g in df.groupby("observable"):
            rows = []
            for x, gp in g.groupby("log10_rate"):
                logs = np.log10(gp["variance"].to_numpy(float))
                theory = float(gp["theory_log10_variance"].iloc[0])
                rows.append((x, logs.mean(), 2.0 * logs.std(), theory))
            rows.sort()
            x, mean, spread, theory = map(np.array, zip(*rows))
            out.append((str(label), x, mean, spread, theory))
    elif "variance_mc" in df.columns:
        rows = []
        for p, gp in df.groupby("p"):
            logs = np.log10(gp["variance_mc"].to_numpy(float))
            rows.append(
                (np.log10(-p), logs.mean(), 2.0 * logs.std(),
                 np.log10(float(gp["variance_exact"].iloc[0])))
            )
        rows.sort()
        x, mean, spread, theory = map(np.array, zip(*rows))
        out.append(("mode 0", x, mean, spread, theory))
    elif {"rate", "value"} <= set(df.columns):
        d = df.sort_values("rate")
        x = np.log10(d["rate"].to_numpy(float))
        mean = np.log10(np.abs(d["value"].to_numpy(float)))
        out.append(("value", x, mean, None, None))
    else:
        raise ValueError(
            "no scaling schema: need theory_log10_variance, variance_mc, "
            "or rate/value columns"
        )
    return out


def _draw_scaling(ax, df: pd.DataFrame) -> tuple[int, list[str]]:
    overlays: list[str] = []
    notes = []
    series = _scaling_series(df)
    for label, x, mean, spread, theory in series:
        (line,) = ax.plot(x, mean, marker="o", ms=4, label=label)
        if spread is not None and np.any(spread > 0):
            ax.fill_between(x, mean - spread, mean + spread,
                            color=line.get_color(), alpha=0.2, lw=0)
            if "ensemble-band" not in overlays:
                overlays.append("ensemble-band")
        if theory is not None:
            ax.plot(x, theory, color=line.get_color(), ls="--", lw=1.2,
                    label=f"{label} theory")
            if "theory-line" not in overlays:
                overlays.append("theory-line")
        if len(x) > 1:
            notes.append(f"{label}: slope {np.polyfit(x, mean, 1)[0]:.2f}")
    if notes:
        ax.text(0.02, 0.98, "\n".join(notes), transform=ax.transAxes,
                va="top", fontsize=9,
                bbox={"boxstyle": "round", "fc": "white", "alpha": 0.8})
        overlays.append("slope-annotation")
    return len(series), overlays


# ---------------------------------------------------------------------------
# autocorr: estimator curves per p, theory moduli as circles
# ---------------------------------------------------------------------------


def _draw_autocorr(ax, df: pd.DataFrame) -> tuple[int, list[str]]:
    n = 0
    for p, g in df.groupby("p"):
        per_tau = g.groupby("tau")
        taus = np.array(sorted(per_tau.groups))
        est = per_tau["autocorr_abs"].mean().loc[taus].to_numpy(float)
        theory = per_tau["theory_abs"].first().loc[taus].to_numpy(float)
        (line,) = ax.plot(taus, est, lw=1.4, label=f"p = {p:g}")
        ax.plot(taus, theory, ls="none", marker="o", ms=5, mfc="none",
                color=line.get_color(), label=f"p = {p:g} theory")
        n += 1
    ax.set_ylim(bottom=0.0)
    return n, ["theory-circles"]


# ---------------------------------------------------------------------------
# branch: solution measure vs p, stability as line style
# ---------------------------------------------------------------------------


def _stability_runs(flags: np.ndarray):
    """Split row order into maximal runs of constant stability."""
    edges = [0] + [i for i in range(1, len(flags)) if flags[i] != flags[i - 1]]
    edges.append(len(flags))
    # overlap segments by one point so the curve stays connected
    return [
        (slice(max(a - 1, 0) if a else 0, b), flags[a])
        for a, b in zip(edges, edges[1:])
    ]


def _draw_branch(ax, df: pd.DataFrame) -> tuple[int, list[str]]:
    overlays: list[str] = []
    transitions = 0
    for branch, g in df.groupby("branch", sort=False):
        p = g["p"].to_numpy(float)
        y = g["max_psi"].to_numpy(float)
        stable = g["num_unstable"].to_numpy(int) == 0
        color = None
        for i, (seg, is_stable) in enumerate(_stability_runs(stable)):
            (line,) = ax.plot(
                p[seg], y[seg],
                ls="-" if is_stable else "--",
                color=color, lw=1.6,
                label=str(branch) if i == 0 else None,
            )
            color = line.get_color()
            if i:
                ax.plot(p[seg][0], y[seg][0], marker="o", ms=6, mfc="none",
                        color=color)
                transitions += 1
    overlays.append("stability-style")
    if transitions:
        overlays.append("stability-change-markers")
    return df["branch"].nunique(), overlays


_DRAWERS = {
    "gap": (_draw_gap, {"p", "re_lambda1"}),
    "scaling": (_draw_scaling, {"p"}),
    "autocorr": (_draw_autocorr, {"p", "tau", "autocorr_abs", "theory_abs"}),
    "branch": (_draw_branch, {"branch", "p", "max_psi", "num_unstable"}),
}


def render(spec: PlotSpec) -> RenderReport:
    """Render one figure; deterministic for identical CSV bytes."""
    drawer, required = _DRAWERS[spec.kind]
    df = load_many(spec.csv_paths, required)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        n_series, overlays = drawer(ax, df)
        _finish(ax, spec)
        _save(fig, spec)
    return RenderReport(spec.out_path, spec.kind, n_series, tuple(overlays))
