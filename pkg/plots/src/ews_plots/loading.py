"""CSV loading and schema detection for the experiment outputs."""

from __future__ import annotations

from pathlib import Path

import pandas as pd

# Figure kind by (required, forbidden) column sets.  The forbidden set keeps
# the mirror-check CSV -- branch labels plus eigenvalue columns but no
# stability count -- from masquerading as an eigenvalue sweep.
SCHEMAS: tuple[tuple[str, frozenset[str], frozenset[str]], ...] = (
    ("branch", frozenset({"branch", "p", "max_psi", "num_unstable"}),
     frozenset()),
    ("gap", frozenset({"p", "re_lambda1", "im_lambda1", "re_lambda2"}),
     frozenset({"branch"})),
    (
        "scaling",
        frozenset(
            {"p", "seed", "observable", "variance", "log10_rate",
             "theory_log10_variance"}
        ),
        frozenset(),
    ),
    ("scaling", frozenset({"p", "seed", "variance_mc", "variance_exact"}),
     frozenset()),
    ("scaling", frozenset({"p", "rate", "value"}), frozenset()),
    ("autocorr", frozenset({"p", "seed", "tau", "autocorr_abs", "theory_abs"}),
     frozenset()),
)


def detect_kind(columns) -> str | None:
    """Figure kind for a CSV header, or None if nothing here plots it."""
    cols = set(columns)
    for kind, required, forbidden in SCHEMAS:
        if required <= cols and not (forbidden & cols):
            return kind
    return None


def load_csv(path: Path, required: set[str] | None = None) -> pd.DataFrame:
    df = pd.read_csv(path)
    if required:
        missing = sorted(required - set(df.columns))
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
    if df.empty:
        raise ValueError(f"{path}: no data rows")
    return df


def load_many(paths, required: set[str] | None = None) -> pd.DataFrame:
    """Concatenate same-schema CSVs (e.g. one sweep split across runs)."""
    paths = [Path(p) for p in paths]
    frames = [load_csv(p, required) for p in paths]
    first = set(frames[0].columns)
    for p, f in zip(paths[1:], frames[1:]):
        if set(f.columns) != first:
            raise ValueError(f"{p}: columns differ from {paths[0]}")
    return pd.concat(frames, ignore_index=True)
