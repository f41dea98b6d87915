"""Figure rendering for the boundary-EWS experiment CSVs.

Strictly a CSV -> image transform: every theory curve drawn here comes from a
column the experiment runner wrote, never from a recomputation.
"""

from .loading import SCHEMAS, detect_kind, load_csv
from .figures import PlotSpec, RenderReport, render

__all__ = [
    "PlotSpec",
    "RenderReport",
    "SCHEMAS",
    "detect_kind",
    "load_csv",
    "render",
]
