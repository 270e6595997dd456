"""CSV exchange format for pre-extracted region traces.

Header: ``frame,region,mean_r,mean_g,mean_b``. ``region`` is one of
left_cheek, mid_region, right_cheek, whole_face, or ``mid_region/cellNN``
for the 32 rectified mid-region cells used by PPG maps.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from ..errors import IngestError
from .roi import Region, RegionTrace, RoiSpec

HEADER = ("frame", "region", "mean_r", "mean_g", "mean_b")
CELL_PREFIX = "mid_region/cell"


def cell_name(k):
    return f"{CELL_PREFIX}{k:02d}"


def _spec_for(name):
    base = name.split("/", 1)[0]
    try:
        return RoiSpec(Region(base))
    except ValueError:
        raise IngestError(f"unknown region {name!r}") from None


def read_traces(path, fps=30.0):
    """Read a trace CSV into {region name: RegionTrace}."""
    path = Path(path)
    rows = {}
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != HEADER:
                raise IngestError(f"{path}: expected header {','.join(HEADER)}")
            for row in reader:
                rows.setdefault(row["region"], []).append(
                    (int(row["frame"]), float(row["mean_r"]), float(row["mean_g"]), float(row["mean_b"])))
    except (OSError, ValueError, KeyError) as exc:
        raise IngestError(f"cannot read traces {path}: {exc}") from exc
    if not rows:
        raise IngestError(f"{path}: no trace rows")
    out = {}
    lengths = set()
    for name, vals in rows.items():
        vals.sort()
        arr = np.array([v[1:] for v in vals])
        if np.any(arr < 0) or np.any(arr > 255):
            raise IngestError(f"{path}: region {name} has values outside [0, 255]")
        lengths.add(len(arr))
        out[name] = RegionTrace(arr[:, 0], arr[:, 1], arr[:, 2], _spec_for(name), fps)
    if len(lengths) != 1:
        raise IngestError(f"{path}: regions have different frame counts {sorted(lengths)}")
    return out


def format_traces(traces, decimals=6):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for name in sorted(traces):
        t = traces[name]
        for i in range(len(t)):
            w.writerow([i, name, f"{t.mean_r[i]:.{decimals}f}", f"{t.mean_g[i]:.{decimals}f}",
                        f"{t.mean_b[i]:.{decimals}f}"])
    return buf.getvalue()


def write_traces(path, traces, decimals=6):
    Path(path).write_text(format_traces(traces, decimals))


def cells_from_traces(traces):
    """Stack ``mid_region/cellNN`` traces into (n_frames, n_cells, 3), or None."""
    names = sorted(n for n in traces if n.startswith(CELL_PREFIX))
    if not names:
        return None
    return np.stack([traces[n].rgb for n in names], axis=1)
