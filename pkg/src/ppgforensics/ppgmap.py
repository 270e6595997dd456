"""PPG maps: per-cell chrominance signals of the rectified mid-region laid
out as an omega x 32 image, optionally followed by 32 columns of per-cell
Welch spectra (omega x 64)."""
from __future__ import annotations

import enum
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DegenerateInputWarning, SignalError
from .rppg import DEFAULT_CONFIG, chrom_signal, welch_quantize

N_CELLS = 32


class MapKind(str, enum.Enum):
    TEMPORAL = "temporal"
    SPECTRAL = "spectral"


@dataclass
class PpgMap:
    grid: np.ndarray          # (omega, 32 or 64) uint8
    kind: MapKind
    flags: list = field(default_factory=list)

    def __post_init__(self):
        self.kind = MapKind(self.kind)
        width = N_CELLS if self.kind is MapKind.TEMPORAL else 2 * N_CELLS
        g = np.asarray(self.grid)
        if g.ndim != 2 or g.shape[1] != width:
            raise SignalError(f"{self.kind.value} map must have {width} columns, got shape {g.shape}")
        if g.dtype != np.uint8:
            raise SignalError("map values must be 8-bit")
        self.grid = g

    @property
    def omega(self):
        return self.grid.shape[0]


def quantize_columns(cols, what="column"):
    """Min-max each column to integers in [0, 255]; constant columns become 0."""
    cols = np.asarray(cols, dtype=np.float64)
    lo = cols.min(axis=0)
    span = cols.max(axis=0) - lo
    flags = []
    const = span <= 0
    if const.any():
        idx = np.flatnonzero(const).tolist()
        msg = f"constant {what}s mapped to 0: {idx}"
        warnings.warn(msg, DegenerateInputWarning, stacklevel=3)
        flags.append(msg)
    scaled = np.where(const, 0.0, (cols - lo) / np.where(const, 1.0, span))
    return np.rint(scaled * 255.0).astype(np.uint8), flags


def cell_signals(cells_rgb, fps, cfg=DEFAULT_CONFIG):
    """Chrominance PPG per cell from (omega, 32, 3) colour means -> (omega, 32)."""
    cells_rgb = np.asarray(cells_rgb, dtype=np.float64)
    if cells_rgb.ndim != 3 or cells_rgb.shape[1:] != (N_CELLS, 3):
        raise SignalError(f"expected (omega, {N_CELLS}, 3) cell colours, got {cells_rgb.shape}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateInputWarning)
        return np.stack([chrom_signal(*cells_rgb[:, k].T, fps, cfg) for k in range(N_CELLS)], axis=1)


def build_ppg_map(cell_traces):
    """Temporal map from (omega, 32) cell signals: row = frame, column = cell."""
    cell_traces = np.asarray(cell_traces, dtype=np.float64)
    if cell_traces.ndim != 2 or cell_traces.shape[1] != N_CELLS:
        raise SignalError(f"need {N_CELLS} cell traces as columns, got shape {cell_traces.shape}")
    if not np.isfinite(cell_traces).all():
        raise SignalError("cell traces contain non-finite values")
    grid, flags = quantize_columns(cell_traces, "cell trace")
    return PpgMap(grid, MapKind.TEMPORAL, flags)


def cell_spectra(cell_traces, fps, cfg=DEFAULT_CONFIG):
    """Welch PSD of each cell on omega frequency bins -> (omega, 32)."""
    omega = cell_traces.shape[0]
    return np.stack([welch_quantize(cell_traces[:, k], fps, cfg, bins=omega)[1]
                     for k in range(cell_traces.shape[1])], axis=1)


def build_spectral_map(cell_traces, fps=30.0, cfg=DEFAULT_CONFIG):
    """Temporal map plus 32 columns of per-cell omega-bin spectra."""
    temporal = build_ppg_map(cell_traces)
    spec, flags = quantize_columns(cell_spectra(np.asarray(cell_traces, float), fps, cfg), "cell spectrum")
    return PpgMap(np.concatenate([temporal.grid, spec], axis=1), MapKind.SPECTRAL, temporal.flags + flags)


def save_pgm(path, ppg_map: PpgMap):
    Image.fromarray(ppg_map.grid, mode="L").save(path, format="PPM")


def load_pgm(path, kind=None):
    with Image.open(path) as im:
        grid = np.array(im.convert("L"), dtype=np.uint8)
    if kind is None:
        kind = MapKind.TEMPORAL if grid.shape[1] == N_CELLS else MapKind.SPECTRAL
    return PpgMap(grid, kind)


def write_map_index(path, entries):
    """JSON list of {file, video, segment, label}."""
    Path(path).write_text(json.dumps(sorted(entries, key=lambda e: e["file"]), indent=2, sort_keys=True) + "\n")


def read_map_index(path):
    return json.loads(Path(path).read_text())
