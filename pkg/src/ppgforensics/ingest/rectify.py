"""Warp a polygonal ROI onto a rectangle and average it over a cell grid.

The polygon boundary is mapped onto the rectangle boundary by arc length
(starting at the top-left-most vertex, rectangle corners inserted as
extra boundary points) and the polygon centroid onto the rectangle
centre. The rectangle's points are Delaunay-triangulated and the same
connectivity is used on the polygon, so every rectangle pixel pulls its
colour from the polygon through barycentric coordinates of its triangle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import Delaunay, QhullError
from shapely.geometry import Polygon

from ..errors import TriangulationError

GRID_ROWS = 4
GRID_COLS = 8


@dataclass
class RectMesh:
    src: np.ndarray        # (m, 2) polygon-side points (x, y)
    dst: np.ndarray        # (m, 2) rectangle-side points
    triangles: np.ndarray  # (t, 3) vertex indices shared by both sides
    width: int
    height: int


def _oriented(polygon):
    p = np.asarray(polygon, dtype=float)
    if len(p) >= 2 and np.allclose(p[0], p[-1]):
        p = p[:-1]
    if len(p) < 3:
        raise TriangulationError("polygon needs at least 3 vertices")
    x, y = p[:, 0], p[:, 1]
    signed = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    if abs(signed) < 1e-9:
        raise TriangulationError("polygon is degenerate (collinear vertices)")
    if signed < 0:
        p = p[::-1]
    start = int(np.argmin(p[:, 0] + p[:, 1]))
    return np.roll(p, -start, axis=0)


def _along(closed, cum, t):
    """Points at arc-length fractions ``t`` of a closed polyline."""
    s = np.asarray(t) * cum[-1]
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(cum) - 2)
    seg = cum[idx + 1] - cum[idx]
    frac = np.where(seg > 0, (s - cum[idx]) / np.where(seg > 0, seg, 1), 0.0)
    return closed[idx] + frac[:, None] * (closed[idx + 1] - closed[idx])


def _rect_boundary(t, w, h):
    per = 2.0 * (w + h)
    s = np.asarray(t) * per
    out = np.empty((len(s), 2))
    for i, v in enumerate(s):
        if v <= w:
            out[i] = (v, 0.0)
        elif v <= w + h:
            out[i] = (w, v - w)
        elif v <= 2 * w + h:
            out[i] = (w - (v - w - h), h)
        else:
            out[i] = (0.0, h - (v - 2 * w - h))
    return out


def output_size(polygon, grid_w=GRID_COLS, grid_h=GRID_ROWS, cell=None):
    """Rectangle size giving roughly one output pixel per ROI pixel."""
    if cell is None:
        area = Polygon(np.asarray(polygon, float)).area
        cell = max(1, int(round(np.sqrt(area / (grid_w * grid_h)))))
    return grid_w * cell, grid_h * cell


def rectification_mesh(polygon, width, height):
    p = _oriented(polygon)
    closed = np.vstack([p, p[:1]])
    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(closed, axis=0), axis=1))])
    vert_t = cum[:-1] / cum[-1]
    per = 2.0 * (width + height)
    corner_t = np.array([0.0, width, width + height, 2 * width + height]) / per
    t = np.union1d(np.round(vert_t, 12), np.round(corner_t, 12))
    src = _along(closed, cum, t)
    dst = _rect_boundary(t, width, height)
    centroid = np.array(Polygon(p).centroid.coords[0])
    src = np.vstack([src, centroid])
    dst = np.vstack([dst, [width / 2.0, height / 2.0]])
    try:
        tri = Delaunay(dst)
    except QhullError as exc:
        raise TriangulationError(str(exc)) from exc
    return RectMesh(src, dst, tri.simplices.copy(), width, height), tri


def source_coordinates(polygon, width, height):
    """Polygon-side (x, y) sampled by each rectangle pixel centre, (h, w, 2)."""
    mesh, tri = rectification_mesh(polygon, width, height)
    jj, ii = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    pix = np.column_stack([jj.ravel(), ii.ravel()])
    simplex = tri.find_simplex(pix)
    if np.any(simplex < 0):
        raise TriangulationError("rectangle not covered by triangulation")
    T = tri.transform[simplex]
    b = np.einsum("nij,nj->ni", T[:, :2], pix - T[:, 2])
    bary = np.column_stack([b, 1.0 - b.sum(axis=1)])
    src = np.einsum("nk,nkd->nd", bary, mesh.src[tri.simplices[simplex]])
    return src.reshape(height, width, 2)


def warp_frame(frame, coords):
    """Bilinear sample of an (h, w, 3) frame at (x, y) coordinates."""
    ys, xs = coords[..., 1], coords[..., 0]
    chans = [ndimage.map_coordinates(frame[..., c].astype(np.float64), [ys, xs],
                                     order=1, mode="nearest") for c in range(frame.shape[-1])]
    return np.stack(chans, axis=-1)


def cell_means(rect, grid_w=GRID_COLS, grid_h=GRID_ROWS):
    """Mean colour of each of grid_h x grid_w equal cells, row-major, (cells, 3)."""
    h, w = rect.shape[:2]
    ch, cw = h // grid_h, w // grid_w
    blocks = rect[:ch * grid_h, :cw * grid_w].reshape(grid_h, ch, grid_w, cw, -1)
    return blocks.mean(axis=(1, 3)).reshape(grid_h * grid_w, -1)


def rectify_roi(frames, polygons, grid_w=GRID_COLS, grid_h=GRID_ROWS, cell=None):
    """Per-frame mean RGB of each rectified sub-region.

    Returns an array (n_frames, grid_w * grid_h, 3); ``[..., 1]`` is the
    green trace of every cell.
    """
    if isinstance(polygons, np.ndarray) and polygons.ndim == 2:
        polygons = [polygons] * len(frames)
    if len(polygons) != len(frames):
        raise ValueError("need one polygon per frame")
    width, height = output_size(polygons[0], grid_w, grid_h, cell)
    out = np.empty((len(frames), grid_w * grid_h, 3))
    key, coords = None, None
    for i, (frame, poly) in enumerate(zip(frames.frames, polygons)):
        k = np.asarray(poly).tobytes()
        if k != key:
            key, coords = k, source_coordinates(poly, width, height)
        out[i] = cell_means(warp_frame(frame, coords), grid_w, grid_h)
    return out
