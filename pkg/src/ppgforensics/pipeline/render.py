"""Render synthetic region traces as face video frames on the template face,
so the frame-level path (ROI masks, rectification, distortions) can be
exercised end to end."""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..ingest.frames import FrameSequence
from ..ingest.landmarks import LandmarkSet, reference_face
from ..ingest.rectify import GRID_COLS, GRID_ROWS, output_size, source_coordinates
from ..ingest.roi import Region, RoiSpec, _face_hull, polygon_mask, roi_polygon
from ..ingest.traces_io import cells_from_traces

RENDER_SCALE = 99.0
RENDER_OFFSET = (12.0, 6.0)
BACKGROUND = (60.0, 60.0, 60.0)


def render_landmarks(scale=RENDER_SCALE, offset=RENDER_OFFSET):
    return reference_face(scale, offset)


def _frame_size(points):
    return int(np.ceil(points[:, 1].max())) + 6, int(np.ceil(points[:, 0].max())) + 6


def cell_label_map(points, height, width):
    """Index (0..31) of the rectified mid-region cell each pixel falls in,
    -1 outside the mid-region polygon."""
    poly = roi_polygon(points, RoiSpec(Region.MID_REGION))
    mask = polygon_mask(poly, height, width)
    w, h = output_size(poly)
    coords = source_coordinates(poly, w, h)           # (h, w, 2) source (x, y)
    rows, cols = np.mgrid[0:h, 0:w]
    cell = (rows * GRID_ROWS // h) * GRID_COLS + cols * GRID_COLS // w
    tree = cKDTree(coords.reshape(-1, 2))
    ys, xs = np.nonzero(mask)
    _, nearest = tree.query(np.column_stack([xs, ys]))
    labels = np.full((height, width), -1, dtype=int)
    labels[ys, xs] = cell.reshape(-1)[nearest]
    return labels


def render_frames(traces, seed=0, pixel_noise=2.0, texture=6.0, source_id="synthetic"):
    """uint8 frames whose region means follow ``traces``.

    Cheeks take the left/right traces, the mid-region takes its 32 cell
    traces, the rest of the face the average of the three regions. A
    static skin texture and per-pixel temporal noise (which dithers the
    8-bit quantisation) are added. Returns (FrameSequence, LandmarkSet).
    """
    rng = np.random.default_rng(seed)
    pts = render_landmarks()
    height, width = _frame_size(pts)
    fps = traces["mid_region"].fps
    n = len(traces["mid_region"])
    left = polygon_mask(roi_polygon(pts, RoiSpec(Region.LEFT_CHEEK)), height, width)
    right = polygon_mask(roi_polygon(pts, RoiSpec(Region.RIGHT_CHEEK)), height, width)
    face = polygon_mask(np.asarray(_face_hull(pts).exterior.coords)[:-1], height, width)
    labels = cell_label_map(pts, height, width)
    cells = cells_from_traces(traces)
    if cells is None:
        cells = np.repeat(traces["mid_region"].rgb[:, None, :], GRID_ROWS * GRID_COLS, axis=1)
    skin = (traces["left_cheek"].rgb + traces["mid_region"].rgb + traces["right_cheek"].rgb) / 3
    tex = rng.normal(0.0, texture, (height, width, 1))
    frames = np.empty((n, height, width, 3), dtype=np.uint8)
    mid = labels >= 0
    lab = labels[mid]
    for t in range(n):
        img = np.empty((height, width, 3))
        img[:] = BACKGROUND
        img[face] = skin[t]
        img[left] = traces["left_cheek"].rgb[t]
        img[right] = traces["right_cheek"].rgb[t]
        img[mid] = cells[t][lab]
        img[face] += tex[face]
        img += rng.normal(0.0, pixel_noise, img.shape)
        frames[t] = np.clip(np.rint(img), 0, 255)
    return FrameSequence(frames, fps, source_id), LandmarkSet.static(pts, n, 1.0, fps)
