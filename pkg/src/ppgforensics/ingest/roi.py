"""Facial regions of interest and per-frame colour traces.

Each region starts from a fixed landmark polygon; the five scales grow or
shrink it about its centroid and clip it to the face hull. The scale
factors were fitted on the reference face (``landmarks.reference_face``)
so the union of the three default regions covers ~7213 pixels, with
356 / 2508 / 10871 pixels for the smallest / small / big scales and the
whole hull (10922) for ``face``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import shapely
from shapely.geometry import MultiPoint, Polygon

from ..errors import RegionUnavailableError


class Region(str, enum.Enum):
    LEFT_CHEEK = "left_cheek"
    MID_REGION = "mid_region"
    RIGHT_CHEEK = "right_cheek"
    WHOLE_FACE = "whole_face"


class Scale(str, enum.Enum):
    SMALLEST = "smallest"
    SMALL = "small"
    DEFAULT = "default"
    BIG = "big"
    FACE = "face"


SCALE_ORDER = (Scale.SMALLEST, Scale.SMALL, Scale.DEFAULT, Scale.BIG, Scale.FACE)

# Image-left cheek is the subject's right cheek.
REGION_LANDMARKS = {
    Region.LEFT_CHEEK: (36, 41, 40, 31, 48, 4, 3, 2, 1),
    Region.MID_REGION: (21, 22, 42, 35, 33, 31, 39),
    Region.RIGHT_CHEEK: (45, 46, 47, 35, 54, 12, 13, 14, 15),
}
FACE_HULL_LANDMARKS = tuple(range(27))

# Linear growth factor about the region centroid, per scale.
SCALE_FACTORS = {
    Scale.SMALLEST: 0.2557,
    Scale.SMALL: 0.6794,
    Scale.DEFAULT: 1.2333,
    Scale.BIG: 2.5839,
}

SIGNAL_REGIONS = (Region.LEFT_CHEEK, Region.MID_REGION, Region.RIGHT_CHEEK)


@dataclass(frozen=True)
class RoiSpec:
    region: Region = Region.MID_REGION
    scale: Scale = Scale.DEFAULT

    def __post_init__(self):
        object.__setattr__(self, "region", Region(self.region))
        object.__setattr__(self, "scale", Scale(self.scale))


@dataclass
class RegionTrace:
    """Per-frame mean colour of one region (values in [0, 255])."""

    mean_r: np.ndarray
    mean_g: np.ndarray
    mean_b: np.ndarray
    region: RoiSpec
    fps: float

    def __post_init__(self):
        self.mean_r = np.asarray(self.mean_r, dtype=float)
        self.mean_g = np.asarray(self.mean_g, dtype=float)
        self.mean_b = np.asarray(self.mean_b, dtype=float)
        if not (len(self.mean_r) == len(self.mean_g) == len(self.mean_b)):
            raise ValueError("colour channels must have equal length")

    def __len__(self):
        return len(self.mean_g)

    @property
    def rgb(self):
        return np.stack([self.mean_r, self.mean_g, self.mean_b], axis=1)

    def slice(self, start, stop):
        return RegionTrace(self.mean_r[start:stop], self.mean_g[start:stop],
                           self.mean_b[start:stop], self.region, self.fps)


def _face_hull(points):
    hull = MultiPoint(points[list(FACE_HULL_LANDMARKS)]).convex_hull
    if not isinstance(hull, Polygon) or hull.area <= 0:
        raise RegionUnavailableError("face landmarks are degenerate (collinear)")
    return hull


def _largest(geom):
    if isinstance(geom, Polygon):
        return geom
    polys = [g for g in getattr(geom, "geoms", []) if isinstance(g, Polygon)]
    if not polys:
        raise RegionUnavailableError("region polygon vanished after clipping")
    return max(polys, key=lambda g: g.area)


def roi_polygon(points, spec: RoiSpec):
    """Polygon (k, 2) in pixel coordinates for one frame's 68 landmarks."""
    if points is None:
        raise RegionUnavailableError(f"landmarks missing for {spec.region.value}")
    points = np.asarray(points, dtype=float)
    if points.shape != (68, 2) or not np.isfinite(points).all():
        raise RegionUnavailableError(f"landmarks missing for {spec.region.value}")
    hull = _face_hull(points)
    if spec.region is Region.WHOLE_FACE or spec.scale is Scale.FACE:
        poly = hull
    else:
        base = Polygon(points[list(REGION_LANDMARKS[spec.region])])
        if not base.is_valid or base.area <= 0:
            raise RegionUnavailableError(f"{spec.region.value} polygon is not simple")
        f = SCALE_FACTORS[spec.scale]
        c = np.array(base.centroid.coords[0])
        scaled = Polygon(c + f * (np.asarray(base.exterior.coords) - c))
        poly = _largest(scaled.intersection(hull))
    if poly.area <= 0:
        raise RegionUnavailableError(f"{spec.region.value} polygon is empty")
    return np.asarray(poly.exterior.coords)[:-1]


def polygon_mask(polygon, height, width):
    """Boolean mask of pixels whose centres lie inside ``polygon``."""
    polygon = np.asarray(polygon, dtype=float)
    mask = np.zeros((height, width), dtype=bool)
    x0 = max(int(np.floor(polygon[:, 0].min())), 0)
    x1 = min(int(np.ceil(polygon[:, 0].max())), width - 1)
    y0 = max(int(np.floor(polygon[:, 1].min())), 0)
    y1 = min(int(np.ceil(polygon[:, 1].max())), height - 1)
    if x1 < x0 or y1 < y0:
        return mask
    yy, xx = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    inside = shapely.contains_xy(Polygon(polygon), xx.ravel().astype(float), yy.ravel().astype(float))
    mask[y0:y1 + 1, x0:x1 + 1] = inside.reshape(yy.shape)
    return mask


def pixel_count(polygon, height=None, width=None):
    polygon = np.asarray(polygon, dtype=float)
    if height is None:
        height = int(np.ceil(polygon[:, 1].max())) + 2
        width = int(np.ceil(polygon[:, 0].max())) + 2
    return int(polygon_mask(polygon, height, width).sum())


def region_mean(frame, mask):
    """Mean RGB over masked pixels of one frame."""
    n = int(mask.sum())
    if n == 0:
        raise RegionUnavailableError("region has no interior pixels")
    return frame[mask].astype(np.float64).sum(axis=0) / n


def region_trace(frames, polygons, spec: RoiSpec = RoiSpec()):
    """Average the colour inside ``polygons[i]`` for every frame ``i``.

    ``frames`` is a FrameSequence; ``polygons`` a sequence of (k, 2) arrays,
    one per frame. A single polygon is reused for every frame.
    """
    if isinstance(polygons, np.ndarray) and polygons.ndim == 2:
        polygons = [polygons] * len(frames)
    if len(polygons) != len(frames):
        raise ValueError("need one polygon per frame")
    h, w = frames.height, frames.width
    out = np.empty((len(frames), 3))
    cache_key, cache_mask = None, None
    for i, (frame, poly) in enumerate(zip(frames.frames, polygons)):
        key = np.asarray(poly).tobytes()
        if key != cache_key:
            cache_key, cache_mask = key, polygon_mask(poly, h, w)
        try:
            out[i] = region_mean(frame, cache_mask)
        except RegionUnavailableError as exc:
            raise RegionUnavailableError(f"frame {i}: {exc}") from None
    return RegionTrace(out[:, 0], out[:, 1], out[:, 2], spec, frames.fps)


def face_traces(frames, landmarks, scale: Scale = Scale.DEFAULT):
    """RegionTraces for the three signal regions, keyed by Region.

    Frames with missing landmarks reuse the previous frame's polygon; if
    the first frames are missing, the first available polygon is used.
    """
    polys = {r: [] for r in SIGNAL_REGIONS}
    last = {}
    last_key = None
    pending = 0
    for i in range(len(frames)):
        pts = landmarks.frame(i)
        if pts is None:
            if last:
                for r in SIGNAL_REGIONS:
                    polys[r].append(last[r])
            else:
                pending += 1
            continue
        key = pts.tobytes()
        if key != last_key:
            last = {r: roi_polygon(pts, RoiSpec(r, scale)) for r in SIGNAL_REGIONS}
            last_key = key
        for r in SIGNAL_REGIONS:
            polys[r].append(last[r])
    if not last:
        raise RegionUnavailableError("no frame has landmarks")
    for r in SIGNAL_REGIONS:
        polys[r] = [polys[r][0]] * pending + polys[r]
    return {r: region_trace(frames, polys[r], RoiSpec(r, scale)) for r in SIGNAL_REGIONS}
