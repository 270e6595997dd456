"""Per-frame 68-point facial landmarks and their JSON document format.

JSON layout (one document per video)::

    {"fps": 30.0,
     "frames": [{"idx": 0, "conf": 0.98, "points": [[x, y], ...]}, ...]}

Points use the usual 68-point annotation order (jaw 0-16, brows 17-26,
nose 27-35, eyes 36-47, mouth 48-67). A frame whose ``points`` is empty
or ``null`` is treated as missing.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import IngestError

N_LANDMARKS = 68

# Mean 68-point face shape, unit-normalised (x right, y down).
TEMPLATE_68 = np.array([
    (0.0792, 0.3392), (0.0829, 0.4570), (0.0968, 0.5756), (0.1221, 0.6919),
    (0.1687, 0.8003), (0.2398, 0.8957), (0.3257, 0.9771), (0.4223, 1.0433),
    (0.5318, 1.0608), (0.6413, 1.0398), (0.7381, 0.9723), (0.8244, 0.8896),
    (0.8948, 0.7925), (0.9394, 0.6815), (0.9611, 0.5622), (0.9706, 0.4418),
    (0.9712, 0.3221), (0.1638, 0.2492), (0.2178, 0.2043), (0.2913, 0.1924),
    (0.3675, 0.2036), (0.4393, 0.2331), (0.5864, 0.2281), (0.6602, 0.1959),
    (0.7375, 0.1824), (0.8132, 0.1928), (0.8708, 0.2353), (0.5153, 0.3186),
    (0.5162, 0.3962), (0.5171, 0.4738), (0.5182, 0.5532), (0.4337, 0.6041),
    (0.4755, 0.6208), (0.5207, 0.6343), (0.5659, 0.6188), (0.6071, 0.6016),
    (0.2524, 0.3311), (0.2987, 0.3026), (0.3557, 0.3030), (0.4037, 0.3387),
    (0.3525, 0.3500), (0.2968, 0.3505), (0.6313, 0.3341), (0.6791, 0.2965),
    (0.7360, 0.2947), (0.7829, 0.3213), (0.7403, 0.3418), (0.6850, 0.3437),
    (0.3532, 0.7462), (0.4146, 0.7191), (0.4777, 0.7068), (0.5227, 0.7171),
    (0.5698, 0.7054), (0.6352, 0.7157), (0.6995, 0.7394), (0.6394, 0.8052),
    (0.5764, 0.8354), (0.5254, 0.8417), (0.4764, 0.8375), (0.4138, 0.8100),
    (0.3801, 0.7500), (0.4780, 0.7451), (0.5234, 0.7489), (0.5711, 0.7433),
    (0.6724, 0.7442), (0.5725, 0.7766), (0.5240, 0.7834), (0.4776, 0.7785),
])

# Template scale (pixels per unit) at which the whole-face hull covers
# 10922 pixels: the reference face used to calibrate ROI scales.
REFERENCE_FACE_SCALE = 132.0
REFERENCE_FACE_OFFSET = (20.0, 10.0)


def reference_face(scale=REFERENCE_FACE_SCALE, offset=REFERENCE_FACE_OFFSET):
    """Template landmarks placed in pixel coordinates."""
    return TEMPLATE_68 * scale + np.asarray(offset, dtype=float)


@dataclass
class LandmarkSet:
    """Landmarks for every frame of one face track.

    ``points`` has shape (n_frames, 68, 2); rows of a missing frame are NaN.
    """

    points: np.ndarray
    confidence: np.ndarray
    fps: float | None = None
    frame_index: np.ndarray = field(default=None)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.confidence = np.asarray(self.confidence, dtype=float)
        if self.points.ndim != 3 or self.points.shape[2] != 2:
            raise IngestError(f"landmark array must be (frames, points, 2), got {self.points.shape}")
        if len(self.confidence) != len(self.points):
            raise IngestError("one confidence value per frame is required")
        if np.any((self.confidence < 0) | (self.confidence > 1)):
            raise IngestError("detection confidence must lie in [0, 1]")
        if self.frame_index is None:
            self.frame_index = np.arange(len(self.points))

    def __len__(self):
        return len(self.points)

    @property
    def n_points(self):
        return self.points.shape[1]

    def frame(self, i):
        """Landmarks of frame ``i``, or None if missing."""
        pts = self.points[i]
        if np.isnan(pts).any():
            return None
        return pts

    def flag_out_of_bounds(self, width, height):
        """Mark frames with any landmark outside the image as missing."""
        pts = self.points
        bad = (pts[..., 0] < 0) | (pts[..., 0] > width - 1) | (pts[..., 1] < 0) | (pts[..., 1] > height - 1)
        bad_frames = bad.any(axis=1)
        self.points[bad_frames] = np.nan
        return bad_frames

    @classmethod
    def static(cls, points, n_frames, conf=1.0, fps=None):
        """The same landmark set repeated for ``n_frames`` frames."""
        pts = np.broadcast_to(np.asarray(points, float), (n_frames,) + np.shape(points)).copy()
        return cls(pts, np.full(n_frames, conf), fps)


def load_landmarks(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, ValueError) as exc:
        raise IngestError(f"cannot read landmarks {path}: {exc}") from exc
    frames = sorted(doc.get("frames", []), key=lambda f: f["idx"])
    if not frames:
        raise IngestError(f"{path}: no landmark frames")
    n_points = None
    for f in frames:
        if f.get("points"):
            n_points = len(f["points"])
            break
    if n_points is None:
        raise IngestError(f"{path}: every frame is missing landmarks")
    pts = np.full((len(frames), n_points, 2), np.nan)
    conf = np.zeros(len(frames))
    for i, f in enumerate(frames):
        conf[i] = float(f.get("conf", 1.0))
        p = f.get("points")
        if p:
            if len(p) != n_points:
                raise IngestError(f"{path}: frame {f['idx']} has {len(p)} landmarks, expected {n_points}")
            pts[i] = p
    idx = np.array([f["idx"] for f in frames])
    return LandmarkSet(pts, conf, doc.get("fps"), idx)


def save_landmarks(path, landmarks: LandmarkSet):
    frames = []
    for i in range(len(landmarks)):
        p = landmarks.frame(i)
        frames.append({
            "idx": int(landmarks.frame_index[i]),
            "conf": float(landmarks.confidence[i]),
            "points": None if p is None else [[round(float(x), 4), round(float(y), 4)] for x, y in p],
        })
    Path(path).write_text(json.dumps({"fps": landmarks.fps, "frames": frames}))
