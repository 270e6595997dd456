"""Cutting sequences into fixed-length temporal segments."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ParameterError, SegmentTooShortError


@dataclass(frozen=True)
class SegmentConfig:
    omega: int = 128
    stride: int | None = None
    min_face_conf: float = 0.0

    def __post_init__(self):
        if self.omega < 16:
            raise ParameterError(f"omega must be >= 16, got {self.omega}")
        if self.stride is not None and self.stride < 1:
            raise ParameterError("stride must be >= 1")
        if not 0 <= self.min_face_conf <= 1:
            raise ParameterError("min_face_conf must lie in [0, 1]")

    @property
    def step(self):
        return self.omega if self.stride is None else self.stride


@dataclass
class Segmentation:
    """Frame ranges [start, stop) of the kept segments.

    ``dropped_frames`` counts frames after the last full window;
    ``low_confidence`` counts windows rejected for face confidence.
    With the default stride (= omega) the frame count is conserved:
    omega * (len(ranges) + low_confidence) + dropped_frames == total.
    """

    ranges: list = field(default_factory=list)
    total: int = 0
    dropped_frames: int = 0
    low_confidence: int = 0

    def __len__(self):
        return len(self.ranges)

    def __iter__(self):
        return iter(self.ranges)


def segmentize(n_frames, cfg: SegmentConfig = SegmentConfig(), confidence=None):
    """Split ``n_frames`` (int or sized sequence) into omega-length windows."""
    total = n_frames if isinstance(n_frames, (int, np.integer)) else len(n_frames)
    if total < cfg.omega:
        raise SegmentTooShortError(cfg.omega, total)
    if confidence is not None:
        confidence = np.asarray(confidence, dtype=float)
        if len(confidence) != total:
            raise ParameterError("need one confidence value per frame")
    seg = Segmentation(total=total)
    start = 0
    last_stop = 0
    while start + cfg.omega <= total:
        stop = start + cfg.omega
        if confidence is not None and np.any(confidence[start:stop] < cfg.min_face_conf):
            seg.low_confidence += 1
        else:
            seg.ranges.append((start, stop))
        last_stop = stop
        start += cfg.step
    seg.dropped_frames = total - last_stop
    return seg


def split_traces(traces, segmentation):
    """Slice every RegionTrace in the ``traces`` dict per segment."""
    return [{k: t.slice(a, b) for k, t in traces.items()} for a, b in segmentation]
