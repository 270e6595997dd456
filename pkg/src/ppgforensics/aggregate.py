"""Video-level verdicts from per-segment labels or fake probabilities."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

DEFAULT_TAU = 0.5
FAKE, AUTHENTIC = "fake", "authentic"


@dataclass
class VideoVerdict:
    label: str
    confidence: float
    n_segments: int
    per_segment: list = field(default_factory=list)   # p_fake per segment
    video: str = ""

    def __post_init__(self):
        if self.label not in (FAKE, AUTHENTIC):
            raise ValueError(f"bad label {self.label!r}")
        if self.n_segments < 1:
            raise ValueError("a verdict needs at least one segment")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")

    def to_dict(self):
        return {"video": self.video, "label": self.label, "confidence": self.confidence,
                "n_segments": self.n_segments, "per_segment": list(self.per_segment)}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_text(self):
        return (f"{self.video or '-'}: {self.label} (confidence {self.confidence:.3f}, "
                f"{self.n_segments} segments)")


def _probs(probs):
    p = np.asarray([getattr(v, "p_fake", v) for v in probs], dtype=np.float64)
    if p.size == 0:
        raise ParameterError("no segment values to aggregate")
    if np.any((p < 0) | (p > 1)) or not np.isfinite(p).all():
        raise ParameterError("segment probabilities must lie in [0, 1]")
    return p


def vote_weighted(probs, tau=DEFAULT_TAU, video=""):
    """Fake iff the mean fake probability reaches ``tau`` (a tie is fake).

    Confidence is the distance of the mean from tau divided by the largest
    distance possible on that side, so it spans [0, 1].
    """
    if not 0.0 < tau < 1.0:
        raise ParameterError("tau must lie strictly between 0 and 1")
    p = _probs(probs)
    mean = float(p.mean())
    fake = mean >= tau
    span = (1.0 - tau) if fake else tau
    conf = min(abs(mean - tau) / span, 1.0)
    return VideoVerdict(FAKE if fake else AUTHENTIC, conf, len(p), p.tolist(), video)


def vote_majority(labels, tau=DEFAULT_TAU, video=""):
    """Strict majority of 0/1 segment labels; a tie falls back to the
    expectation rule of ``vote_weighted``."""
    lab = _probs(labels)
    if not np.all((lab == 0) | (lab == 1)):
        raise ParameterError("majority voting needs 0/1 labels")
    n_fake = int(lab.sum())
    n = len(lab)
    if 2 * n_fake == n:
        return vote_weighted(lab, tau, video)
    fake = 2 * n_fake > n
    conf = abs(2 * n_fake - n) / n
    return VideoVerdict(FAKE if fake else AUTHENTIC, conf, n, lab.tolist(), video)
