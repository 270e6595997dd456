"""Pairwise separation: given two unlabeled videos of which one is fake,
decide which one using a scalar coherence or variability metric."""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputWarning, ParameterError, SignalError, UndecidableError
from .ingest.segments import SegmentConfig, segmentize, split_traces
from .rppg import DEFAULT_CONFIG, SignalBundle, build_bundle
from .transforms import cross_psd, dct, log_scale, psd, xcorr

PAIRWISE_OMEGA = 300


class MetricId(str, enum.Enum):
    STAT = "stat"
    ABSDIFF = "absdiff"
    PSD_EQ1 = "psd_eq1"
    DCT_DC = "dct_dc"
    XPSD_MEAN = "xpsd_mean"
    XPSD_LOG = "xpsd_log"
    AP_LOG = "ap_log"


# +1: the member with the larger score is fake; -1: the smaller one is.
POLARITY = {
    MetricId.STAT: +1,
    MetricId.ABSDIFF: +1,
    MetricId.PSD_EQ1: -1,
    MetricId.DCT_DC: +1,
    MetricId.XPSD_MEAN: -1,
    MetricId.XPSD_LOG: -1,
    MetricId.AP_LOG: -1,
}


@dataclass
class PairScore:
    metric_id: MetricId
    score_a: float
    score_b: float
    polarity: int = 1
    decision: str | None = field(init=False)

    def __post_init__(self):
        self.metric_id = MetricId(self.metric_id)
        if self.score_a == self.score_b:
            self.decision = None
        else:
            a_larger = self.score_a > self.score_b
            self.decision = "a" if a_larger == (self.polarity > 0) else "b"

    @property
    def undecidable(self):
        return self.decision is None

    def to_dict(self):
        return {"metric": self.metric_id.value, "score_a": self.score_a,
                "score_b": self.score_b, "fake": self.decision}


# --- per-segment scores -------------------------------------------------------

def score_stat(b: SignalBundle, cfg=DEFAULT_CONFIG):
    """|mean| + std + min-max range, summed over G_M and C_M."""
    return float(sum(abs(s.mean()) + s.std() + np.ptp(s) for s in (b.G_M, b.C_M)))


def score_absdiff(b: SignalBundle, cfg=DEFAULT_CONFIG):
    """Mean absolute difference between consecutive frames of G_M."""
    return float(np.mean(np.abs(np.diff(b.G_M))))


def score_psd_eq1(b: SignalBundle, cfg=DEFAULT_CONFIG):
    """mean + std of the Welch PSD of G_L."""
    p = psd(b.G_L, b.fps, cfg).power
    return float(p.mean() + p.std())


def score_dct(b: SignalBundle, cfg=DEFAULT_CONFIG, n_coeffs=1):
    """Sum of the first ``n_coeffs`` DCT coefficients of log(G_L); 1 = DC only."""
    if not 1 <= n_coeffs <= b.omega:
        raise ParameterError(f"n_coeffs must lie in [1, {b.omega}]")
    return float(dct(log_scale(b.G_L))[:n_coeffs].sum())


def score_xpsd(b: SignalBundle, cfg=DEFAULT_CONFIG, log=False):
    """Mean |normalised cross-correlation| between the PSDs of C_M and C_L."""
    pm = psd(b.C_M, b.fps, cfg).power
    pl = psd(b.C_L, b.fps, cfg).power
    if log:
        pm, pl = log_scale(pm), log_scale(pl)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateInputWarning)
        return float(np.abs(xcorr(pm, pl)).mean())


def score_ap_log(b: SignalBundle, cfg=DEFAULT_CONFIG, band=None):
    """Mean cross-PSD magnitude over the pairs of log-scaled S_C signals,
    optionally restricted to the frequency band ``(low, high)`` in Hz."""
    sigs = [log_scale(s) for s in b.S_C.values()]
    vals = []
    for i in range(len(sigs)):
        for j in range(i + 1, len(sigs)):
            spec = cross_psd(sigs[i], sigs[j], b.fps, cfg)
            if band is not None:
                spec = spec.band(*band)
                if len(spec) == 0:
                    raise ParameterError(f"band {band} selects no frequency bins")
            vals.append(spec.power.mean())
    return float(np.mean(vals))


SCORERS = {
    MetricId.STAT: score_stat,
    MetricId.ABSDIFF: score_absdiff,
    MetricId.PSD_EQ1: score_psd_eq1,
    MetricId.DCT_DC: score_dct,
    MetricId.XPSD_MEAN: score_xpsd,
    MetricId.XPSD_LOG: lambda b, cfg=DEFAULT_CONFIG: score_xpsd(b, cfg, log=True),
    MetricId.AP_LOG: score_ap_log,
}


def segment_score(bundle, metric, cfg=DEFAULT_CONFIG, **kw):
    return SCORERS[MetricId(metric)](bundle, cfg, **kw)


def compare(bundle_a, bundle_b, metric, cfg=DEFAULT_CONFIG, **kw):
    metric = MetricId(metric)
    return PairScore(metric, segment_score(bundle_a, metric, cfg, **kw),
                     segment_score(bundle_b, metric, cfg, **kw), POLARITY[metric])


def metric_stat(a, b, cfg=DEFAULT_CONFIG):
    return compare(a, b, MetricId.STAT, cfg)


def metric_absdiff(a, b, cfg=DEFAULT_CONFIG):
    return compare(a, b, MetricId.ABSDIFF, cfg)


def metric_psd_eq1(a, b, cfg=DEFAULT_CONFIG):
    return compare(a, b, MetricId.PSD_EQ1, cfg)


def metric_dct_dc(a, b, cfg=DEFAULT_CONFIG, n_coeffs=1):
    return compare(a, b, MetricId.DCT_DC, cfg, n_coeffs=n_coeffs)


def metric_xpsd_mean(a, b, cfg=DEFAULT_CONFIG):
    return compare(a, b, MetricId.XPSD_MEAN, cfg)


def metric_xpsd_log(a, b, cfg=DEFAULT_CONFIG):
    return compare(a, b, MetricId.XPSD_LOG, cfg)


def metric_ap_log(a, b, cfg=DEFAULT_CONFIG, band=None):
    return compare(a, b, MetricId.AP_LOG, cfg, band=band)


# --- video level ------------------------------------------------------------------

@dataclass
class PairResult:
    metric_id: MetricId
    fake: str
    mean_score_a: float
    mean_score_b: float
    segments: list

    def to_dict(self):
        return {"metric": self.metric_id.value, "fake": self.fake,
                "mean_score_a": self.mean_score_a, "mean_score_b": self.mean_score_b,
                "segments": [s.to_dict() for s in self.segments]}

    def to_text(self):
        lines = [f"metric {self.metric_id.value}: fake = {self.fake}",
                 f"mean score a = {self.mean_score_a:.6g}, b = {self.mean_score_b:.6g}"]
        for k, s in enumerate(self.segments):
            lines.append(f"segment {k}: a={s.score_a:.6g} b={s.score_b:.6g} fake={s.decision or 'tie'}")
        return "\n".join(lines) + "\n"


def video_bundles(video, omega=PAIRWISE_OMEGA, cfg=DEFAULT_CONFIG):
    """Bundles of a video given either as a list of bundles or as a dict of
    region traces (cut into omega-length segments)."""
    if isinstance(video, SignalBundle):
        return [video]
    if isinstance(video, (list, tuple)) and video and isinstance(video[0], SignalBundle):
        return list(video)
    if isinstance(video, dict):
        n = len(next(iter(video.values())))
        seg = segmentize(n, SegmentConfig(omega=omega))
        return [build_bundle(t, cfg) for t in split_traces(video, seg)]
    raise SignalError("video must be a SignalBundle, a list of them, or a dict of region traces")


def pairwise_separate(video_a, video_b, metric=MetricId.AP_LOG, omega=PAIRWISE_OMEGA,
                      cfg=DEFAULT_CONFIG, **kw):
    """Decide which of two videos is fake from mean per-segment scores.

    Segments are paired in order up to the shorter video.
    """
    metric = MetricId(metric)
    ba = video_bundles(video_a, omega, cfg)
    bb = video_bundles(video_b, omega, cfg)
    n = min(len(ba), len(bb))
    segs = [compare(ba[k], bb[k], metric, cfg, **kw) for k in range(n)]
    if all(s.undecidable for s in segs):
        raise UndecidableError(f"{metric.value}: every segment is a tie")
    mean_a = float(np.mean([s.score_a for s in segs]))
    mean_b = float(np.mean([s.score_b for s in segs]))
    overall = PairScore(metric, mean_a, mean_b, POLARITY[metric])
    if overall.undecidable:
        raise UndecidableError(f"{metric.value}: mean segment scores tie")
    return PairResult(metric, overall.decision, mean_a, mean_b, segs)
