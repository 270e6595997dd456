"""PPG signals from region colour traces: G-PPG, chrominance PPG, filtering
and Welch quantisation, and the six-signal bundle with its derived sets."""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import signal as sps

from .errors import DegenerateInputWarning, ParameterError, SignalError
from .ingest.roi import Region, RegionTrace

MIN_WELCH_LENGTH = 16


@dataclass(frozen=True)
class PpgConfig:
    band_low: float = 0.7
    band_high: float = 14.0
    filter_order: int = 4
    welch_bins: int = 256
    welch_window: int = 128
    h_low: float = 0.67
    h_high: float = 4.68

    def __post_init__(self):
        if not 0 < self.band_low < self.band_high:
            raise ParameterError(f"need 0 < band_low < band_high, got {self.band_low}, {self.band_high}")
        if self.filter_order < 1:
            raise ParameterError("filter_order must be >= 1")
        b = self.welch_bins
        if b < 2 or b & (b - 1):
            raise ParameterError(f"welch_bins must be a power of two, got {b}")
        if self.welch_window < MIN_WELCH_LENGTH:
            raise ParameterError(f"welch_window must be >= {MIN_WELCH_LENGTH}")
        if not 0 <= self.h_low < self.h_high:
            raise ParameterError("need 0 <= h_low < h_high")

    def check_rate(self, fps):
        if self.band_high >= fps / 2:
            raise ParameterError(f"band_high {self.band_high} Hz exceeds Nyquist ({fps / 2} Hz)")

    def to_dict(self):
        return asdict(self)


DEFAULT_CONFIG = PpgConfig()


def _finite(x, what="signal"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise SignalError(f"{what} must be 1-D")
    if not np.isfinite(x).all():
        raise SignalError(f"{what} contains non-finite values")
    return x


def bandpass_sos(fps, cfg=DEFAULT_CONFIG):
    cfg.check_rate(fps)
    return sps.butter(cfg.filter_order, [cfg.band_low, cfg.band_high], btype="bandpass",
                      fs=fps, output="sos")


def butterworth_bandpass(x, fps, cfg=DEFAULT_CONFIG):
    """Zero-phase (forward-backward) Butterworth band-pass."""
    x = _finite(x)
    sos = bandpass_sos(fps, cfg)
    padlen = min(3 * (2 * len(sos) + 1), len(x) - 1)
    return sps.sosfiltfilt(sos, x, padlen=max(padlen, 0))


def _welch_params(n, cfg, bins):
    if n < MIN_WELCH_LENGTH:
        raise SignalError(f"signal of length {n} is shorter than one Welch window ({MIN_WELCH_LENGTH})")
    nfft = 2 * (bins - 1)
    nperseg = min(n, cfg.welch_window, nfft)
    return dict(window="hann", nperseg=nperseg, noverlap=nperseg // 2, nfft=nfft,
                detrend="constant", scaling="density")


def welch_quantize(x, fps, cfg=DEFAULT_CONFIG, bins=None):
    """Welch PSD on ``bins`` frequencies spanning 0..fps/2 (inclusive).

    Hann windows of min(len, welch_window) samples, 50% overlap, each
    zero-padded to 2 * (bins - 1) points.
    """
    x = _finite(x)
    freqs, power = sps.welch(x, fs=fps, **_welch_params(len(x), cfg, bins or cfg.welch_bins))
    return freqs, power


def welch_cross(x, y, fps, cfg=DEFAULT_CONFIG, bins=None):
    """Complex Welch cross spectral density with the same settings."""
    x, y = _finite(x), _finite(y)
    if len(x) != len(y):
        raise SignalError(f"length mismatch: {len(x)} vs {len(y)}")
    return sps.csd(x, y, fs=fps, **_welch_params(len(x), cfg, bins or cfg.welch_bins))


def green_ppg(green, fps, cfg=DEFAULT_CONFIG):
    g = _finite(green, "green trace")
    return butterworth_bandpass(g - g.mean(), fps, cfg)


def chrom_signal(r, g, b, fps, cfg=DEFAULT_CONFIG):
    """Chrominance PPG from three colour traces.

    Channels are normalised by their temporal means, projected onto
    X = 3R - 2G and Y = 1.5R + G - 1.5B, band-passed, and combined as
    X_f - alpha * Y_f with alpha = std(X_f) / std(Y_f). If Y_f carries no
    energy, X_f is returned and a DegenerateInputWarning is issued.
    """
    r, g, b = (_finite(c, "colour trace") for c in (r, g, b))
    means = np.array([r.mean(), g.mean(), b.mean()])
    if np.any(means <= 0):
        raise SignalError("chrominance needs positive channel means")
    rn, gn, bn = r / means[0], g / means[1], b / means[2]
    xf = butterworth_bandpass(3.0 * rn - 2.0 * gn, fps, cfg)
    yf = butterworth_bandpass(1.5 * rn + gn - 1.5 * bn, fps, cfg)
    sy = yf.std()
    if sy < 1e-10:
        warnings.warn("degenerate chroma: Y projection is flat, using X only",
                      DegenerateInputWarning, stacklevel=2)
        return xf
    return xf - (xf.std() / sy) * yf


def gppg(trace: RegionTrace, cfg=DEFAULT_CONFIG):
    return green_ppg(trace.mean_g, trace.fps, cfg)


def chrom_ppg(trace: RegionTrace, cfg=DEFAULT_CONFIG):
    return chrom_signal(trace.mean_r, trace.mean_g, trace.mean_b, trace.fps, cfg)


SIGNAL_NAMES = ("G_L", "G_M", "G_R", "C_L", "C_M", "C_R")
S_C_NAMES = ("C_L", "C_R", "C_M")
D_NAMES = ("|C_L-G_L|", "|C_R-G_R|", "|C_M-G_M|")
D_C_NAMES = ("|C_L-C_M|", "|C_L-C_R|", "|C_R-C_M|")


@dataclass
class SignalBundle:
    """The six PPG signals of one segment."""

    G_L: np.ndarray
    G_M: np.ndarray
    G_R: np.ndarray
    C_L: np.ndarray
    C_M: np.ndarray
    C_R: np.ndarray
    fps: float

    def __post_init__(self):
        lengths = set()
        for name in SIGNAL_NAMES:
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.isfinite(arr).all():
                raise SignalError(f"{name} contains non-finite values")
            setattr(self, name, arr)
            lengths.add(len(arr))
        if len(lengths) != 1:
            raise SignalError(f"bundle signals differ in length: {sorted(lengths)}")

    @property
    def omega(self):
        return len(self.G_L)

    @property
    def S(self):
        return {n: getattr(self, n) for n in SIGNAL_NAMES}

    @property
    def S_C(self):
        return {n: getattr(self, n) for n in S_C_NAMES}

    @property
    def D(self):
        return dict(zip(D_NAMES, (np.abs(self.C_L - self.G_L), np.abs(self.C_R - self.G_R),
                                  np.abs(self.C_M - self.G_M))))

    @property
    def D_C(self):
        return dict(zip(D_C_NAMES, (np.abs(self.C_L - self.C_M), np.abs(self.C_L - self.C_R),
                                    np.abs(self.C_R - self.C_M))))

    def permuted(self, order):
        """Bundle with regions reassigned; ``order`` maps L/M/R to source letters."""
        kw = {}
        for dst, src in zip("LMR", order):
            kw[f"G_{dst}"] = getattr(self, f"G_{src}")
            kw[f"C_{dst}"] = getattr(self, f"C_{src}")
        return SignalBundle(fps=self.fps, **kw)


def _region_key(traces, region):
    if region in traces:
        return traces[region]
    return traces[region.value]


def build_bundle(traces, cfg=DEFAULT_CONFIG):
    """SignalBundle from left/mid/right traces.

    ``traces`` is either a (left, mid, right) sequence of RegionTrace or a
    mapping keyed by Region (or its string value).
    """
    if isinstance(traces, dict):
        left, mid, right = (_region_key(traces, r) for r in
                            (Region.LEFT_CHEEK, Region.MID_REGION, Region.RIGHT_CHEEK))
    else:
        left, mid, right = traces
    if not (len(left) == len(mid) == len(right)):
        raise SignalError("region traces are not aligned")
    fps = mid.fps
    return SignalBundle(
        G_L=gppg(left, cfg), G_M=gppg(mid, cfg), G_R=gppg(right, cfg),
        C_L=chrom_ppg(left, cfg), C_M=chrom_ppg(mid, cfg), C_R=chrom_ppg(right, cfg),
        fps=fps,
    )


def write_signal_dump(path, bundles, cfg=DEFAULT_CONFIG):
    """CSV ``segment,t,G_L,...,C_R`` for a list of bundles plus ``<path>.json``
    holding the PpgConfig."""
    path = Path(path)
    lines = ["segment,t," + ",".join(SIGNAL_NAMES)]
    for k, b in enumerate(bundles):
        cols = [b.S[n] for n in SIGNAL_NAMES]
        for i in range(b.omega):
            vals = ",".join(f"{c[i]:.9g}" for c in cols)
            lines.append(f"{k},{i / b.fps:.6f},{vals}")
    path.write_text("\n".join(lines) + "\n")
    Path(str(path) + ".json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
