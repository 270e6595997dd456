"""Feature sets F1-F9, the 126-dimensional authenticity vector, and the
normalisation variants applied to signals before feature extraction.

Layout of the 126-vector (``assemble_126``):

    [0:6]     F1 on pairs of log(D_C): (mean, max) of cross-PSD, 3 pairs
    [6:42]    F3 on log(S) (6 signals) then A_p(D_C) (3 spectra), 4 each
    [42:114]  F4 on the same 9 inputs, 8 each
    [114:126] mean and max of spectral autocorrelation for each s in S

Each name reads ``set/transform/signal/stat`` and can be recomputed on
its own with ``feature_value``.
"""
from __future__ import annotations

import csv
import enum
import io
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .errors import DegenerateInputWarning, ParameterError, SignalError
from .rppg import D_C_NAMES, DEFAULT_CONFIG, SIGNAL_NAMES, SignalBundle, welch_quantize
from .transforms import (autocorr, cross_psd, lyapunov_exponents, log_scale,
                         pairwise_cross_psd, spectral_autocorr, wavelet)

BAND_POWER_FLOOR = 1e-12
PEAK_PROMINENCE = 0.05  # fraction of the signal's range
F5_DEFAULT_N = 65
F6_DEFAULT_N = 100

F1_STATS = ("mean", "max")
F2_STATS = ("rms_diff", "std", "mean_abs_diff", "neg_diff_ratio", "zcr", "mean_prominence",
            "std_prominence", "mean_width", "std_width", "max_deriv", "min_deriv", "mean_deriv",
            "spectral_centroid")
F3_STATS = ("n_pulses", "n_lines", "pulse_energy", "max_ahat")
F4_STATS = ("mean", "std", "std_1s_means", "rms_1s_diff", "mean_std_diff", "std_diff",
            "mean_autocorr", "entropy")
F7_STATS = ("gamma_max", "sigma_ap", "sigma_dp", "sigma_aa", "kurtosis")
F8_STATS = ("delta", "theta", "alpha")
F9_STATS = ("hf_amplitude", "psd_slope", "peak_interval_var")
AHAT_STATS = ("mean", "max")

F8_BANDS = {"delta": (1.0, 4.0), "theta": (4.0, 8.0), "alpha": (8.0, 13.0)}


class FeatureSetId(str, enum.Enum):
    F1 = "F1"
    F2 = "F2"
    F3 = "F3"
    F4 = "F4"
    F5 = "F5"
    F6 = "F6"
    F7 = "F7"
    F8 = "F8"
    F9 = "F9"


@dataclass
class FeatureVector:
    values: np.ndarray
    names: list
    flags: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(self.values) != len(self.names):
            raise ValueError("values and names differ in length")
        if len(set(self.names)) != len(self.names):
            raise ValueError("feature names must be unique")
        if not np.isfinite(self.values).all():
            raise SignalError("feature vector contains NaN/Inf")

    def __len__(self):
        return len(self.values)

    def as_dict(self):
        return dict(zip(self.names, self.values.tolist()))


def _signal(x, min_len=1):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or len(x) < min_len:
        raise SignalError(f"need a 1-D signal of length >= {min_len}")
    if not np.isfinite(x).all():
        raise SignalError("signal contains non-finite values")
    return x


def find_prominent_peaks(x):
    """Local maxima with prominence >= 5% of the signal range."""
    rng = np.ptp(x)
    if rng <= 0:
        return np.array([], dtype=int), np.array([])
    peaks, props = sps.find_peaks(x, prominence=PEAK_PROMINENCE * rng)
    return peaks, props["prominences"]


def zero_crossings(x):
    """Number of sign changes of the mean-removed signal."""
    xc = x - x.mean()
    if not np.any(xc):
        return 0
    s = np.signbit(xc)
    return int(np.count_nonzero(s[1:] != s[:-1]))


def _std_or_zero(v):
    return float(np.std(v)) if len(v) else 0.0


def _mean_or_zero(v):
    return float(np.mean(v)) if len(v) else 0.0


def f1_cross_psd_stats(x, y, fps, cfg=DEFAULT_CONFIG):
    """[mean, max] of the cross spectral density magnitude of a pair."""
    p = cross_psd(x, y, fps, cfg).power
    if not np.any(p):
        warnings.warn("F1 on a zero signal pair", DegenerateInputWarning, stacklevel=2)
    return np.array([p.mean(), p.max()])


def f2_stats(x, fps=30.0, cfg=DEFAULT_CONFIG):
    x = _signal(x, 3)
    d = np.diff(x)
    deriv = d * fps
    peaks, prom = find_prominent_peaks(x)
    if len(peaks):
        widths = sps.peak_widths(x, peaks, rel_height=0.5)[0] / fps
    else:
        widths = np.array([])
    freqs, p = welch_quantize(x, fps, cfg) if len(x) >= 16 else (np.array([0.0]), np.array([0.0]))
    total = p.sum()
    centroid = float((freqs * p).sum() / total) if total > 0 else 0.0
    return np.array([
        np.sqrt(np.mean(d ** 2)),
        x.std(),
        np.mean(np.abs(d)),
        np.count_nonzero(d < 0) / len(d),
        zero_crossings(x) / len(x),
        _mean_or_zero(prom), _std_or_zero(prom),
        _mean_or_zero(widths), _std_or_zero(widths),
        deriv.max(), deriv.min(), deriv.mean(),
        centroid,
    ])


def f3_spectral_autocorr_feats(x, fps=30.0, cfg=DEFAULT_CONFIG):
    """[#narrow pulses, #spectral lines, mean pulse energy, max of A_hat].

    Pulses are strict local maxima of the spectral autocorrelation (lags
    >= 1) above 3 * median(|A_hat|); lines are PSD bins above
    mean + 3 * std of the PSD. The maximum excludes the trivial lag 0.
    """
    x = _signal(x, 16)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateInputWarning)
        a = spectral_autocorr(x)[1:]
    if not np.any(a):
        return np.zeros(4)
    thr = 3.0 * np.median(np.abs(a))
    inner = a[1:-1]
    is_peak = (inner > a[:-2]) & (inner > a[2:]) & (inner > thr)
    pulses = inner[is_peak]
    _, p = welch_quantize(x, fps, cfg)
    lines = np.count_nonzero(p > p.mean() + 3.0 * p.std()) if p.std() > 0 else 0
    energy = float(np.mean(pulses ** 2)) if len(pulses) else 0.0
    return np.array([len(pulses), lines, energy, a.max()], dtype=float)


def f4_hrv_feats(x, fps=30.0):
    x = _signal(x, 1)
    w = int(round(fps))
    if len(x) < 2 * w:
        raise SignalError(f"F4 needs at least 2 s ({2 * w} samples), got {len(x)}")
    n_win = len(x) // w
    wins = x[:n_win * w].reshape(n_win, w)
    means = wins.mean(axis=1)
    d = np.diff(x)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateInputWarning)
        ac = half_lag_mean(autocorr(x))
    counts, _ = np.histogram(x, bins=64)
    prob = counts[counts > 0] / len(x)
    entropy = float(-(prob * np.log2(prob)).sum()) + 0.0
    return np.array([
        x.mean(),
        x.std(),
        means.std(),
        np.sqrt(np.mean(np.diff(means) ** 2)),
        np.diff(wins, axis=1).std(axis=1).mean(),
        d.std(),
        ac,
        entropy,
    ])


def f5_wavelet_feats(x, n=F5_DEFAULT_N, levels=4):
    coeffs = np.concatenate(wavelet(_signal(x, 1), levels))
    if len(coeffs) < n:
        warnings.warn(f"F5: only {len(coeffs)} wavelet coefficients, padding to {n}",
                      DegenerateInputWarning, stacklevel=2)
        coeffs = np.concatenate([coeffs, np.zeros(n - len(coeffs))])
    return coeffs[:n]


def f6_lyapunov_feats(x, n=F6_DEFAULT_N, fps=None):
    dt = 1.0 / fps if fps else 1.0
    return lyapunov_exponents(_signal(x, 1), n, dt=dt)


def analytic_signal(x):
    """Analytic signal by zeroing the negative-frequency half of the DFT."""
    x = _signal(x, 2)
    n = len(x)
    h = np.zeros(n)
    h[0] = 1.0
    if n % 2 == 0:
        h[n // 2] = 1.0
        h[1:n // 2] = 2.0
    else:
        h[1:(n + 1) // 2] = 2.0
    return np.fft.ifft(np.fft.fft(x) * h)


def normalized_centered_amplitude(x):
    a = np.abs(analytic_signal(x))
    m = a.mean()
    if m <= 1e-300:
        return None
    return a / m - 1.0


def f7_modulation_feats(x):
    """Instantaneous amplitude/phase statistics of the analytic signal:
    gamma_max, sigma_ap, sigma_dp, sigma_aa and amplitude kurtosis."""
    x = _signal(x, 2)
    acn = normalized_centered_amplitude(x)
    if acn is None:
        warnings.warn("F7 on a zero signal", DegenerateInputWarning, stacklevel=2)
        return np.zeros(5)
    n = len(x)
    gamma_max = np.max(np.abs(np.fft.fft(acn)) ** 2) / n
    phase = np.unwrap(np.angle(analytic_signal(x)))
    t = np.arange(n)
    phi_nl = phase - np.polyval(np.polyfit(t, phase, 1), t)
    phi_nl -= phi_nl.mean()
    m2 = np.mean(acn ** 2)
    if m2 < 1e-12:
        warnings.warn("F7 kurtosis undefined for constant envelope", DegenerateInputWarning, stacklevel=2)
        kurt = 0.0
    else:
        kurt = np.mean(acn ** 4) / m2 ** 2
    return np.array([gamma_max, np.abs(phi_nl).std(), phi_nl.std(), np.abs(acn).std(), kurt])


def f8_band_powers(x, fps, cfg=DEFAULT_CONFIG):
    """Natural-log power of the delta (1-4 Hz), theta (4-8 Hz) and alpha
    (8-13 Hz) bands, floored at 1e-12 before the log."""
    freqs, p = welch_quantize(_signal(x, 16), fps, cfg)
    df = freqs[1] - freqs[0]
    out = []
    for name, (lo, hi) in F8_BANDS.items():
        sel = (freqs >= lo) & ((freqs < hi) if name != "alpha" else (freqs <= hi))
        out.append(np.log(p[sel].sum() * df + BAND_POWER_FLOOR))
    return np.array(out)


def f9_psd_shape(x, fps, cfg=DEFAULT_CONFIG):
    """[mean amplitude above h_high, slope of log-PSD over the filter band
    (per Hz), variance of inter-peak intervals (s^2)]."""
    x = _signal(x, 16)
    freqs, p = welch_quantize(x, fps, cfg)
    hf = p[freqs > cfg.h_high]
    hf_amp = float(np.sqrt(hf).mean()) if len(hf) else 0.0
    sel = (freqs >= cfg.band_low) & (freqs <= cfg.band_high) & (p > 0)
    slope = float(np.polyfit(freqs[sel], np.log(p[sel]), 1)[0]) if sel.sum() >= 2 else 0.0
    peaks, _ = find_prominent_peaks(x)
    intervals = np.diff(peaks) / fps
    var = float(np.var(intervals)) if len(intervals) >= 2 else 0.0
    return np.array([hf_amp, slope, var])


def half_lag_mean(r):
    """Mean of a biased, mean-removed autocorrelation over lags 1..n//2.

    Over all lags 0..n-1 that mean is the constant 1/(2n), so the
    statistic uses the first half of the lags instead.
    """
    return float(r[1:max(len(r) // 2, 1) + 1].mean())


def ahat_stats(x):
    """[mean over lags 1..m//2, max over lags >= 1] of the spectral
    autocorrelation."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateInputWarning)
        a = spectral_autocorr(_signal(x, 2))
    return np.array([half_lag_mean(a), a[1:].max()])


# --- the 126-feature assembly -------------------------------------------------

def _pair_names(names):
    return [(names[i], names[j]) for i in range(len(names)) for j in range(i + 1, len(names))]


def _nine_inputs(bundle, cfg):
    """The 9 inputs shared by F3 and F4: log(S) then A_p(D_C)."""
    inputs = [("L", n, log_scale(s)) for n, s in bundle.S.items()]
    dc = bundle.D_C
    for (a, b), spec in zip(_pair_names(list(dc)), pairwise_cross_psd(dc, bundle.fps, cfg).values()):
        inputs.append(("A_p", f"{a}x{b}", spec.power))
    return inputs


def assemble_126(bundle: SignalBundle, cfg=DEFAULT_CONFIG):
    fps = bundle.fps
    values, names = [], []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateInputWarning)
        log_dc = {n: log_scale(v) for n, v in bundle.D_C.items()}
        for a, b in _pair_names(list(log_dc)):
            values.extend(f1_cross_psd_stats(log_dc[a], log_dc[b], fps, cfg))
            names.extend(f"F1/L,A_p/{a}x{b}/{s}" for s in F1_STATS)
        nine = _nine_inputs(bundle, cfg)
        for tr, sig, x in nine:
            values.extend(f3_spectral_autocorr_feats(x, fps, cfg))
            names.extend(f"F3/{tr}/{sig}/{s}" for s in F3_STATS)
        for tr, sig, x in nine:
            values.extend(f4_hrv_feats(x, fps))
            names.extend(f"F4/{tr}/{sig}/{s}" for s in F4_STATS)
        for n, s in bundle.S.items():
            values.extend(ahat_stats(s))
            names.extend(f"Ahat/A_hat/{n}/{st}" for st in AHAT_STATS)
    flags = sorted({str(w.message) for w in caught if issubclass(w.category, DegenerateInputWarning)})
    values = np.asarray(values, dtype=np.float64)
    if not np.isfinite(values).all():
        bad = [names[i] for i in np.flatnonzero(~np.isfinite(values))]
        flags.append(f"non-finite features zeroed: {', '.join(bad)}")
        values = np.nan_to_num(values, nan=0.0, posinf=0.0, neginf=0.0)
    return FeatureVector(values, names, flags)


FEATURE_NAMES_126 = None


def feature_names_126():
    """The 126 names in assembly order (bundle independent)."""
    global FEATURE_NAMES_126
    if FEATURE_NAMES_126 is None:
        names = [f"F1/L,A_p/{a}x{b}/{s}" for a, b in _pair_names(list(D_C_NAMES)) for s in F1_STATS]
        nine = [("L", n) for n in SIGNAL_NAMES] + [("A_p", f"{a}x{b}") for a, b in _pair_names(list(D_C_NAMES))]
        names += [f"F3/{t}/{n}/{s}" for t, n in nine for s in F3_STATS]
        names += [f"F4/{t}/{n}/{s}" for t, n in nine for s in F4_STATS]
        names += [f"Ahat/A_hat/{n}/{s}" for n in SIGNAL_NAMES for s in AHAT_STATS]
        FEATURE_NAMES_126 = names
    return list(FEATURE_NAMES_126)


def decode_name(name):
    """Split ``set/transform/signal/stat`` into its four parts."""
    parts = name.split("/")
    if len(parts) != 4:
        raise ValueError(f"malformed feature name {name!r}")
    return tuple(parts)


def feature_value(bundle: SignalBundle, name, cfg=DEFAULT_CONFIG):
    """Recompute one named entry of the 126-vector from the bundle."""
    fset, transform, sig, stat = decode_name(name)
    fps = bundle.fps
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateInputWarning)
        if fset == "F1":
            a, b = sig.split("x")
            dc = bundle.D_C
            vals = f1_cross_psd_stats(log_scale(dc[a]), log_scale(dc[b]), fps, cfg)
            return float(vals[F1_STATS.index(stat)])
        if fset == "Ahat":
            return float(ahat_stats(bundle.S[sig])[AHAT_STATS.index(stat)])
        if transform == "L":
            x = log_scale(bundle.S[sig])
        elif transform == "A_p":
            a, b = sig.split("x")
            dc = bundle.D_C
            x = cross_psd(dc[a], dc[b], fps, cfg).power
        else:
            raise ValueError(f"unknown transform {transform!r}")
        if fset == "F3":
            return float(f3_spectral_autocorr_feats(x, fps, cfg)[F3_STATS.index(stat)])
        if fset == "F4":
            return float(f4_hrv_feats(x, fps)[F4_STATS.index(stat)])
    raise ValueError(f"unknown feature set {fset!r}")


def feature_set(set_id, x, fps=30.0, cfg=DEFAULT_CONFIG, n=None, y=None):
    """Dispatch one F-set on a signal (F1 takes the pair ``x``, ``y``)."""
    set_id = FeatureSetId(set_id)
    if set_id is FeatureSetId.F1:
        if y is None:
            raise ParameterError("F1 needs a signal pair")
        return f1_cross_psd_stats(x, y, fps, cfg)
    if set_id is FeatureSetId.F2:
        return f2_stats(x, fps, cfg)
    if set_id is FeatureSetId.F3:
        return f3_spectral_autocorr_feats(x, fps, cfg)
    if set_id is FeatureSetId.F4:
        return f4_hrv_feats(x, fps)
    if set_id is FeatureSetId.F5:
        return f5_wavelet_feats(x, n or F5_DEFAULT_N)
    if set_id is FeatureSetId.F6:
        return f6_lyapunov_feats(x, n or F6_DEFAULT_N)
    if set_id is FeatureSetId.F7:
        return f7_modulation_feats(x)
    if set_id is FeatureSetId.F8:
        return f8_band_powers(x, fps, cfg)
    return f9_psd_shape(x, fps, cfg)


# --- normalisation ---------------------------------------------------------------

NORMALIZATIONS = ("none", "l2", "inf", "standardized_moment", "feature_scaling",
                  "spectral_whitening", "coefficient_of_variation")


def normalize(x, method="none"):
    """Normalise a vector or signal; output has the input's shape."""
    x = np.asarray(x, dtype=np.float64)
    if method == "none":
        return x.copy()
    if method not in NORMALIZATIONS:
        raise ParameterError(f"unknown normalization {method!r}; choose from {NORMALIZATIONS}")

    def degenerate():
        warnings.warn(f"{method} normalization of a degenerate input", DegenerateInputWarning, stacklevel=3)
        return np.zeros_like(x)

    if method == "l2":
        n = np.linalg.norm(x)
        return x / n if n > 0 else degenerate()
    if method == "inf":
        n = np.max(np.abs(x)) if x.size else 0.0
        return x / n if n > 0 else degenerate()
    if method == "standardized_moment":
        s = x.std()
        return (x - x.mean()) / s if s > 0 else degenerate()
    if method == "feature_scaling":
        r = np.ptp(x)
        return (x - x.min()) / r if r > 0 else degenerate()
    if method == "spectral_whitening":
        f = np.fft.rfft(x)
        mag = np.abs(f)
        white = np.where(mag > 1e-12 * max(mag.max(), 1e-300), f / np.where(mag > 0, mag, 1), 0)
        return np.fft.irfft(white, len(x))
    # coefficient of variation: divide by sigma / |mu|
    s, m = x.std(), abs(x.mean())
    if s <= 0:
        return degenerate()
    return x * (m / s)


def format_feature_csv(vectors, labels=None, ids=None):
    """CSV with one row per segment: id, the named features, label."""
    if not vectors:
        raise ValueError("no feature vectors")
    names = vectors[0].names
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id"] + list(names) + ["label"])
    for i, v in enumerate(vectors):
        if v.names != names:
            raise ValueError("feature vectors have different layouts")
        lab = "" if labels is None else labels[i]
        w.writerow([ids[i] if ids else i] + [repr(float(a)) for a in v.values] + [lab])
    return buf.getvalue()


def read_feature_csv(path):
    """Returns (ids, names, X, labels)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    names = header[1:-1]
    ids = [r[0] for r in rows[1:]]
    X = np.array([[float(v) for v in r[1:-1]] for r in rows[1:]])
    labels = [r[-1] for r in rows[1:]]
    return ids, names, X, labels
