"""Signal transformations: autocorrelations, spectra, log scale, DCT,
Haar wavelets and Lyapunov exponents.

Scale behaviour: ``autocorr``, ``spectral_autocorr`` and ``xcorr`` are
normalised and invariant under x -> a*x (a > 0); ``psd`` and
``cross_psd`` scale as a**2; ``dct`` and ``wavelet`` are linear.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.fft
from scipy.spatial.distance import cdist

from .errors import DegenerateInputWarning, SignalError
from .rppg import DEFAULT_CONFIG, welch_cross, welch_quantize


class TransformId(str, enum.Enum):
    A = "A"
    A_HAT = "A_hat"
    PHI = "phi"
    P = "P"
    A_P = "A_p"
    L = "L"
    X_DCT = "X"
    W_WAVELET = "W"
    Y_LYAPUNOV = "Y"


@dataclass
class Spectrum:
    freqs: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.power = np.asarray(self.power, dtype=float)
        if self.freqs.shape != self.power.shape:
            raise ValueError("freqs and power must have equal length")
        if np.any(np.diff(self.freqs) <= 0):
            raise ValueError("freqs must be strictly increasing")
        if np.any(self.power < 0):
            raise ValueError("power must be non-negative")

    def __len__(self):
        return len(self.freqs)

    def band(self, low=None, high=None):
        """Copy restricted to low <= f <= high."""
        keep = np.ones(len(self.freqs), bool)
        if low is not None:
            keep &= self.freqs >= low
        if high is not None:
            keep &= self.freqs <= high
        return Spectrum(self.freqs[keep], self.power[keep])

    def to_csv(self):
        return "freq,power\n" + "".join(f"{f:.9g},{p:.9g}\n" for f, p in zip(self.freqs, self.power))


def _as_signal(x, min_len=1):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or len(x) < min_len:
        raise SignalError(f"expected a 1-D signal of length >= {min_len}")
    if not np.isfinite(x).all():
        raise SignalError("signal contains non-finite values")
    return x


def fourier(x):
    """One-sided DFT (numpy FFT)."""
    return np.fft.rfft(_as_signal(x))


def magnitude_spectrum(x):
    return np.abs(fourier(x))


def autocorr(x):
    """Biased, mean-removed autocorrelation for lags 0..n-1, r[0] = 1.

    An all-zero (or constant) input yields zeros and a warning.
    """
    x = _as_signal(x, 2)
    xc = x - x.mean()
    n = len(xc)
    energy = np.dot(xc, xc)
    if energy <= 1e-300:
        warnings.warn("autocorrelation of a zero/constant signal", DegenerateInputWarning, stacklevel=2)
        return np.zeros(n)
    nfft = scipy.fft.next_fast_len(2 * n)
    f = np.fft.rfft(xc, nfft)
    r = np.fft.irfft(f * np.conj(f), nfft)[:n]
    return r / energy


def spectral_autocorr(x):
    """Autocorrelation of the Hann-windowed magnitude spectrum; lag unit is
    one DFT bin. The window spreads an on-bin tone over neighbouring bins,
    so a line shows up at lag 1 wherever it falls on the frequency grid."""
    x = _as_signal(x, 2)
    return autocorr(np.abs(np.fft.rfft(x * np.hanning(len(x)))))


def xcorr_lags(n):
    return np.arange(-(n - 1), n)


def xcorr(x, y):
    """Normalised cross-correlation for lags -(n-1)..(n-1).

    Entry at lag k is sum_t x[t] * y[t + k] over mean-removed signals,
    divided by sqrt(sum x**2 * sum y**2); a copy of x delayed by k samples
    peaks at lag +k.
    """
    x, y = _as_signal(x, 1), _as_signal(y, 1)
    if len(x) != len(y):
        raise SignalError(f"length mismatch: {len(x)} vs {len(y)}")
    xc, yc = x - x.mean(), y - y.mean()
    denom = np.sqrt(np.dot(xc, xc) * np.dot(yc, yc))
    n = len(x)
    if denom <= 1e-300:
        warnings.warn("cross-correlation with a zero/constant signal", DegenerateInputWarning, stacklevel=2)
        return np.zeros(2 * n - 1)
    nfft = scipy.fft.next_fast_len(2 * n)
    c = np.fft.irfft(np.conj(np.fft.rfft(xc, nfft)) * np.fft.rfft(yc, nfft), nfft)
    c = np.concatenate([c[nfft - (n - 1):], c[:n]])
    return c / denom


def psd(x, fps, cfg=DEFAULT_CONFIG):
    freqs, power = welch_quantize(x, fps, cfg)
    return Spectrum(freqs, power)


def cross_psd(x, y, fps, cfg=DEFAULT_CONFIG):
    """Magnitude of the Welch cross spectral density."""
    freqs, pxy = welch_cross(x, y, fps, cfg)
    return Spectrum(freqs, np.abs(pxy))


def pairwise_cross_psd(signals, fps, cfg=DEFAULT_CONFIG):
    """Cross-PSD magnitudes of every pair (i < j) of a named signal set.

    Returns {"a x b": Spectrum} in pair order (0,1), (0,2), (1,2), ...
    """
    names = list(signals)
    out = {}
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            out[f"{names[i]}x{names[j]}"] = cross_psd(signals[names[i]], signals[names[j]], fps, cfg)
    return out


def log_scale(x):
    """log(1 + |x|), defined for zero and negative samples."""
    return np.log1p(np.abs(np.asarray(x, dtype=np.float64)))


def dct(x):
    """Orthonormal DCT-II."""
    return scipy.fft.dct(_as_signal(x), type=2, norm="ortho")


def idct(c):
    return scipy.fft.idct(_as_signal(c), type=2, norm="ortho")


def wavelet(x, levels=4):
    """Orthogonal Haar decomposition, ``[cA_L, cD_L, ..., cD_1]``.

    Inputs whose length is not a multiple of 2**levels are zero-padded
    (with a warning).
    """
    x = _as_signal(x, 1)
    if levels < 1:
        raise ValueError("levels must be >= 1")
    block = 2 ** levels
    if len(x) % block:
        pad = block - len(x) % block
        warnings.warn(f"wavelet input padded with {pad} zeros", DegenerateInputWarning, stacklevel=2)
        x = np.concatenate([x, np.zeros(pad)])
    details = []
    a = x
    for _ in range(levels):
        even, odd = a[0::2], a[1::2]
        details.append((even - odd) / np.sqrt(2.0))
        a = (even + odd) / np.sqrt(2.0)
    return [a] + details[::-1]


def inverse_wavelet(coeffs):
    a = np.asarray(coeffs[0], dtype=float)
    for d in coeffs[1:]:
        d = np.asarray(d, dtype=float)
        out = np.empty(2 * len(a))
        out[0::2] = (a + d) / np.sqrt(2.0)
        out[1::2] = (a - d) / np.sqrt(2.0)
        a = out
    return a


LYAP_DIM = 5
LYAP_DELAY = 2
LYAP_THEILER = 10


def delay_embed(x, dim=LYAP_DIM, delay=LYAP_DELAY):
    x = _as_signal(x, 1)
    m = len(x) - (dim - 1) * delay
    if m < 1:
        raise SignalError(f"signal of length {len(x)} too short to embed (dim={dim}, delay={delay})")
    return np.stack([x[i * delay:i * delay + m] for i in range(dim)], axis=1)


def divergence_curve(x, horizon, dim=LYAP_DIM, delay=LYAP_DELAY, theiler=LYAP_THEILER):
    """Mean log distance between nearest-neighbour trajectories.

    Returns (curve, valid): ``curve[k]`` averages ln d_j(k) over reference
    points j whose neighbour pair is still inside the embedding after k
    steps; ``valid[k]`` is False when no pair survives. Neighbours closer
    in time than ``theiler`` samples are excluded. Distances are floored
    at 1e-9 of the signal scale so numerically identical neighbours
    (exactly periodic input) count as non-diverging.
    """
    Y = delay_embed(x, dim, delay)
    m = len(Y)
    if m <= theiler + 1:
        raise SignalError(f"embedding of {m} points too short for Theiler window {theiler}")
    scale = np.std(x) * np.sqrt(dim)
    if scale <= 0:
        warnings.warn("Lyapunov estimate of a constant signal", DegenerateInputWarning, stacklevel=3)
        return np.zeros(horizon + 1), np.ones(horizon + 1, bool)
    floor = 1e-9 * scale
    dist = cdist(Y, Y)
    idx = np.arange(m)
    dist[np.abs(idx[:, None] - idx[None, :]) <= theiler] = np.inf
    nn = np.argmin(dist, axis=1)
    curve = np.zeros(horizon + 1)
    valid = np.zeros(horizon + 1, bool)
    for k in range(horizon + 1):
        ok = (idx + k < m) & (nn + k < m)
        if not ok.any():
            continue
        d = np.linalg.norm(Y[idx[ok] + k] - Y[nn[ok] + k], axis=1)
        curve[k] = np.mean(np.log(np.maximum(d, floor)))
        valid[k] = True
    return curve, valid


def largest_lyapunov(x, dt=1.0, fit_steps=1, dim=LYAP_DIM, delay=LYAP_DELAY, theiler=LYAP_THEILER):
    """Largest Lyapunov exponent (Rosenstein): least-squares slope of the
    divergence curve over steps 0..fit_steps, per unit time ``dt``."""
    curve, valid = divergence_curve(x, fit_steps, dim, delay, theiler)
    if not valid.all():
        raise SignalError("signal too short for the Lyapunov fit horizon")
    k = np.arange(fit_steps + 1) * dt
    return float(np.polyfit(k, curve, 1)[0])


def lyapunov_exponents(x, n, dt=1.0, dim=LYAP_DIM, delay=LYAP_DELAY, theiler=LYAP_THEILER):
    """Finite-time divergence exponents at horizons 1..n.

    Entry k-1 is (curve[k] - curve[0]) / (k * dt); the first entry equals
    ``largest_lyapunov`` with its default one-step fit. Horizons that no
    neighbour pair reaches are reported as 0 with a warning.
    """
    curve, valid = divergence_curve(x, n, dim, delay, theiler)
    k = np.arange(1, n + 1)
    out = np.where(valid[1:], (curve[1:] - curve[0]) / (k * dt), 0.0)
    if not valid[1:].all():
        warnings.warn(f"Lyapunov horizons beyond {int(valid[1:].sum())} steps have no trajectory pairs",
                      DegenerateInputWarning, stacklevel=2)
    return out
