"""Image distortions used in the robustness study: Gaussian blur and median."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..errors import ParameterError

ALLOWED_KERNELS = (3, 5, 7, 9, 11)


def _check_kernel(k):
    if int(k) != k or k % 2 == 0:
        raise ParameterError(f"kernel size must be odd, got {k}")
    if k not in ALLOWED_KERNELS:
        raise ParameterError(f"kernel size must be one of {ALLOWED_KERNELS}, got {k}")


def gaussian_kernel(k, sigma=None):
    """Normalised 1-D Gaussian taps. Default sigma follows the common
    ``0.3 * ((k - 1) / 2 - 1) + 0.8`` rule for a k-tap kernel."""
    if sigma is None:
        sigma = 0.3 * ((k - 1) * 0.5 - 1) + 0.8
    if sigma <= 0:
        raise ParameterError("sigma must be positive")
    x = np.arange(k) - (k - 1) / 2
    w = np.exp(-0.5 * (x / sigma) ** 2)
    return w / w.sum()


def _restore_dtype(out, like):
    if np.issubdtype(like.dtype, np.integer):
        info = np.iinfo(like.dtype)
        return np.clip(np.rint(out), info.min, info.max).astype(like.dtype)
    return out.astype(like.dtype, copy=False)


def gaussian_blur(frame, kernel, sigma=None):
    """Separable k x k Gaussian blur with clamp-to-edge borders."""
    _check_kernel(kernel)
    frame = np.asarray(frame)
    taps = gaussian_kernel(kernel, sigma)
    out = ndimage.convolve1d(frame.astype(np.float64), taps, axis=0, mode="nearest")
    out = ndimage.convolve1d(out, taps, axis=1, mode="nearest")
    return _restore_dtype(out, frame)


def median_filter(frame, kernel):
    """k x k median per channel, clamp-to-edge borders."""
    _check_kernel(kernel)
    frame = np.asarray(frame)
    size = (kernel, kernel) + (1,) * (frame.ndim - 2)
    return ndimage.median_filter(frame, size=size, mode="nearest")


def distort(frames, op, kernel, sigma=None):
    """Apply ``op`` ('gaussian' or 'median') to every frame of a FrameSequence."""
    if op == "gaussian":
        return frames.map(lambda f: gaussian_blur(f, kernel, sigma))
    if op == "median":
        return frames.map(lambda f: median_filter(f, kernel))
    raise ParameterError(f"unknown distortion {op!r}")
