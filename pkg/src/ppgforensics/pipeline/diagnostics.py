"""Feature-space diagnostics: PCA projection and per-feature Fisher ratio."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError


@dataclass
class PcaResult:
    projected: np.ndarray
    components: np.ndarray        # (k, d), orthonormal rows
    explained_variance_ratio: np.ndarray
    mean: np.ndarray

    def reconstruct(self):
        return self.projected @ self.components + self.mean


def pca_project(X, k):
    """Project onto the top-k covariance eigenvectors. Each component's
    sign is fixed so its largest-magnitude entry is positive."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) < 2:
        raise ParameterError("need a 2-D array with at least two rows")
    d = X.shape[1]
    if not 1 <= k <= d:
        raise ParameterError(f"k must lie in [1, {d}]")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (len(X) - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals, vecs = np.clip(vals[order], 0, None), vecs[:, order]
    flip = np.sign(vecs[np.abs(vecs).argmax(axis=0), np.arange(d)])
    vecs = vecs * np.where(flip == 0, 1, flip)
    comps = vecs[:, :k].T
    total = vals.sum()
    ratio = vals[:k] / total if total > 0 else np.zeros(k)
    return PcaResult(Xc @ comps.T, comps, ratio, mean)


@dataclass
class FisherResult:
    ratios: np.ndarray            # NaN where excluded
    excluded: list                # zero-variance feature indices

    def ranking(self):
        """Indices of usable features, best first."""
        ok = np.flatnonzero(~np.isnan(self.ratios))
        return ok[np.argsort(-self.ratios[ok], kind="stable")].tolist()


def fisher_ratio(X, y, rel_floor=1e-12):
    """(mu1 - mu0)^2 / (var1 + var0) per feature.

    A feature is excluded (NaN, listed) when var1 + var0 is at most
    ``rel_floor`` times its mean square, i.e. when it is constant up to
    rounding at its own scale.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    classes = np.unique(y)
    if len(classes) != 2:
        raise ParameterError("Fisher ratio needs exactly two classes")
    a, b = X[y == classes[0]], X[y == classes[1]]
    denom = a.var(axis=0) + b.var(axis=0)
    bad = denom <= rel_floor * (X ** 2).mean(axis=0)
    excluded = np.flatnonzero(bad)
    ratios = np.full(X.shape[1], np.nan)
    ok = ~bad
    ratios[ok] = (a.mean(axis=0)[ok] - b.mean(axis=0)[ok]) ** 2 / denom[ok]
    return FisherResult(ratios, excluded.tolist())
