"""RBF support vector classification and epsilon-regression.

Both problems are solved as the generic dual

    min 1/2 a'Qa + p'a   s.t.  y'a = const,  0 <= a_i <= C_i

by sequential minimal optimisation with second-order working-set
selection and no shrinking, so training is deterministic for a given row
order. Features are z-scored with training statistics that travel with
the model.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ModelError, ParameterError

MODEL_VERSION = 1
KKT_TOL = 1e-3
TAU = 1e-12

DEFAULT_C = 10.0
DEFAULT_EPSILON = 0.1
C_GRID = (0.1, 1.0, 10.0, 100.0)
GAMMA_GRID = (1 / 1260, 1 / 126, 1 / 12.6)

LABELS = {"authentic": 0, "real": 0, "fake": 1}


def encode_labels(y):
    """Map {0,1} or {"authentic","fake"} labels to an int array of 0/1."""
    out = []
    for v in y:
        if isinstance(v, str):
            if v not in LABELS:
                raise ParameterError(f"unknown label {v!r}")
            out.append(LABELS[v])
        else:
            if v not in (0, 1):
                raise ParameterError(f"labels must be 0/1, got {v!r}")
            out.append(int(v))
    return np.array(out, dtype=int)


# --- standardisation ---------------------------------------------------------------

@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X):
        X = np.asarray(X, dtype=np.float64)
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        return cls(mean, np.where(std > 0, std, 1.0))

    def transform(self, X):
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale


def rbf_kernel(A, B, gamma):
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    sq = (A ** 2).sum(1)[:, None] + (B ** 2).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


# --- the dual solver -----------------------------------------------------------------

@dataclass
class DualSolution:
    alpha: np.ndarray
    rho: float
    kkt_residual: float
    n_iter: int


def _up_low(alpha, y, C):
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    return up, low


def kkt_residual(Q, p, y, C, alpha):
    """max over I_up of -y*grad minus min over I_low of -y*grad (0 at optimum)."""
    grad = Q @ alpha + p
    up, low = _up_low(alpha, y, C)
    if not up.any() or not low.any():
        return 0.0
    v = -y * grad
    return float(max(v[up].max() - v[low].min(), 0.0))


def _rho(alpha, y, C, grad):
    yg = y * grad
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        return float(yg[free].mean())
    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = yg[ub_mask].min() if ub_mask.any() else np.inf
    lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
    if np.isinf(ub) or np.isinf(lb):
        return float(ub if np.isfinite(ub) else lb)
    return float((ub + lb) / 2)


def solve_dual(Q, p, y, C, eps=KKT_TOL, max_iter=None):
    """SMO on the generic dual; ``y`` in {-1,+1}, ``C`` per variable."""
    n = len(p)
    y = np.asarray(y, dtype=np.float64)
    C = np.broadcast_to(np.asarray(C, dtype=np.float64), (n,)).copy()
    alpha = np.zeros(n)
    grad = np.asarray(p, dtype=np.float64).copy()
    diag = np.diag(Q).copy()
    max_iter = max_iter or max(10_000_000, 100 * n)
    it = 0
    while it < max_iter:
        up, low = _up_low(alpha, y, C)
        v = -y * grad
        if not up.any() or not low.any():
            break
        vu = np.where(up, v, -np.inf)
        i = int(np.argmax(vu))
        m = vu[i]
        M = np.where(low, v, np.inf).min()
        if m - M < eps:
            break
        # second-order choice of j among I_low with -y_j g_j < m
        cand = low & (v < m)
        b = m - v
        a = diag[i] + diag - 2.0 * y[i] * y * Q[i]
        a = np.where(a > 0, a, TAU)
        gain = np.where(cand, -(b * b) / a, np.inf)
        j = int(np.argmin(gain))
        old_i, old_j = alpha[i], alpha[j]
        Ci, Cj = C[i], C[j]
        if y[i] != y[j]:
            quad = diag[i] + diag[j] + 2.0 * Q[i, j]
            quad = quad if quad > 0 else TAU
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > Ci - Cj:
                if alpha[i] > Ci:
                    alpha[i] = Ci
                    alpha[j] = Ci - diff
            elif alpha[j] > Cj:
                alpha[j] = Cj
                alpha[i] = Cj + diff
        else:
            quad = diag[i] + diag[j] - 2.0 * Q[i, j]
            quad = quad if quad > 0 else TAU
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > Ci:
                if alpha[i] > Ci:
                    alpha[i] = Ci
                    alpha[j] = total - Ci
            elif alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = total
            if total > Cj:
                if alpha[j] > Cj:
                    alpha[j] = Cj
                    alpha[i] = total - Cj
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = total
        grad += Q[:, i] * (alpha[i] - old_i) + Q[:, j] * (alpha[j] - old_j)
        it += 1
    else:
        warnings.warn(f"SMO stopped at max_iter={max_iter}", RuntimeWarning, stacklevel=2)
    resid = kkt_residual(Q, p, y, C, alpha)
    if resid > eps + 1e-9:
        raise ModelError(f"SMO did not converge: KKT residual {resid:.3g} > {eps:g}")
    return DualSolution(alpha, _rho(alpha, y, C, grad), resid, it)


# --- models ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SvmModel:
    support_vectors: np.ndarray   # standardised feature space
    dual_coef: np.ndarray         # y_i * alpha_i (classify) or alpha_i - alpha_i* (regress)
    bias: float
    gamma: float
    C: float
    mode: str                     # "classify" or "regress"
    mean: np.ndarray
    scale: np.ndarray
    epsilon: float = 0.0
    c_max: float = None
    kkt_residual: float = 0.0
    n_iter: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.gamma <= 0:
            raise ModelError("gamma must be positive")
        if self.mode not in ("classify", "regress"):
            raise ModelError(f"unknown mode {self.mode!r}")
        if len(self.dual_coef) != len(self.support_vectors):
            raise ModelError("one dual coefficient per support vector required")
        bound = self.c_max if self.c_max is not None else self.C
        if np.any(np.abs(self.dual_coef) > bound * (1 + 1e-12)):
            raise ModelError("dual coefficient exceeds its box constraint")

    @property
    def n_features(self):
        return len(self.mean)

    def decision_function(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ModelError(f"expected {self.n_features} features, got {X.shape[1]}")
        Z = (X - self.mean) / self.scale
        if len(self.support_vectors) == 0:
            return np.full(len(Z), self.bias)
        return rbf_kernel(Z, self.support_vectors, self.gamma) @ self.dual_coef + self.bias

    def to_dict(self):
        return {
            "version": MODEL_VERSION, "kernel": "rbf", "mode": self.mode,
            "gamma": self.gamma, "C": self.C, "epsilon": self.epsilon, "c_max": self.c_max,
            "bias": self.bias, "mean": self.mean.tolist(), "scale": self.scale.tolist(),
            "support_vectors": self.support_vectors.tolist(), "dual_coef": self.dual_coef.tolist(),
            "kkt_residual": self.kkt_residual, "n_iter": self.n_iter, "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("version") != MODEL_VERSION or d.get("kernel") != "rbf":
            raise ModelError(f"unsupported model file (version {d.get('version')})")
        nf = len(d["mean"])
        return cls(np.array(d["support_vectors"], dtype=float).reshape(-1, nf),
                   np.array(d["dual_coef"], dtype=float), d["bias"], d["gamma"], d["C"], d["mode"],
                   np.array(d["mean"], dtype=float), np.array(d["scale"], dtype=float),
                   d["epsilon"], d["c_max"], d["kkt_residual"], d["n_iter"], d.get("meta", {}))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class SegmentProbability:
    p_fake: float
    segment_index: int

    def __post_init__(self):
        if not 0.0 <= self.p_fake <= 1.0:
            raise ValueError("p_fake must lie in [0, 1]")


def _prepare(X, y):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise ParameterError("X must be a non-empty 2-D array")
    if not np.isfinite(X).all():
        raise ParameterError("X contains non-finite values")
    y = encode_labels(y)
    if len(y) != len(X):
        raise ParameterError("X and y differ in length")
    return X, y


def class_weights(y):
    """Per-class factors n / (2 n_k) that balance the two classes."""
    n = len(y)
    return {k: n / (2.0 * np.count_nonzero(y == k)) for k in (0, 1)}


def _gamma(gamma, X):
    g = 1.0 / X.shape[1] if gamma is None else float(gamma)
    if g <= 0:
        raise ParameterError("gamma must be positive")
    return g


def train_svc(X, y, C=DEFAULT_C, gamma=None, balanced=False, eps=KKT_TOL):
    """Binary RBF SVC; label 1 = fake. ``gamma`` defaults to 1/n_features."""
    X, y = _prepare(X, y)
    if len(np.unique(y)) < 2:
        raise ModelError("training data contains a single class")
    if C <= 0:
        raise ParameterError("C must be positive")
    gamma = _gamma(gamma, X)
    std = Standardizer.fit(X)
    Z = std.transform(X)
    ys = np.where(y == 1, 1.0, -1.0)
    w = class_weights(y) if balanced else {0: 1.0, 1: 1.0}
    Cvec = C * np.array([w[k] for k in y])
    K = rbf_kernel(Z, Z, gamma)
    sol = solve_dual(ys[:, None] * ys[None, :] * K, -np.ones(len(y)), ys, Cvec, eps)
    sv = sol.alpha > 0
    return SvmModel(Z[sv], ys[sv] * sol.alpha[sv], -sol.rho, gamma, float(C), "classify",
                    std.mean, std.scale, 0.0, float(Cvec.max()), sol.kkt_residual, sol.n_iter,
                    {"balanced": balanced})


def train_svr(X, y, C=DEFAULT_C, gamma=None, epsilon=DEFAULT_EPSILON, eps=KKT_TOL):
    """Epsilon-SVR on 0/1 targets. ``meta['tau']`` stores the mean clamped
    prediction over the training rows (the video-vote threshold)."""
    X, y = _prepare(X, y)
    if len(np.unique(y)) < 2:
        raise ModelError("training data contains a single class")
    return train_svr_targets(X, y.astype(float), C, gamma, epsilon, eps)


def train_svr_targets(X, z, C=DEFAULT_C, gamma=None, epsilon=DEFAULT_EPSILON, eps=KKT_TOL):
    """Epsilon-SVR on arbitrary real targets ``z`` (no class check)."""
    X = np.asarray(X, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(z) or not np.isfinite(z).all():
        raise ParameterError("need a 2-D X and one finite target per row")
    if C <= 0 or epsilon < 0:
        raise ParameterError("need C > 0 and epsilon >= 0")
    gamma = _gamma(gamma, X)
    std = Standardizer.fit(X)
    Z = std.transform(X)
    n = len(z)
    K = rbf_kernel(Z, Z, gamma)
    ys = np.concatenate([np.ones(n), -np.ones(n)])
    Q = ys[:, None] * ys[None, :] * np.block([[K, K], [K, K]])
    p = np.concatenate([epsilon - z, epsilon + z])
    sol = solve_dual(Q, p, ys, C, eps)
    beta = sol.alpha[:n] - sol.alpha[n:]
    sv = beta != 0
    model = SvmModel(Z[sv], beta[sv], -sol.rho, gamma, float(C), "regress", std.mean, std.scale,
                     float(epsilon), float(C), sol.kkt_residual, sol.n_iter)
    tau = float(np.clip(model.decision_function(X), 0, 1).mean())
    return SvmModel(model.support_vectors, model.dual_coef, model.bias, gamma, float(C), "regress",
                    std.mean, std.scale, float(epsilon), float(C), sol.kkt_residual, sol.n_iter,
                    {"tau": tau})


def predict(model: SvmModel, X):
    """Labels (0/1, 1 = fake, ties at 0 go to fake) for a classifier,
    clamped fake probabilities for a regressor."""
    f = model.decision_function(X)
    if model.mode == "classify":
        return (f >= 0).astype(int)
    return np.clip(f, 0.0, 1.0)


def segment_probabilities(model: SvmModel, X):
    if model.mode != "regress":
        raise ModelError("segment probabilities need a regression model")
    return [SegmentProbability(float(p), k) for k, p in enumerate(predict(model, X))]


# --- hyper-parameter search ------------------------------------------------------------------

def stratified_folds(y, k, seed=0):
    """Fold index per row; each class is shuffled by ``seed`` and dealt round robin."""
    y = np.asarray(y)
    if k < 2:
        raise ParameterError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    folds = np.empty(len(y), dtype=int)
    offset = 0
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        folds[idx] = (np.arange(len(idx)) + offset) % k
        offset += len(idx)
    return folds


@dataclass
class GridResult:
    best_C: float
    best_gamma: float
    best_accuracy: float
    fold_accuracies: dict   # (C, gamma) -> list of per-fold accuracies

    def mean_accuracies(self):
        return {key: float(np.mean(v)) for key, v in self.fold_accuracies.items()}


def grid_search(X, y, C_grid=C_GRID, gamma_grid=GAMMA_GRID, k_folds=5, seed=0, mode="classify",
                epsilon=DEFAULT_EPSILON):
    """Stratified k-fold search; ties go to the first cell in grid order."""
    X, y = _prepare(X, y)
    folds = stratified_folds(y, k_folds, seed)
    table = {}
    best = None
    for C in C_grid:
        for g in gamma_grid:
            accs = []
            for f in range(k_folds):
                tr, te = folds != f, folds == f
                if not te.any():
                    continue
                if mode == "classify":
                    pred = predict(train_svc(X[tr], y[tr], C, g), X[te])
                else:
                    pred = (predict(train_svr(X[tr], y[tr], C, g, epsilon), X[te]) >= 0.5).astype(int)
                accs.append(float(np.mean(pred == y[te])))
            table[(C, g)] = accs
            score = float(np.mean(accs))
            if best is None or score > best[2]:
                best = (C, g, score)
    return GridResult(best[0], best[1], best[2], table)
