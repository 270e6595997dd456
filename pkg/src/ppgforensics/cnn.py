"""Small convolutional classifier for PPG maps, in float64 numpy.

conv3x3(8) -> pool -> conv3x3(16) -> pool -> conv3x3(32) -> pool
-> dense(128, ReLU) -> dropout -> dense(1, sigmoid)

Convolutions are stride 1 with zero padding; pooling is 2x2 max
(odd trailing rows/columns are dropped). Training uses mini-batch
gradient descent with momentum on binary cross-entropy.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ModelError, ParameterError

MODEL_VERSION = 1
FILTERS = (8, 16, 32)
DENSE = 128
DROPOUT = 0.5
LR = 1e-3
MOMENTUM = 0.9
BATCH = 16
PARAM_ORDER = ("W1", "b1", "W2", "b2", "W3", "b3", "W4", "b4", "W5", "b5")


@dataclass
class CnnConfig:
    filters: tuple = FILTERS
    dense: int = DENSE
    dropout: float = DROPOUT
    lr: float = LR
    momentum: float = MOMENTUM
    batch: int = BATCH

    def to_dict(self):
        return {"filters": list(self.filters), "dense": self.dense, "dropout": self.dropout,
                "lr": self.lr, "momentum": self.momentum, "batch": self.batch}


@dataclass
class CnnModel:
    params: dict
    input_shape: tuple
    config: CnnConfig = field(default_factory=CnnConfig)
    seed: int = 0

    def __post_init__(self):
        self.input_shape = tuple(int(v) for v in self.input_shape)
        expect = param_shapes(self.input_shape, self.config)
        for k in PARAM_ORDER:
            if self.params[k].shape != expect[k]:
                raise ModelError(f"{k} has shape {self.params[k].shape}, expected {expect[k]}")
            if not np.isfinite(self.params[k]).all():
                raise ModelError(f"{k} contains non-finite weights")

    def to_dict(self):
        return {"version": MODEL_VERSION, "input_shape": list(self.input_shape), "seed": self.seed,
                "config": self.config.to_dict(),
                "params": {k: {"shape": list(self.params[k].shape), "data": self.params[k].ravel().tolist()}
                           for k in PARAM_ORDER}}

    @classmethod
    def from_dict(cls, d):
        if d.get("version") != MODEL_VERSION:
            raise ModelError(f"unsupported CNN checkpoint version {d.get('version')}")
        cfg = d["config"]
        config = CnnConfig(tuple(cfg["filters"]), cfg["dense"], cfg["dropout"], cfg["lr"],
                           cfg["momentum"], cfg["batch"])
        params = {k: np.array(v["data"], dtype=np.float64).reshape(v["shape"]) for k, v in d["params"].items()}
        return cls(params, tuple(d["input_shape"]), config, d["seed"])

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def _pooled(h, w, times=3):
    for _ in range(times):
        h, w = h // 2, w // 2
    return h, w


def param_shapes(input_shape, config=CnnConfig()):
    h, w = input_shape
    ph, pw = _pooled(h, w)
    if ph < 1 or pw < 1:
        raise ParameterError(f"input {input_shape} is too small for three 2x2 poolings")
    f1, f2, f3 = config.filters
    return {"W1": (3, 3, 1, f1), "b1": (f1,), "W2": (3, 3, f1, f2), "b2": (f2,),
            "W3": (3, 3, f2, f3), "b3": (f3,), "W4": (f3 * ph * pw, config.dense), "b4": (config.dense,),
            "W5": (config.dense, 1), "b5": (1,)}


def init_model(input_shape, seed=0, config=CnnConfig()):
    """He-normal weights, zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for k, shp in param_shapes(input_shape, config).items():
        if k.startswith("b"):
            params[k] = np.zeros(shp)
        else:
            fan_in = int(np.prod(shp[:-1]))
            params[k] = rng.normal(0.0, np.sqrt(2.0 / fan_in), shp)
    return CnnModel(params, input_shape, config, seed)


# --- layers (NHWC) --------------------------------------------------------------------

def conv_forward(x, W, b):
    """3x3 same convolution (cross-correlation). x: (N,H,W,C), W: (3,3,C,F)."""
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    cols = sliding_window_view(xp, (3, 3), axis=(1, 2))        # (N,H,W,C,3,3)
    out = np.einsum("nhwcij,ijcf->nhwf", cols, W, optimize=True) + b
    return out, xp


def conv_backward(dout, xp, W):
    cols = sliding_window_view(xp, (3, 3), axis=(1, 2))
    dW = np.einsum("nhwcij,nhwf->ijcf", cols, dout, optimize=True)
    db = dout.sum(axis=(0, 1, 2))
    dxp = np.zeros_like(xp)
    H, Wd = dout.shape[1:3]
    for i in range(3):
        for j in range(3):
            dxp[:, i:i + H, j:j + Wd, :] += dout @ W[i, j].T
    return dxp[:, 1:-1, 1:-1, :], dW, db


def pool_forward(x):
    n, h, w, c = x.shape
    h2, w2 = h // 2, w // 2
    xc = x[:, :2 * h2, :2 * w2, :].reshape(n, h2, 2, w2, 2, c)
    xr = xc.transpose(0, 1, 3, 5, 2, 4).reshape(n, h2, w2, c, 4)
    arg = xr.argmax(axis=-1)
    out = np.take_along_axis(xr, arg[..., None], axis=-1)[..., 0]
    return out, (x.shape, arg)


def pool_backward(dout, cache):
    shape, arg = cache
    n, h, w, c = shape
    h2, w2 = h // 2, w // 2
    dr = np.zeros((n, h2, w2, c, 4))
    np.put_along_axis(dr, arg[..., None], dout[..., None], axis=-1)
    dx = np.zeros(shape)
    dx[:, :2 * h2, :2 * w2, :] = dr.reshape(n, h2, w2, c, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(n, 2 * h2, 2 * w2, c)
    return dx


def _as_batch(maps, input_shape):
    x = np.asarray(maps, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.shape[1:] != tuple(input_shape):
        raise ModelError(f"map shape {x.shape[1:]} does not match model input {tuple(input_shape)}")
    return x[..., None] / 255.0


def _forward(params, x, mask=None):
    """Logits and cache; ``mask`` is the (already scaled) dropout mask or None."""
    cache = {}
    h = x
    for k in (1, 2, 3):
        z, xp = conv_forward(h, params[f"W{k}"], params[f"b{k}"])
        a = np.maximum(z, 0.0)
        p, pc = pool_forward(a)
        cache[k] = (xp, z, pc)
        h = p
    flat = h.reshape(len(h), -1)
    z4 = flat @ params["W4"] + params["b4"]
    a4 = np.maximum(z4, 0.0)
    d4 = a4 * mask if mask is not None else a4
    logits = (d4 @ params["W5"] + params["b5"])[:, 0]
    cache["dense"] = (h.shape, flat, z4, d4, mask)
    return logits, cache


def _backward(params, cache, dlogits):
    grads = {}
    hshape, flat, z4, d4, mask = cache["dense"]
    dl = dlogits[:, None]
    grads["W5"] = d4.T @ dl
    grads["b5"] = dl.sum(axis=0)
    dd4 = dl @ params["W5"].T
    da4 = dd4 * mask if mask is not None else dd4
    dz4 = da4 * (z4 > 0)
    grads["W4"] = flat.T @ dz4
    grads["b4"] = dz4.sum(axis=0)
    dh = (dz4 @ params["W4"].T).reshape(hshape)
    for k in (3, 2, 1):
        xp, z, pc = cache[k]
        da = pool_backward(dh, pc)
        dz = da * (z > 0)
        dh, grads[f"W{k}"], grads[f"b{k}"] = conv_backward(dz, xp, params[f"W{k}"])
    return grads


def _sigmoid(z):
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def bce_with_logits(z, y):
    """Mean binary cross-entropy computed from logits."""
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def cnn_forward(model: CnnModel, maps):
    """p_fake in (0, 1) per map (inference: no dropout)."""
    logits, _ = _forward(model.params, _as_batch(maps, model.input_shape))
    return _sigmoid(logits)


def loss_and_grads(params, x, y, mask=None):
    logits, cache = _forward(params, x, mask)
    dlogits = (_sigmoid(logits) - y) / len(y)
    return bce_with_logits(logits, y), _backward(params, cache, dlogits)


@dataclass
class TrainResult:
    model: CnnModel
    losses: list


def cnn_train(maps, labels, epochs=50, lr=None, batch=None, seed=0, config=CnnConfig(), model=None):
    """Momentum mini-batch training; returns the model and per-epoch mean loss.

    The shuffle order and dropout masks come from ``seed``, so identical
    inputs and seed give bit-identical weights.
    """
    y = np.asarray(labels, dtype=np.float64)
    maps = np.asarray(maps)
    if maps.ndim != 3 or len(maps) != len(y) or len(y) == 0:
        raise ParameterError("need a (n, omega, width) stack of maps and one label each")
    if len(np.unique(y)) < 2:
        warnings.warn("training set has a single class", RuntimeWarning, stacklevel=2)
    lr = config.lr if lr is None else lr
    batch = config.batch if batch is None else batch
    model = model or init_model(maps.shape[1:], seed, config)
    params = {k: v.copy() for k, v in model.params.items()}
    vel = {k: np.zeros_like(v) for k, v in params.items()}
    rng = np.random.default_rng(seed + 1)
    x_all = _as_batch(maps, model.input_shape)
    keep = 1.0 - config.dropout
    losses = []
    for _ in range(epochs):
        order = rng.permutation(len(y))
        total = 0.0
        for s in range(0, len(y), batch):
            idx = order[s:s + batch]
            mask = None
            if config.dropout > 0:
                mask = (rng.random((len(idx), config.dense)) < keep) / keep
            loss, grads = loss_and_grads(params, x_all[idx], y[idx], mask)
            total += loss * len(idx)
            for k in PARAM_ORDER:
                vel[k] = config.momentum * vel[k] - lr * grads[k]
                params[k] += vel[k]
        losses.append(total / len(y))
    return TrainResult(CnnModel(params, model.input_shape, config, seed), losses)


def cnn_gradcheck(model: CnnModel, ppg_map, label, n_samples=100, h=1e-5, seed=0):
    """Max relative error between backprop and central differences over
    ``n_samples`` randomly chosen weights (dropout off)."""
    x = _as_batch(ppg_map, model.input_shape)
    y = np.atleast_1d(np.asarray(label, dtype=np.float64))
    params = {k: v.copy() for k, v in model.params.items()}
    _, grads = loss_and_grads(params, x, y)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        k = PARAM_ORDER[rng.integers(len(PARAM_ORDER))]
        i = rng.integers(params[k].size)
        flat = params[k].reshape(-1)
        old = flat[i]
        flat[i] = old + h
        lp = loss_and_grads(params, x, y)[0]
        flat[i] = old - h
        lm = loss_and_grads(params, x, y)[0]
        flat[i] = old
        num = (lp - lm) / (2 * h)
        ana = grads[k].reshape(-1)[i]
        denom = max(abs(num), abs(ana), 1e-8)
        worst = max(worst, abs(num - ana) / denom)
    return worst
