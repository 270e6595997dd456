import warnings

import numpy as np
import pytest

from conftest import cnn_overfit_run, ppg_maps
from ppgforensics.cnn import (CnnConfig, CnnModel, cnn_forward, cnn_gradcheck, cnn_train,
                              init_model, loss_and_grads, param_shapes)
from ppgforensics.errors import ModelError, ParameterError


def naive_conv(x, W, b):
    """Direct 3x3 zero-padded cross-correlation of one (H, W, C) image."""
    h, w, c = x.shape
    f = W.shape[3]
    xp = np.zeros((h + 2, w + 2, c))
    xp[1:-1, 1:-1] = x
    out = np.zeros((h, w, f))
    for i in range(h):
        for j in range(w):
            for k in range(f):
                out[i, j, k] = np.sum(xp[i:i + 3, j:j + 3, :] * W[:, :, :, k]) + b[k]
    return out


def naive_pool(x):
    h, w, c = x.shape
    out = np.zeros((h // 2, w // 2, c))
    for i in range(h // 2):
        for j in range(w // 2):
            out[i, j] = x[2 * i:2 * i + 2, 2 * j:2 * j + 2].max(axis=(0, 1))
    return out


def naive_forward(params, img):
    h = img[..., None].astype(float) / 255.0
    for k in (1, 2, 3):
        h = naive_pool(np.maximum(naive_conv(h, params[f"W{k}"], params[f"b{k}"]), 0))
    a4 = np.maximum(h.reshape(-1) @ params["W4"] + params["b4"], 0)
    z = a4 @ params["W5"] + params["b5"]
    return 1 / (1 + np.exp(-z[0]))


def _random_biases(model, seed):
    r = np.random.default_rng(seed)
    for k, v in model.params.items():
        if k.startswith("b"):
            v[...] = r.normal(0, 0.1, v.shape)
    return model


@pytest.mark.parametrize("shape", [(16, 32), (24, 64)])
def test_forward_matches_naive(shape):
    model = _random_biases(init_model(shape, seed=3), 4)
    maps = np.random.default_rng(5).integers(0, 256, (3,) + shape).astype(np.uint8)
    p = cnn_forward(model, maps)
    ref = np.array([naive_forward(model.params, m) for m in maps])
    assert np.max(np.abs(p - ref)) <= 1e-6


def test_forward_range_and_zero_input():
    model = init_model((32, 32), seed=0)
    p = cnn_forward(model, np.random.default_rng(0).integers(0, 256, (5, 32, 32)))
    assert np.all((p > 0) & (p < 1))
    assert cnn_forward(model, np.zeros((1, 32, 32)))[0] == 0.5


def test_forward_shape_mismatch():
    with pytest.raises(ModelError):
        cnn_forward(init_model((32, 32)), np.zeros((1, 32, 64)))


def test_param_shapes_chain():
    s = param_shapes((128, 32))
    assert s["W1"] == (3, 3, 1, 8) and s["W2"] == (3, 3, 8, 16) and s["W3"] == (3, 3, 16, 32)
    assert s["W4"] == (16 * 4 * 32, 128) and s["W5"] == (128, 1)
    assert param_shapes((128, 64))["W4"] == (16 * 8 * 32, 128)


def test_gradcheck_double_precision():
    model = _random_biases(init_model((16, 32), seed=1), 2)
    img = ppg_maps(1, omega=16)[0][1]
    assert cnn_gradcheck(model, img, 1.0, n_samples=100, h=1e-5) < 1e-4


def test_gradcheck_grows_with_large_step():
    model = _random_biases(init_model((16, 32), seed=1), 2)
    img = ppg_maps(1, omega=16)[0][1]
    small = cnn_gradcheck(model, img, 1.0, n_samples=40, h=1e-5)
    large = cnn_gradcheck(model, img, 1.0, n_samples=40, h=1e-1)
    assert large > small


def test_dead_relu_gradient_zero():
    model = init_model((16, 32), seed=2)
    model.params["W1"][..., 0] = -abs(model.params["W1"][..., 0])
    model.params["b1"][0] = -10.0
    x = np.random.default_rng(0).uniform(0, 1, (1, 16, 32, 1))
    _, grads = loss_and_grads(model.params, x, np.array([1.0]))
    assert np.all(grads["W1"][..., 0] == 0) and grads["b1"][0] == 0
    h = 1e-5
    p = model.params
    old = p["b1"][0]
    p["b1"][0] = old + h
    lp = loss_and_grads(p, x, np.array([1.0]))[0]
    p["b1"][0] = old - h
    lm = loss_and_grads(p, x, np.array([1.0]))[0]
    p["b1"][0] = old
    assert abs(lp - lm) / (2 * h) < 1e-12


def test_overfit_eight_maps():
    res = cnn_overfit_run()
    assert len(res.losses) == 500
    assert min(res.losses) < 0.05


def test_loss_decreases_on_average():
    losses = np.array(cnn_overfit_run().losses)
    blocks = losses.reshape(10, 50).mean(axis=1)
    assert blocks[-1] < 0.1 * blocks[0]
    assert np.all(np.diff(blocks) <= 5e-3)


def test_training_bit_reproducible():
    maps, labels = ppg_maps(2, omega=16)
    a = cnn_train(maps, labels, epochs=5, seed=7)
    b = cnn_train(maps, labels, epochs=5, seed=7)
    assert a.losses == b.losses
    assert all(a.model.params[k].tobytes() == b.model.params[k].tobytes() for k in a.model.params)
    c = cnn_train(maps, labels, epochs=5, seed=8)
    assert c.losses != a.losses


def test_single_class_warns():
    maps, _ = ppg_maps(1, omega=16)
    with pytest.warns(RuntimeWarning):
        cnn_train(maps, [1, 1], epochs=1)


def test_bad_training_input():
    with pytest.raises(ParameterError):
        cnn_train(np.zeros((2, 16, 32)), [0])


def test_model_roundtrip(tmp_path):
    m = init_model((16, 32), seed=4, config=CnnConfig(dense=32))
    m.save(tmp_path / "c.json")
    back = CnnModel.load(tmp_path / "c.json")
    x = np.random.default_rng(0).integers(0, 256, (2, 16, 32))
    assert np.array_equal(cnn_forward(back, x), cnn_forward(m, x))
    assert back.config == m.config


def test_model_rejects_bad_weights():
    m = init_model((16, 32))
    bad = dict(m.params)
    bad["W1"] = np.full_like(bad["W1"], np.nan)
    with pytest.raises(ModelError):
        CnnModel(bad, m.input_shape, m.config, 0)
    bad = dict(m.params)
    bad["W2"] = np.zeros((3, 3, 4, 16))
    with pytest.raises(ModelError):
        CnnModel(bad, m.input_shape, m.config, 0)
