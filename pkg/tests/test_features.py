import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import sine
from ppgforensics.errors import DegenerateInputWarning, ParameterError, SignalError
from ppgforensics.features import (F2_STATS, F4_STATS, NORMALIZATIONS, FeatureSetId, FeatureVector,
                                   assemble_126, decode_name, f1_cross_psd_stats, f2_stats,
                                   f3_spectral_autocorr_feats, f4_hrv_feats, f5_wavelet_feats,
                                   f6_lyapunov_feats, f7_modulation_feats, f8_band_powers,
                                   f9_psd_shape, feature_names_126, feature_set, feature_value,
                                   find_prominent_peaks, format_feature_csv,
                                   normalized_centered_amplitude, normalize, read_feature_csv,
                                   zero_crossings)
from ppgforensics.pipeline.synth import SynthParams, synth_pair
from ppgforensics.rppg import SignalBundle, build_bundle
from ppgforensics.transforms import lyapunov_exponents, psd, wavelet

FPS = 30.0


def _bundle(seed=0, n=128, fake=False):
    a, f = synth_pair(seed, SynthParams(n_frames=n, n_cells=0))
    return build_bundle(f if fake else a)


def naive_crossings(x):
    xc = x - x.mean()
    count = 0
    for i in range(1, len(xc)):
        if (xc[i - 1] < 0) != (xc[i] < 0):
            count += 1
    return count


def naive_peaks(x, min_prom):
    out = []
    for i in range(1, len(x) - 1):
        if not (x[i] > x[i - 1] and x[i] > x[i + 1]):
            continue
        j = i - 1
        left = x[i]
        while j >= 0 and x[j] <= x[i]:
            left = min(left, x[j])
            j -= 1
        k = i + 1
        right = x[i]
        while k < len(x) and x[k] <= x[i]:
            right = min(right, x[k])
            k += 1
        prom = x[i] - max(left, right)
        if prom >= min_prom:
            out.append((i, prom))
    return out


# F1

def test_f1_self_equals_psd_stats(rng):
    x = rng.normal(size=200)
    p = psd(x, FPS).power
    assert np.allclose(f1_cross_psd_stats(x, x, FPS), [p.mean(), p.max()])


def test_f1_orthogonal_sines():
    x, y = sine(2.0, 600), sine(5.0, 600)
    self_case = f1_cross_psd_stats(x, x, FPS)
    assert np.all(f1_cross_psd_stats(x, y, FPS) < 0.01 * self_case)


def test_f1_zero_pair_flagged():
    with pytest.warns(DegenerateInputWarning):
        assert np.all(f1_cross_psd_stats(np.zeros(64), np.zeros(64), FPS) == 0)


def test_f1_scales_quadratically(rng):
    x, y = rng.normal(size=128), rng.normal(size=128)
    assert np.allclose(f1_cross_psd_stats(2 * x, 2 * y, FPS), 4 * f1_cross_psd_stats(x, y, FPS))


# F2

def test_f2_constant():
    v = dict(zip(F2_STATS, f2_stats(np.full(64, 3.0))))
    for k in ("rms_diff", "std", "mean_abs_diff", "neg_diff_ratio", "zcr", "max_deriv", "min_deriv",
              "mean_deriv"):
        assert v[k] == 0


def test_f2_sine_zero_crossings():
    k, n = 5, 300
    x = np.sin(2 * np.pi * k * (np.arange(n) + 0.5) / n)
    v = dict(zip(F2_STATS, f2_stats(x)))
    assert v["zcr"] == pytest.approx((2 * k - 1) / n, abs=1e-12) or v["zcr"] == pytest.approx(2 * k / n)
    assert zero_crossings(x) == naive_crossings(x)


def test_f2_ramp_no_negative_diffs():
    assert dict(zip(F2_STATS, f2_stats(np.arange(50.0))))["neg_diff_ratio"] == 0


def test_f2_too_short():
    with pytest.raises(SignalError):
        f2_stats(np.zeros(2))


@given(st.integers(0, 10_000))
def test_f2_crossings_and_peaks_match_scan(seed):
    x = np.cumsum(np.random.default_rng(seed).normal(size=120))
    assert zero_crossings(x) == naive_crossings(x)
    peaks, prom = find_prominent_peaks(x)
    ref = naive_peaks(x, 0.05 * np.ptp(x))
    assert list(peaks) == [i for i, _ in ref]
    assert np.allclose(prom, [p for _, p in ref])
    v = dict(zip(F2_STATS, f2_stats(x)))
    assert v["zcr"] == naive_crossings(x) / len(x)
    assert v["mean_prominence"] == pytest.approx(np.mean([p for _, p in ref]) if ref else 0.0)


@given(st.integers(0, 1000), st.floats(0.1, 50))
def test_f2_ratio_features_scale_invariant(seed, a):
    x = np.random.default_rng(seed).normal(size=100)
    v1, v2 = f2_stats(x), f2_stats(a * x)
    for k in ("neg_diff_ratio", "zcr", "mean_width", "spectral_centroid"):
        i = F2_STATS.index(k)
        assert v2[i] == pytest.approx(v1[i], rel=1e-9, abs=1e-12)
    assert v2[F2_STATS.index("std")] == pytest.approx(a * v1[F2_STATS.index("std")])


# F3

def test_f3_zero():
    assert np.all(f3_spectral_autocorr_feats(np.zeros(128)) == 0)


def test_f3_sine_has_line():
    assert f3_spectral_autocorr_feats(sine(2.0, 300))[1] >= 1


def test_f3_sine_vs_noise_max_ahat():
    wins = 0
    for seed in range(100):
        r = np.random.default_rng(seed)
        s = sine(r.uniform(1, 4), 128, phase=r.uniform(0, 6)) + 0.1 * r.normal(size=128)
        wins += f3_spectral_autocorr_feats(s)[3] > f3_spectral_autocorr_feats(r.normal(size=128))[3]
    assert wins >= 95


# F4

def test_f4_constant():
    v = f4_hrv_feats(np.full(90, 2.5))
    assert v[0] == 2.5
    assert np.all(v[1:] == 0)


def test_f4_uniform_entropy_six_bits():
    x = np.repeat(np.arange(64.0), 10)
    assert dict(zip(F4_STATS, f4_hrv_feats(x)))["entropy"] == pytest.approx(6.0)


def test_f4_one_hz_window_means():
    v = dict(zip(F4_STATS, f4_hrv_feats(sine(1.0, 300))))
    assert v["std_1s_means"] < 1e-9


def test_f4_too_short():
    with pytest.raises(SignalError):
        f4_hrv_feats(np.zeros(59), 30)


# F5 / F6

def test_f5_constant_and_order():
    x = np.full(64, 1.5)
    c = f5_wavelet_feats(x, 64)
    assert np.all(c[:4] != 0) and np.all(c[4:] == 0)
    r = np.random.default_rng(0).normal(size=128)
    assert np.array_equal(f5_wavelet_feats(r, 65), np.concatenate(wavelet(r, 4))[:65])


def test_f5_padding_flagged():
    with pytest.warns(DegenerateInputWarning):
        c = f5_wavelet_feats(np.ones(32), 65)
    assert len(c) == 65 and np.all(c[32:] == 0)


def test_f6_delegates():
    x = np.random.default_rng(1).normal(size=200)
    assert np.array_equal(f6_lyapunov_feats(x, 7), lyapunov_exponents(x, 7))


# F7

def test_f7_constant_amplitude_sine():
    with pytest.warns(DegenerateInputWarning):
        v = f7_modulation_feats(sine(2.0, 300))
    assert v[0] < 1e-20 and v[4] == 0


def test_f7_am_tone_peak():
    n, fm = 600, 0.5
    t = np.arange(n) / FPS
    x = (1 + 0.5 * np.cos(2 * np.pi * fm * t)) * np.sin(2 * np.pi * 5.0 * t)
    acn = normalized_centered_amplitude(x)
    spec = np.abs(np.fft.fft(acn))[: n // 2]
    assert np.argmax(spec) == int(fm * n / FPS)
    # acn = 0.5 cos(2 pi fm t): |FFT|^2 / n = (0.5 n / 2)^2 / n = n / 16
    assert f7_modulation_feats(x)[0] == pytest.approx(n / 16, rel=0.02)


def test_f7_zero():
    with pytest.warns(DegenerateInputWarning):
        assert np.all(f7_modulation_feats(np.zeros(50)) == 0)


# F8

def test_f8_delta_dominates_for_2hz():
    d, th, al = f8_band_powers(sine(2.0, 300), FPS)
    assert d - max(th, al) >= np.log(100)


def test_f8_alpha_dominates_for_10hz():
    v = f8_band_powers(sine(10.0, 300), FPS)
    assert np.argmax(v) == 2


def test_f8_zero_floor():
    assert np.allclose(f8_band_powers(np.zeros(64), FPS), np.log(1e-12))


# F9

def test_f9_sine_interval_variance():
    assert f9_psd_shape(sine(1.5, 300), FPS)[2] < 1e-6


def test_f9_pink_negative_slope():
    r = np.random.default_rng(0)
    n = 1024
    f = np.fft.rfftfreq(n)
    spec = (r.normal(size=len(f)) + 1j * r.normal(size=len(f))) / np.maximum(f, f[1]) ** 1.0
    x = np.fft.irfft(spec, n)
    assert f9_psd_shape(x, FPS)[1] < 0


def test_f9_white_noise_flat_slope():
    ok = sum(abs(f9_psd_shape(np.random.default_rng(s).normal(size=512), FPS)[1]) < 0.1
             for s in range(100))
    assert ok >= 95


def test_feature_set_dispatch(rng):
    x = rng.normal(size=128)
    assert np.array_equal(feature_set("F8", x), f8_band_powers(x, FPS))
    assert len(feature_set(FeatureSetId.F5, x)) == 65
    with pytest.raises(ParameterError):
        feature_set("F1", x)


# assembly

def test_assemble_length_and_names():
    v = assemble_126(_bundle())
    assert len(v) == 126
    assert v.names == feature_names_126()
    assert all(len(decode_name(n)) == 4 for n in v.names)
    sets = [decode_name(n)[0] for n in v.names]
    assert sets.count("F1") == 6 and sets.count("F3") == 36 and sets.count("F4") == 72
    assert sets.count("Ahat") == 12


def test_assemble_deterministic():
    b = _bundle(3)
    assert assemble_126(b).values.tobytes() == assemble_126(b).values.tobytes()


def test_every_name_recomputes():
    b = _bundle(5, fake=True)
    v = assemble_126(b)
    for name, val in zip(v.names, v.values):
        assert feature_value(b, name) == pytest.approx(val, rel=1e-12, abs=1e-15), name


def test_assemble_zero_bundle_finite():
    z = np.zeros(128)
    v = assemble_126(SignalBundle(z, z, z, z, z, z, fps=30))
    assert np.isfinite(v.values).all() and v.flags


_SWAP = {"G_L": "G_R", "G_R": "G_L", "C_L": "C_R", "C_R": "C_L", "G_M": "G_M", "C_M": "C_M",
         "|C_L-C_M|": "|C_R-C_M|", "|C_R-C_M|": "|C_L-C_M|", "|C_L-C_R|": "|C_L-C_R|"}


def _swapped_name(name, index):
    fset, tr, sig, stat = decode_name(name)
    if "x" in sig:
        a, b = (_SWAP[s] for s in sig.split("x"))
        for cand in (f"{a}x{b}", f"{b}x{a}"):
            full = f"{fset}/{tr}/{cand}/{stat}"
            if full in index:
                return full
    return f"{fset}/{tr}/{_SWAP[sig]}/{stat}"


def test_region_permutation_moves_only_region_blocks():
    b = _bundle(7, fake=True)
    v = assemble_126(b).as_dict()
    w = assemble_126(b.permuted("RML")).as_dict()
    changed = 0
    for name in v:
        assert w[name] == pytest.approx(v[_swapped_name(name, v)], rel=1e-9, abs=1e-15), name
        changed += w[name] != v[name]
    assert changed > 0
    untouched = [n for n in v if "_M/" in n and decode_name(n)[1] in ("L", "A_hat")]
    assert all(w[n] == v[n] for n in untouched)


def test_feature_vector_validation():
    with pytest.raises(ValueError):
        FeatureVector([1, 2], ["a", "a"])
    with pytest.raises(SignalError):
        FeatureVector([np.nan], ["a"])


def test_feature_csv_roundtrip(tmp_path):
    vs = [assemble_126(_bundle(s)) for s in range(2)]
    p = tmp_path / "f.csv"
    p.write_text(format_feature_csv(vs, ["authentic", "fake"], ["a", "b"]))
    ids, names, X, labels = read_feature_csv(p)
    assert ids == ["a", "b"] and labels == ["authentic", "fake"]
    assert names == feature_names_126()
    assert np.array_equal(X, np.stack([v.values for v in vs]))


# normalisation

def test_normalize_none_identity(rng):
    x = rng.normal(size=10)
    assert np.array_equal(normalize(x, "none"), x)


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=50))
def test_normalize_properties(vals):
    x = np.array(vals)
    if np.ptp(x) < 1e-6:
        return
    assert np.linalg.norm(normalize(x, "l2")) == pytest.approx(1.0)
    assert np.max(np.abs(normalize(x, "inf"))) == pytest.approx(1.0)
    m = normalize(x, "feature_scaling")
    assert m.min() == 0 and m.max() == pytest.approx(1.0) and np.all((m >= 0) & (m <= 1))
    z = normalize(x, "standardized_moment")
    assert abs(z.mean()) < 1e-9 and z.std() == pytest.approx(1.0)


def test_normalize_cv_and_whitening(rng):
    x = 5 + rng.normal(size=64)
    cv = x.std() / abs(x.mean())
    assert np.allclose(normalize(x, "coefficient_of_variation"), x / cv)
    w = normalize(rng.normal(size=64), "spectral_whitening")
    mag = np.abs(np.fft.rfft(w))
    assert np.allclose(mag[mag > 1e-9], 1.0)


def test_normalize_degenerate_and_unknown():
    for m in NORMALIZATIONS[1:]:
        if m == "spectral_whitening":
            continue
        with pytest.warns(DegenerateInputWarning):
            assert np.all(normalize(np.zeros(5), m) == 0)
    with pytest.raises(ParameterError):
        normalize(np.ones(3), "bogus")
