import functools
import time

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("ci", max_examples=30, deadline=None)
settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def sine(freq, n, fps=30.0, amp=1.0, phase=0.0):
    t = np.arange(n) / fps
    return amp * np.sin(2 * np.pi * freq * t + phase)


@functools.lru_cache(maxsize=None)
def corpus_accuracies(n_pairs=100, seed0=0):
    """Correct picks per metric on the seeded coherent/decorrelated corpus,
    plus the wall time. The fake member is placed first on odd seeds."""
    from ppgforensics.pairwise import MetricId, pairwise_separate, video_bundles
    from ppgforensics.pipeline.synth import SynthParams, synth_pair

    params = SynthParams(n_cells=0)
    t0 = time.perf_counter()
    correct = {m: 0 for m in MetricId}
    for k in range(n_pairs):
        auth, fake = synth_pair(seed0 + k, params)
        ba, bf = video_bundles(auth), video_bundles(fake)
        swap = k % 2 == 1
        first, second = (bf, ba) if swap else (ba, bf)
        for m in MetricId:
            res = pairwise_separate(first, second, m)
            correct[m] += res.fake == ("a" if swap else "b")
    return correct, time.perf_counter() - t0


def ppg_maps(n_pairs=4, omega=64, kind="temporal", seed0=0):
    """Temporal (or spectral) maps of synthetic authentic/fake pairs."""
    from ppgforensics.ingest.traces_io import cells_from_traces
    from ppgforensics.pipeline.synth import SynthParams, synth_pair
    from ppgforensics.ppgmap import build_ppg_map, build_spectral_map, cell_signals

    maps, labels = [], []
    for s in range(n_pairs):
        a, f = synth_pair(seed0 + s, SynthParams(n_frames=omega))
        for lab, tr in ((0, a), (1, f)):
            sig = cell_signals(cells_from_traces(tr), 30.0)
            m = build_ppg_map(sig) if kind == "temporal" else build_spectral_map(sig, 30.0)
            maps.append(m.grid)
            labels.append(lab)
    return np.stack(maps), np.array(labels)


@functools.lru_cache(maxsize=None)
def cnn_overfit_run(epochs=500, seed=0):
    from ppgforensics.cnn import cnn_train

    maps, labels = ppg_maps()
    return cnn_train(maps, labels, epochs=epochs, seed=seed)


def trained_svr(n_pairs=20, seed0=1000):
    """SVR trained on trace-level synthetic pairs (seeds disjoint from the
    evaluation seeds used elsewhere)."""
    from ppgforensics.pipeline import harness
    from ppgforensics.pipeline.config import PipelineConfig
    from ppgforensics.pipeline.synth import synth_pair

    cfg = PipelineConfig()
    X, y = [], []
    for s in range(n_pairs):
        for lab, tr in enumerate(synth_pair(seed0 + s)):
            for fv in harness.video_features(harness.VideoData(f"{s}_{lab}", tr), cfg):
                X.append(fv.values)
                y.append(lab)
    return harness.train_svm_model(np.array(X), np.array(y), cfg), cfg


@functools.lru_cache(maxsize=None)
def blur_verdicts(n_pairs=10, kernels=(3, 11)):
    """Fake/authentic verdicts (1 = fake) on rendered synthetic videos, clean
    and after each Gaussian blur; returns (truth, {kernel: verdicts}) with
    kernel 0 meaning unblurred."""
    from ppgforensics.ingest.distort import distort
    from ppgforensics.pipeline import harness
    from ppgforensics.pipeline.render import render_frames
    from ppgforensics.pipeline.synth import synth_pair

    model, cfg = trained_svr()
    truth, out = [], {k: [] for k in (0,) + kernels}
    for s in range(n_pairs):
        for lab, tr in enumerate(synth_pair(s)):
            frames, lms = render_frames(tr, seed=2 * s + lab)
            truth.append(lab)
            for k in out:
                g = frames if k == 0 else distort(frames, "gaussian", k)
                video = harness.VideoData(f"pair{s}_{lab}", harness.traces_from_frames(g, lms, cfg))
                out[k].append(int(harness.catch_video(video, model, cfg).label == "fake"))
    return truth, out


ACCEPTANCE_LINES = []


def acceptance_line(criterion, ok, detail=""):
    """Record and print one PASS/FAIL line; returns ``ok``."""
    line = f"{'PASS' if ok else 'FAIL'}  {criterion}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
