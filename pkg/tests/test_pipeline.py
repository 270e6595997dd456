import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import blur_verdicts, trained_svr
from ppgforensics.errors import ParameterError, StageError
from ppgforensics.pipeline import harness
from ppgforensics.pipeline.cli import main
from ppgforensics.pipeline.config import PipelineConfig, load_config
from ppgforensics.pipeline.diagnostics import fisher_ratio, pca_project
from ppgforensics.pipeline.harness import DatasetManifest, ManifestEntry, evaluate, split_dataset
from ppgforensics.pipeline.render import render_frames, render_landmarks
from ppgforensics.pipeline.synth import SynthParams, gen_synthetic_corpus, synth_pair
from ppgforensics.rppg import build_bundle
from ppgforensics.transforms import xcorr


def _manifest(n_auth, n_fake):
    entries = [ManifestEntry(f"a{i}.csv", "authentic") for i in range(n_auth)]
    entries += [ManifestEntry(f"f{i}.csv", "fake") for i in range(n_fake)]
    return DatasetManifest(entries)


# --- manifests and splits ---------------------------------------------------------------

def test_split_ten_items():
    out = split_dataset(_manifest(5, 5), (0.6, 0.4), seed=3)
    assert len(out.split("train")) == 6
    assert len(out.split("test")) == 4


@given(st.integers(1, 30), st.integers(1, 30), st.integers(0, 10_000))
def test_split_stratified_and_disjoint(n_auth, n_fake, seed):
    m = _manifest(n_auth, n_fake)
    out = split_dataset(m, (0.6, 0.4), seed)
    train, test = out.split("train"), out.split("test")
    assert {e.path for e in train}.isdisjoint(e.path for e in test)
    assert len(train) + len(test) == n_auth + n_fake
    n = n_auth + n_fake
    for part in (train, test):
        n_a = sum(e.label == "authentic" for e in part)
        assert abs(n_a - len(part) * n_auth / n) <= 1


def test_split_deterministic_and_seed_dependent():
    m = _manifest(20, 20)
    a = [e.split for e in split_dataset(m, seed=1).entries]
    assert a == [e.split for e in split_dataset(m, seed=1).entries]
    assert a != [e.split for e in split_dataset(m, seed=2).entries]


def test_split_three_way():
    out = split_dataset(_manifest(10, 10), (0.6, 0.2, 0.2), seed=0)
    assert [len(out.split(s)) for s in ("train", "test", "validation")] == [12, 4, 4]


def test_split_bad_ratios():
    with pytest.raises(ParameterError):
        split_dataset(_manifest(2, 2), (0.5, 0.6))
    with pytest.raises(ParameterError):
        split_dataset(_manifest(2, 2), (0.25,) * 4)


def test_manifest_rejects_path_in_two_splits():
    with pytest.raises(ParameterError):
        DatasetManifest([ManifestEntry("x.csv", "fake", split="train"), ManifestEntry("x.csv", "fake", split="test")])
    with pytest.raises(ParameterError):
        ManifestEntry("x.csv", "real")


def test_manifest_roundtrip(tmp_path):
    m = split_dataset(_manifest(3, 3), seed=0)
    m.save(tmp_path / "m.json")
    back = DatasetManifest.load(tmp_path / "m.json")
    assert [e.to_dict() for e in back.entries] == [e.to_dict() for e in m.entries]
    assert back.root == str(tmp_path)


# --- evaluation ---------------------------------------------------------------------------

def _recount(outputs, labels, ids, tau=0.5, probabilities=False):
    """Plain tally: segment hits, and per-video majority (or mean-probability)
    decisions with ties going to fake."""
    seg = [int(o >= tau) if probabilities else int(o) for o in outputs]
    seg_hits = sum(p == t for p, t in zip(seg, labels))
    videos = {}
    for o, p, t, v in zip(outputs, seg, labels, ids):
        videos.setdefault(v, ([], t))[0].append(o if probabilities else p)
    tally = Counter()
    for v, (vals, t) in videos.items():
        if probabilities:
            pred = int(sum(vals) / len(vals) >= tau)
        else:
            pred = int(2 * sum(vals) >= len(vals))
        tally[("t" if pred == t else "f") + ("p" if pred == 1 else "n")] += 1
    return seg_hits, dict(tally), len(videos)


def test_evaluate_perfect():
    labels = [0, 0, 1, 1, 0, 1]
    rep = evaluate(labels, labels, ["a", "a", "b", "b", "c", "d"])
    assert rep.segment_accuracy == rep.video_accuracy == 1.0
    assert rep.class_accuracy == {"authentic": 1.0, "fake": 1.0}
    assert rep.confusion == {"tp": 2, "tn": 2, "fp": 0, "fn": 0}


def test_evaluate_all_fake_on_balanced_set():
    labels = [0] * 6 + [1] * 6
    rep = evaluate([1] * 12, labels, [f"v{i // 2}" for i in range(12)])
    assert rep.video_accuracy == 0.5
    assert rep.segment_accuracy == 0.5
    assert rep.class_accuracy == {"authentic": 0.0, "fake": 1.0}


@given(st.lists(st.tuples(st.integers(0, 5), st.floats(0, 1)), min_size=1, max_size=40),
       st.booleans(), st.floats(0.1, 0.9))
def test_evaluate_matches_recount(rows, probabilities, tau):
    ids = [f"v{v}" for v, _ in rows]
    labels = [v % 2 for v, _ in rows]
    outputs = [p if probabilities else float(p >= 0.5) for _, p in rows]
    if not probabilities:
        tau = 0.5
    rep = evaluate(outputs, labels, ids, probabilities, tau)
    seg_hits, tally, n_videos = _recount(outputs, labels, ids, tau, probabilities)
    c = rep.confusion
    assert rep.segment_accuracy == seg_hits / len(rows)
    assert (c["tp"], c["tn"], c["fp"], c["fn"]) == tuple(tally.get(k, 0) for k in ("tp", "tn", "fp", "fn"))
    assert sum(c.values()) == rep.n_videos == n_videos
    assert sum(rep.segment_confusion.values()) == rep.n_segments == len(rows)
    # every accuracy re-derives exactly from its confusion counts
    assert rep.video_accuracy == (c["tp"] + c["tn"]) / n_videos
    if c["tp"] + c["fn"]:
        assert rep.class_accuracy["fake"] == c["tp"] / (c["tp"] + c["fn"])
    if c["tn"] + c["fp"]:
        assert rep.class_accuracy["authentic"] == c["tn"] / (c["tn"] + c["fp"])


def test_evaluate_per_source_and_errors():
    rep = evaluate([0, 1, 1, 1], [0, 1, 0, 1], ["a", "b", "c", "d"],
                   sources={"a": "x", "b": "x", "c": "y", "d": "y"}, config={"k": 1})
    assert rep.per_source == {"x": 1.0, "y": 0.5}
    doc = json.loads(rep.to_json())
    assert doc["config"] == {"k": 1}
    assert "confusion" in rep.to_text()
    with pytest.raises(ParameterError):
        evaluate([0, 1], [0, 1, 1])
    with pytest.raises(ParameterError):
        evaluate([0, 1], [0, 1], ["a", "a"])


# --- diagnostics ----------------------------------------------------------------------------

def test_pca_plane_in_3d(rng):
    coef = rng.normal(size=(200, 2))
    basis = np.array([[1.0, 2.0, 0.5], [-1.0, 0.3, 2.0]])
    res = pca_project(coef @ basis + 5.0, 2)
    assert res.explained_variance_ratio.sum() > 0.999
    assert np.allclose(res.components @ res.components.T, np.eye(2), atol=1e-12)


def test_pca_full_rank_reconstruction(rng):
    X = rng.normal(size=(30, 6)) * np.arange(1, 7)
    res = pca_project(X, 6)
    assert np.max(np.abs(res.reconstruct() - X)) < 1e-9
    assert abs(res.explained_variance_ratio.sum() - 1) < 1e-12


def _power_iteration_pca(X, k):
    """Naive oracle: explicit loop covariance, then power iteration with
    deflation for the top-k eigenpairs."""
    n, d = X.shape
    mean = [sum(X[i, j] for i in range(n)) / n for j in range(d)]
    cov = np.zeros((d, d))
    for a in range(d):
        for b in range(d):
            cov[a, b] = sum((X[i, a] - mean[a]) * (X[i, b] - mean[b]) for i in range(n)) / (n - 1)
    vecs, vals = [], []
    for _ in range(k):
        v = np.ones(d) / np.sqrt(d)
        for _ in range(5000):
            w = cov @ v
            v = w / np.linalg.norm(w)
        lam = v @ cov @ v
        vecs.append(v)
        vals.append(lam)
        cov = cov - lam * np.outer(v, v)
    return np.array(vecs), np.array(vals)


def test_pca_matches_naive_eigen_oracle(rng):
    X = rng.normal(size=(40, 4)) * np.array([4.0, 2.5, 1.5, 0.5]) @ np.linalg.qr(rng.normal(size=(4, 4)))[0]
    res = pca_project(X, 3)
    vecs, vals = _power_iteration_pca(X, 3)
    for got, want in zip(res.components, vecs):
        assert min(np.max(np.abs(got - want)), np.max(np.abs(got + want))) < 1e-6
    total = np.trace(np.cov(X.T))
    assert np.allclose(res.explained_variance_ratio, vals / total, atol=1e-9)


def test_pca_errors():
    with pytest.raises(ParameterError):
        pca_project(np.zeros((5, 3)), 4)
    with pytest.raises(ParameterError):
        pca_project(np.zeros(5), 1)


def test_fisher_identical_classes(rng):
    X = rng.normal(size=(4000, 3))
    y = np.arange(4000) % 2
    assert np.all(fisher_ratio(X, y).ratios < 0.01)


def test_fisher_gaussians_ten_apart(rng):
    y = np.repeat([0, 1], 2000)
    X = rng.normal(size=(4000, 1)) + 10.0 * y[:, None]
    r = fisher_ratio(X, y).ratios[0]
    assert abs(r - 50) <= 5


def test_fisher_zero_variance_excluded(rng):
    X = np.column_stack([rng.normal(size=100), np.full(100, 3.0), 1e-20 * rng.normal(size=100)])
    y = np.arange(100) % 2
    res = fisher_ratio(X, y)
    assert res.excluded == [1]
    assert np.isnan(res.ratios[1])
    assert 1 not in res.ranking()
    with pytest.raises(ParameterError):
        fisher_ratio(X, np.zeros(100))


# --- synthetic corpus ---------------------------------------------------------------------------

def _mean_max_xcorr(traces):
    b = build_bundle(traces)
    c = [b.C_L, b.C_M, b.C_R]
    return np.mean([np.max(np.abs(xcorr(c[i], c[j]))) for i in range(3) for j in range(i + 1, 3)])


def test_synth_coherence_split():
    params = SynthParams(n_cells=0)
    for seed in range(20):
        auth, fake = synth_pair(seed, params)
        assert _mean_max_xcorr(auth) > 0.7
        assert _mean_max_xcorr(fake) < 0.4


def test_synth_heart_rate_range():
    params = SynthParams(n_cells=0, noise=0.0, walk_step=0.0)
    for seed in range(10):
        g = synth_pair(seed, params)[0]["mid_region"].mean_g
        spec = np.abs(np.fft.rfft(g - g.mean()))
        f = np.fft.rfftfreq(len(g), 1 / 30)[np.argmax(spec)]
        assert 0.85 <= f <= 1.65


def test_synth_corpus_byte_identical(tmp_path):
    gen_synthetic_corpus(tmp_path / "a", 3, seed=5, params=SynthParams(n_frames=200))
    gen_synthetic_corpus(tmp_path / "b", 3, seed=5, params=SynthParams(n_frames=200))
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert len(names) == 7
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
    gen_synthetic_corpus(tmp_path / "c", 3, seed=6, params=SynthParams(n_frames=200))
    assert (tmp_path / "a" / names[0]).read_bytes() != (tmp_path / "c" / names[0]).read_bytes()


# --- end to end ------------------------------------------------------------------------------------

def test_run_catch_verdicts_and_report_bytes(tmp_path):
    gen_synthetic_corpus(tmp_path, 4, seed=77)
    model, cfg = trained_svr()
    paths = sorted(tmp_path.glob("pair*.csv"))
    verdicts = harness.run_catch(paths, model, cfg)
    assert [v.video for v in verdicts] == sorted(p.stem for p in paths)
    for v in verdicts:
        assert v.label == v.video.split("_")[1]
    again = harness.run_catch(list(reversed(paths)), model, cfg)
    assert harness.catch_report(verdicts, cfg) == harness.catch_report(again, cfg)


def test_run_catch_stage_error_names_stage_and_input(tmp_path):
    model, cfg = trained_svr(n_pairs=2)
    with pytest.raises(StageError) as info:
        harness.run_catch([tmp_path / "missing.csv"], model, cfg)
    assert info.value.stage == "ingest"
    assert "missing.csv" in str(info.value)


def test_rendered_frames_catch():
    truth, out = blur_verdicts()
    assert out[0] == truth


def test_render_geometry():
    a, _ = synth_pair(0, SynthParams(n_frames=40))
    frames, lms = render_frames(a, seed=1)
    assert frames.frames.shape[0] == 40 and frames.frames.dtype == np.uint8
    assert len(lms) == 40
    pts = render_landmarks()
    assert pts.min() >= 0
    assert pts[:, 0].max() < frames.width and pts[:, 1].max() < frames.height


def test_config_file_and_overrides(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"omega": 64, "seed": 9}))
    cfg = load_config(tmp_path / "c.json", seed=3, bins=None)
    assert (cfg.omega, cfg.seed, cfg.bins) == (64, 3, 256)
    assert cfg.ppg.welch_bins == 256
    with pytest.raises(ParameterError):
        load_config(None, nonsense=1)
    with pytest.raises(ParameterError):
        PipelineConfig(omega=8)
    (tmp_path / "bad.json").write_text("[1]")
    with pytest.raises(ParameterError):
        load_config(tmp_path / "bad.json")


def test_cli_end_to_end(tmp_path, capsys):
    d = tmp_path / "corpus"
    assert main(["synth", "--pairs", "6", "--frames", "300", "--split", "--out", str(d)]) == 0
    man = d / "manifest.json"
    assert main(["features", "--manifest", str(man), "--out", str(tmp_path / "f.csv")]) == 0
    assert main(["train-svm", "--manifest", str(man), "--out", str(tmp_path / "svm.json")]) == 0
    test_files = [str(d / e["path"]) for e in json.loads(man.read_text())["entries"] if e["split"] == "test"]
    out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
    for out in (out1, out2):
        assert main(["catch", *test_files, "--model", str(tmp_path / "svm.json"), "--out", str(out)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert len(json.loads(out1.read_text())["verdicts"]) == len(test_files)
    assert main(["eval", "--manifest", str(man), "--model", str(tmp_path / "svm.json"),
                 "--out", str(tmp_path / "eval.json")]) == 0
    rep = json.loads((tmp_path / "eval.json").read_text())
    assert rep["n_videos"] == len(test_files)
    assert rep["config"]["omega"] == 128
    assert main(["pairwise", str(d / "pair0000_authentic.csv"), str(d / "pair0000_fake.csv"),
                 "--omega", "150", "--report-format", "text"]) == 0
    assert main(["diag-pca", "--features", str(tmp_path / "f.csv"), "--k", "3"]) == 0
    assert main(["diag-fisher", "--features", str(tmp_path / "f.csv"), "--top", "5",
                 "--report-format", "text"]) == 0
    assert main(["ppgmap", str(d / "pair0000_fake.csv"), "--out", str(tmp_path / "maps")]) == 0
    assert len(list((tmp_path / "maps").glob("*.pgm"))) == 2
    assert main(["train-cnn", "--manifest", str(man), "--epochs", "2", "--omega", "64",
                 "--out", str(tmp_path / "cnn.json")]) == 0
    assert main(["catch", test_files[0], "--model", str(tmp_path / "cnn.json"), "--omega", "64",
                 "--report-format", "text"]) == 0
    capsys.readouterr()


def test_cli_extract_from_rendered_frames(tmp_path):
    d = tmp_path / "corpus"
    assert main(["synth", "--pairs", "1", "--frames", "40", "--render", "--out", str(d)]) == 0
    frames_dir = d / "frames" / "pair0000_authentic"
    assert (frames_dir / "landmarks.json").exists()
    assert main(["extract", str(frames_dir), "--out", str(tmp_path / "t.csv")]) == 0
    text = (tmp_path / "t.csv").read_text()
    assert "left_cheek" in text and "mid_region/cell31" in text


def test_cli_reports_errors(tmp_path, capsys):
    (tmp_path / "m.json").write_text("{}")
    assert main(["catch", str(tmp_path / "nope.csv"), "--model", str(tmp_path / "m.json")]) == 2
    assert "error" in capsys.readouterr().err
