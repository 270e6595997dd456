"""Command line interface: ``ppgforensics <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .. import cnn, features, pairwise, ppgmap, svm
from ..errors import PpgForensicsError
from ..ingest.landmarks import save_landmarks
from ..ingest.traces_io import write_traces
from ..ingest.frames import save_frames
from . import diagnostics, harness
from .config import PipelineConfig, load_config
from .synth import SynthParams, gen_synthetic_corpus, synth_pair
from .render import render_frames

log = logging.getLogger("ppgforensics")


def _common(p):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--omega", type=int, help="segment length in frames (default 128)")
    p.add_argument("--fps", type=float, help="frame rate of frame/trace inputs (default 30)")
    p.add_argument("--roi-scale", choices=["smallest", "small", "default", "big", "face"])
    p.add_argument("--band", nargs=2, type=float, metavar=("LOW", "HIGH"), help="band-pass edges in Hz")
    p.add_argument("--bins", type=int, help="Welch frequency bins (power of two)")
    p.add_argument("--normalization", choices=features.NORMALIZATIONS)
    p.add_argument("--seed", type=int)
    p.add_argument("--report-format", choices=["json", "text"], default="json")
    p.add_argument("--out", help="output path (default: stdout for reports)")


def _cfg(args, **extra):
    band = args.band or (None, None)
    return load_config(args.config, omega=args.omega, fps=args.fps, roi_scale=args.roi_scale,
                       band_low=band[0], band_high=band[1], bins=args.bins,
                       normalization=args.normalization, seed=args.seed, **extra)


def _emit(args, text):
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def load_model(path):
    doc = json.loads(Path(path).read_text())
    if doc.get("kernel") == "rbf":
        return svm.SvmModel.from_dict(doc)
    if "params" in doc:
        return cnn.CnnModel.from_dict(doc)
    raise PpgForensicsError(f"{path}: not a model file")


def _entries(args):
    m = harness.DatasetManifest.load(args.manifest)
    entries = m.split(args.split) if args.split else m.entries
    if not entries:
        raise PpgForensicsError(f"manifest has no entries for split {args.split!r}")
    return m, entries


# --- subcommands -----------------------------------------------------------------------

def cmd_synth(args):
    params = SynthParams(n_frames=args.frames)
    seed = args.seed or 0
    manifest = gen_synthetic_corpus(args.out, args.pairs, seed, params)
    if args.split:
        m = harness.DatasetManifest.load(Path(args.out) / "manifest.json")
        harness.split_dataset(m, (0.6, 0.4), seed).save(Path(args.out) / "manifest.json")
    if args.render:
        seeds = np.random.SeedSequence(seed).generate_state(args.pairs)
        for i in range(args.pairs):
            for label, traces in zip(("authentic", "fake"), synth_pair(int(seeds[i]), params)):
                frames, lms = render_frames(traces, seed=int(seeds[i]) + (label == "fake"))
                d = Path(args.out) / "frames" / f"pair{i:04d}_{label}"
                save_frames(d, frames)
                save_landmarks(d / "landmarks.json", lms)
    print(f"wrote {len(manifest['entries'])} samples to {args.out}")


def cmd_extract(args):
    cfg = _cfg(args)
    video = harness.load_video(args.input, cfg)
    if not args.out:
        raise PpgForensicsError("extract needs --out")
    write_traces(args.out, video.traces)


def cmd_features(args):
    cfg = _cfg(args)
    vectors, labels, ids = [], [], []
    if args.manifest:
        m, entries = _entries(args)
        items = [(m.resolve(e), e.path, e.label) for e in entries]
    else:
        items = [(p, Path(p).name, "") for p in args.inputs]
    for path, vid, label in items:
        video = harness._stage("ingest", vid, harness.load_video, path, cfg)
        for k, fv in enumerate(harness._stage("features", vid, harness.video_features, video, cfg)):
            vectors.append(fv)
            labels.append(label)
            ids.append(f"{vid}#{k}")
    _emit(args, features.format_feature_csv(vectors, labels, ids))


def cmd_ppgmap(args):
    cfg = _cfg(args, map_kind=args.kind)
    out = Path(args.out or "ppgmaps")
    out.mkdir(parents=True, exist_ok=True)
    index = []
    for path in args.inputs:
        video = harness.load_video(path, cfg)
        for k, pm in enumerate(harness.video_maps(video, cfg)):
            name = f"{video.video_id}_seg{k:03d}.pgm"
            ppgmap.save_pgm(out / name, pm)
            index.append({"file": name, "video": video.video_id, "segment": k, "label": args.label or ""})
    ppgmap.write_map_index(out / "index.json", index)


def cmd_train_svm(args):
    cfg = _cfg(args, C=args.C, gamma=args.gamma, svm_mode=args.mode)
    m, entries = _entries(args)
    X, y, _ = harness.feature_matrix(m, entries, cfg)
    if args.grid:
        res = svm.grid_search(X, y, k_folds=args.folds, seed=cfg.seed,
                              mode="classify" if cfg.svm_mode == "classify" else "regress")
        cfg = cfg.updated(C=res.best_C, gamma=res.best_gamma)
        log.info("grid search: C=%g gamma=%g cv accuracy %.4f", res.best_C, res.best_gamma, res.best_accuracy)
    model = harness.train_svm_model(X, y, cfg)
    model.save(args.out or "svm_model.json")
    print(f"trained {cfg.svm_mode} model on {len(y)} segments; {len(model.dual_coef)} support vectors")


def cmd_train_cnn(args):
    cfg = _cfg(args, map_kind=args.kind, epochs=args.epochs)
    m, entries = _entries(args)
    maps, y, _ = harness.map_stack(m, entries, cfg)
    res = cnn.cnn_train(maps, y, epochs=cfg.epochs, seed=cfg.seed)
    res.model.save(args.out or "cnn_model.json")
    print(f"trained on {len(y)} maps; final loss {res.losses[-1]:.4f}")


def cmd_catch(args):
    model = load_model(args.model)
    cfg = _cfg(args, component="cnn" if isinstance(model, cnn.CnnModel) else "svm", map_kind=args.kind)
    verdicts = harness.run_catch(args.inputs, model, cfg)
    if args.report_format == "json":
        _emit(args, harness.catch_report(verdicts, cfg))
    else:
        _emit(args, "".join(v.to_text() + "\n" for v in verdicts))


def cmd_pairwise(args):
    cfg = _cfg(args)
    omega = args.omega or pairwise.PAIRWISE_OMEGA
    a = harness.load_video(args.video_a, cfg)
    b = harness.load_video(args.video_b, cfg)
    kw = {"band": tuple(args.freq_band)} if args.freq_band else {}
    res = pairwise.pairwise_separate(a.traces, b.traces, args.metric, omega, cfg.ppg, **kw)
    if args.report_format == "json":
        doc = res.to_dict() | {"a": str(args.video_a), "b": str(args.video_b)}
        _emit(args, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        _emit(args, res.to_text())


def cmd_eval(args):
    model = load_model(args.model)
    cfg = _cfg(args, component="cnn" if isinstance(model, cnn.CnnModel) else "svm", map_kind=args.kind)
    m, entries = _entries(args)
    outs, labels, ids, sources = [], [], [], {}
    for e in entries:
        video = harness._stage("ingest", e.path, harness.load_video, m.resolve(e), cfg)
        seg = harness.segment_outputs(video, model, cfg)
        outs += seg
        labels += [int(e.label == "fake")] * len(seg)
        ids += [e.path] * len(seg)
        sources[e.path] = e.source or "-"
    probabilistic = not (isinstance(model, svm.SvmModel) and model.mode == "classify")
    tau = cfg.tau if cfg.tau is not None else (model.meta.get("tau", 0.5) if isinstance(model, svm.SvmModel) else 0.5)
    rep = harness.evaluate(outs, labels, ids, probabilistic, tau, sources, cfg.to_dict())
    _emit(args, rep.to_json() if args.report_format == "json" else rep.to_text())


def _read_features(path):
    ids, names, X, labels = features.read_feature_csv(path)
    return names, X, np.array([1 if lab == "fake" else 0 for lab in labels])


def cmd_diag_pca(args):
    names, X, _ = _read_features(args.features)
    res = diagnostics.pca_project(X, args.k)
    doc = {"k": args.k, "explained_variance_ratio": res.explained_variance_ratio.tolist()}
    if args.report_format == "json":
        _emit(args, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        _emit(args, "".join(f"PC{i + 1}: {r:.6f}\n" for i, r in enumerate(doc["explained_variance_ratio"])))


def cmd_diag_fisher(args):
    names, X, y = _read_features(args.features)
    res = diagnostics.fisher_ratio(X, y)
    top = [(names[i], float(res.ratios[i])) for i in res.ranking()[:args.top]]
    doc = {"top": top, "excluded": [names[i] for i in res.excluded]}
    if args.report_format == "json":
        _emit(args, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        lines = [f"{r:12.6g}  {n}" for n, r in top] + [f"excluded (zero variance): {n}" for n in doc["excluded"]]
        _emit(args, "\n".join(lines) + "\n")


def build_parser():
    ap = argparse.ArgumentParser(prog="ppgforensics", description="Biological-signal deepfake detection toolkit")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a seeded synthetic trace corpus")
    _common(p)
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--frames", type=int, default=600)
    p.add_argument("--split", action="store_true", help="assign a stratified 60/40 train/test split")
    p.add_argument("--render", action="store_true", help="also render frame directories")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="frame directory -> region trace CSV")
    _common(p)
    p.add_argument("input")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("features", help="126-feature CSV per segment")
    _common(p)
    p.add_argument("inputs", nargs="*")
    p.add_argument("--manifest")
    p.add_argument("--split", choices=harness.SPLITS)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("ppgmap", help="write PPG maps as PGM images plus index.json")
    _common(p)
    p.add_argument("inputs", nargs="+")
    p.add_argument("--kind", choices=["temporal", "spectral"], default="temporal")
    p.add_argument("--label", choices=["authentic", "fake"])
    p.set_defaults(func=cmd_ppgmap)

    p = sub.add_parser("train-svm", help="train the segment SVM/SVR")
    _common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=harness.SPLITS, default="train")
    p.add_argument("--mode", choices=["regress", "classify"])
    p.add_argument("--C", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--grid", action="store_true", help="pick C and gamma by stratified k-fold search")
    p.add_argument("--folds", type=int, default=5)
    p.set_defaults(func=cmd_train_svm)

    p = sub.add_parser("train-cnn", help="train the PPG-map CNN")
    _common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=harness.SPLITS, default="train")
    p.add_argument("--kind", choices=["temporal", "spectral"], default="temporal")
    p.add_argument("--epochs", type=int, default=50)
    p.set_defaults(func=cmd_train_cnn)

    p = sub.add_parser("catch", help="video-level verdicts")
    _common(p)
    p.add_argument("inputs", nargs="+")
    p.add_argument("--model", required=True)
    p.add_argument("--kind", choices=["temporal", "spectral"], default="temporal")
    p.set_defaults(func=cmd_catch)

    p = sub.add_parser("pairwise", help="which of two videos is fake")
    _common(p)
    p.add_argument("video_a")
    p.add_argument("video_b")
    p.add_argument("--metric", choices=[m.value for m in pairwise.MetricId], default="ap_log")
    p.add_argument("--freq-band", nargs=2, type=float, metavar=("LOW", "HIGH"),
                   help="restrict ap_log to a frequency band in Hz")
    p.set_defaults(func=cmd_pairwise)

    p = sub.add_parser("eval", help="evaluate a model on a manifest split")
    _common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=harness.SPLITS, default="test")
    p.add_argument("--model", required=True)
    p.add_argument("--kind", choices=["temporal", "spectral"], default="temporal")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("diag-pca", help="PCA explained variance of a feature CSV")
    _common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--k", type=int, default=10)
    p.set_defaults(func=cmd_diag_pca)

    p = sub.add_parser("diag-fisher", help="Fisher ratio ranking of a feature CSV")
    _common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--top", type=int, default=20)
    p.set_defaults(func=cmd_diag_fisher)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except PpgForensicsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
