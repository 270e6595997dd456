"""Dataset manifests, per-video extraction, the catch pipeline and the
evaluation report."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import aggregate, cnn, features, ppgmap, svm
from ..errors import IngestError, ParameterError, PpgForensicsError, StageError
from ..ingest.frames import FrameSequence, load_frames
from ..ingest.landmarks import LandmarkSet, load_landmarks
from ..ingest.rectify import rectify_roi
from ..ingest.roi import SIGNAL_REGIONS, Region, RegionTrace, RoiSpec, face_traces, roi_polygon
from ..ingest.segments import SegmentConfig, segmentize, split_traces
from ..ingest.traces_io import cell_name, cells_from_traces, read_traces
from ..rppg import SIGNAL_NAMES, SignalBundle, build_bundle
from .config import PipelineConfig

LABELS = ("authentic", "fake")
SPLITS = ("train", "test", "validation")


# --- manifests --------------------------------------------------------------------------

@dataclass
class ManifestEntry:
    path: str
    label: str
    source: str = ""
    split: str | None = None
    group: str | None = None

    def __post_init__(self):
        if self.label not in LABELS:
            raise ParameterError(f"label must be one of {LABELS}, got {self.label!r}")
        if self.split is not None and self.split not in SPLITS:
            raise ParameterError(f"split must be one of {SPLITS}")

    def to_dict(self):
        d = {"path": self.path, "label": self.label, "source": self.source}
        if self.split is not None:
            d["split"] = self.split
        if self.group is not None:
            d["group"] = self.group
        return d


@dataclass
class DatasetManifest:
    entries: list
    root: str = "."

    def __post_init__(self):
        seen = {}
        for e in self.entries:
            if e.path in seen and seen[e.path] != e.split:
                raise ParameterError(f"{e.path} appears in splits {seen[e.path]} and {e.split}")
            seen[e.path] = e.split

    def resolve(self, entry):
        return Path(self.root) / entry.path

    def split(self, name):
        return [e for e in self.entries if e.split == name]

    def to_dict(self):
        return {"entries": [e.to_dict() for e in self.entries]}

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path):
        path = Path(path)
        doc = json.loads(path.read_text())
        entries = []
        for e in doc["entries"]:
            group = e.get("group", e.get("pair"))
            entries.append(ManifestEntry(e["path"], e["label"], e.get("source", ""), e.get("split"),
                                         None if group is None else str(group)))
        return cls(entries, str(path.parent))


def split_dataset(manifest: DatasetManifest, ratios=(0.6, 0.4), seed=0, stratify=True):
    """Assign splits in the order train, test, validation.

    Each class is shuffled with ``seed``; with stratification the classes
    are interleaved in proportion before cutting, so every split keeps the
    class ratio within one item.
    """
    ratios = np.asarray(ratios, dtype=float)
    if len(ratios) > len(SPLITS) or np.any(ratios < 0) or not np.isclose(ratios.sum(), 1.0):
        raise ParameterError("ratios must be non-negative, at most 3, and sum to 1")
    n = len(manifest.entries)
    rng = np.random.default_rng(seed)
    if stratify:
        keys = np.empty(n)
        for lab in LABELS:
            idx = [i for i, e in enumerate(manifest.entries) if e.label == lab]
            perm = rng.permutation(len(idx))
            for rank, i in zip(perm, idx):
                keys[i] = (rank + 0.5) / len(idx)
        order = np.lexsort((np.array([LABELS.index(e.label) for e in manifest.entries]), keys))
    else:
        order = rng.permutation(n)
    raw = ratios * n
    counts = np.floor(raw).astype(int)
    for k in np.argsort(-(raw - counts), kind="stable")[: n - counts.sum()]:
        counts[k] += 1
    bounds = np.concatenate([[0], np.cumsum(counts)])
    entries = [None] * n
    for s, name in enumerate(SPLITS[:len(ratios)]):
        for i in order[bounds[s]:bounds[s + 1]]:
            e = manifest.entries[i]
            entries[i] = ManifestEntry(e.path, e.label, e.source, name, e.group)
    return DatasetManifest(entries, manifest.root)


# --- per-video data ----------------------------------------------------------------------

@dataclass
class VideoData:
    video_id: str
    traces: dict        # name -> RegionTrace, incl. optional mid_region/cellNN

    @property
    def n_frames(self):
        return len(self.traces["mid_region"])

    @property
    def fps(self):
        return self.traces["mid_region"].fps


def traces_from_frames(frames: FrameSequence, landmarks: LandmarkSet, cfg: PipelineConfig):
    """Region traces and the 32 rectified mid-region cell traces."""
    out = {r.value: t for r, t in face_traces(frames, landmarks, cfg.scale).items()}
    polys = []
    last, last_key = None, None
    for i in range(len(frames)):
        pts = landmarks.frame(i)
        if pts is not None and pts.tobytes() != last_key:
            last = roi_polygon(pts, RoiSpec(Region.MID_REGION, cfg.scale))
            last_key = pts.tobytes()
        polys.append(last)
    first = next(p for p in polys if p is not None)
    polys = [first if p is None else p for p in polys]
    cells = rectify_roi(frames, polys)
    spec = RoiSpec(Region.MID_REGION, cfg.scale)
    for k in range(cells.shape[1]):
        out[cell_name(k)] = RegionTrace(cells[:, k, 0], cells[:, k, 1], cells[:, k, 2], spec, frames.fps)
    return out


def load_video(path, cfg: PipelineConfig):
    """A trace CSV, or a frame directory with ``landmarks.json``."""
    path = Path(path)
    if path.is_file():
        return VideoData(path.stem, read_traces(path, cfg.fps))
    if path.is_dir():
        lm_path = path / "landmarks.json"
        if not lm_path.exists():
            raise IngestError(f"{path}: frame directory needs landmarks.json")
        frames = load_frames(path, cfg.fps)
        lms = load_landmarks(lm_path)
        if len(lms) != len(frames):
            raise IngestError(f"{path}: {len(lms)} landmark frames for {len(frames)} images")
        lms.flag_out_of_bounds(frames.width, frames.height)
        return VideoData(path.name, traces_from_frames(frames, lms, cfg))
    raise IngestError(f"no such input {path}")


def _segments(video: VideoData, cfg: PipelineConfig):
    return split_traces(video.traces, segmentize(video.n_frames, SegmentConfig(omega=cfg.omega)))


def normalized_bundle(bundle: SignalBundle, method):
    if method == "none":
        return bundle
    return SignalBundle(fps=bundle.fps, **{n: features.normalize(s, method) for n, s in bundle.S.items()})


def video_bundles(video: VideoData, cfg: PipelineConfig):
    return [build_bundle(seg, cfg.ppg) for seg in _segments(video, cfg)]


def video_features(video: VideoData, cfg: PipelineConfig):
    out = []
    for b in video_bundles(video, cfg):
        out.append(features.assemble_126(normalized_bundle(b, cfg.normalization), cfg.ppg))
    return out


def video_maps(video: VideoData, cfg: PipelineConfig):
    maps = []
    for seg in _segments(video, cfg):
        cells = cells_from_traces(seg)
        if cells is None:
            raise IngestError(f"{video.video_id}: no mid-region cell traces for PPG maps")
        sig = ppgmap.cell_signals(cells, video.fps, cfg.ppg)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if cfg.map_kind == "spectral":
                maps.append(ppgmap.build_spectral_map(sig, video.fps, cfg.ppg))
            else:
                maps.append(ppgmap.build_ppg_map(sig))
    return maps


def _stage(name, video_id, fn, *args):
    try:
        return fn(*args)
    except StageError:
        raise
    except (PpgForensicsError, ValueError, OSError) as exc:
        raise StageError(name, video_id, exc) from exc


def feature_matrix(manifest: DatasetManifest, entries, cfg: PipelineConfig):
    """Stacked segment features, labels (1 = fake) and video ids."""
    X, y, ids = [], [], []
    for e in entries:
        video = _stage("ingest", e.path, load_video, manifest.resolve(e), cfg)
        for fv in _stage("features", e.path, video_features, video, cfg):
            X.append(fv.values)
            y.append(int(e.label == "fake"))
            ids.append(e.path)
    return np.array(X), np.array(y), ids


def map_stack(manifest: DatasetManifest, entries, cfg: PipelineConfig):
    M, y, ids = [], [], []
    for e in entries:
        video = _stage("ingest", e.path, load_video, manifest.resolve(e), cfg)
        for m in _stage("ppgmap", e.path, video_maps, video, cfg):
            M.append(m.grid)
            y.append(int(e.label == "fake"))
            ids.append(e.path)
    return np.array(M), np.array(y), ids


def train_svm_model(X, y, cfg: PipelineConfig):
    if cfg.svm_mode == "regress":
        return svm.train_svr(X, y, cfg.C, cfg.gamma, cfg.epsilon)
    return svm.train_svc(X, y, cfg.C, cfg.gamma)


# --- catching ------------------------------------------------------------------------------

def segment_outputs(video: VideoData, model, cfg: PipelineConfig):
    """Per-segment p_fake (regression / CNN) or 0/1 labels (classifier)."""
    if isinstance(model, cnn.CnnModel):
        maps = video_maps(video, cfg)
        return cnn.cnn_forward(model, np.stack([m.grid for m in maps])).tolist()
    X = np.stack([fv.values for fv in video_features(video, cfg)])
    return [float(v) for v in svm.predict(model, X)]


def verdict(video_id, outputs, model, cfg: PipelineConfig):
    if isinstance(model, svm.SvmModel) and model.mode == "classify":
        return aggregate.vote_majority(outputs, cfg.tau or aggregate.DEFAULT_TAU, video_id)
    tau = cfg.tau
    if tau is None:
        tau = model.meta.get("tau", aggregate.DEFAULT_TAU) if isinstance(model, svm.SvmModel) else aggregate.DEFAULT_TAU
    tau = min(max(tau, 1e-6), 1 - 1e-6)
    return aggregate.vote_weighted(outputs, tau, video_id)


def catch_video(video: VideoData, model, cfg: PipelineConfig):
    outputs = _stage("classify", video.video_id, segment_outputs, video, model, cfg)
    return _stage("aggregate", video.video_id, verdict, video.video_id, outputs, model, cfg)


def run_catch(inputs, model, cfg: PipelineConfig):
    """Verdict per input path (or VideoData), sorted by video id."""
    out = []
    for item in inputs:
        video = item if isinstance(item, VideoData) else _stage("ingest", str(item), load_video, item, cfg)
        out.append(catch_video(video, model, cfg))
    return sorted(out, key=lambda v: v.video)


def catch_report(verdicts, cfg: PipelineConfig):
    doc = {"config": cfg.to_dict(), "verdicts": [v.to_dict() for v in verdicts]}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# --- evaluation --------------------------------------------------------------------------------

@dataclass
class EvalReport:
    segment_accuracy: float
    video_accuracy: float
    class_accuracy: dict        # label -> accuracy over videos of that label
    confusion: dict             # tp, tn, fp, fn over videos (fake = positive)
    segment_confusion: dict
    n_segments: int
    n_videos: int
    per_source: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n"

    def to_text(self):
        c = self.confusion
        lines = [f"segments: {self.n_segments}  accuracy {self.segment_accuracy:.4f}",
                 f"videos:   {self.n_videos}  accuracy {self.video_accuracy:.4f}",
                 f"authentic accuracy {self.class_accuracy['authentic']:.4f}  "
                 f"fake accuracy {self.class_accuracy['fake']:.4f}",
                 f"confusion (fake = positive): tp={c['tp']} tn={c['tn']} fp={c['fp']} fn={c['fn']}"]
        for src, acc in sorted(self.per_source.items()):
            lines.append(f"source {src}: video accuracy {acc:.4f}")
        return "\n".join(lines) + "\n"


def _confusion(pred, truth):
    pred, truth = np.asarray(pred, int), np.asarray(truth, int)
    return {"tp": int(np.sum((pred == 1) & (truth == 1))), "tn": int(np.sum((pred == 0) & (truth == 0))),
            "fp": int(np.sum((pred == 1) & (truth == 0))), "fn": int(np.sum((pred == 0) & (truth == 1)))}


def _ratio(num, den):
    return num / den if den else 0.0


def evaluate(segment_outputs, segment_labels, video_ids=None, probabilities=False, tau=aggregate.DEFAULT_TAU,
             sources=None, config=None):
    """Segment and video accuracies from per-segment outputs.

    Outputs are 0/1 labels (video vote: majority) or fake probabilities
    (``probabilities=True``; segment label p >= tau, video vote: weighted).
    ``sources`` maps video id -> source tag for per-source accuracy.
    """
    out = np.asarray(segment_outputs, dtype=float)
    truth = np.asarray(segment_labels, dtype=int)
    if len(out) != len(truth) or len(out) == 0:
        raise ParameterError("need equally many (>0) outputs and labels")
    ids = list(video_ids) if video_ids is not None else [str(i) for i in range(len(out))]
    seg_pred = (out >= tau).astype(int) if probabilities else out.astype(int)
    vids = sorted(set(ids))
    v_pred, v_true = [], []
    for v in vids:
        sel = [i for i, x in enumerate(ids) if x == v]
        labs = set(truth[sel].tolist())
        if len(labs) != 1:
            raise ParameterError(f"video {v} has segments with different labels")
        vote = aggregate.vote_weighted(out[sel], tau) if probabilities else aggregate.vote_majority(seg_pred[sel], tau)
        v_pred.append(int(vote.label == "fake"))
        v_true.append(labs.pop())
    conf = _confusion(v_pred, v_true)
    per_source = {}
    if sources:
        for src in sorted(set(sources[v] for v in vids)):
            sel = [k for k, v in enumerate(vids) if sources[v] == src]
            per_source[src] = _ratio(sum(v_pred[k] == v_true[k] for k in sel), len(sel))
    return EvalReport(
        segment_accuracy=_ratio(int(np.sum(seg_pred == truth)), len(truth)),
        video_accuracy=_ratio(conf["tp"] + conf["tn"], len(vids)),
        class_accuracy={"authentic": _ratio(conf["tn"], conf["tn"] + conf["fp"]),
                        "fake": _ratio(conf["tp"], conf["tp"] + conf["fn"])},
        confusion=conf, segment_confusion=_confusion(seg_pred, truth),
        n_segments=len(truth), n_videos=len(vids), per_source=per_source, config=config or {})
