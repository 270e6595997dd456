"""Run configuration shared by the CLI and the harness; a JSON snapshot of
it is embedded in every report."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from ..errors import ParameterError
from ..features import NORMALIZATIONS
from ..ingest.roi import Scale
from ..rppg import PpgConfig


@dataclass(frozen=True)
class PipelineConfig:
    omega: int = 128
    fps: float = 30.0
    roi_scale: str = "default"
    band_low: float = 0.7
    band_high: float = 14.0
    bins: int = 256
    normalization: str = "none"
    seed: int = 0
    component: str = "svm"          # "svm" or "cnn"
    svm_mode: str = "regress"       # "regress" (probabilities) or "classify"
    C: float = 10.0
    gamma: float | None = None      # None: 1 / n_features
    epsilon: float = 0.1
    map_kind: str = "temporal"
    epochs: int = 50
    tau: float | None = None        # None: use the model's stored expectation

    def __post_init__(self):
        if self.omega < 16:
            raise ParameterError("omega must be >= 16")
        Scale(self.roi_scale)
        if self.normalization not in NORMALIZATIONS:
            raise ParameterError(f"normalization must be one of {NORMALIZATIONS}")
        if self.component not in ("svm", "cnn"):
            raise ParameterError("component must be 'svm' or 'cnn'")
        if self.svm_mode not in ("regress", "classify"):
            raise ParameterError("svm_mode must be 'regress' or 'classify'")
        if self.map_kind not in ("temporal", "spectral"):
            raise ParameterError("map_kind must be 'temporal' or 'spectral'")
        self.ppg  # validates band and bins

    @property
    def ppg(self):
        return PpgConfig(band_low=self.band_low, band_high=self.band_high, welch_bins=self.bins)

    @property
    def scale(self):
        return Scale(self.roi_scale)

    def to_dict(self):
        return asdict(self)

    def updated(self, **kw):
        """Copy with the non-None keyword overrides applied."""
        names = {f.name for f in fields(self)}
        unknown = set(kw) - names
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def load_config(path=None, **overrides):
    cfg = PipelineConfig()
    if path:
        doc = json.loads(Path(path).read_text())
        if not isinstance(doc, dict):
            raise ParameterError(f"{path}: config must be a JSON object")
        cfg = cfg.updated(**doc)
    return cfg.updated(**overrides)
