"""Deepfake detection from remote photoplethysmography (rPPG) signals.

Subpackages and modules, in pipeline order: ``ingest`` (frames,
landmarks, ROIs, segments), ``rppg`` (PPG signals), ``transforms``,
``features``, ``pairwise``, ``svm``, ``ppgmap`` and ``cnn``,
``aggregate``, and ``pipeline`` (harness and CLI).
"""
from .errors import (DegenerateInputWarning, IngestError, ModelError, ParameterError,
                     PpgForensicsError, SegmentTooShortError, SignalError, StageError,
                     UndecidableError)

__version__ = "0.1.0"

__all__ = [
    "DegenerateInputWarning", "IngestError", "ModelError", "ParameterError", "PpgForensicsError",
    "SegmentTooShortError", "SignalError", "StageError", "UndecidableError", "__version__",
]
