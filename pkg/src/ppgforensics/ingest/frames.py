"""Frame sequences loaded from directories of lossless images."""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import DimensionMismatchError, IngestError

IMAGE_SUFFIXES = {".png", ".ppm", ".pgm", ".pnm", ".bmp", ".tif", ".tiff"}


def natural_key(name):
    return [int(tok) if tok.isdigit() else tok.lower() for tok in re.split(r"(\d+)", name)]


@dataclass
class FrameSequence:
    """RGB frames, shape (n, height, width, 3), uint8 unless distorted in float."""

    frames: np.ndarray
    fps: float
    source_id: str = ""

    def __post_init__(self):
        self.frames = np.asarray(self.frames)
        if self.frames.ndim != 4 or self.frames.shape[-1] != 3:
            raise DimensionMismatchError(f"frames must be (n, h, w, 3), got {self.frames.shape}")
        if len(self.frames) < 1:
            raise IngestError("no frames")
        if not self.fps > 0:
            raise IngestError(f"fps must be positive, got {self.fps}")

    def __len__(self):
        return len(self.frames)

    @property
    def height(self):
        return self.frames.shape[1]

    @property
    def width(self):
        return self.frames.shape[2]

    @property
    def duration(self):
        """Length in seconds."""
        return len(self) / self.fps

    def map(self, fn):
        """Apply ``fn`` to every frame, returning a new sequence."""
        return FrameSequence(np.stack([fn(f) for f in self.frames]), self.fps, self.source_id)


def load_frames(path, fps):
    path = Path(path)
    if not path.is_dir():
        raise IngestError(f"{path} is not a directory")
    files = sorted((p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES),
                   key=lambda p: natural_key(p.name))
    if not files:
        raise IngestError(f"no frames in {path}")
    frames = []
    shape = None
    for f in files:
        try:
            with Image.open(f) as im:
                arr = np.asarray(im.convert("RGB"))
        except OSError as exc:
            raise IngestError(f"cannot decode frame {f.name}: {exc}") from exc
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise DimensionMismatchError(f"{f.name} is {arr.shape[1]}x{arr.shape[0]}, "
                                         f"expected {shape[1]}x{shape[0]}")
        frames.append(arr)
    return FrameSequence(np.stack(frames), fps, source_id=path.name)


def save_frames(path, frames: FrameSequence, fmt="png"):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    width = max(5, len(str(len(frames))))
    for i, f in enumerate(frames.frames):
        Image.fromarray(np.asarray(f, dtype=np.uint8)).save(path / f"{i:0{width}d}.{fmt}")
