"""Seeded synthetic trace corpus with known ground truth.

An authentic sample carries one cardiac sinusoid shared by every facial
region: a common phase random walk (slow rate drift) with small
per-region amplitude and phase offsets. Its fake counterpart has the same
frequency, amplitudes, walk statistics and noise level, but each region
walks independently and gets per-frame phase jitter, so the regions stop
agreeing with each other while their marginal statistics barely move.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..ingest.roi import Region, RegionTrace, RoiSpec
from ..ingest.traces_io import cell_name, write_traces

REGIONS = (Region.LEFT_CHEEK, Region.MID_REGION, Region.RIGHT_CHEEK)
PULSE_WEIGHTS = np.array([0.33, 0.77, 0.53])  # normalised RGB pulsatility of skin
PULSE_DEPTH = 0.01  # relative colour modulation per unit of pulse amplitude


@dataclass(frozen=True)
class SynthParams:
    fps: float = 30.0
    n_frames: int = 600
    f_low: float = 0.9
    f_high: float = 1.6
    amplitude: float = 1.0
    amp_jitter: float = 0.1      # relative, authentic and fake alike
    phase_jitter: float = 0.1    # fraction of a half cycle, authentic offsets
    noise: float = 0.1           # additive noise std relative to amplitude
    walk_step: float = 0.35      # fake phase random-walk step (rad per frame)
    frame_jitter: float = 0.14   # fake per-frame phase jitter (rad)
    n_cells: int = 32
    cell_noise: float = 0.3

    def to_dict(self):
        return asdict(self)


def _rgb(pulse, base, noise, rng):
    """Colour trace modulated by ``pulse``; ``noise`` is relative to the
    per-channel pulse amplitude."""
    n = len(pulse)
    chan = base * PULSE_WEIGHTS * PULSE_DEPTH
    vals = base[None, :] + chan[None, :] * (pulse[:, None] + rng.normal(0, noise, (n, 3)))
    return np.clip(vals, 0, 255)


def _trace(region, rgb, fps):
    return RegionTrace(rgb[:, 0], rgb[:, 1], rgb[:, 2], RoiSpec(Region(region)), fps)


def _phase_paths(n, fake, k, params: SynthParams, rng):
    """(k, n) phase paths. Authentic channels share one random walk (slow
    heart-rate drift) up to small constant offsets; fake channels walk
    independently and carry per-frame jitter."""
    if not fake:
        walk = np.cumsum(rng.normal(0, params.walk_step, n))
        offs = rng.uniform(-1, 1, k) * params.phase_jitter * np.pi
        return offs[:, None] + walk[None, :]
    start = rng.uniform(0, 2 * np.pi, k)
    walk = np.cumsum(rng.normal(0, params.walk_step, (k, n)), axis=1)
    return start[:, None] + walk + rng.normal(0, params.frame_jitter, (k, n))


def synth_pair(seed, params: SynthParams = SynthParams()):
    """(authentic, fake) trace dicts keyed by region / cell name."""
    rng = np.random.default_rng(seed)
    n, fps = params.n_frames, params.fps
    t = np.arange(n) / fps
    f = rng.uniform(params.f_low, params.f_high)
    base = rng.uniform([150, 100, 80], [200, 140, 120])
    region_amp = params.amplitude * rng.uniform(1 - params.amp_jitter, 1 + params.amp_jitter, 3)
    cell_amp = params.amplitude * rng.uniform(1 - params.amp_jitter, 1 + params.amp_jitter, params.n_cells)
    noise = params.noise * params.amplitude
    cell_noise = params.cell_noise * params.amplitude
    carrier = 2 * np.pi * f * t
    out = []
    for fake in (False, True):
        phases = _phase_paths(n, fake, 3, params, rng)
        traces = {}
        for r, reg in enumerate(REGIONS):
            pulse = region_amp[r] * np.sin(carrier + phases[r])
            traces[reg.value] = _trace(reg.value, _rgb(pulse, base, noise, rng), fps)
        mid_phase = phases[1]
        if fake:
            cell_phase = mid_phase[None, :] + rng.normal(0, params.frame_jitter, (params.n_cells, n))
        else:
            cell_phase = mid_phase[None, :] + rng.uniform(-1, 1, (params.n_cells, 1)) * params.phase_jitter * np.pi
        for j in range(params.n_cells):
            pulse = cell_amp[j] * np.sin(carrier + cell_phase[j])
            traces[cell_name(j)] = _trace("mid_region", _rgb(pulse, base, cell_noise, rng), fps)
        out.append(traces)
    return out[0], out[1]


def gen_synthetic_corpus(out_dir, n_pairs, seed=0, params: SynthParams = SynthParams()):
    """Write 2 * n_pairs trace CSVs and ``manifest.json``; return the manifest dict."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = np.random.SeedSequence(seed).generate_state(n_pairs)
    entries = []
    for i in range(n_pairs):
        auth, fake = synth_pair(int(seeds[i]), params)
        for label, traces in (("authentic", auth), ("fake", fake)):
            name = f"pair{i:04d}_{label}.csv"
            write_traces(out_dir / name, traces)
            entries.append({"path": name, "label": label, "source": "synthetic", "pair": i})
    manifest = {"entries": entries, "seed": seed, "params": params.to_dict(), "fps": params.fps}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
