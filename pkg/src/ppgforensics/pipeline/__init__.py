"""Dataset harness, synthetic corpus, diagnostics and the command line."""
from .config import PipelineConfig, load_config
from .diagnostics import fisher_ratio, pca_project
from .harness import (DatasetManifest, EvalReport, ManifestEntry, VideoData, catch_report,
                      evaluate, load_video, run_catch, split_dataset)
from .synth import SynthParams, gen_synthetic_corpus, synth_pair

__all__ = [
    "DatasetManifest", "EvalReport", "ManifestEntry", "PipelineConfig", "SynthParams", "VideoData",
    "catch_report", "evaluate", "fisher_ratio", "gen_synthetic_corpus", "load_config", "load_video",
    "pca_project", "run_catch", "split_dataset", "synth_pair",
]
