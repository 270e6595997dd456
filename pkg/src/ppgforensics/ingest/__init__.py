"""Frames, landmarks, facial ROIs and segments: everything before the signal."""
from .distort import distort, gaussian_blur, median_filter
from .frames import FrameSequence, load_frames, save_frames
from .landmarks import LandmarkSet, load_landmarks, reference_face, save_landmarks
from .rectify import rectify_roi
from .roi import (Region, RegionTrace, RoiSpec, Scale, SIGNAL_REGIONS, face_traces,
                  polygon_mask, region_trace, roi_polygon)
from .segments import SegmentConfig, Segmentation, segmentize, split_traces
from .traces_io import cell_name, cells_from_traces, read_traces, write_traces

__all__ = [
    "FrameSequence", "LandmarkSet", "Region", "RegionTrace", "RoiSpec", "Scale",
    "SIGNAL_REGIONS", "SegmentConfig", "Segmentation", "cell_name", "cells_from_traces",
    "distort", "face_traces", "gaussian_blur", "load_frames", "load_landmarks",
    "median_filter", "polygon_mask", "read_traces", "rectify_roi", "reference_face",
    "region_trace", "roi_polygon", "save_frames", "save_landmarks", "segmentize",
    "split_traces", "write_traces",
]
