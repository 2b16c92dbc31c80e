"""Frechet Video Motion Distance: motion features from keypoint trajectories,
compared between video sets with a Gaussian Frechet distance."""

__version__ = "0.1.0"

from .frechet import FrechetMotionDistance, FvmdScore, GaussianStats, fit_gaussian, frechet_distance, fvmd, sqrtm_psd
from .motion_features import MotionFeatureExtractor, VolumeSpec, extract_feature
from .tracking import KeypointTracker, LkParams, TrajectorySet, init_grid, track_builtin
from .video_io import ClipSpec, FrameSequence, load_frames, preprocess, segment

__all__ = [
    "ClipSpec",
    "FrameSequence",
    "FrechetMotionDistance",
    "FvmdScore",
    "GaussianStats",
    "KeypointTracker",
    "LkParams",
    "MotionFeatureExtractor",
    "TrajectorySet",
    "VolumeSpec",
    "extract_feature",
    "fit_gaussian",
    "frechet_distance",
    "fvmd",
    "init_grid",
    "load_frames",
    "preprocess",
    "segment",
    "sqrtm_psd",
    "track_builtin",
]
