"""End-to-end plumbing: videos -> clips -> trajectories -> features -> score."""
from __future__ import annotations

import hashlib
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .config import RunConfig
from .errors import DimensionMismatch, FVMDError, NoFrames
from .frechet import fvmd
from .motion_features import extract_feature
from .tracking import TrajectorySet, import_trajectories, init_grid, track_builtin
from .video_io import (
    CANONICAL_SIZE,
    FrameSequence,
    iter_segments,
    list_videos,
    load_frames,
    preprocess,
)

log = logging.getLogger(__name__)


class StageTimer:
    """Accumulates wall-clock seconds per named stage."""

    def __init__(self):
        self.seconds: Dict[str, float] = {}

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.seconds[name] = self.seconds.get(name, 0.0) + time.perf_counter() - t0


class TrajectoryCache:
    """Memoises tracking by clip content; tracking is deterministic, so reuse is exact."""

    def __init__(self):
        self._store: Dict[bytes, np.ndarray] = {}
        self.hits = 0

    @staticmethod
    def key(frames: np.ndarray) -> bytes:
        h = hashlib.blake2b(digest_size=20)
        h.update(str(frames.shape).encode())
        h.update(np.ascontiguousarray(frames).data)
        return h.digest()

    def get(self, frames):
        coords = self._store.get(self.key(frames))
        if coords is not None:
            self.hits += 1
        return coords

    def put(self, frames, coords):
        self._store[self.key(frames)] = coords


def track_video(seq: FrameSequence, config: RunConfig, cache: Optional[TrajectoryCache] = None) -> List[TrajectorySet]:
    """Track every clip of one (already canonical-size) video."""
    grid = init_grid(config.grid_n, seq.width, seq.height)
    params = config.lk_params
    out = []
    for clip in iter_segments(seq, config.clip_spec):
        coords = cache.get(clip.frames) if cache is not None else None
        if coords is None:
            traj = track_builtin(clip, grid, params)
            if cache is not None:
                cache.put(clip.frames, traj.coords)
        else:
            traj = TrajectorySet(coords, "builtin_lk", grid.grid_side, clip.source_id, clip.start_frame)
        out.append(traj)
    return out


def track_videos(
    videos: Sequence[FrameSequence],
    config: RunConfig,
    cache: Optional[TrajectoryCache] = None,
    skip_errors: bool = False,
) -> List[TrajectorySet]:
    """Track all clips of all videos; output order follows input order."""

    def one(seq):
        try:
            if seq.width != CANONICAL_SIZE or seq.height != CANONICAL_SIZE:
                seq = preprocess(seq)
            return track_video(seq, config, cache)
        except FVMDError as exc:
            if not skip_errors:
                raise
            log.warning("skipping video %s: %s", seq.id, exc)
            return None

    if config.workers > 1 and cache is None:
        with ThreadPoolExecutor(config.workers) as pool:
            results = list(pool.map(one, videos))
    else:
        results = [one(v) for v in videos]
    if skip_errors and videos and all(r is None for r in results):
        raise NoFrames("every video failed to track")
    return [t for r in results if r for t in r]


def trajectory_features(trajs: Sequence[TrajectorySet], config: RunConfig) -> np.ndarray:
    if not trajs:
        return np.empty((0, config.feature_dim))
    coords = np.stack([t.coords for t in trajs])
    if coords.shape[1:3] != (config.frames_per_clip, config.grid_n):
        raise DimensionMismatch(
            f"trajectories are {coords.shape[1]}x{coords.shape[2]}, config expects "
            f"{config.frames_per_clip}x{config.grid_n}"
        )
    return extract_feature(coords, config.fields, config.hist, config.volume_spec, config.magnitude).data


def video_features(videos, config: RunConfig, cache: Optional[TrajectoryCache] = None) -> np.ndarray:
    return trajectory_features(track_videos(videos, config, cache), config)


def iter_video_set(video_set_dir, skip_errors: bool = True):
    """Yield canonical-size videos from a video-set directory, optionally skipping bad ones."""
    for d in list_videos(video_set_dir):
        try:
            yield preprocess(load_frames(d))
        except FVMDError as exc:
            if not skip_errors:
                raise
            log.warning("skipping video %s: %s", d.name, exc)


@dataclass
class SourceResult:
    trajectories: List[TrajectorySet]
    kind: str  # "videos" or "trajectories"
    n_videos: int = 0


def load_source(source, config: RunConfig, timer: StageTimer) -> SourceResult:
    """Trajectories for a video-set directory (tracked) or an FVMDTRAJ file (imported)."""
    path = Path(source)
    if path.is_file():
        with timer.stage("import"):
            return SourceResult(import_trajectories(path), "trajectories")
    if config.tracker == "import":
        raise NoFrames(f"{path}: tracker=import needs an FVMDTRAJ file")
    if not path.is_dir():
        raise NoFrames(f"{path} is neither a video-set directory nor an FVMDTRAJ file")
    with timer.stage("load"):
        videos = list(iter_video_set(path))
    if not videos:
        raise NoFrames(f"{path}: no readable videos")
    with timer.stage("track"):
        trajs = track_videos(videos, config, skip_errors=True)
    return SourceResult(trajs, "videos", len(videos))


def compute_report(gen_source, ref_source, config: RunConfig) -> dict:
    """Score two sources and return a JSON-serialisable report."""
    config.validate()
    t0 = time.perf_counter()
    timer = StageTimer()
    gen = load_source(gen_source, config, timer)
    ref = load_source(ref_source, config, timer)
    with timer.stage("features"):
        Xg = trajectory_features(gen.trajectories, config)
        Xr = trajectory_features(ref.trajectories, config)
    with timer.stage("frechet"):
        score = fvmd(Xg, Xr, config.eps)
    wall = time.perf_counter() - t0
    score.feature_config = config.feature_config()
    score.tracker_source = "+".join(sorted({t.source for t in gen.trajectories + ref.trajectories}))
    score.library_version = __version__
    return {
        "score": score.to_dict(),
        "clips": {"gen": len(gen.trajectories), "ref": len(ref.trajectories)},
        "sources": {
            "gen": {"path": str(gen_source), "kind": gen.kind},
            "ref": {"path": str(ref_source), "kind": ref.kind},
        },
        "timings": timer.seconds,
        "wall_clock": wall,
        "config": config.to_dict(),
    }
