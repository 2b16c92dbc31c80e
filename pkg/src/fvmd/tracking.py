"""Keypoint trajectories: grid queries, a pyramidal Lucas-Kanade tracker and the
FVMDTRAJ binary interchange format for externally computed tracks.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import cv2
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import BadGrid, CorruptTrajectories, FormatError, WriteError
from .video_io import Clip, to_gray

TRAJ_MAGIC = b"FVMDTRAJ"
TRAJ_VERSION = 1
_TRAJ_HEADER = struct.Struct("<8sIIII")


@dataclass(frozen=True)
class QueryGrid:
    points: np.ndarray  # (N, 2) float32, row-major over the grid
    grid_side: int
    width: int
    height: int

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


def grid_side_of(n_points: int) -> int:
    g = math.isqrt(n_points) if n_points > 0 else 0
    if g * g != n_points or g == 0:
        raise BadGrid(f"number of query points must be a positive perfect square, got {n_points}")
    return g


def init_grid(n_points: int, width: int, height: int) -> QueryGrid:
    """Place ``n_points`` queries at the cell centres of a square grid."""
    g = grid_side_of(n_points)
    if width <= 0 or height <= 0:
        raise BadGrid(f"frame size must be positive, got {width}x{height}")
    xs = (np.arange(g) + 0.5) * (width / g)
    ys = (np.arange(g) + 0.5) * (height / g)
    gx, gy = np.meshgrid(xs, ys)
    points = np.stack([gx.ravel(), gy.ravel()], axis=-1).astype(np.float32)
    return QueryGrid(points, g, width, height)


@dataclass(frozen=True)
class LkParams:
    pyramid_levels: int = 3
    window_radius: int = 7
    max_iterations: int = 30
    convergence_epsilon: float = 0.01
    # minimum eigenvalue of the structure tensor, normalised by window area
    min_eigen_threshold: float = 1e-4

    def __post_init__(self):
        if self.pyramid_levels < 1 or self.max_iterations < 1:
            raise ValueError("pyramid_levels and max_iterations must be positive")
        if self.window_radius < 2:
            raise ValueError(f"window_radius must be >= 2, got {self.window_radius}")
        if self.convergence_epsilon <= 0 or self.min_eigen_threshold <= 0:
            raise ValueError("convergence_epsilon and min_eigen_threshold must be positive")


@dataclass
class TrajectorySet:
    coords: np.ndarray  # (F, N, 2) float32, x before y
    source: str = "builtin_lk"
    grid_side: int = 0
    source_id: str = ""
    start_frame: int = 0

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float32)
        if coords.ndim != 3 or coords.shape[-1] != 2 or coords.shape[0] < 2:
            raise CorruptTrajectories(f"trajectories must be (F>=2, N, 2), got {coords.shape}")
        if not np.isfinite(coords).all():
            raise CorruptTrajectories("trajectories contain non-finite values")
        g = grid_side_of(coords.shape[1])
        if self.grid_side and self.grid_side != g:
            raise BadGrid(f"grid_side {self.grid_side} inconsistent with N={coords.shape[1]}")
        self.grid_side = g
        self.coords = coords

    @property
    def n_frames(self) -> int:
        return self.coords.shape[0]

    @property
    def n_points(self) -> int:
        return self.coords.shape[1]


def track_builtin(clip, grid: QueryGrid, params: LkParams = LkParams()) -> TrajectorySet:
    """Track ``grid`` through ``clip`` frame to frame with pyramidal Lucas-Kanade.

    Points whose window is textureless (or that leave the image) keep moving
    with their last displacement, so coordinates stay finite and plausible.
    Well-conditioned points between byte-identical frames get exactly zero flow.
    """
    if isinstance(clip, Clip):
        source_id, start, frames = clip.source_id, clip.start_frame, clip.frames
    else:
        source_id, start, frames = "", 0, np.asarray(clip)
    gray = to_gray(frames) if frames.ndim == 4 else np.asarray(frames, dtype=np.uint8)
    n_frames = gray.shape[0]

    win = 2 * params.window_radius + 1
    criteria = (
        cv2.TERM_CRITERIA_COUNT | cv2.TERM_CRITERIA_EPS,
        params.max_iterations,
        params.convergence_epsilon,
    )
    coords = np.empty((n_frames, grid.n_points, 2), dtype=np.float32)
    coords[0] = grid.points
    last = np.zeros((grid.n_points, 2), dtype=np.float32)
    for t in range(1, n_frames):
        prev_pts = coords[t - 1]
        nxt, status, _ = cv2.calcOpticalFlowPyrLK(
            gray[t - 1],
            gray[t],
            prev_pts.reshape(-1, 1, 2),
            None,
            winSize=(win, win),
            maxLevel=params.pyramid_levels - 1,
            criteria=criteria,
            minEigThreshold=params.min_eigen_threshold,
        )
        if np.array_equal(gray[t - 1], gray[t]):
            # exact solution; the solver would leave ~1e-7 px of round-off
            step = np.zeros_like(last)
        else:
            step = nxt.reshape(-1, 2) - prev_pts
        bad = (status.ravel() == 0) | ~np.isfinite(step).all(axis=1)
        step[bad] = last[bad]
        coords[t] = prev_pts + step
        last = step
    return TrajectorySet(coords, "builtin_lk", grid.grid_side, source_id, start)


class KeypointTracker(TransformerMixin, BaseEstimator):
    """Transform a stack of clips (n, F, H, W[, C]) into trajectories (n, F, N, 2).

    Stateless; ``fit`` only validates parameters.
    """

    def __init__(
        self,
        n_points=400,
        pyramid_levels=3,
        window_radius=7,
        max_iterations=30,
        convergence_epsilon=0.01,
    ):
        self.n_points = n_points
        self.pyramid_levels = pyramid_levels
        self.window_radius = window_radius
        self.max_iterations = max_iterations
        self.convergence_epsilon = convergence_epsilon

    def _params(self):
        return LkParams(
            self.pyramid_levels,
            self.window_radius,
            self.max_iterations,
            self.convergence_epsilon,
        )

    def fit(self, X=None, y=None):
        grid_side_of(self.n_points)
        self._params()
        return self

    def transform(self, X):
        X = np.asarray(X)
        if X.ndim not in (4, 5) or X.dtype != np.uint8:
            raise ValueError(f"expected uint8 clips of shape (n, F, H, W[, C]), got {X.dtype} {X.shape}")
        params = self._params()
        height, width = X.shape[2], X.shape[3]
        grid = init_grid(self.n_points, width, height)
        return np.stack([track_builtin(clip, grid, params).coords for clip in X])


def _index_path(path: Path) -> Path:
    return path.with_name(path.name + ".index.json")


def export_trajectories(sets: Sequence[TrajectorySet], path) -> None:
    """Write trajectories as FVMDTRAJ plus a JSON sidecar index."""
    sets = list(sets)
    if not sets:
        raise FormatError("refusing to write an FVMDTRAJ file with zero clips")
    F, N = sets[0].coords.shape[:2]
    for s in sets:
        if s.coords.shape != (F, N, 2):
            raise FormatError(f"all clips must share shape ({F}, {N}, 2), got {s.coords.shape}")
    path = Path(path)
    header = _TRAJ_HEADER.pack(TRAJ_MAGIC, TRAJ_VERSION, len(sets), F, N)
    index = {
        "version": TRAJ_VERSION,
        "clips": [
            {"source_id": s.source_id, "start_frame": int(s.start_frame), "source": s.source}
            for s in sets
        ],
    }
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            for s in sets:
                fh.write(np.ascontiguousarray(s.coords, dtype="<f4").tobytes())
        _index_path(path).write_text(json.dumps(index, indent=1))
    except OSError as exc:
        raise WriteError(f"cannot write {path}: {exc}") from exc


def read_trajectory_array(path) -> np.ndarray:
    """Decode an FVMDTRAJ file into a (clips, F, N, 2) float32 array."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if len(data) < _TRAJ_HEADER.size:
        raise FormatError(f"{path}: file shorter than the FVMDTRAJ header")
    magic, version, n_clips, F, N = _TRAJ_HEADER.unpack_from(data)
    if magic != TRAJ_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != TRAJ_VERSION:
        raise FormatError(f"{path}: unsupported FVMDTRAJ version {version}")
    if n_clips == 0:
        raise FormatError(f"{path}: zero clips")
    expected = n_clips * F * N * 2 * 4
    payload = data[_TRAJ_HEADER.size:]
    if len(payload) != expected:
        raise CorruptTrajectories(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}"
        )
    arr = np.frombuffer(payload, dtype="<f4").reshape(n_clips, F, N, 2).astype(np.float32)
    if not np.isfinite(arr).all():
        raise CorruptTrajectories(f"{path}: non-finite coordinates")
    return arr


def import_trajectories(path) -> List[TrajectorySet]:
    path = Path(path)
    arr = read_trajectory_array(path)
    clips: List[Optional[dict]] = [None] * arr.shape[0]
    idx_path = _index_path(path)
    if idx_path.exists():
        meta = json.loads(idx_path.read_text()).get("clips", [])
        if len(meta) == arr.shape[0]:
            clips = meta
    try:
        g = grid_side_of(arr.shape[2])
    except BadGrid as exc:
        raise FormatError(f"{path}: {exc}") from exc
    out = []
    for i, coords in enumerate(arr):
        m = clips[i] or {}
        out.append(
            TrajectorySet(
                coords,
                source="imported",
                grid_side=g,
                source_id=str(m.get("source_id", "")),
                start_frame=int(m.get("start_frame", 0)),
            )
        )
    return out
