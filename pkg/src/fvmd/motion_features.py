"""Motion features from keypoint trajectories.

Trajectories become velocity and acceleration fields (first differences with
a zero frame in front), each vector is split into a clipped magnitude and a
full-circle angle, both are quantized, and per spatio-temporal volume the
quantized vectors are summarised either as a 72-bin joint (angle x magnitude)
count histogram or as an 8-bin angle histogram accumulating magnitude.

All array helpers accept arbitrary leading batch axes, so a whole stack of
clips (n, F, N, 2) is processed in one vectorised pass.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import BadVolumeSpec, FormatError, KindError
from .tracking import TrajectorySet, grid_side_of

MAX_MAGNITUDE = 255.0
N_ANGLE_BINS = 8
N_MAG_BINS = 9
ANGLE_BIN_WIDTH = math.pi / 4

FIELDS = ("velocity", "acceleration", "combined")
HISTS = ("1d", "2d")
MAGNITUDE_MODES = ("quantized", "raw")

FEAT_MAGIC = b"FVMDFEAT"
FEAT_VERSION = 1
_FEAT_HEADER = struct.Struct("<8sIII")


@dataclass(frozen=True)
class VolumeSpec:
    frames: int = 4  # f
    side: int = 5  # k

    def check(self, n_frames: int, grid_side: int) -> None:
        if self.frames < 1 or self.side < 1:
            raise BadVolumeSpec(f"volume dimensions must be positive, got {self}")
        if n_frames % self.frames:
            raise BadVolumeSpec(f"volume frames {self.frames} does not divide F={n_frames}")
        if grid_side % self.side:
            raise BadVolumeSpec(f"volume side {self.side} does not divide grid side {grid_side}")


@dataclass
class VectorField:
    values: np.ndarray  # (..., F, N, 2)
    kind: str


@dataclass
class PolarField:
    magnitude: np.ndarray  # clipped to [0, 255]
    angle: np.ndarray  # [0, 2*pi)


@dataclass
class QuantizedField:
    mag_bin: np.ndarray  # ints in [0, 8]
    angle_bin: np.ndarray  # ints in [0, 7]


@dataclass
class MotionFeature:
    data: np.ndarray
    layout: Tuple[int, int, int, int]  # (F/f, g/k, g/k, B) of one field
    fields: str
    hist: str

    def __len__(self):
        return self.data.shape[-1]


def feature_length(n_frames: int, grid_side: int, spec: VolumeSpec, fields: str, hist: str) -> int:
    spec.check(n_frames, grid_side)
    per_field = (n_frames // spec.frames) * (grid_side // spec.side) ** 2
    per_field *= N_ANGLE_BINS if hist == "1d" else N_ANGLE_BINS * N_MAG_BINS
    return 2 * per_field if fields == "combined" else per_field


def _coords(traj) -> np.ndarray:
    if isinstance(traj, TrajectorySet):
        return traj.coords
    return np.asarray(traj)


def _first_difference(x: np.ndarray) -> np.ndarray:
    out = np.zeros(x.shape, dtype=np.float64)
    out[..., 1:, :, :] = x[..., 1:, :, :] - x[..., :-1, :, :]
    return out


def velocity_field(traj) -> VectorField:
    """Per-frame displacement of every keypoint; frame 0 is zero padding."""
    coords = _coords(traj).astype(np.float64)
    return VectorField(_first_difference(coords), "velocity")


def acceleration_field(vel: VectorField) -> VectorField:
    """First difference of a velocity field, zero-padded at frame 0.

    The padding row of the velocity is differenced like any other, so
    ``A[1] == V[1]``.
    """
    if vel.kind != "velocity":
        raise KindError(f"acceleration needs a velocity field, got {vel.kind!r}")
    return VectorField(_first_difference(vel.values), "acceleration")


def polar_decompose(field: VectorField) -> PolarField:
    v = field.values
    x, y = v[..., 0], v[..., 1]
    rho = np.minimum(np.hypot(x, y), MAX_MAGNITUDE)
    phi = np.mod(np.arctan2(y, x), 2 * math.pi)
    # mod can land exactly on 2*pi for tiny negative angles; zero vectors are pinned to 0
    phi[(phi >= 2 * math.pi) | ((x == 0) & (y == 0))] = 0.0
    return PolarField(rho, phi)


def quantize(polar: PolarField) -> QuantizedField:
    mag = np.floor(np.log2(1.0 + polar.magnitude) + 0.5).astype(np.int64)
    ang = np.floor(polar.angle / ANGLE_BIN_WIDTH).astype(np.int64) % N_ANGLE_BINS
    return QuantizedField(mag, ang)


def _volume_index(n_frames: int, grid_side: int, spec: VolumeSpec) -> np.ndarray:
    """(F, N) volume id: temporal-major, then block row, then block column."""
    spec.check(n_frames, grid_side)
    n_blocks = grid_side // spec.side
    t = np.arange(n_frames) // spec.frames
    j = np.arange(grid_side * grid_side)
    by = (j // grid_side) // spec.side
    bx = (j % grid_side) // spec.side
    return (t[:, None] * n_blocks + by[None, :]) * n_blocks + bx[None, :]


def _histogram(keys: np.ndarray, weights, n_bins_per_sample: int) -> np.ndarray:
    batch = keys.shape[:-2]
    n = int(np.prod(batch)) if batch else 1
    flat = keys.reshape(n, -1) + (np.arange(n) * n_bins_per_sample)[:, None]
    w = None if weights is None else np.asarray(weights, dtype=np.float64).reshape(n, -1).ravel()
    counts = np.bincount(flat.ravel(), weights=w, minlength=n * n_bins_per_sample)
    return counts.astype(np.float64).reshape(*batch, n_bins_per_sample)


def _layout(n_frames, grid_side, spec, n_bins):
    return (n_frames // spec.frames, grid_side // spec.side, grid_side // spec.side, n_bins)


def histogram_2d(q: QuantizedField, spec: VolumeSpec = VolumeSpec()) -> MotionFeature:
    """Count (angle, magnitude) pairs per volume; bin index is ``angle * 9 + magnitude``."""
    n_frames, n_points = q.mag_bin.shape[-2:]
    g = grid_side_of(n_points)
    vol = _volume_index(n_frames, g, spec)
    n_bins = N_ANGLE_BINS * N_MAG_BINS
    layout = _layout(n_frames, g, spec, n_bins)
    keys = vol * n_bins + q.angle_bin * N_MAG_BINS + q.mag_bin
    data = _histogram(keys, None, int(np.prod(layout)))
    return MotionFeature(data, layout, "", "2d")


def histogram_1d(q: QuantizedField, spec: VolumeSpec = VolumeSpec(), magnitudes=None) -> MotionFeature:
    """Sum magnitude into 8 angle bins per volume.

    ``magnitudes`` overrides the summed quantity (the quantized bins by
    default), e.g. with raw clipped magnitudes.
    """
    n_frames, n_points = q.mag_bin.shape[-2:]
    g = grid_side_of(n_points)
    vol = _volume_index(n_frames, g, spec)
    layout = _layout(n_frames, g, spec, N_ANGLE_BINS)
    keys = vol * N_ANGLE_BINS + q.angle_bin
    weights = q.mag_bin if magnitudes is None else magnitudes
    data = _histogram(keys, np.broadcast_to(weights, keys.shape), int(np.prod(layout)))
    return MotionFeature(data, layout, "", "1d")


def _field_feature(field: VectorField, hist: str, spec: VolumeSpec, magnitude: str) -> MotionFeature:
    polar = polar_decompose(field)
    q = quantize(polar)
    if hist == "2d":
        feat = histogram_2d(q, spec)
    else:
        feat = histogram_1d(q, spec, polar.magnitude if magnitude == "raw" else None)
    feat.fields = field.kind
    return feat


def extract_feature(
    traj,
    fields: str = "combined",
    hist: str = "1d",
    spec: VolumeSpec = VolumeSpec(),
    magnitude: str = "quantized",
) -> MotionFeature:
    """Motion feature of one trajectory set, or of a (..., F, N, 2) stack.

    ``combined`` concatenates the velocity feature before the acceleration one.
    """
    if fields not in FIELDS:
        raise ValueError(f"fields must be one of {FIELDS}, got {fields!r}")
    if hist not in HISTS:
        raise ValueError(f"hist must be one of {HISTS}, got {hist!r}")
    if magnitude not in MAGNITUDE_MODES:
        raise ValueError(f"magnitude must be one of {MAGNITUDE_MODES}, got {magnitude!r}")
    vel = velocity_field(traj)
    if fields == "velocity":
        return _field_feature(vel, hist, spec, magnitude)
    acc = acceleration_field(vel)
    if fields == "acceleration":
        return _field_feature(acc, hist, spec, magnitude)
    fv = _field_feature(vel, hist, spec, magnitude)
    fa = _field_feature(acc, hist, spec, magnitude)
    return MotionFeature(np.concatenate([fv.data, fa.data], axis=-1), fv.layout, "combined", hist)


class MotionFeatureExtractor(TransformerMixin, BaseEstimator):
    """Map trajectories (n, F, N, 2) to motion features (n, d).

    Parameters
    ----------
    fields : {'combined', 'velocity', 'acceleration'}
    hist : {'1d', '2d'}
    volume_frames, volume_side : int
        Temporal and spatial extent (in frames and grid points) of one
        histogram volume.
    magnitude : {'quantized', 'raw'}
        Quantity accumulated by the 1D histogram.
    """

    def __init__(self, fields="combined", hist="1d", volume_frames=4, volume_side=5, magnitude="quantized"):
        self.fields = fields
        self.hist = hist
        self.volume_frames = volume_frames
        self.volume_side = volume_side
        self.magnitude = magnitude

    @property
    def volume_spec(self) -> VolumeSpec:
        return VolumeSpec(self.volume_frames, self.volume_side)

    def _check_X(self, X):
        if isinstance(X, (list, tuple)) and X and isinstance(X[0], TrajectorySet):
            X = np.stack([t.coords for t in X])
        X = np.asarray(X)
        if X.ndim != 4 or X.shape[-1] != 2:
            raise ValueError(f"expected trajectories of shape (n, F, N, 2), got {X.shape}")
        if not np.isfinite(X).all():
            raise ValueError("trajectories contain non-finite values")
        self.volume_spec.check(X.shape[1], grid_side_of(X.shape[2]))
        return X

    def fit(self, X, y=None):
        X = self._check_X(X)
        self.n_frames_, self.n_points_ = X.shape[1], X.shape[2]
        self.n_features_out_ = feature_length(
            X.shape[1], grid_side_of(X.shape[2]), self.volume_spec, self.fields, self.hist
        )
        return self

    def transform(self, X):
        X = self._check_X(X)
        return extract_feature(X, self.fields, self.hist, self.volume_spec, self.magnitude).data


def write_features(path, X) -> None:
    """Dump a (rows, cols) feature matrix as FVMDFEAT (float32, row-major)."""
    X = np.atleast_2d(np.asarray(X, dtype="<f4"))
    if X.ndim != 2:
        raise FormatError(f"feature matrix must be 2-D, got {X.shape}")
    with open(path, "wb") as fh:
        fh.write(_FEAT_HEADER.pack(FEAT_MAGIC, FEAT_VERSION, X.shape[0], X.shape[1]))
        fh.write(np.ascontiguousarray(X).tobytes())


def read_features(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _FEAT_HEADER.size:
        raise FormatError(f"{path}: truncated FVMDFEAT header")
    magic, version, rows, cols = _FEAT_HEADER.unpack_from(data)
    if magic != FEAT_MAGIC or version != FEAT_VERSION:
        raise FormatError(f"{path}: not an FVMDFEAT v{FEAT_VERSION} file")
    payload = data[_FEAT_HEADER.size:]
    if len(payload) != rows * cols * 4:
        raise FormatError(f"{path}: payload size does not match {rows}x{cols}")
    return np.frombuffer(payload, dtype="<f4").reshape(rows, cols).astype(np.float32)
