"""Frame-directory loading, canonical resizing and clip segmentation.

A video on disk is a directory of PNG/PPM frames whose lexicographic order is
the temporal order. A video set is a directory of such directories.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, InconsistentFrames, NoFrames, TooShort

CANONICAL_SIZE = 256
FRAME_SUFFIXES = (".png", ".ppm", ".pgm", ".pnm")


@dataclass
class FrameSequence:
    """Decoded video, ``frames`` has shape (L, H, W, C) with C in {1, 3}."""

    id: str
    frames: np.ndarray

    def __post_init__(self):
        frames = np.asarray(self.frames)
        if frames.ndim == 3:
            frames = frames[..., None]
        if frames.ndim != 4 or frames.shape[0] < 1:
            raise NoFrames(f"{self.id}: expected (L, H, W, C) frames, got {frames.shape}")
        if frames.shape[-1] not in (1, 3):
            raise InconsistentFrames(f"{self.id}: unsupported channel count {frames.shape[-1]}")
        if frames.dtype != np.uint8:
            raise InconsistentFrames(f"{self.id}: frames must be uint8, got {frames.dtype}")
        self.frames = frames

    def __len__(self):
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]


@dataclass(frozen=True)
class ClipSpec:
    frames_per_clip: int = 16
    stride: int = 1

    def __post_init__(self):
        if self.frames_per_clip < 2:
            raise ValueError(f"frames_per_clip must be >= 2, got {self.frames_per_clip}")
        if not 1 <= self.stride <= self.frames_per_clip:
            raise ValueError(
                f"stride must be in [1, {self.frames_per_clip}], got {self.stride}"
            )


@dataclass
class Clip:
    source_id: str
    start_frame: int
    frames: np.ndarray


def _decode(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            if im.mode in ("L", "I;16", "I", "1", "P", "LA"):
                im = im.convert("L") if im.mode != "P" else im.convert("RGB")
            elif im.mode != "RGB":
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode frame {path}: {exc}") from exc
    if arr.ndim == 2:
        arr = arr[..., None]
    return arr


def list_frame_files(directory) -> List[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise NoFrames(f"{directory} is not a directory")
    return sorted(
        p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in FRAME_SUFFIXES
    )


def load_frames(directory) -> FrameSequence:
    """Decode every frame of ``directory`` in filename order."""
    directory = Path(directory)
    files = list_frame_files(directory)
    if not files:
        raise NoFrames(f"no PNG/PPM frames in {directory}")
    frames = []
    for path in files:
        arr = _decode(path)
        if frames and arr.shape != frames[0].shape:
            raise InconsistentFrames(
                f"{path.name} has shape {arr.shape}, expected {frames[0].shape}"
            )
        frames.append(arr)
    return FrameSequence(directory.name, np.stack(frames))


def list_videos(video_set_dir) -> List[Path]:
    root = Path(video_set_dir)
    if not root.is_dir():
        raise NoFrames(f"{root} is not a directory")
    return sorted(p for p in root.iterdir() if p.is_dir())


def save_frames(seq: FrameSequence, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    width = max(5, len(str(len(seq))))
    for i, frame in enumerate(seq.frames):
        img = frame[..., 0] if frame.shape[-1] == 1 else frame
        Image.fromarray(img).save(directory / f"{i:0{width}d}.png")
    return directory


def _axis_weights(n_in: int, n_out: int):
    # half-pixel centres, edge-clamped
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    w = src - lo
    return lo, hi, w


def resize_bilinear(frames: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resize of a (..., H, W, C) uint8 stack, corner-aligned=False."""
    in_h, in_w = frames.shape[-3], frames.shape[-2]
    if (in_h, in_w) == (height, width):
        return frames.copy()
    x = frames.astype(np.float64)
    lo, hi, w = _axis_weights(in_h, height)
    w = w[:, None, None]
    x = x[..., lo, :, :] * (1.0 - w) + x[..., hi, :, :] * w
    lo, hi, w = _axis_weights(in_w, width)
    w = w[:, None]
    x = x[..., :, lo, :] * (1.0 - w) + x[..., :, hi, :] * w
    return np.clip(np.floor(x + 0.5), 0, 255).astype(np.uint8)


def preprocess(seq: FrameSequence, size: int = CANONICAL_SIZE) -> FrameSequence:
    """Resize every frame to ``size`` x ``size``; already-canonical input is returned as a copy."""
    return FrameSequence(seq.id, resize_bilinear(seq.frames, size, size))


def to_gray(frames: np.ndarray) -> np.ndarray:
    """Rec.601 luma rounded to nearest; accepts (..., H, W, C) and drops the channel axis."""
    frames = np.asarray(frames)
    if frames.shape[-1] == 1:
        return frames[..., 0].copy()
    # integer form of round-half-up(0.299 R + 0.587 G + 0.114 B), exact for uint8 input
    rgb = frames.astype(np.int32)
    luma = (299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2] + 500) // 1000
    return luma.astype(np.uint8)


def n_segments(length: int, spec: ClipSpec) -> int:
    if length < spec.frames_per_clip:
        return 0
    return (length - spec.frames_per_clip) // spec.stride + 1


def iter_segments(seq: FrameSequence, spec: ClipSpec) -> Iterator[Clip]:
    F = spec.frames_per_clip
    if len(seq) < F:
        raise TooShort(f"{seq.id}: {len(seq)} frames, need at least {F}")
    for i in range(n_segments(len(seq), spec)):
        start = i * spec.stride
        yield Clip(seq.id, start, seq.frames[start:start + F])


def segment(seq: FrameSequence, spec: ClipSpec) -> List[Clip]:
    """Cut ``seq`` into F-frame clips at the given stride, dropping the remainder."""
    return list(iter_segments(seq, spec))


def load_video_set(video_set_dir, size: int = CANONICAL_SIZE) -> List[FrameSequence]:
    return [preprocess(load_frames(d), size) for d in list_videos(video_set_dir)]


def stack_clips(clips: Sequence[Clip]) -> np.ndarray:
    return np.stack([c.frames for c in clips])
