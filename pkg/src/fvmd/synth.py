"""Synthetic videos with known motion: textured sprites over a textured, static
background, moving under a chosen law. Everything wraps around the frame
edges, so content never leaves the image.
"""
from __future__ import annotations

import math
from typing import List, Optional, Tuple

import numpy as np

from .perturb import derive_rng
from .video_io import CANONICAL_SIZE, FrameSequence

MOTIONS = ("constant", "sinusoidal", "random_walk", "static")

# per-sprite parameter ranges, sampled uniformly
DEFAULT_LAW = {
    "speed": (0.5, 2.0),  # constant: px/frame
    "amplitude": (12.0, 24.0),  # sinusoidal: px
    "period": (4.0, 8.0),  # sinusoidal: frames
    "walk_sigma": 1.5,  # random walk: std of the velocity increments
}


def random_texture(rng: np.random.Generator, height: int, width: int, sigma: float = 1.5) -> np.ndarray:
    """Smooth noise stretched to the full [0, 255] float range."""
    noise = rng.random((height, width))
    # periodic Gaussian blur, so the texture tiles seamlessly under wrap-around shifts
    fy = np.fft.fftfreq(height)[:, None]
    fx = np.fft.rfftfreq(width)[None, :]
    transfer = np.exp(-2 * (math.pi * sigma) ** 2 * (fx**2 + fy**2))
    tex = np.fft.irfft2(np.fft.rfft2(noise) * transfer, s=(height, width))
    lo, hi = float(tex.min()), float(tex.max())
    return (tex - lo) * (255.0 / max(hi - lo, 1e-6))


def shift_wrap(img: np.ndarray, dx: float, dy: float) -> np.ndarray:
    """Translate content by (dx, dy) pixels with wrap-around; sub-pixel parts are bilinear."""
    ix, fx = int(math.floor(dx)), dx - math.floor(dx)
    iy, fy = int(math.floor(dy)), dy - math.floor(dy)
    out = np.roll(img, (iy, ix), axis=(0, 1))
    if fx:
        out = (1 - fx) * out + fx * np.roll(out, 1, axis=1)
    if fy:
        out = (1 - fy) * out + fy * np.roll(out, 1, axis=0)
    return out


def _subpixel(patch: np.ndarray, fx: float, fy: float) -> np.ndarray:
    out = patch
    if fx:
        out = out.copy()
        out[:, 1:] = (1 - fx) * patch[:, 1:] + fx * patch[:, :-1]
    if fy:
        src = out
        out = src.copy()
        out[1:, :] = (1 - fy) * src[1:, :] + fy * src[:-1, :]
    return out


def _paste_wrap(canvas: np.ndarray, premult: np.ndarray, alpha: np.ndarray, x: float, y: float) -> None:
    """Composite a zero-padded sprite whose interior origin lands at (x, y), wrapping at the edges."""
    ix, iy = math.floor(x), math.floor(y)
    fx, fy = x - ix, y - iy
    h, w = alpha.shape
    rows = (iy - 1 + np.arange(h)) % canvas.shape[0]
    cols = (ix - 1 + np.arange(w)) % canvas.shape[1]
    a = _subpixel(alpha, fx, fy)
    p = _subpixel(premult, fx, fy)
    region = np.ix_(rows, cols)
    canvas[region] = canvas[region] * (1 - a) + p


def _to_uint8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)


def translating_clip(
    velocity: Tuple[float, float],
    n_frames: int = 16,
    size: int = CANONICAL_SIZE,
    seed: int = 0,
) -> np.ndarray:
    """(F, H, W, 1) clip of a wrap-around texture moving at ``velocity`` px/frame."""
    tex = random_texture(derive_rng(seed, "translating"), size, size)
    vx, vy = velocity
    frames = [_to_uint8(shift_wrap(tex, vx * t, vy * t)) for t in range(n_frames)]
    return np.stack(frames)[..., None]


def _trajectory(motion: str, rng: np.random.Generator, n_frames: int, law: dict) -> np.ndarray:
    """(F, 2) offsets from the sprite's initial position."""
    t = np.arange(n_frames, dtype=np.float64)
    theta = rng.uniform(0, 2 * math.pi)
    direction = np.array([math.cos(theta), math.sin(theta)])
    if motion == "constant":
        speed = rng.uniform(*law["speed"])
        return t[:, None] * speed * direction
    if motion == "sinusoidal":
        amplitude = rng.uniform(*law["amplitude"])
        period = rng.uniform(*law["period"])
        phase = rng.uniform(0, 2 * math.pi)
        wave = np.sin(2 * math.pi * t / period + phase) - math.sin(phase)
        return amplitude * wave[:, None] * direction
    if motion == "random_walk":
        steps = rng.normal(0.0, law["walk_sigma"], size=(n_frames, 2))
        steps[0] = 0.0
        return np.cumsum(np.cumsum(steps, axis=0) * 0.5, axis=0)
    if motion == "static":
        return np.zeros((n_frames, 2))
    raise ValueError(f"unknown motion law {motion!r}; expected one of {MOTIONS}")


def render_video(
    motion: str,
    n_frames: int = 16,
    size: int = CANONICAL_SIZE,
    seed: int = 0,
    video_id: str = "video",
    n_sprites: Tuple[int, int] = (3, 5),
    sprite_side: Tuple[int, int] = (48, 80),
    channels: int = 3,
    law: dict = None,
    scene_seed: Optional[int] = None,
) -> FrameSequence:
    """Render one synthetic video whose sprites all follow ``motion``.

    Sprite count, size, texture, start position and motion parameters are
    drawn per video from a generator keyed by ``(seed, motion, video_id)``.
    With ``scene_seed`` the background comes from that seed instead, so
    videos rendered with the same value share one static scene.
    """
    if motion not in MOTIONS:
        raise ValueError(f"unknown motion law {motion!r}; expected one of {MOTIONS}")
    rng = derive_rng(seed, "synth", motion, video_id)
    if scene_seed is None:
        background = random_texture(rng, size, size)
    else:
        background = random_texture(derive_rng(scene_seed, "scene"), size, size)
    sprites = []
    for _ in range(int(rng.integers(n_sprites[0], n_sprites[1] + 1))):
        side = int(rng.integers(sprite_side[0], sprite_side[1] + 1))
        # one pixel of zero padding leaves room for the sub-pixel blend
        alpha = np.zeros((side + 2, side + 2))
        alpha[1:-1, 1:-1] = 1.0
        premult = np.zeros_like(alpha)
        premult[1:-1, 1:-1] = random_texture(rng, side, side)
        start = rng.uniform(0, size, size=2)
        path = start + _trajectory(motion, rng, n_frames, {**DEFAULT_LAW, **(law or {})})
        sprites.append((premult, alpha, path))
    tint = rng.uniform(0.6, 1.0, size=3)

    frames = np.empty((n_frames, size, size, channels), np.uint8)
    for t in range(n_frames):
        canvas = background.copy()
        for premult, alpha, path in sprites:
            _paste_wrap(canvas, premult, alpha, path[t, 0], path[t, 1])
        if channels == 1:
            frames[t, ..., 0] = _to_uint8(canvas)
        else:
            frames[t] = _to_uint8(canvas[..., None] * tint[None, None, :])
    return FrameSequence(video_id, frames)


def synth_video_set(
    motion: str,
    n_videos: int,
    n_frames: int = 16,
    seed: int = 0,
    size: int = CANONICAL_SIZE,
    channels: int = 3,
    scene_seed: Optional[int] = None,
) -> List[FrameSequence]:
    return [
        render_video(motion, n_frames, size, seed, f"{motion}_{i:05d}", channels=channels, scene_seed=scene_seed)
        for i in range(n_videos)
    ]
