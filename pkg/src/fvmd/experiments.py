"""Sanity-check and temporal-noise sensitivity sweeps."""
from __future__ import annotations

from typing import Iterable, List, Optional, Sequence

import numpy as np

from .config import RunConfig
from .errors import NotEnoughVideos
from .frechet import fvmd
from .perturb import PRESETS, NoiseSpec, apply_noise, derive_rng
from .pipeline import TrajectoryCache, video_features
from .video_io import FrameSequence

SANITY_COLUMNS = ("size", "repeat", "score", "comparison")
SENSITIVITY_COLUMNS = ("kind", "intensity", "score")


def sanity_check(
    features: np.ndarray,
    sizes: Iterable[int],
    repeats: int = 5,
    seed: int = 0,
    eps: float = 1e-6,
    other: Optional[np.ndarray] = None,
) -> List[dict]:
    """FVMD between disjoint random subsets of one feature pool, per subset size.

    With ``other`` given, each repeat also scores the first subset against an
    equally sized random subset of ``other`` (comparison ``"cross"``).
    """
    features = np.asarray(features)
    sizes = list(sizes)
    for size in sizes:
        if 2 * size > len(features):
            raise NotEnoughVideos(f"size {size} needs {2 * size} clips, pool has {len(features)}")
        if other is not None and size > len(other):
            raise NotEnoughVideos(f"size {size} exceeds the second pool ({len(other)} clips)")
    rows = []
    for size in sizes:
        for rep in range(repeats):
            rng = derive_rng(seed, "sanity", size, rep)
            perm = rng.permutation(len(features))
            a = features[perm[:size]]
            b = features[perm[size:2 * size]]
            rows.append({"size": size, "repeat": rep, "score": fvmd(a, b, eps).value, "comparison": "same"})
            if other is not None:
                c = other[rng.permutation(len(other))[:size]]
                rows.append({"size": size, "repeat": rep, "score": fvmd(a, c, eps).value, "comparison": "cross"})
    return rows


def sensitivity(
    videos: Sequence[FrameSequence],
    kinds: Iterable[str],
    config: RunConfig,
    intensities: Optional[dict] = None,
    clean_features: Optional[np.ndarray] = None,
    cache: Optional[TrajectoryCache] = None,
) -> List[dict]:
    """FVMD(perturbed, clean) for each noise kind over its intensity grid.

    ``intensities`` maps kind -> values and defaults to the preset grid; an
    intensity of 0 means no perturbation. Clips a perturbation leaves
    untouched are served from ``cache`` instead of being tracked again.
    """
    videos = list(videos)
    cache = TrajectoryCache() if cache is None else cache
    if clean_features is None:
        clean_features = video_features(videos, config, cache)
    rows = []
    for kind in kinds:
        levels = (intensities or {}).get(kind, PRESETS[kind])
        for level in levels:
            noisy = apply_noise(videos, NoiseSpec(kind, level, config.seed))
            X = video_features(noisy, config, cache)
            rows.append({"kind": kind, "intensity": level, "score": fvmd(X, clean_features, config.eps).value})
    return rows


def mean_by(rows: Sequence[dict], key: str, comparison: Optional[str] = None) -> dict:
    """Average ``score`` over rows grouped by ``key``."""
    groups: dict = {}
    for r in rows:
        if comparison is None or r.get("comparison") == comparison:
            groups.setdefault(r[key], []).append(r["score"])
    return {k: float(np.mean(v)) for k, v in groups.items()}
