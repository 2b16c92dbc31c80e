"""Temporal noise for sensitivity studies: local/global frame swaps, interleaving
and switching between videos.

Every perturbation only reorders or recombines whole frames; pixel content is
never touched. Randomness comes from a Philox generator keyed by a hash of
the user seed and the video (or group) identity, so results do not depend on
processing order.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .errors import NotEnoughVideos, TooShort
from .video_io import FrameSequence

NOISE_KINDS = ("local_swap", "global_swap", "interleave", "switch")

PRESETS = {
    "local_swap": (0.1, 0.2, 0.4, 0.6, 0.8),
    "global_swap": (0.1, 0.2, 0.3, 0.4, 0.5),
    "interleave": (2, 3, 4, 5, 6),
    "switch": (2, 3, 4, 5, 6),
}

# guards floor() against products like 0.6 * 20 landing just below an integer
_FLOOR_SLACK = 1e-9


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    intensity: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        if self.kind in ("local_swap", "global_swap"):
            if not 0 <= self.intensity <= 1:
                raise ValueError(f"swap fraction must be in [0, 1], got {self.intensity}")
        elif self.intensity != 0 and (self.intensity < 2 or self.intensity != int(self.intensity)):
            raise ValueError(f"{self.kind} needs an integer group size >= 2, got {self.intensity}")


def derive_rng(seed: int, *keys) -> np.random.Generator:
    h = hashlib.blake2b(digest_size=16)
    h.update(str(int(seed) & 0xFFFFFFFFFFFFFFFF).encode())
    for k in keys:
        h.update(b"\x00" + str(k).encode())
    return np.random.Generator(np.random.Philox(key=int.from_bytes(h.digest(), "little")))


def _floor(x: float) -> int:
    return int(math.floor(x + _FLOOR_SLACK))


def _check_fraction(p: float) -> None:
    if not 0 <= p <= 1:
        raise ValueError(f"swap fraction must be in [0, 1], got {p}")


def swap_adjacent(order: np.ndarray, starts) -> np.ndarray:
    order = np.array(order)
    for s in starts:
        order[s], order[s + 1] = order[s + 1], order[s]
    return order


def local_swap_order(length: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """Frame order after swapping floor(p*L/2) disjoint adjacent pairs.

    Pair sets are drawn uniformly: choosing k of the L - k slots and shifting
    the j-th by j is a bijection onto non-overlapping pair placements.
    """
    _check_fraction(p)
    k = _floor(p * length / 2)
    order = np.arange(length)
    if k == 0:
        return order
    slots = np.sort(rng.choice(length - k, size=k, replace=False))
    return swap_adjacent(order, slots + np.arange(k))


def global_swap_order(length: int, p: float, rng: np.random.Generator) -> np.ndarray:
    _check_fraction(p)
    m = _floor(p * length)
    order = np.arange(length)
    if m == 0:
        return order
    sources = rng.choice(length, size=m, replace=False)
    partners = rng.integers(0, length, size=m)
    for s, t in zip(sources, partners):
        order[s], order[t] = order[t], order[s]
    return order


def local_swap(seq: FrameSequence, p: float, seed: int = 0) -> FrameSequence:
    if len(seq) < 2:
        raise TooShort(f"{seq.id}: local swap needs at least 2 frames")
    order = local_swap_order(len(seq), p, derive_rng(seed, "local_swap", seq.id))
    return FrameSequence(seq.id, seq.frames[order])


def global_swap(seq: FrameSequence, p: float, seed: int = 0) -> FrameSequence:
    if len(seq) < 2:
        raise TooShort(f"{seq.id}: global swap needs at least 2 frames")
    order = global_swap_order(len(seq), p, derive_rng(seed, "global_swap", seq.id))
    return FrameSequence(seq.id, seq.frames[order])


def interleave_sources(n: int, length: int) -> np.ndarray:
    """(n, L) table: output o takes frame t from tuple member (o + t) mod n."""
    return (np.arange(n)[:, None] + np.arange(length)[None, :]) % n


def switch_sources(n: int, length: int) -> np.ndarray:
    """(n, L) table: output i takes chunk c from tuple member (i + c) mod n."""
    t = np.arange(length)
    bounds = [(c * length) // n for c in range(n + 1)]
    chunk = np.searchsorted(bounds, t, side="right") - 1
    return (np.arange(n)[:, None] + chunk[None, :]) % n


def _group_tuples(seqs: Sequence[FrameSequence], n: int, seed: int, kind: str) -> np.ndarray:
    if n < 2:
        raise ValueError(f"{kind} needs at least 2 videos per group, got {n}")
    if len(seqs) < n:
        raise NotEnoughVideos(f"{kind} with n={n} needs at least {n} videos, got {len(seqs)}")
    lengths = {len(s) for s in seqs}
    if len(lengths) != 1:
        raise NotEnoughVideos(f"{kind} needs equal-length videos, got lengths {sorted(lengths)}")
    perm = derive_rng(seed, kind, n, len(seqs)).permutation(len(seqs))
    n_groups = len(seqs) // n
    return perm[: n_groups * n].reshape(n_groups, n)


def _recombine(seqs, n, seed, kind, table_fn) -> List[FrameSequence]:
    groups = _group_tuples(seqs, n, seed, kind)
    out = list(seqs)  # videos left over after grouping pass through unchanged
    length = len(seqs[0])
    table = table_fn(n, length)
    t = np.arange(length)
    for members in groups:
        stack = np.stack([seqs[m].frames for m in members])
        for o, m in enumerate(members):
            out[m] = FrameSequence(seqs[m].id, stack[table[o], t])
    return out


def interleave(seqs: Sequence[FrameSequence], n: int, seed: int = 0) -> List[FrameSequence]:
    """Weave random n-tuples of videos frame by frame, round-robin."""
    return _recombine(list(seqs), n, seed, "interleave", interleave_sources)


def switch(seqs: Sequence[FrameSequence], n: int, seed: int = 0) -> List[FrameSequence]:
    """Within random n-tuples, jump to the next video every L/n frames."""
    return _recombine(list(seqs), n, seed, "switch", switch_sources)


def apply_noise(seqs: Sequence[FrameSequence], spec: NoiseSpec) -> List[FrameSequence]:
    """Perturb a whole video set; zero intensity returns the set unchanged."""
    seqs = list(seqs)
    if spec.intensity == 0:
        return seqs
    if spec.kind == "local_swap":
        return [local_swap(s, spec.intensity, spec.seed) for s in seqs]
    if spec.kind == "global_swap":
        return [global_swap(s, spec.intensity, spec.seed) for s in seqs]
    if spec.kind == "interleave":
        return interleave(seqs, int(spec.intensity), spec.seed)
    return switch(seqs, int(spec.intensity), spec.seed)
