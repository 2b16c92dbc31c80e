"""Run configuration shared by the pipeline and the command line."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .motion_features import FIELDS, HISTS, MAGNITUDE_MODES, VolumeSpec, feature_length
from .tracking import LkParams, grid_side_of
from .video_io import ClipSpec

TRACKERS = ("builtin", "import")


@dataclass
class RunConfig:
    frames_per_clip: int = 16
    stride: int = 1
    grid_n: int = 400
    volume_f: int = 4
    volume_k: int = 5
    fields: str = "combined"
    hist: str = "1d"
    magnitude: str = "quantized"
    tracker: str = "builtin"
    eps: float = 1e-6
    seed: int = 0
    workers: int = 1

    def validate(self) -> "RunConfig":
        if self.fields not in FIELDS:
            raise ValueError(f"fields must be one of {FIELDS}, got {self.fields!r}")
        if self.hist not in HISTS:
            raise ValueError(f"hist must be one of {HISTS}, got {self.hist!r}")
        if self.magnitude not in MAGNITUDE_MODES:
            raise ValueError(f"magnitude must be one of {MAGNITUDE_MODES}, got {self.magnitude!r}")
        if self.tracker not in TRACKERS:
            raise ValueError(f"tracker must be one of {TRACKERS}, got {self.tracker!r}")
        if self.eps < 0:
            raise ValueError(f"eps must be non-negative, got {self.eps}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        self.clip_spec
        self.volume_spec.check(self.frames_per_clip, grid_side_of(self.grid_n))
        return self

    @property
    def clip_spec(self) -> ClipSpec:
        return ClipSpec(self.frames_per_clip, self.stride)

    @property
    def volume_spec(self) -> VolumeSpec:
        return VolumeSpec(self.volume_f, self.volume_k)

    @property
    def lk_params(self) -> LkParams:
        return LkParams()

    @property
    def feature_dim(self) -> int:
        return feature_length(
            self.frames_per_clip, grid_side_of(self.grid_n), self.volume_spec, self.fields, self.hist
        )

    def feature_config(self) -> dict:
        return {
            "fields": self.fields,
            "hist": self.hist,
            "magnitude": self.magnitude,
            "volume_f": self.volume_f,
            "volume_k": self.volume_k,
            "frames_per_clip": self.frames_per_clip,
            "stride": self.stride,
            "grid_n": self.grid_n,
        }

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))
