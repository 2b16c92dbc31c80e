"""Command line front-end.

Subcommands: ``track``, ``compute``, ``sanity``, ``sensitivity`` and ``synth``.
Exit codes: 0 ok, 2 usage/input error, 3 incompatible inputs, 4 insufficient data.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from .config import RunConfig, TRACKERS
from .errors import FVMDError
from .experiments import SANITY_COLUMNS, SENSITIVITY_COLUMNS, sanity_check, sensitivity
from .motion_features import FIELDS, HISTS, MAGNITUDE_MODES
from .perturb import NOISE_KINDS, PRESETS
from .pipeline import StageTimer, iter_video_set, load_source, trajectory_features, track_videos, compute_report
from .synth import MOTIONS, synth_video_set
from .tracking import export_trajectories
from .video_io import save_frames

log = logging.getLogger("fvmd")

CSV_SCHEMA_VERSION = 1

_CONFIG_FLAGS = {
    "frames_per_clip": int,
    "stride": int,
    "grid_n": int,
    "volume_f": int,
    "volume_k": int,
    "fields": str,
    "hist": str,
    "magnitude": str,
    "tracker": str,
    "eps": float,
    "seed": int,
    "workers": int,
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline configuration (flags override --config)")
    g.add_argument("--config", type=Path, help="JSON file with RunConfig fields")
    g.add_argument("--frames-per-clip", type=int, help="F, frames per clip (default 16)")
    g.add_argument("--stride", type=int, help="s, clip stride (default 1)")
    g.add_argument("--grid-n", type=int, help="N, tracked points, a perfect square (default 400)")
    g.add_argument("--volume-f", type=int, help="f, frames per histogram volume (default 4)")
    g.add_argument("--volume-k", type=int, help="k, grid points per volume side (default 5)")
    g.add_argument("--fields", choices=FIELDS, help="motion field(s) (default combined)")
    g.add_argument("--hist", choices=HISTS, help="histogram type (default 1d)")
    g.add_argument("--magnitude", choices=MAGNITUDE_MODES, help="1D histogram weight (default quantized)")
    g.add_argument("--tracker", choices=TRACKERS, help="builtin LK tracker or imported FVMDTRAJ")
    g.add_argument("--eps", type=float, help="covariance diagonal loading (default 1e-6)")
    g.add_argument("--seed", type=int, help="random seed (default 0)")
    g.add_argument("--workers", type=int, help="tracking threads (default 1)")


def build_config(args) -> RunConfig:
    data = RunConfig().to_dict()
    if getattr(args, "config", None):
        data.update(json.loads(Path(args.config).read_text()))
    for name in _CONFIG_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    return RunConfig.from_dict(data).validate()


def _write_text(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def rows_to_csv(rows, columns, kind: str) -> str:
    buf = io.StringIO()
    buf.write(f"# fvmd-{kind} schema v{CSV_SCHEMA_VERSION}\n")
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({c: (repr(r[c]) if isinstance(r[c], float) else r[c]) for c in columns})
    return buf.getvalue()


def cmd_track(args) -> int:
    config = build_config(args)
    out = args.out or args.trajectories
    if not out:
        raise FVMDError("track needs --out (or --trajectories) for the FVMDTRAJ file")
    if not Path(args.video_set).is_dir():
        raise FVMDError(f"{args.video_set} is not a readable directory")
    videos = list(iter_video_set(args.video_set))
    if not videos:
        raise FVMDError(f"{args.video_set}: no readable videos")
    trajs = track_videos(videos, config, skip_errors=True)
    export_trajectories(trajs, out)
    log.info("wrote %d clips from %d videos to %s", len(trajs), len(videos), out)
    return 0


def cmd_compute(args) -> int:
    config = build_config(args)
    report = compute_report(args.gen, args.ref, config)
    text = json.dumps(report, indent=2) + "\n"
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    return 0


def _pool_features(source, config):
    return trajectory_features(load_source(source, config, StageTimer()).trajectories, config)


def cmd_sanity(args) -> int:
    config = build_config(args)
    sizes = [int(s) for s in args.sizes.split(",") if s]
    pool = _pool_features(args.dataset, config)
    other = _pool_features(args.other, config) if args.other else None
    rows = sanity_check(pool, sizes, args.repeats, config.seed, config.eps, other)
    _write_text(rows_to_csv(rows, SANITY_COLUMNS, "sanity"), args.out)
    return 0


def cmd_sensitivity(args) -> int:
    config = build_config(args)
    kinds = [k for k in args.noise.split(",") if k]
    unknown = [k for k in kinds if k not in NOISE_KINDS]
    if unknown:
        raise FVMDError(f"unknown noise kind(s) {unknown}; choose from {list(NOISE_KINDS)}")
    intensities = None
    if args.intensities:
        levels = [float(x) for x in args.intensities.split(",")]
        intensities = {k: [lv if k.endswith("swap") else int(lv) for lv in levels] for k in kinds}
    videos = list(iter_video_set(args.dataset))
    if not videos:
        raise FVMDError(f"{args.dataset}: no readable videos")
    rows = sensitivity(videos, kinds, config, intensities)
    _write_text(rows_to_csv(rows, SENSITIVITY_COLUMNS, "sensitivity"), args.out)
    return 0


def cmd_synth(args) -> int:
    out = Path(args.out_dir)
    videos = synth_video_set(args.motion, args.videos, args.frames, args.seed, channels=args.channels)
    for v in videos:
        save_frames(v, out / v.id)
    log.info("wrote %d %s videos to %s", len(videos), args.motion, out)
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fvmd", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="track every clip of a video set into an FVMDTRAJ file")
    p.add_argument("video_set", help="directory of video frame directories")
    p.add_argument("--out", help="output FVMDTRAJ path")
    p.add_argument("--trajectories", help="alias of --out")
    _add_config_flags(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("compute", help="FVMD between two video sets or trajectory files")
    p.add_argument("gen", help="generated set: video-set directory or FVMDTRAJ file")
    p.add_argument("ref", help="reference set: video-set directory or FVMDTRAJ file")
    p.add_argument("--out", help="also write the JSON report here")
    _add_config_flags(p)
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("sanity", help="same-set (and cross-set) FVMD versus sample size")
    p.add_argument("dataset", help="video-set directory or FVMDTRAJ file")
    p.add_argument("--other", help="second dataset for cross comparisons")
    p.add_argument("--sizes", default="64,128,256,512", help="comma-separated subset sizes in clips")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--out", help="CSV path (default stdout)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sanity)

    p = sub.add_parser("sensitivity", help="FVMD of noise-perturbed versus clean videos")
    p.add_argument("dataset", help="video-set directory")
    p.add_argument("--noise", default=",".join(NOISE_KINDS), help="comma-separated noise kinds")
    p.add_argument(
        "--intensities",
        help="comma-separated intensities overriding the presets "
        + "; ".join(f"{k}: {list(v)}" for k, v in PRESETS.items()),
    )
    p.add_argument("--out", help="CSV path (default stdout)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("synth", help="render a synthetic video set as PNG frame directories")
    p.add_argument("out_dir")
    p.add_argument("--motion", choices=MOTIONS, default="constant")
    p.add_argument("--videos", type=int, default=64)
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--channels", type=int, choices=(1, 3), default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except FVMDError as exc:
        print(f"fvmd: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        print(f"fvmd: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
