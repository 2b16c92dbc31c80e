import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fvmd.errors import BadGrid, CorruptTrajectories, FormatError
from fvmd.synth import translating_clip
from fvmd.tracking import (
    KeypointTracker,
    LkParams,
    TrajectorySet,
    export_trajectories,
    import_trajectories,
    init_grid,
    track_builtin,
)


def interior_error(coords, grid, velocity, margin=32, size=256):
    """Mean per-frame displacement error over points whose true path stays >= margin from the border."""
    velocity = np.asarray(velocity, dtype=float)
    true = grid.points[None] + np.arange(coords.shape[0])[:, None, None] * velocity
    interior = ((true >= margin) & (true <= size - margin)).all(axis=(0, 2))
    steps = np.diff(coords.astype(float), axis=0)[:, interior]
    return np.linalg.norm(steps - velocity, axis=-1).mean(), interior.sum()


class TestInitGrid:
    def test_default_grid(self):
        g = init_grid(400, 256, 256)
        assert g.grid_side == 20
        np.testing.assert_allclose(g.points[0], (6.4, 6.4), rtol=1e-6)
        np.testing.assert_allclose(g.points[1], (19.2, 6.4), rtol=1e-6)
        np.testing.assert_allclose(g.points[20], (6.4, 19.2), rtol=1e-6)

    def test_four_points(self):
        g = init_grid(4, 256, 256)
        np.testing.assert_array_equal(g.points, [[64, 64], [192, 64], [64, 192], [192, 192]])

    @pytest.mark.parametrize("n", [10, 0, 2])
    def test_not_square(self, n):
        with pytest.raises(BadGrid):
            init_grid(n, 256, 256)

    @given(st.integers(1, 30), st.integers(1, 500), st.integers(1, 500))
    def test_points_inside_frame(self, g, w, h):
        grid = init_grid(g * g, w, h)
        assert ((grid.points[:, 0] >= 0) & (grid.points[:, 0] < w)).all()
        assert ((grid.points[:, 1] >= 0) & (grid.points[:, 1] < h)).all()


class TestLkParams:
    def test_defaults(self):
        p = LkParams()
        assert (p.pyramid_levels, p.window_radius, p.max_iterations, p.convergence_epsilon) == (3, 7, 30, 0.01)

    def test_small_window_rejected(self):
        with pytest.raises(ValueError):
            LkParams(window_radius=1)


class TestBuiltinTracker:
    grid = init_grid(400, 256, 256)

    def test_static_clip_is_constant(self):
        clip = np.repeat(translating_clip((0, 0), n_frames=1), 16, axis=0)
        traj = track_builtin(clip, self.grid)
        assert traj.coords.shape == (16, 400, 2)
        for t in range(16):
            np.testing.assert_array_equal(traj.coords[t], self.grid.points)

    def test_uniform_clip_falls_back_to_zero_velocity(self):
        frames = np.full((16, 256, 256, 1), 90, np.uint8)
        frames[8:] = 91  # frames differ, but there is no gradient anywhere
        traj = track_builtin(frames, self.grid)
        np.testing.assert_array_equal(traj.coords, np.broadcast_to(self.grid.points, (16, 400, 2)))

    @pytest.mark.parametrize("velocity", [(2, 0), (-1, 3), (0.5, -1.5)])
    def test_translation_recovered(self, velocity):
        traj = track_builtin(translating_clip(velocity), self.grid)
        err, n = interior_error(traj.coords, self.grid, velocity)
        assert n > 100
        assert err < 0.25

    def test_translation_equivariance(self):
        base = track_builtin(translating_clip((1, 1)), self.grid)
        shifted = track_builtin(translating_clip((3, -1)), self.grid)
        e1, _ = interior_error(base.coords, self.grid, (1, 1))
        e2, _ = interior_error(shifted.coords, self.grid, (3, -1))
        assert e1 < 0.25 and e2 < 0.25

    def test_deterministic(self):
        clip = translating_clip((1.5, 0.5), seed=3)
        a = track_builtin(clip, self.grid)
        b = track_builtin(clip, self.grid)
        assert a.coords.tobytes() == b.coords.tobytes()

    def test_degenerate_points_continue_with_last_velocity(self):
        tex = translating_clip((2, 0), n_frames=4)
        frames = np.concatenate([tex, np.full((4, 256, 256, 1), 50, np.uint8)])
        traj = track_builtin(frames, self.grid)
        assert np.isfinite(traj.coords).all()
        i = 210  # interior point
        steps = np.diff(traj.coords[:, i], axis=0)
        np.testing.assert_allclose(steps[:3], [[2, 0]] * 3, atol=0.05)
        # frame 4 lands on a flat image: every later step repeats the last estimate
        np.testing.assert_array_equal(steps[4:], np.repeat(steps[3:4], 3, axis=0))

    def test_estimator_interface(self):
        clips = np.stack([translating_clip((1, 0), n_frames=4), translating_clip((0, 1), n_frames=4)])
        tracker = KeypointTracker(n_points=16).fit(clips)
        out = tracker.transform(clips)
        assert out.shape == (2, 4, 16, 2)
        assert tracker.get_params()["window_radius"] == 7


def _sets(n_clips=2, F=16, N=400, seed=0):
    rng = np.random.default_rng(seed)
    return [
        TrajectorySet(rng.normal(100, 40, size=(F, N, 2)).astype(np.float32), source_id=f"v{i}", start_frame=i)
        for i in range(n_clips)
    ]


class TestTrajectoryFormat:
    def test_size_and_round_trip(self, tmp_path):
        path = tmp_path / "t.fvmdtraj"
        sets = _sets(1)
        export_trajectories(sets, path)
        assert path.stat().st_size == 8 + 4 * 4 + 16 * 400 * 2 * 4
        back = import_trajectories(path)
        assert len(back) == 1
        assert back[0].coords.shape == (16, 400, 2)
        assert back[0].source == "imported"
        assert back[0].coords.tobytes() == sets[0].coords.tobytes()

    def test_header_layout(self, tmp_path):
        path = tmp_path / "t.fvmdtraj"
        sets = _sets(3, F=4, N=9)
        export_trajectories(sets, path)
        raw = path.read_bytes()
        assert raw[:8] == b"FVMDTRAJ"
        assert np.frombuffer(raw[8:24], "<u4").tolist() == [1, 3, 4, 9]
        first = np.frombuffer(raw[24:24 + 4 * 9 * 2 * 4], "<f4").reshape(4, 9, 2)
        np.testing.assert_array_equal(first, sets[0].coords)

    def test_sidecar_index(self, tmp_path):
        path = tmp_path / "t.fvmdtraj"
        export_trajectories(_sets(2), path)
        index = json.loads((tmp_path / "t.fvmdtraj.index.json").read_text())
        assert [c["source_id"] for c in index["clips"]] == ["v0", "v1"]
        back = import_trajectories(path)
        assert [(t.source_id, t.start_frame) for t in back] == [("v0", 0), ("v1", 1)]

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "t.fvmdtraj"
        export_trajectories(_sets(1), path)
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(CorruptTrajectories):
            import_trajectories(path)

    def test_bad_magic_and_version(self, tmp_path):
        path = tmp_path / "t.fvmdtraj"
        export_trajectories(_sets(1, F=2, N=4), path)
        raw = bytearray(path.read_bytes())
        path.write_bytes(b"XXXXXXXX" + raw[8:])
        with pytest.raises(FormatError):
            import_trajectories(path)
        raw[8] = 2
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            import_trajectories(path)

    def test_non_finite(self, tmp_path):
        path = tmp_path / "t.fvmdtraj"
        export_trajectories(_sets(1, F=2, N=4), path)
        raw = bytearray(path.read_bytes())
        raw[24:28] = np.array([np.nan], "<f4").tobytes()
        path.write_bytes(bytes(raw))
        with pytest.raises(CorruptTrajectories):
            import_trajectories(path)

    def test_empty_and_mixed_rejected(self, tmp_path):
        with pytest.raises(FormatError):
            export_trajectories([], tmp_path / "e")
        with pytest.raises(FormatError):
            export_trajectories(_sets(1, N=400) + _sets(1, N=100), tmp_path / "m")

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 4), st.integers(2, 6), st.integers(1, 5), st.integers(0, 2**31))
    def test_round_trip_bit_exact(self, tmp_path_factory, n_clips, F, g, seed):
        path = tmp_path_factory.mktemp("rt") / "t.fvmdtraj"
        rng = np.random.default_rng(seed)
        sets = [TrajectorySet(rng.normal(0, 1e3, size=(F, g * g, 2)).astype(np.float32)) for _ in range(n_clips)]
        export_trajectories(sets, path)
        back = import_trajectories(path)
        assert [b.coords.tobytes() for b in back] == [s.coords.tobytes() for s in sets]
