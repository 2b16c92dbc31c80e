import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from fvmd.errors import DecodeError, InconsistentFrames, NoFrames, TooShort
from fvmd.video_io import (
    ClipSpec,
    FrameSequence,
    load_frames,
    n_segments,
    preprocess,
    resize_bilinear,
    segment,
    to_gray,
)

from conftest import write_video


def _seq(length, h=8, w=8, c=1, seed=0):
    frames = np.random.default_rng(seed).integers(0, 256, size=(length, h, w, c), dtype=np.uint8)
    return FrameSequence("v", frames)


class TestLoadFrames:
    def test_decodes_in_filename_order(self, tmp_path, rng):
        frames = rng.integers(0, 256, size=(16, 360, 640, 3), dtype=np.uint8)
        write_video(tmp_path / "v", frames)
        seq = load_frames(tmp_path / "v")
        assert len(seq) == 16
        assert (seq.width, seq.height) == (640, 360)
        np.testing.assert_array_equal(seq.frames, frames)

    def test_grayscale_keeps_one_channel(self, tmp_path, rng):
        frames = rng.integers(0, 256, size=(3, 10, 12, 1), dtype=np.uint8)
        write_video(tmp_path / "g", frames)
        seq = load_frames(tmp_path / "g")
        assert seq.frames.shape == (3, 10, 12, 1)

    def test_ppm_frames(self, tmp_path, rng):
        d = tmp_path / "ppm"
        d.mkdir()
        frames = rng.integers(0, 256, size=(2, 6, 5, 3), dtype=np.uint8)
        for i, f in enumerate(frames):
            Image.fromarray(f).save(d / f"{i:03d}.ppm")
        np.testing.assert_array_equal(load_frames(d).frames, frames)

    def test_empty_directory(self, tmp_path):
        (tmp_path / "empty").mkdir()
        with pytest.raises(NoFrames):
            load_frames(tmp_path / "empty")

    def test_mixed_dimensions(self, tmp_path, rng):
        d = write_video(tmp_path / "v", rng.integers(0, 256, size=(15, 360, 640, 3), dtype=np.uint8))
        Image.fromarray(np.zeros((360, 639, 3), np.uint8)).save(d / "00015.png")
        with pytest.raises(InconsistentFrames):
            load_frames(d)

    def test_undecodable_file_is_named(self, tmp_path, rng):
        d = write_video(tmp_path / "v", rng.integers(0, 256, size=(2, 4, 4, 3), dtype=np.uint8))
        (d / "00002.png").write_bytes(b"not a png")
        with pytest.raises(DecodeError, match="00002.png"):
            load_frames(d)


class TestPreprocess:
    def test_shape_contract(self):
        seq = FrameSequence("v", np.zeros((4, 360, 640, 3), np.uint8))
        out = preprocess(seq)
        assert out.frames.shape == (4, 256, 256, 3)

    def test_canonical_input_is_byte_identical(self):
        seq = _seq(3, 256, 256, 3)
        np.testing.assert_array_equal(preprocess(seq).frames, seq.frames)

    @pytest.mark.parametrize("value", [0, 17, 128, 255])
    def test_constant_frames_stay_constant(self, value):
        seq = FrameSequence("v", np.full((2, 360, 640, 3), value, np.uint8))
        assert np.all(preprocess(seq).frames == value)

    def test_idempotent(self, rng):
        seq = FrameSequence("v", rng.integers(0, 256, size=(2, 100, 300, 3), dtype=np.uint8))
        once = preprocess(seq)
        np.testing.assert_array_equal(preprocess(once).frames, once.frames)

    def test_half_pixel_sampling_against_direct_formula(self, rng):
        img = rng.integers(0, 256, size=(1, 5, 7, 1), dtype=np.uint8)
        out = resize_bilinear(img, 3, 4)

        def sample(y, x):
            y = min(max(y, 0.0), 4.0)
            x = min(max(x, 0.0), 6.0)
            y0, x0 = int(np.floor(y)), int(np.floor(x))
            y1, x1 = min(y0 + 1, 4), min(x0 + 1, 6)
            wy, wx = y - y0, x - x0
            a = img[0, :, :, 0].astype(float)
            top = a[y0, x0] * (1 - wx) + a[y0, x1] * wx
            bot = a[y1, x0] * (1 - wx) + a[y1, x1] * wx
            return top * (1 - wy) + bot * wy

        for i in range(3):
            for j in range(4):
                expect = sample((i + 0.5) * 5 / 3 - 0.5, (j + 0.5) * 7 / 4 - 0.5)
                assert out[0, i, j, 0] == int(np.floor(expect + 0.5))


def test_gray_luma_rounding():
    px = np.array([[[[255, 0, 0], [0, 255, 0], [0, 0, 255], [10, 20, 30], [255, 255, 255]]]], np.uint8)
    # 0.299*255 = 76.245, 0.587*255 = 149.685, 0.114*255 = 29.07, 2.99+11.74+3.42 = 18.15
    np.testing.assert_array_equal(to_gray(px)[0, 0], [76, 150, 29, 18, 255])


class TestSegment:
    def test_stride_one(self):
        clips = segment(_seq(20), ClipSpec(16, 1))
        assert [c.start_frame for c in clips] == [0, 1, 2, 3, 4]
        assert all(len(c.frames) == 16 for c in clips)

    def test_remainder_dropped(self):
        clips = segment(_seq(20), ClipSpec(16, 16))
        assert [c.start_frame for c in clips] == [0]

    def test_too_short(self):
        with pytest.raises(TooShort):
            segment(_seq(15), ClipSpec(16, 1))

    def test_clip_spec_bounds(self):
        with pytest.raises(ValueError):
            ClipSpec(1, 1)
        with pytest.raises(ValueError):
            ClipSpec(16, 17)
        with pytest.raises(ValueError):
            ClipSpec(16, 0)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 12), st.data())
    def test_count_formula(self, F, data):
        s = data.draw(st.integers(1, F))
        L = data.draw(st.integers(F, 40))
        clips = segment(_seq(L, 2, 2), ClipSpec(F, s))
        assert len(clips) == (L - F) // s + 1 == n_segments(L, ClipSpec(F, s))
        assert all(c.start_frame + F <= L for c in clips)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 8), st.integers(2, 30))
    def test_non_overlapping_clips_reconstruct_prefix(self, F, L):
        if L < F:
            return
        seq = _seq(L, 2, 2)
        clips = segment(seq, ClipSpec(F, F))
        joined = np.concatenate([c.frames for c in clips])
        np.testing.assert_array_equal(joined, seq.frames[: (L // F) * F])
