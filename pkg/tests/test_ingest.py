import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from PIL import Image

from lecsum import ingest
from lecsum.core import PixelBuffer
from lecsum.ingest import (DimensionMismatchError, EmptyInputError, FrameSequence, TransitionConfig,
                           detect_transitions, frame_distance, frame_durations, load_frame_directory)

BLACK = PixelBuffer.solid(8, 6, (0, 0, 0))
WHITE = PixelBuffer.solid(8, 6, (255, 255, 255))
GRAY = PixelBuffer.solid(8, 6, (128, 128, 128))


def _save(path, px):
    Image.fromarray(px.data).save(path)


def test_load_directory_by_timestamp_names(tmp_path):
    _save(tmp_path / "000.png", BLACK)
    _save(tmp_path / "010.png", WHITE)
    seq = load_frame_directory(tmp_path)
    assert [t for t, _ in seq.entries] == [0.0, 10.0]
    assert seq.entries[1][1] == WHITE


def test_load_directory_with_timing_sidecar(tmp_path):
    _save(tmp_path / "a.png", BLACK)
    _save(tmp_path / "b.png", WHITE)
    (tmp_path / "timing.json").write_text(json.dumps({"a.png": 2.0, "b.png": 7.5, "segment_end": 20}))
    seq = load_frame_directory(tmp_path)
    assert [t for t, _ in seq.entries] == [2.0, 7.5]
    assert seq.end_s == 20


def test_mixed_dimensions_rejected(tmp_path):
    _save(tmp_path / "000.png", BLACK)
    _save(tmp_path / "010.png", PixelBuffer.solid(9, 6))
    with pytest.raises(DimensionMismatchError):
        load_frame_directory(tmp_path)


def test_empty_directory(tmp_path):
    with pytest.raises(EmptyInputError, match="empty input"):
        load_frame_directory(tmp_path)


def test_undecodable_file(tmp_path):
    (tmp_path / "000.png").write_bytes(b"not a png")
    with pytest.raises(ingest.DecodeError):
        load_frame_directory(tmp_path)


def test_frame_distance_examples():
    assert frame_distance(GRAY, GRAY) == 0
    assert frame_distance(BLACK, WHITE) == 1.0
    assert frame_distance(BLACK, GRAY) == pytest.approx(128 / 255, abs=1e-12)


@given(st.integers(0, 255), st.integers(0, 255))
def test_frame_distance_symmetric_and_bounded(a, b):
    x, y = PixelBuffer.solid(4, 4, (a, a, a)), PixelBuffer.solid(4, 4, (b, 0, b))
    d = frame_distance(x, y)
    assert d == frame_distance(y, x)
    assert 0 <= d <= 1


def test_identical_frames_give_one_transition():
    seq = FrameSequence.from_frames([(float(t), GRAY) for t in range(20)])
    assert len(detect_transitions(seq)) == 1


def test_four_held_slides_give_four_transitions():
    slides = [PixelBuffer.solid(8, 6, (v, v, v)) for v in (0, 80, 160, 240)]
    entries = [(float(k), slides[k // 10]) for k in range(40)]
    out = detect_transitions(FrameSequence.from_frames(entries))
    assert [f.timestamp_s for f in out] == [0.0, 10.0, 20.0, 30.0]
    assert [f.index for f in out] == [0, 1, 2, 3]


def test_single_frame_glitch_suppressed():
    frames = [BLACK] * 5 + [GRAY] + [BLACK] * 3 + [WHITE] * 5
    out = detect_transitions(FrameSequence.from_frames([(float(t), f) for t, f in enumerate(frames)]),
                             TransitionConfig(dwell_frames=2))
    assert [f.timestamp_s for f in out] == [0.0, 9.0]


def test_durations_sum_to_segment_length(deck):
    seq = FrameSequence.from_frames(deck["frames"], deck["end_s"])
    out = detect_transitions(seq)
    assert len(out) == 10
    d = frame_durations(out, seq.end_s)
    assert d == [6, 9, 4, 12, 7, 5, 10, 3, 8, 6]
    assert sum(d) == pytest.approx(seq.duration_s)


def test_sequence_validation():
    with pytest.raises(EmptyInputError):
        FrameSequence.from_frames([])
    with pytest.raises(ValueError):
        FrameSequence.from_frames([(1.0, BLACK), (1.0, WHITE)])
    with pytest.raises(ValueError):
        TransitionConfig(diff_threshold=0)


@given(st.lists(st.integers(0, 3), min_size=1, max_size=30))
def test_transitions_are_increasing_and_first_frame_kept(labels):
    palette = [PixelBuffer.solid(4, 4, (v, v, v)) for v in (0, 90, 180, 255)]
    seq = FrameSequence.from_frames([(float(t), palette[k]) for t, k in enumerate(labels)])
    out = detect_transitions(seq)
    ts = [f.timestamp_s for f in out]
    assert ts[0] == 0.0 and ts == sorted(set(ts))
    assert all(np.isfinite(d) and d > 0 for d in frame_durations(out, seq.end_s))
