"""Frame loading and transition-frame detection for screencast-style video."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from lecsum.core import LecsumError, PixelBuffer, SchemaError, TransitionFrame

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")
TIMING_FILE = "timing.json"


class EmptyInputError(LecsumError):
    pass


class DecodeError(LecsumError):
    pass


class DimensionMismatchError(LecsumError, ValueError):
    pass


@dataclass(frozen=True)
class FrameSequence:
    """Time-ordered frames of one segment.

    ``end_s`` is the segment end; the last frame is displayed until then.
    """

    entries: tuple[tuple[float, PixelBuffer], ...]
    end_s: float

    def __post_init__(self):
        entries = tuple((float(t), p) for t, p in self.entries)
        if not entries:
            raise EmptyInputError("empty input: frame sequence has no entries")
        ts = [t for t, _ in entries]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise SchemaError("timestamps", "must be strictly increasing")
        shape = entries[0][1].shape
        for t, p in entries:
            if p.shape != shape:
                raise DimensionMismatchError(
                    f"frame at {t}s is {p.width}x{p.height}, expected {shape[1]}x{shape[0]}")
        if not self.end_s > ts[-1]:
            raise SchemaError("end_s", "segment end must come after the last frame")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_frames(cls, entries, end_s: float | None = None) -> "FrameSequence":
        """Build a sequence; without ``end_s`` the last frame lasts one median sample step."""
        entries = sorted(((float(t), p) for t, p in entries), key=lambda e: e[0])
        if not entries:
            raise EmptyInputError("empty input: no frames")
        if end_s is None:
            ts = np.array([t for t, _ in entries])
            step = float(np.median(np.diff(ts))) if len(ts) > 1 else 1.0
            end_s = ts[-1] + step
        return cls(tuple(entries), float(end_s))

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def start_s(self) -> float:
        return self.entries[0][0]

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class TransitionConfig:
    diff_threshold: float = 0.02
    dwell_frames: int = 2
    sample_stride: int = 1

    def __post_init__(self):
        if not 0 < self.diff_threshold < 1:
            raise SchemaError("diff_threshold", "must lie in (0, 1)")
        if self.dwell_frames < 1:
            raise SchemaError("dwell_frames", "must be >= 1")
        if self.sample_stride < 1:
            raise SchemaError("sample_stride", "must be >= 1")


def read_image(path: str | Path) -> PixelBuffer:
    try:
        with Image.open(path) as im:
            im = im.convert("RGB")
            return PixelBuffer(np.asarray(im, dtype=np.uint8).copy())
    except (UnidentifiedImageError, OSError) as exc:
        raise DecodeError(f"cannot decode {path}: {exc}") from exc


def load_frame_directory(path: str | Path) -> FrameSequence:
    """Load ``<seconds>.<ext>`` frames, or any names listed in a ``timing.json`` sidecar.

    The sidecar maps file name to timestamp in seconds; an optional
    ``"segment_end"`` key sets the end of the last frame's display.
    """
    root = Path(path)
    if not root.is_dir():
        raise EmptyInputError(f"empty input: {root} is not a directory")
    files = sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file())
    if not files:
        raise EmptyInputError(f"empty input: no image files in {root}")

    timing: dict = {}
    timing_path = root / TIMING_FILE
    if timing_path.exists():
        try:
            timing = json.loads(timing_path.read_text())
        except json.JSONDecodeError as exc:
            raise SchemaError(TIMING_FILE, f"not valid JSON ({exc.msg})") from exc
        if not isinstance(timing, dict):
            raise SchemaError(TIMING_FILE, "expected an object mapping file name to seconds")
    end_s = timing.pop("segment_end", None)

    entries = []
    for f in files:
        if timing:
            if f.name not in timing:
                logger.warning("skipping %s: not listed in %s", f.name, TIMING_FILE)
                continue
            t = timing[f.name]
        else:
            try:
                t = float(f.stem)
            except ValueError as exc:
                raise SchemaError(f.name, "file name is not a timestamp and no timing.json given") from exc
        entries.append((float(t), read_image(f)))
    if not entries:
        raise EmptyInputError(f"empty input: no timed frames in {root}")
    return FrameSequence.from_frames(entries, end_s)


def frame_distance(a: PixelBuffer, b: PixelBuffer) -> float:
    """Mean absolute per-channel difference scaled to [0, 1]."""
    if a.shape != b.shape:
        raise DimensionMismatchError(f"{a.width}x{a.height} vs {b.width}x{b.height}")
    diff = np.abs(a.data.astype(np.int16) - b.data.astype(np.int16))
    return float(diff.mean() / 255.0)


def detect_transitions(frames: FrameSequence, cfg: TransitionConfig = TransitionConfig()) -> list[TransitionFrame]:
    """Scan the sequence and emit a frame each time a new stable scene appears.

    A candidate differs from the current scene by more than ``diff_threshold``
    and must be followed by ``dwell_frames - 1`` samples that stay within the
    threshold of it; shorter runs are treated as glitches.
    """
    samples = list(frames.entries[::cfg.sample_stride])
    ref_t, ref = samples[0]
    out = [TransitionFrame(0, ref_t, ref)]
    i = 1
    while i < len(samples):
        t, cand = samples[i]
        if frame_distance(cand, ref) <= cfg.diff_threshold:
            i += 1
            continue
        run = samples[i:i + cfg.dwell_frames]
        stable = len(run) == cfg.dwell_frames and all(
            frame_distance(p, cand) <= cfg.diff_threshold for _, p in run[1:])
        if stable:
            ref_t, ref = t, cand
            out.append(TransitionFrame(len(out), t, cand))
            i += cfg.dwell_frames
        else:
            i += 1
    logger.debug("detected %d transition frames in %d samples", len(out), len(samples))
    return out


def frame_durations(transitions: list[TransitionFrame], end_s: float) -> list[float]:
    """Display time of each transition frame: until the next one, the last until ``end_s``."""
    ts = [f.timestamp_s for f in transitions] + [end_s]
    return [b - a for a, b in zip(ts, ts[1:])]
