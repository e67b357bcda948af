"""Text removal, image-region extraction and cross-frame object tracking."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from lecsum.core import BoundingBox, ImageObject, PixelBuffer, SchemaError, TransitionFrame
from lecsum.simile.keypoints import extract_keypoints
from lecsum.simile.similarity import SimilarityConfig, similarity

logger = logging.getLogger(__name__)

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class LayoutConfig:
    background_tolerance: int = 10
    merge_gap_px: int = 12
    min_object_area_px: int = 900
    text_group_gap_px: int = 8
    dedupe_similarity: float = 0.95
    # built-in text detector: glyph height limit, glyphs needed for a line, and
    # the word gap allowed inside a line as a multiple of glyph height
    text_max_height: int = 24
    text_min_glyphs: int = 3
    text_word_gap: float = 1.0

    def __post_init__(self):
        for name in ("background_tolerance", "merge_gap_px", "min_object_area_px",
                     "text_group_gap_px", "text_max_height", "text_min_glyphs", "text_word_gap"):
            if getattr(self, name) <= 0:
                raise SchemaError(name, "must be positive")
        if not 0 < self.dedupe_similarity <= 1:
            raise SchemaError("dedupe_similarity", "must lie in (0, 1]")


@dataclass(frozen=True)
class TextAnnotation:
    frame_index: int
    boxes: tuple[BoundingBox, ...] = field(default_factory=tuple)


def load_text_annotations(path: str | Path) -> dict[int, TextAnnotation]:
    """Read the OCR sidecar: ``[{"frame_index": int, "boxes": [{"x","y","w","h"}]}]``."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError("text_annotations", f"not valid JSON ({exc.msg})") from exc
    if not isinstance(doc, list):
        raise SchemaError("text_annotations", "expected a JSON array")
    out: dict[int, TextAnnotation] = {}
    for k, entry in enumerate(doc):
        if not isinstance(entry, dict) or "frame_index" not in entry or "boxes" not in entry:
            raise SchemaError(f"[{k}]", "entry needs frame_index and boxes")
        idx = entry["frame_index"]
        boxes = tuple(BoundingBox.from_dict(b) for b in entry["boxes"])
        prev = out.get(idx)
        out[idx] = TextAnnotation(idx, (prev.boxes if prev else ()) + boxes)
    return out


def background_color(pixels: PixelBuffer) -> np.ndarray:
    """Most frequent color on the two-pixel outer ring (smallest color on ties)."""
    d = pixels.data
    ring = np.concatenate([d[:2].reshape(-1, 3), d[-2:].reshape(-1, 3),
                           d[:, :2].reshape(-1, 3), d[:, -2:].reshape(-1, 3)])
    colors, counts = np.unique(ring, axis=0, return_counts=True)
    return colors[int(np.argmax(counts))]


def foreground_mask(pixels: PixelBuffer, bg: np.ndarray, tolerance: int) -> np.ndarray:
    diff = np.abs(pixels.data.astype(np.int16) - bg.astype(np.int16)).max(axis=2)
    return diff > tolerance


def _boxes_of(labels: np.ndarray) -> list[BoundingBox]:
    out = []
    for sl in ndimage.find_objects(labels):
        if sl is None:
            continue
        ys, xs = sl
        out.append(BoundingBox(xs.start, ys.start, xs.stop - xs.start, ys.stop - ys.start))
    return out


class _DisjointSet:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)

    def groups(self) -> list[list[int]]:
        out: dict[int, list[int]] = {}
        for i in range(len(self.parent)):
            out.setdefault(self.find(i), []).append(i)
        return list(out.values())


def _union_all(boxes: list[BoundingBox]) -> BoundingBox:
    out = boxes[0]
    for b in boxes[1:]:
        out = out.union(b)
    return out


def detect_text_blocks(pixels: PixelBuffer, cfg: LayoutConfig = LayoutConfig()) -> list[BoundingBox]:
    """Crude stand-in for OCR: find runs of small marks and group nearby runs into blocks.

    A glyph is a foreground component no taller than ``text_max_height``. Glyphs
    that overlap vertically by half their height and sit within
    ``text_word_gap`` glyph heights (at least ``text_group_gap_px``) of each
    other horizontally form a line; lines of at least ``text_min_glyphs``
    glyphs within ``text_group_gap_px`` of each other merge into blocks.
    """
    bg = background_color(pixels)
    labels, _ = ndimage.label(foreground_mask(pixels, bg, cfg.background_tolerance), structure=_EIGHT)
    glyphs = [b for b in _boxes_of(labels) if b.h <= cfg.text_max_height and b.w <= 2 * cfg.text_max_height]
    if len(glyphs) < cfg.text_min_glyphs:
        return []
    x = np.array([g.x for g in glyphs]); x2 = np.array([g.x2 for g in glyphs])
    y = np.array([g.y for g in glyphs]); y2 = np.array([g.y2 for g in glyphs])
    h = y2 - y
    overlap = np.minimum(y2[:, None], y2[None, :]) - np.maximum(y[:, None], y[None, :])
    hgap = np.maximum(x[None, :] - x2[:, None], x[:, None] - x2[None, :])
    hmin = np.minimum(h[:, None], h[None, :])
    reach = np.maximum(cfg.text_group_gap_px, cfg.text_word_gap * hmin)
    linked = (overlap * 2 >= hmin) & (hgap <= reach)
    ds = _DisjointSet(len(glyphs))
    for i, j in zip(*np.nonzero(np.triu(linked, 1))):
        ds.union(int(i), int(j))
    lines = [_union_all([glyphs[i] for i in grp]) for grp in ds.groups() if len(grp) >= cfg.text_min_glyphs]
    return _merge_boxes(lines, cfg.text_group_gap_px, inclusive=True)


def _merge_boxes(boxes: list[BoundingBox], gap: int, inclusive: bool = False,
                 barriers: tuple[BoundingBox, ...] = ()) -> list[BoundingBox]:
    """Repeatedly merge boxes closer than ``gap`` (or equal to it when ``inclusive``).

    A merge whose union would cover a barrier box is refused.
    """
    boxes = sorted(boxes, key=lambda b: (b.y, b.x, b.h, b.w))
    changed = True
    while changed:
        changed = False
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                g = boxes[i].gap(boxes[j])
                if g < gap or (inclusive and g == gap):
                    u = boxes[i].union(boxes[j])
                    if any(u.intersects(t) for t in barriers):
                        continue
                    boxes = [b for k, b in enumerate(boxes) if k not in (i, j)] + [u]
                    boxes.sort(key=lambda b: (b.y, b.x, b.h, b.w))
                    changed = True
                    break
            if changed:
                break
    return boxes


def mask_text_regions(frame: TransitionFrame, annotations: TextAnnotation | None = None,
                      cfg: LayoutConfig = LayoutConfig()) -> TransitionFrame:
    """Paint text boxes with the background color and record them on the frame.

    Uses the annotation boxes when given, else the built-in detector.
    """
    px = frame.pixels
    if annotations is not None:
        boxes = list(annotations.boxes)
        for b in boxes:
            b.check_within(px.width, px.height)
    else:
        boxes = detect_text_blocks(px, cfg)
    if not boxes:
        return TransitionFrame(frame.index, frame.timestamp_s, px, ())
    bg = background_color(px)
    out = px.data.copy()
    for b in boxes:
        out[b.y:b.y2, b.x:b.x2] = bg
    return TransitionFrame(frame.index, frame.timestamp_s, PixelBuffer(out), tuple(boxes))


def extract_image_objects(frame: TransitionFrame, cfg: LayoutConfig = LayoutConfig()) -> list[BoundingBox]:
    """Bounding boxes of non-background regions, merged across small gaps, sorted by (y, x)."""
    px = frame.pixels
    bg = background_color(px)
    labels, count = ndimage.label(foreground_mask(px, bg, cfg.background_tolerance), structure=_EIGHT)
    if count == 0:
        return []
    boxes = _merge_boxes(_boxes_of(labels), cfg.merge_gap_px, barriers=frame.text_regions)
    boxes = [b for b in boxes if b.area >= cfg.min_object_area_px]
    return sorted(boxes, key=lambda b: (b.y, b.x))


@dataclass
class _Track:
    pixels: PixelBuffer
    frame: int
    bbox: BoundingBox
    duration: float
    keypoints: list
    last_frame: int


def track_objects(frames: list[TransitionFrame], boxes_per_frame: list[list[BoundingBox]],
                  frame_durations_s: list[float], cfg: LayoutConfig = LayoutConfig(),
                  sim_cfg: SimilarityConfig = SimilarityConfig(), segment_id: str = "") -> list[ImageObject]:
    """Unify crops that recur across frames and sum the durations of the frames they appear in.

    A crop joins an existing object when pixel-identical to it or at least
    ``dedupe_similarity`` similar; objects already seen in the same frame are
    not candidates. Ids follow first appearance.
    """
    if not (len(frames) == len(boxes_per_frame) == len(frame_durations_s)):
        raise SchemaError("frames", "frames, boxes and durations must have equal length")
    tracks: list[_Track] = []
    by_bytes: dict[tuple, int] = {}
    for frame, boxes, dur in zip(frames, boxes_per_frame, frame_durations_s):
        for box in boxes:
            crop = frame.pixels.crop(box)
            key = (crop.shape, crop.data.tobytes())
            hit = by_bytes.get(key)
            if hit is not None and tracks[hit].last_frame == frame.index:
                hit = None
            kps = None
            if hit is None:
                kps = extract_keypoints(crop)
                probe = ImageObject(len(tracks), crop, frame.index, box, 1.0, keypoints=kps)
                best, best_sim = None, cfg.dedupe_similarity
                for t_id, tr in enumerate(tracks):
                    if tr.last_frame == frame.index:
                        continue
                    ref = ImageObject(t_id, tr.pixels, tr.frame, tr.bbox, 1.0, keypoints=tr.keypoints)
                    s = similarity(ref, probe, sim_cfg, segment_id)
                    if s >= best_sim:
                        best, best_sim = t_id, s
                hit = best
            if hit is None:
                tracks.append(_Track(crop, frame.index, box, dur, kps, frame.index))
                by_bytes.setdefault(key, len(tracks) - 1)
            else:
                tracks[hit].duration += dur
                tracks[hit].last_frame = frame.index
    logger.debug("tracked %d objects over %d frames", len(tracks), len(frames))
    return [ImageObject(i, t.pixels, t.frame, t.bbox, t.duration, keypoints=t.keypoints)
            for i, t in enumerate(tracks)]
