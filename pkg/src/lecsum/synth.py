"""Deterministic synthetic fixtures: diagrams, noise, slide frames and decks."""
from __future__ import annotations

import math

import cv2
import numpy as np
from PIL import Image, ImageDraw

from lecsum.core import BoundingBox, PixelBuffer

WHITE = (255, 255, 255)


def diagram(seed: int, width: int = 200, height: int = 150, shapes: int = 24,
            panel: tuple[int, int, int] | None | str = "auto") -> PixelBuffer:
    """A lecture-style diagram: outlined and filled shapes, lines, on a tinted panel.

    The panel keeps the whole diagram one connected region on a white slide;
    ``"auto"`` picks a light tint from the seed.
    """
    rng = np.random.default_rng(seed)
    if panel == "auto":
        panel = tuple(int(v) for v in rng.integers(200, 246, 3))
    im = Image.new("RGB", (width, height), panel if panel is not None else WHITE)
    draw = ImageDraw.Draw(im)
    if panel is not None:
        draw.rectangle([0, 0, width - 1, height - 1], outline=(60, 60, 90), width=2)
    for _ in range(shapes):
        x, y = int(rng.integers(4, width - 12)), int(rng.integers(4, height - 12))
        w, h = (int(v) for v in rng.integers(8, max(10, min(width, height) // 3), 2))
        col = tuple(int(v) for v in rng.integers(0, 220, 3))
        kind = int(rng.integers(5))
        box = [x, y, min(width - 3, x + w), min(height - 3, y + h)]
        if kind == 0:
            draw.ellipse(box, outline=col, width=2)
        elif kind == 1:
            draw.rectangle(box, fill=col)
        elif kind == 2:
            draw.line(box, fill=col, width=2)
        elif kind == 3:
            pts = [(int(rng.integers(0, width)), int(rng.integers(0, height))) for _ in range(3)]
            draw.polygon(pts, fill=col)
        else:
            draw.rectangle(box, outline=col, width=2)
    return PixelBuffer(np.asarray(im, dtype=np.uint8).copy())


def noise(seed: int, width: int = 160, height: int = 160, blur: float = 1.0) -> PixelBuffer:
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 256, (height, width, 3)).astype(np.float32)
    if blur > 0:
        a = cv2.GaussianBlur(a, (0, 0), blur)
        a = (a - a.mean()) / (a.std() + 1e-9) * 60 + 128
    return PixelBuffer.from_array(a)


def checkerboard(size: int = 256, cell: int = 32) -> PixelBuffer:
    yy, xx = np.mgrid[0:size, 0:size]
    g = np.where(((yy // cell) + (xx // cell)) % 2 == 0, 255, 0).astype(np.uint8)
    return PixelBuffer.from_array(g)


def rotate(img: PixelBuffer, degrees: float, fill=WHITE) -> PixelBuffer:
    """Rotate about the center onto an enlarged canvas so nothing is cut off."""
    h, w = img.shape
    M = cv2.getRotationMatrix2D(((w - 1) / 2, (h - 1) / 2), degrees, 1.0)
    c, s = abs(M[0, 0]), abs(M[0, 1])
    nw, nh = int(math.ceil(w * c + h * s)), int(math.ceil(w * s + h * c))
    M[0, 2] += (nw - w) / 2
    M[1, 2] += (nh - h) / 2
    out = cv2.warpAffine(np.ascontiguousarray(img.data), M, (nw, nh), flags=cv2.INTER_LINEAR,
                         borderMode=cv2.BORDER_CONSTANT, borderValue=tuple(int(v) for v in fill))
    return PixelBuffer(out)


def scale(img: PixelBuffer, factor: float) -> PixelBuffer:
    h, w = img.shape
    size = (max(1, int(round(w * factor))), max(1, int(round(h * factor))))
    interp = cv2.INTER_AREA if factor < 1 else cv2.INTER_LINEAR
    return PixelBuffer(cv2.resize(np.ascontiguousarray(img.data), size, interpolation=interp))


def add_noise(img: PixelBuffer, sigma: float, seed: int = 0) -> PixelBuffer:
    if sigma <= 0:
        return img
    rng = np.random.default_rng(seed)
    return PixelBuffer.from_array(img.data.astype(np.float64) + rng.normal(0, sigma, img.data.shape))


def text_block(rng: np.random.Generator, lines: int, line_width: int, glyph_h: int = 12,
               line_gap: int = 4, color=(20, 20, 20)) -> np.ndarray:
    """Rows of glyph-like marks: 2-3 px apart within a word, 9-10 px between words."""
    h = lines * glyph_h + (lines - 1) * line_gap
    canvas = np.full((h, line_width, 3), 255, dtype=np.uint8)
    for li in range(lines):
        y0 = li * (glyph_h + line_gap)
        x = 0
        while x < line_width - 10:
            word = int(rng.integers(2, 7))
            for _ in range(word):
                gw = int(rng.integers(4, 8))
                if x + gw >= line_width:
                    break
                top = y0 + int(rng.integers(0, 3))
                canvas[top:y0 + glyph_h, x:x + gw] = color
                canvas[top + 2:y0 + glyph_h - 2, x + 1:x + gw - 1] = 255
                x += gw + int(rng.integers(2, 4))
            x += 7
    return canvas


def slide(width: int, height: int, placements: list[tuple[PixelBuffer, int, int]],
          texts: list[tuple[np.ndarray, int, int]] = (), background=WHITE) -> PixelBuffer:
    a = np.empty((height, width, 3), dtype=np.uint8)
    a[:] = np.asarray(background, dtype=np.uint8)
    for img, x, y in placements:
        a[y:y + img.height, x:x + img.width] = img.data
    for block, x, y in texts:
        a[y:y + block.shape[0], x:x + block.shape[1]] = block
    return PixelBuffer(a)


FRAME_W, FRAME_H = 640, 480


def slide_deck(seed: int = 7) -> dict:
    """10 slide frames showing 4 distinct diagrams (repeats across frames) plus text.

    Returns ``{"frames": [(timestamp, PixelBuffer)], "diagrams": [PixelBuffer],
    "layout": [[(diagram_id, BoundingBox)]], "text": [[BoundingBox]], "end_s": float}``
    where each slide is held for several one-second samples.
    """
    rng = np.random.default_rng(seed)
    diagrams = [diagram(seed * 10 + k, 220, 160) for k in range(4)]
    plan = [[0], [0, 1], [1], [2], [2, 3], [3], [0, 3], [1], [2], [3]]
    hold = [6, 9, 4, 12, 7, 5, 10, 3, 8, 6]
    frames, layouts, texts = [], [], []
    t = 0.0
    for shown, secs in zip(plan, hold):
        title = text_block(rng, 1, 360, glyph_h=16)
        body = text_block(rng, 3, 260)
        place, layout = [], []
        slots = [(40, 150), (360, 150)] if len(shown) == 2 else [(210, 150)]
        for d, (x, y) in zip(shown, slots):
            place.append((diagrams[d], x, y))
            layout.append((d, BoundingBox(x, y, diagrams[d].width, diagrams[d].height)))
        text_boxes = [BoundingBox(40, 30, title.shape[1], title.shape[0]),
                      BoundingBox(40, 330, body.shape[1], body.shape[0])]
        frame = slide(FRAME_W, FRAME_H, place, [(title, 40, 30), (body, 40, 330)])
        for k in range(secs):
            frames.append((t + k, frame))
        layouts.append(layout)
        texts.append(text_boxes)
        t += secs
    return {"frames": frames, "diagrams": diagrams, "layout": layouts, "text": texts, "end_s": t}


def diagram_deck(count: int = 30, seed: int = 11, hold: int = 3) -> dict:
    """Slides showing two distinct diagrams each (one on the last slide if ``count`` is odd)."""
    diagrams = [diagram(seed * 1000 + k, 220, 160) for k in range(count)]
    frames, t = [], 0.0
    for first in range(0, count, 2):
        shown = diagrams[first:first + 2]
        slots = [(40, 150), (360, 150)] if len(shown) == 2 else [(210, 150)]
        frame = slide(FRAME_W, FRAME_H, [(d, x, y) for d, (x, y) in zip(shown, slots)])
        frames += [(t + k, frame) for k in range(hold)]
        t += hold
    return {"frames": frames, "diagrams": diagrams, "end_s": t}


def fig1_segment(seed: int = 3) -> dict:
    """Four transition frames whose union holds 6 distinct visuals, some repeated.

    Frame contents (visual ids): [0, 1], [1, 2], [3, 4], [4, 5, 0]; durations 40, 25, 60, 35 s.
    ``samples`` repeats each frame every 5 s, as a sampled video would.
    """
    visuals = [diagram(seed * 100 + k, 180 + 10 * (k % 3), 130 + 10 * (k % 2)) for k in range(6)]
    contents = [[0, 1], [1, 2], [3, 4], [4, 5, 0]]
    durations = [40.0, 25.0, 60.0, 35.0]
    slots = {2: [(30, 120), (380, 120)], 3: [(10, 60), (215, 260), (430, 60)]}
    frames, layouts = [], []
    for vis in contents:
        pos = slots[len(vis)]
        frame = slide(FRAME_W, FRAME_H, [(visuals[v], x, y) for v, (x, y) in zip(vis, pos)])
        frames.append(frame)
        layouts.append([(v, BoundingBox(x, y, visuals[v].width, visuals[v].height)) for v, (x, y) in zip(vis, pos)])
    samples, t = [], 0.0
    for frame, dur in zip(frames, durations):
        samples += [(t + k, frame) for k in np.arange(0.0, dur, 5.0).tolist()]
        t += dur
    return {"frames": frames, "visuals": visuals, "contents": contents, "durations": durations,
            "layout": layouts, "samples": samples, "end_s": t}


# ---- survey fixtures ----

def survey_segment(rng: np.random.Generator, segment_id: str, n_range=(6, 20),
                   participants=(3, 10), similar_prob: float = 0.6) -> dict:
    """One survey segment in file form.

    Images belong to latent topics and have skewed appeal; each participant
    picks 4 images by appeal and marks some unpicked images similar to a picked
    image of the same topic.
    """
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    topic = rng.integers(0, max(2, n // 2), n)
    appeal = rng.gamma(1.0, 1.0, n) + 0.05
    responses = []
    for p in range(int(rng.integers(participants[0], participants[1] + 1))):
        picked = [int(v) for v in rng.choice(n, min(4, n), replace=False, p=appeal / appeal.sum())]
        similar = {}
        for x in range(n):
            if x in picked:
                continue
            same = [s for s in picked if topic[s] == topic[x]]
            if same and rng.random() < similar_prob:
                similar[str(x)] = str(same[0])
        responses.append({"participant_id": f"p{p}", "selected": sorted(picked), "similar": similar,
                          "quality": int(rng.integers(1, 5)), "familiarity": int(rng.integers(1, 5))})
    return {"segment_id": segment_id, "n_images": n, "responses": responses}


# Durations (minutes) and image counts of a 40-segment corpus with the summary
# statistics 2.87/36.03/14.99/14.04 min and 6/30/12.28/11 images.
CORPUS_MINUTES = ([2.87] + [round(4.0 + 0.5 * k, 2) for k in range(18)] + [14.04, 14.04]
                  + [round(15.0 + 0.71 * k, 2) for k in range(17)] + [32.56, 36.03])
CORPUS_IMAGES = ([6, 6, 7, 7, 8, 8, 8, 9, 9, 9, 9, 10, 10, 10, 10, 10, 10, 10, 11, 11]
                 + [11, 11, 12, 12, 13, 13, 14, 14, 14, 15, 15, 16, 16, 17, 17, 17, 18, 19, 19, 30])


def corpus_survey() -> dict:
    """Survey file for the 40-segment corpus shape, one placeholder response per segment."""
    segments = []
    for k, (minutes, n) in enumerate(zip(CORPUS_MINUTES, CORPUS_IMAGES)):
        segments.append({"segment_id": f"seg{k:02d}", "n_images": n, "duration_s": minutes * 60,
                         "responses": [{"participant_id": "p0", "selected": [0, 1, 2, 3], "similar": {},
                                        "quality": 2, "familiarity": 2}]})
    return {"segments": segments}
