"""Render selected images into a single summary frame of uniform cells."""
from __future__ import annotations

import io
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from lecsum.core import LecsumError, PixelBuffer, SchemaError, Summary, serialize_summary


@dataclass(frozen=True)
class GridSpec:
    cell_w: int = 320
    cell_h: int = 240
    padding_px: int = 8
    background: tuple[int, int, int] = (255, 255, 255)

    def __post_init__(self):
        if self.cell_w < 1 or self.cell_h < 1:
            raise SchemaError("cell", "cell dimensions must be positive")
        if self.padding_px < 0:
            raise SchemaError("padding_px", "must be >= 0")
        object.__setattr__(self, "background", tuple(int(c) for c in self.background))

    def grid_shape(self, count: int) -> tuple[int, int]:
        """(rows, cols) for ``count`` images: cols = ceil(sqrt(count))."""
        cols = math.ceil(math.sqrt(count))
        return math.ceil(count / cols), cols

    def frame_size(self, count: int) -> tuple[int, int]:
        """(width, height) of the composed frame."""
        rows, cols = self.grid_shape(count)
        p = self.padding_px
        return cols * (self.cell_w + p) + p, rows * (self.cell_h + p) + p


def fit_size(w: int, h: int, cell_w: int, cell_h: int) -> tuple[int, int]:
    s = min(cell_w / w, cell_h / h)
    return max(1, min(cell_w, round(w * s))), max(1, min(cell_h, round(h * s)))


def compose_grid(images: list[PixelBuffer], spec: GridSpec = GridSpec()) -> PixelBuffer:
    """Place images row-major, each scaled to fit its cell with aspect kept and centered."""
    if not images:
        raise SchemaError("images", "need at least one image")
    _, cols = spec.grid_shape(len(images))
    W, H = spec.frame_size(len(images))
    out = np.empty((H, W, 3), dtype=np.uint8)
    out[:] = np.asarray(spec.background, dtype=np.uint8)
    p = spec.padding_px
    for k, img in enumerate(images):
        r, c = divmod(k, cols)
        tw, th = fit_size(img.width, img.height, spec.cell_w, spec.cell_h)
        scaled = np.asarray(Image.fromarray(img.data).resize((tw, th), Image.Resampling.LANCZOS))
        x0 = p + c * (spec.cell_w + p) + (spec.cell_w - tw) // 2
        y0 = p + r * (spec.cell_h + p) + (spec.cell_h - th) // 2
        out[y0:y0 + th, x0:x0 + tw] = scaled
    return PixelBuffer(out)


def png_bytes(pixels: PixelBuffer) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels.data).save(buf, format="PNG")
    return buf.getvalue()


def atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_summary_artifacts(summary: Summary, frame: PixelBuffer, out_dir: str | Path) -> tuple[Path, Path]:
    """Write ``summary.png`` and ``summary.json``; both are staged before either lands."""
    out = Path(out_dir)
    png_path, json_path = out / "summary.png", out / "summary.json"
    staged: list[tuple[str, Path]] = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for path, data in ((png_path, png_bytes(frame)), (json_path, serialize_summary(summary).encode())):
            fd, tmp = tempfile.mkstemp(dir=out, prefix=f".{path.name}.")
            staged.append((tmp, path))
            with os.fdopen(fd, "wb") as f:
                f.write(data)
    except OSError as exc:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise ArtifactWriteError(f"cannot write summary artifacts to {out}: {exc}") from exc
    for tmp, path in staged:
        os.replace(tmp, path)
    return png_path, json_path


class ArtifactWriteError(LecsumError, OSError):
    pass
