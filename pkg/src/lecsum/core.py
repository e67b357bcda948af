"""Shared domain types for the summarization pipeline and their JSON forms.

Every type here is immutable after construction. Numpy-backed types mark
their arrays read-only so they can be shared between threads.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:
    from lecsum.simile.keypoints import Keypoint

METHODS = ("greedy", "exhaustive", "kmedoid")


class LecsumError(Exception):
    """Base class for errors raised by this package."""


class SchemaError(LecsumError, ValueError):
    """A document or value does not satisfy its schema; ``field`` names the culprit."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PixelBuffer:
    """8-bit RGB image stored row-major as an ``(height, width, 3)`` array."""

    data: np.ndarray

    def __post_init__(self):
        d = self.data
        if not isinstance(d, np.ndarray) or d.dtype != np.uint8 or d.ndim != 3 or d.shape[2] != 3:
            raise SchemaError("data", "expected a uint8 array of shape (h, w, 3)")
        if d.shape[0] < 1 or d.shape[1] < 1:
            raise SchemaError("data", "width and height must be >= 1")
        object.__setattr__(self, "data", _frozen(d))

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "PixelBuffer":
        """Normalize grayscale, RGBA or float-in-[0,255] arrays to 8-bit RGB."""
        a = np.asarray(arr)
        if a.ndim == 2:
            a = np.repeat(a[:, :, None], 3, axis=2)
        elif a.ndim == 3 and a.shape[2] == 1:
            a = np.repeat(a, 3, axis=2)
        elif a.ndim == 3 and a.shape[2] == 4:
            a = a[:, :, :3]
        if a.ndim != 3 or a.shape[2] != 3:
            raise SchemaError("data", f"cannot interpret array of shape {np.shape(arr)} as RGB")
        if a.dtype != np.uint8:
            a = np.clip(np.rint(a.astype(np.float64)), 0, 255).astype(np.uint8)
        return cls(a.copy())

    @classmethod
    def solid(cls, width: int, height: int, rgb: Sequence[int] = (255, 255, 255)) -> "PixelBuffer":
        a = np.empty((height, width, 3), dtype=np.uint8)
        a[:] = np.asarray(rgb, dtype=np.uint8)
        return cls(a)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[0], self.data.shape[1]

    def gray(self) -> np.ndarray:
        """Luma (ITU-R 601) as float32 in [0, 255]."""
        d = self.data.astype(np.float32)
        return 0.299 * d[:, :, 0] + 0.587 * d[:, :, 1] + 0.114 * d[:, :, 2]

    def crop(self, box: "BoundingBox") -> "PixelBuffer":
        box.check_within(self.width, self.height)
        return PixelBuffer(self.data[box.y:box.y + box.h, box.x:box.x + box.w].copy())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PixelBuffer):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))

    def __hash__(self) -> int:
        return hash((self.data.shape, self.data.tobytes()))


@dataclass(frozen=True, order=True)
class BoundingBox:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise SchemaError(name, f"expected an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.w < 1 or self.h < 1:
            raise SchemaError("w" if self.w < 1 else "h", "box extent must be >= 1")
        if self.x < 0 or self.y < 0:
            raise SchemaError("x" if self.x < 0 else "y", "box origin must be non-negative")

    @property
    def x2(self) -> int:
        return self.x + self.w

    @property
    def y2(self) -> int:
        return self.y + self.h

    @property
    def area(self) -> int:
        return self.w * self.h

    def check_within(self, width: int, height: int) -> None:
        if self.x2 > width or self.y2 > height:
            raise SchemaError("bbox", f"{self} exceeds frame {width}x{height}")

    def intersects(self, other: "BoundingBox") -> bool:
        return self.x < other.x2 and other.x < self.x2 and self.y < other.y2 and other.y < self.y2

    def union(self, other: "BoundingBox") -> "BoundingBox":
        x, y = min(self.x, other.x), min(self.y, other.y)
        return BoundingBox(x, y, max(self.x2, other.x2) - x, max(self.y2, other.y2) - y)

    def gap(self, other: "BoundingBox") -> int:
        """Chebyshev separation in pixels; 0 when the boxes touch or overlap."""
        dx = max(0, other.x - self.x2, self.x - other.x2)
        dy = max(0, other.y - self.y2, self.y - other.y2)
        return max(dx, dy)

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}

    @classmethod
    def from_dict(cls, d: Any) -> "BoundingBox":
        if not isinstance(d, dict):
            raise SchemaError("box", f"expected an object, got {type(d).__name__}")
        missing = [k for k in ("x", "y", "w", "h") if k not in d]
        if missing:
            raise SchemaError(missing[0], "missing box field")
        return cls(d["x"], d["y"], d["w"], d["h"])


@dataclass(frozen=True)
class TransitionFrame:
    index: int
    timestamp_s: float
    pixels: PixelBuffer
    text_regions: tuple[BoundingBox, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "text_regions", tuple(self.text_regions))
        for b in self.text_regions:
            b.check_within(self.pixels.width, self.pixels.height)


@dataclass(frozen=True)
class ImageObject:
    """A visual object extracted from a segment.

    ``keypoints`` is filled by the similarity module; ``keypoint_count`` is
    kept separately so importance can be computed from a stored count.
    """

    id: int
    pixels: PixelBuffer
    source_frame: int
    bbox: BoundingBox
    duration_s: float
    keypoint_count: int = 0
    keypoints: tuple["Keypoint", ...] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.duration_s > 0:
            raise SchemaError("duration_s", f"must be > 0, got {self.duration_s}")
        if self.keypoint_count < 0:
            raise SchemaError("keypoint_count", "must be >= 0")
        if self.keypoints is not None:
            object.__setattr__(self, "keypoints", tuple(self.keypoints))
            object.__setattr__(self, "keypoint_count", len(self.keypoints))

    @property
    def area_px(self) -> int:
        return self.bbox.area

    def with_keypoints(self, keypoints: Iterable["Keypoint"]) -> "ImageObject":
        return ImageObject(self.id, self.pixels, self.source_frame, self.bbox,
                           self.duration_s, keypoints=tuple(keypoints))


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 1:
            raise SchemaError("distance", f"expected a non-empty square matrix, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise SchemaError("distance", "entries must be finite")
        if np.any(np.diag(v) != 0):
            raise SchemaError("distance", "diagonal must be zero")
        if not np.array_equal(v, v.T):
            raise SchemaError("distance", "matrix must be symmetric")
        if v.min() < 0 or v.max() > 1:
            raise SchemaError("distance", "entries must lie in [0, 1]")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DistanceMatrix):
            return NotImplemented
        return bool(np.array_equal(self.values, other.values))

    def to_dict(self) -> dict:
        return {"n": self.n, "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DistanceMatrix":
        if "values" not in d:
            raise SchemaError("values", "missing")
        m = cls(np.asarray(d["values"], dtype=np.float64))
        if "n" in d and d["n"] != m.n:
            raise SchemaError("n", f"declares {d['n']} but matrix is {m.n}x{m.n}")
        return m


@dataclass(frozen=True, eq=False)
class ImportanceVector:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 1:
            raise SchemaError("importance", "expected a non-empty vector")
        if not np.all(np.isfinite(v)) or np.any(v <= 0) or np.any(v > 1):
            raise SchemaError("importance", "values must lie in (0, 1]")
        object.__setattr__(self, "values", _frozen(v))

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ImportanceVector):
            return NotImplemented
        return bool(np.array_equal(self.values, other.values))

    def to_dict(self) -> dict:
        return {"values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ImportanceVector":
        if "values" not in d:
            raise SchemaError("values", "missing")
        return cls(np.asarray(d["values"], dtype=np.float64))


@dataclass(frozen=True)
class Summary:
    segment_id: str
    selected: tuple[int, ...]
    objective: float
    method: str

    def __post_init__(self):
        if not isinstance(self.segment_id, str):
            raise SchemaError("segment_id", "expected a string")
        sel = tuple(self.selected)
        for s in sel:
            if isinstance(s, bool) or not isinstance(s, (int, np.integer)) or s < 0:
                raise SchemaError("selected", f"ids must be non-negative integers, got {s!r}")
        sel = tuple(int(s) for s in sel)
        if not sel:
            raise SchemaError("selected", "must not be empty")
        if len(set(sel)) != len(sel):
            raise SchemaError("selected", "ids must be distinct")
        object.__setattr__(self, "selected", sel)
        obj = self.objective
        if isinstance(obj, bool) or not isinstance(obj, (int, float, np.floating)) or not math.isfinite(obj) or obj < 0:
            raise SchemaError("objective", f"must be a finite real >= 0, got {obj!r}")
        object.__setattr__(self, "objective", float(obj))
        if self.method not in METHODS:
            raise SchemaError("method", f"must be one of {METHODS}, got {self.method!r}")

    def check_against(self, n: int, m: int) -> None:
        """Raise if the selection does not fit an ``n``-image problem with target size ``m``."""
        if any(s >= n for s in self.selected):
            raise SchemaError("selected", f"id out of range for n={n}")
        if len(self.selected) != min(m, n):
            raise SchemaError("selected", f"expected {min(m, n)} ids, got {len(self.selected)}")

    def to_dict(self) -> dict:
        return {"segment_id": self.segment_id, "method": self.method,
                "selected": list(self.selected), "objective": self.objective}

    @classmethod
    def from_dict(cls, d: Any) -> "Summary":
        if not isinstance(d, dict):
            raise SchemaError("<root>", "expected a JSON object")
        for key in ("segment_id", "method", "selected", "objective"):
            if key not in d:
                raise SchemaError(key, "missing")
        if not isinstance(d["selected"], list):
            raise SchemaError("selected", "expected a list")
        return cls(d["segment_id"], tuple(d["selected"]), d["objective"], d["method"])


def serialize_summary(summary: Summary) -> str:
    return json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n"


def deserialize_summary(text: str) -> Summary:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("<root>", f"not valid JSON ({exc.msg})") from exc
    return Summary.from_dict(doc)
