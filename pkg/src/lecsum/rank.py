"""Importance of image objects: normalized size x information density x display time."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lecsum.core import ImageObject, ImportanceVector, SchemaError

EPSILON = 1e-6


@dataclass(frozen=True)
class RawFeatures:
    size_px: float
    info_density: float
    duration_s: float

    def __post_init__(self):
        if not self.size_px > 0:
            raise SchemaError("size_px", "must be > 0")
        if not self.info_density >= 0:
            raise SchemaError("info_density", "must be >= 0")
        if not self.duration_s > 0:
            raise SchemaError("duration_s", "must be > 0")


def info_density(obj: ImageObject) -> float:
    """Keypoints per square pixel."""
    return obj.keypoint_count / obj.area_px


def raw_features(obj: ImageObject) -> RawFeatures:
    return RawFeatures(float(obj.area_px), info_density(obj), float(obj.duration_s))


def importance_from_features(features: list[RawFeatures]) -> ImportanceVector:
    """Max-normalize each feature over the segment, floor at EPSILON, multiply."""
    if not features:
        raise SchemaError("objects", "need at least one image")
    table = np.array([[f.size_px, f.info_density, f.duration_s] for f in features], dtype=np.float64)
    peak = table.max(axis=0)
    norm = np.divide(table, peak, out=np.zeros_like(table), where=peak > 0)
    # an all-zero column (no keypoints anywhere) carries no information
    norm[:, peak == 0] = 1.0
    norm = np.maximum(norm, EPSILON)
    return ImportanceVector(np.minimum(norm.prod(axis=1), 1.0))


def importance_vector(objects: list[ImageObject]) -> ImportanceVector:
    return importance_from_features([raw_features(o) for o in objects])
