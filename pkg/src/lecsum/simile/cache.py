"""JSON cache of keypoints and the distance matrix, keyed by image content."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path

import numpy as np

from lecsum.core import DistanceMatrix, ImageObject
from lecsum.simile.keypoints import Keypoint
from lecsum.simile.similarity import SimilarityConfig

logger = logging.getLogger(__name__)

CACHE_VERSION = 1


def cache_key(images: list[ImageObject], cfg: SimilarityConfig, segment_id: str = "") -> str:
    h = hashlib.sha256()
    h.update(f"v{CACHE_VERSION}|{segment_id}|".encode())
    h.update(json.dumps(dataclasses.asdict(cfg), sort_keys=True).encode())
    for im in images:
        h.update(f"|{im.id}|{im.pixels.width}x{im.pixels.height}|".encode())
        h.update(im.pixels.data.tobytes())
    return h.hexdigest()


def _kp_to_json(k: Keypoint) -> list:
    return [k.x, k.y, k.scale, k.orientation, k.response, k.descriptor.astype(float).tolist()]


def _kp_from_json(v: list) -> Keypoint:
    desc = np.asarray(v[5], dtype=np.float32)
    desc.setflags(write=False)
    return Keypoint(v[0], v[1], v[2], v[3], desc, v[4])


def save(path: str | Path, key: str, images: list[ImageObject], matrix: DistanceMatrix) -> None:
    doc = {
        "version": CACHE_VERSION,
        "key": key,
        "keypoints": [[_kp_to_json(k) for k in (im.keypoints or ())] for im in images],
        "distance": matrix.to_dict(),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".cache-")
    with os.fdopen(fd, "w") as f:
        json.dump(doc, f)
    os.replace(tmp, path)


def load(path: str | Path, key: str) -> tuple[list[list[Keypoint]], DistanceMatrix] | None:
    """Cached ``(keypoints per image, matrix)`` or None on a miss or unreadable file."""
    path = Path(path)
    if not path.exists():
        return None
    try:
        doc = json.loads(path.read_text())
        if doc.get("version") != CACHE_VERSION or doc.get("key") != key:
            return None
        kps = [[_kp_from_json(v) for v in per] for per in doc["keypoints"]]
        return kps, DistanceMatrix.from_dict(doc["distance"])
    except (OSError, ValueError, KeyError, IndexError, TypeError) as exc:
        logger.warning("ignoring unreadable cache %s: %s", path, exc)
        return None
