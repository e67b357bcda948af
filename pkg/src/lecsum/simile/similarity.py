"""Pairwise visual similarity from keypoint matches and affine alignment."""
from __future__ import annotations

import hashlib
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import cv2
import numpy as np

from lecsum.core import DistanceMatrix, ImageObject, SchemaError
from lecsum.simile.keypoints import Keypoint, descriptor_matrix, extract_keypoints, positions

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimilarityConfig:
    ratio_threshold: float = 0.75
    min_matches_for_transform: int = 3
    ransac_iterations: int = 500
    inlier_tolerance_px: float = 3.0
    # a consensus must hold beyond its 3-point sample, else any 3 matches fit exactly
    min_inliers: int = 4
    min_overlap: float = 0.25
    max_scale: float = 8.0
    max_anisotropy: float = 4.0

    def __post_init__(self):
        if not 0 < self.ratio_threshold < 1:
            raise SchemaError("ratio_threshold", "must lie in (0, 1)")
        if self.min_matches_for_transform < 3:
            raise SchemaError("min_matches_for_transform", "an affine fit needs >= 3 matches")
        if self.ransac_iterations < 1:
            raise SchemaError("ransac_iterations", "must be >= 1")
        if self.inlier_tolerance_px <= 0:
            raise SchemaError("inlier_tolerance_px", "must be > 0")
        if self.min_inliers < 3:
            raise SchemaError("min_inliers", "must be >= 3")


@dataclass(frozen=True)
class MatchSet:
    """Injective keypoint correspondences ``(index_a, index_b, descriptor_distance)``."""

    pairs: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        pairs = tuple((int(i), int(j), float(d)) for i, j, d in self.pairs)
        if len({p[0] for p in pairs}) != len(pairs) or len({p[1] for p in pairs}) != len(pairs):
            raise SchemaError("pairs", "matches must be one-to-one")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def reversed(self) -> "MatchSet":
        return MatchSet(tuple(sorted((j, i, d) for i, j, d in self.pairs)))


def pair_seed(segment_id: str, i: int, j: int) -> int:
    digest = hashlib.blake2b(f"{segment_id}\x1f{i}\x1f{j}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _keypoints(obj: ImageObject) -> tuple[Keypoint, ...]:
    return obj.keypoints if obj.keypoints is not None else tuple(extract_keypoints(obj.pixels))


def match_keypoints(a: list[Keypoint], b: list[Keypoint], cfg: SimilarityConfig = SimilarityConfig()) -> MatchSet:
    """Nearest-neighbour matching with the ratio test, kept only where the match is mutual."""
    if not a or not b:
        return MatchSet()
    da, db = descriptor_matrix(list(a)).astype(np.float64), descriptor_matrix(list(b)).astype(np.float64)
    sq = (da * da).sum(1)[:, None] + (db * db).sum(1)[None, :] - 2.0 * da @ db.T
    dist = np.sqrt(np.maximum(sq, 0.0))
    best = np.argmin(dist, axis=1)
    d1 = dist[np.arange(len(a)), best]
    if len(b) > 1:
        d2 = np.partition(dist, 1, axis=1)[:, 1]
    else:
        d2 = np.full(len(a), np.inf)
    back = np.argmin(dist, axis=0)
    pairs = [(i, int(best[i]), float(d1[i])) for i in range(len(a))
             if d1[i] < cfg.ratio_threshold * d2[i] and back[best[i]] == i]
    return MatchSet(tuple(pairs))


def keypoints_score(a: ImageObject, b: ImageObject, matches: MatchSet) -> float:
    """Matched fraction of the smaller keypoint set."""
    denom = min(a.keypoint_count, b.keypoint_count)
    if denom == 0:
        return 0.0
    return min(1.0, len(matches) / denom)


def _affine_from(src: np.ndarray, dst: np.ndarray) -> np.ndarray | None:
    """Least-squares 2x3 affine with ``dst ~ A @ [src, 1]``; None if degenerate."""
    X = np.hstack([src, np.ones((len(src), 1))])
    if np.linalg.matrix_rank(X) < 3:
        return None
    sol, *_ = np.linalg.lstsq(X, dst, rcond=None)
    return sol.T


def _plausible(A: np.ndarray, cfg: SimilarityConfig) -> bool:
    L = A[:, :2]
    if np.linalg.det(L) <= 0:
        return False
    s = np.linalg.svd(L, compute_uv=False)
    return 1.0 / cfg.max_scale <= s[1] and s[0] <= cfg.max_scale and s[0] <= cfg.max_anisotropy * s[1]


def _triangle_area(p: np.ndarray) -> float:
    (x0, y0), (x1, y1), (x2, y2) = p
    return 0.5 * abs((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))


def estimate_affine(src: np.ndarray, dst: np.ndarray, cfg: SimilarityConfig, seed: int) -> tuple[np.ndarray | None, np.ndarray]:
    """Random-sample consensus over match triples, refined on the inliers.

    Enumerates every triple when there are no more of them than the iteration
    budget. Returns ``(A, inlier_mask)`` with ``A`` mapping src to dst, or
    ``(None, mask)`` when no plausible consensus of ``min_inliers`` exists.
    """
    k = len(src)
    none = np.zeros(k, dtype=bool)
    if k < 3:
        return None, none
    if math.comb(k, 3) <= cfg.ransac_iterations:
        samples = itertools.combinations(range(k), 3)
    else:
        rng = np.random.default_rng(seed)
        samples = (tuple(rng.choice(k, 3, replace=False)) for _ in range(cfg.ransac_iterations))
    src_h = np.hstack([src, np.ones((k, 1))])
    tol2 = cfg.inlier_tolerance_px ** 2
    # keypoints sharing a location (several orientations) count once, on either side
    _, src_site = np.unique(np.round(src, 1), axis=0, return_inverse=True)
    _, dst_site = np.unique(np.round(dst, 1), axis=0, return_inverse=True)
    src_site, dst_site = src_site.ravel(), dst_site.ravel()

    def support(mask: np.ndarray) -> int:
        return min(np.unique(src_site[mask]).size, np.unique(dst_site[mask]).size)

    best_mask, best_count = none, 0
    for tri in samples:
        idx = list(tri)
        if _triangle_area(src[idx]) < 1.0 or _triangle_area(dst[idx]) < 1.0:
            continue
        A = _affine_from(src[idx], dst[idx])
        if A is None or not _plausible(A, cfg):
            continue
        err = ((src_h @ A.T - dst) ** 2).sum(1)
        mask = err <= tol2
        count = support(mask)
        if count > best_count:
            best_mask, best_count = mask, count
    if best_count < cfg.min_inliers:
        return None, none
    A = _affine_from(src[best_mask], dst[best_mask])
    if A is None or not _plausible(A, cfg):
        return None, none
    mask = ((src_h @ A.T - dst) ** 2).sum(1) <= tol2
    if support(mask) >= best_count:
        refit = _affine_from(src[mask], dst[mask])
        if refit is not None and _plausible(refit, cfg):
            A, best_mask = refit, mask
    return A, best_mask


def aligned_difference(a_gray: np.ndarray, b_gray: np.ndarray, A: np.ndarray, min_overlap: float) -> float | None:
    """Warp ``b`` into ``a``'s frame with ``A`` (b -> a) and return 1 - mean |diff| / 255.

    None when the warped image covers less than ``min_overlap`` of ``a``.
    """
    h, w = a_gray.shape
    warped = cv2.warpAffine(b_gray, A, (w, h), flags=cv2.INTER_LINEAR, borderMode=cv2.BORDER_CONSTANT)
    cover = cv2.warpAffine(np.ones_like(b_gray), A, (w, h), flags=cv2.INTER_LINEAR,
                           borderMode=cv2.BORDER_CONSTANT)
    valid = cover >= 0.999
    if valid.sum() < min_overlap * h * w:
        return None
    diff = np.abs(a_gray[valid] - warped[valid]).mean()
    return float(1.0 - diff / 255.0)


def transformation_score(a: ImageObject, b: ImageObject, matches: MatchSet,
                         cfg: SimilarityConfig = SimilarityConfig(), seed: int = 0) -> float:
    """How well ``b``, affinely aligned onto ``a`` through the matches, reproduces ``a``."""
    if len(matches) < cfg.min_matches_for_transform:
        return 0.0
    kp_a, kp_b = _keypoints(a), _keypoints(b)
    ia = [p[0] for p in matches.pairs]
    ib = [p[1] for p in matches.pairs]
    pa, pb = positions(list(kp_a))[ia], positions(list(kp_b))[ib]
    A, _ = estimate_affine(pb, pa, cfg, seed)
    if A is None:
        return 0.0
    score = aligned_difference(a.pixels.gray(), b.pixels.gray(), A, cfg.min_overlap)
    return 0.0 if score is None else min(1.0, max(0.0, score))


def directional_scores(a: ImageObject, b: ImageObject, cfg: SimilarityConfig, seed: int) -> tuple[float, float]:
    """(keypoints score, transformation score) with ``a`` as the reference image."""
    m = match_keypoints(list(_keypoints(a)), list(_keypoints(b)), cfg)
    return keypoints_score(a, b, m), transformation_score(a, b, m, cfg, seed)


def combine_scores(keypoints: float, transformation: float) -> float:
    """Equal-weight blend of local (keypoint) and global (alignment) similarity."""
    return min(1.0, max(0.0, (keypoints + transformation) / 2))


def similarity(a: ImageObject, b: ImageObject, cfg: SimilarityConfig = SimilarityConfig(),
               segment_id: str = "") -> float:
    """Average of the keypoint and transformation scores, each taken both ways.

    Symmetric exactly: the two directions are summed, and IEEE addition commutes.
    """
    if a.keypoints is None:
        a = a.with_keypoints(extract_keypoints(a.pixels))
    if b.keypoints is None:
        b = b.with_keypoints(extract_keypoints(b.pixels))
    ks_ab, ts_ab = directional_scores(a, b, cfg, pair_seed(segment_id, a.id, b.id))
    ks_ba, ts_ba = directional_scores(b, a, cfg, pair_seed(segment_id, b.id, a.id))
    return combine_scores((ks_ab + ks_ba) / 2, (ts_ab + ts_ba) / 2)


def with_keypoints(images: list[ImageObject], workers: int = 1) -> list[ImageObject]:
    todo = [im for im in images if im.keypoints is None]
    if not todo:
        return list(images)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            kps = dict(zip((im.id for im in todo), pool.map(lambda im: extract_keypoints(im.pixels), todo)))
    else:
        kps = {im.id: extract_keypoints(im.pixels) for im in todo}
    return [im if im.keypoints is not None else im.with_keypoints(kps[im.id]) for im in images]


def build_distance_matrix(images: list[ImageObject], cfg: SimilarityConfig = SimilarityConfig(),
                          segment_id: str = "", workers: int = 1) -> DistanceMatrix:
    """``1 - similarity`` for every pair; each pair is independent and written to its own cells."""
    n = len(images)
    if n < 1:
        raise SchemaError("images", "need at least one image")
    images = with_keypoints(images, workers)
    values = np.zeros((n, n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]

    def fill(pair):
        i, j = pair
        d = 1.0 - similarity(images[i], images[j], cfg, segment_id)
        values[i, j] = values[j, i] = d

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(fill, pairs))
    else:
        for pair in pairs:
            fill(pair)
    logger.debug("distance matrix for %d images (%d pairs)", n, len(pairs))
    return DistanceMatrix(np.clip(values, 0.0, 1.0))
