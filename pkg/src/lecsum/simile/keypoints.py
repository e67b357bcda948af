"""Scale-invariant keypoints: difference-of-Gaussians extrema with gradient-histogram descriptors.

Follows the classic SIFT recipe (Lowe, 2004). Gaussian blurring and resizing
come from OpenCV; detection, refinement, orientation assignment and the
descriptor are implemented here with numpy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np
from scipy import ndimage

from lecsum.core import PixelBuffer

DESCRIPTOR_LENGTH = 128
MIN_SIDE = 16


@dataclass(frozen=True, eq=False)
class Keypoint:
    x: float
    y: float
    scale: float
    orientation: float
    descriptor: np.ndarray
    response: float = 0.0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Keypoint):
            return NotImplemented
        return (self.x, self.y, self.scale, self.orientation) == (
            other.x, other.y, other.scale, other.orientation) and np.array_equal(
            self.descriptor, other.descriptor)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class SiftParams:
    sigma: float = 1.6
    intervals: int = 3
    contrast_threshold: float = 0.04
    edge_ratio: float = 10.0
    assumed_blur: float = 0.5
    upsample: bool = True
    border: int = 5
    max_refine_steps: int = 5
    orientation_bins: int = 36
    peak_ratio: float = 0.8
    descriptor_width: int = 4
    descriptor_bins: int = 8
    descriptor_clip: float = 0.2


def _gaussian_pyramid(gray: np.ndarray, p: SiftParams) -> list[list[np.ndarray]]:
    if p.upsample:
        base = cv2.resize(gray, None, fx=2, fy=2, interpolation=cv2.INTER_LINEAR)
        blur = 2 * p.assumed_blur
    else:
        base = gray
        blur = p.assumed_blur
    base = cv2.GaussianBlur(base, (0, 0), sigmaX=math.sqrt(max(p.sigma ** 2 - blur ** 2, 0.01)))

    n_octaves = max(1, int(math.floor(math.log2(min(base.shape)))) - 3)
    k = 2 ** (1.0 / p.intervals)
    increments = [p.sigma]
    for i in range(1, p.intervals + 3):
        prev = p.sigma * k ** (i - 1)
        increments.append(math.sqrt((prev * k) ** 2 - prev ** 2))

    pyramid = []
    img = base
    for o in range(n_octaves):
        layers = [img]
        for inc in increments[1:]:
            layers.append(cv2.GaussianBlur(layers[-1], (0, 0), sigmaX=inc))
        pyramid.append(layers)
        img = layers[p.intervals][::2, ::2]
        if min(img.shape) < 2 * p.border + 3:
            break
    return pyramid


def _refine(dog: np.ndarray, cand: np.ndarray, p: SiftParams):
    """Quadratic sub-pixel refinement of candidate extrema (layer, row, col).

    Returns integer positions, offsets, and interpolated contrast for survivors.
    """
    n_layers, h, w = dog.shape
    pos = cand.astype(np.int64)
    alive = np.ones(len(pos), dtype=bool)
    done = np.zeros(len(pos), dtype=bool)
    offset = np.zeros((len(pos), 3))
    grad = np.zeros((len(pos), 3))
    for _ in range(p.max_refine_steps):
        idx = np.flatnonzero(alive & ~done)
        if idx.size == 0:
            break
        s, r, c = pos[idx].T
        v = dog[s, r, c]
        gs = 0.5 * (dog[s + 1, r, c] - dog[s - 1, r, c])
        gr = 0.5 * (dog[s, r + 1, c] - dog[s, r - 1, c])
        gc = 0.5 * (dog[s, r, c + 1] - dog[s, r, c - 1])
        hss = dog[s + 1, r, c] + dog[s - 1, r, c] - 2 * v
        hrr = dog[s, r + 1, c] + dog[s, r - 1, c] - 2 * v
        hcc = dog[s, r, c + 1] + dog[s, r, c - 1] - 2 * v
        hsr = 0.25 * (dog[s + 1, r + 1, c] - dog[s + 1, r - 1, c] - dog[s - 1, r + 1, c] + dog[s - 1, r - 1, c])
        hsc = 0.25 * (dog[s + 1, r, c + 1] - dog[s + 1, r, c - 1] - dog[s - 1, r, c + 1] + dog[s - 1, r, c - 1])
        hrc = 0.25 * (dog[s, r + 1, c + 1] - dog[s, r + 1, c - 1] - dog[s, r - 1, c + 1] + dog[s, r - 1, c - 1])
        H = np.stack([np.stack([hss, hsr, hsc], -1),
                      np.stack([hsr, hrr, hrc], -1),
                      np.stack([hsc, hrc, hcc], -1)], -2)
        g = np.stack([gs, gr, gc], -1)
        det = np.linalg.det(H)
        ok = np.abs(det) > 1e-12
        alive[idx[~ok]] = False
        idx, H, g = idx[ok], H[ok], g[ok]
        if idx.size == 0:
            break
        off = -np.linalg.solve(H, g[:, :, None])[:, :, 0]
        offset[idx] = off
        grad[idx] = g
        converged = np.all(np.abs(off) < 0.5, axis=1)
        done[idx[converged]] = True
        moving = idx[~converged]
        pos[moving] += np.rint(offset[moving]).astype(np.int64)
        s, r, c = pos[moving].T
        inside = ((s >= 1) & (s <= n_layers - 2) & (r >= p.border) & (r < h - p.border)
                  & (c >= p.border) & (c < w - p.border))
        alive[moving[~inside]] = False
    keep = alive & done
    pos, offset, grad = pos[keep], offset[keep], grad[keep]
    s, r, c = pos.T
    contrast = dog[s, r, c] + 0.5 * np.einsum("ij,ij->i", grad, offset)
    return pos, offset, contrast


def _edge_ok(dog: np.ndarray, pos: np.ndarray, ratio: float) -> np.ndarray:
    s, r, c = pos.T
    v = dog[s, r, c]
    hrr = dog[s, r + 1, c] + dog[s, r - 1, c] - 2 * v
    hcc = dog[s, r, c + 1] + dog[s, r, c - 1] - 2 * v
    hrc = 0.25 * (dog[s, r + 1, c + 1] - dog[s, r + 1, c - 1] - dog[s, r - 1, c + 1] + dog[s, r - 1, c - 1])
    tr = hrr + hcc
    det = hrr * hcc - hrc ** 2
    return (det > 0) & (tr ** 2 * ratio < (ratio + 1) ** 2 * det)


def _gradients(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    dx = np.zeros_like(img)
    dy = np.zeros_like(img)
    dx[:, 1:-1] = img[:, 2:] - img[:, :-2]
    dy[1:-1, :] = img[2:, :] - img[:-2, :]
    return np.hypot(dx, dy), np.arctan2(dy, dx)


def _orientations(mag, ang, r, c, sigma, p: SiftParams) -> list[float]:
    h, w = mag.shape
    s = 1.5 * sigma
    rad = int(round(3 * s))
    r0, r1 = max(1, r - rad), min(h - 1, r + rad + 1)
    c0, c1 = max(1, c - rad), min(w - 1, c + rad + 1)
    if r0 >= r1 or c0 >= c1:
        return []
    yy, xx = np.mgrid[r0:r1, c0:c1]
    wgt = np.exp(-((yy - r) ** 2 + (xx - c) ** 2) / (2 * s * s))
    nb = p.orientation_bins
    bins = np.floor(ang[r0:r1, c0:c1] * nb / (2 * np.pi)).astype(int) % nb
    hist = np.bincount(bins.ravel(), weights=(wgt * mag[r0:r1, c0:c1]).ravel(), minlength=nb)
    hist = (6 * hist + 4 * (np.roll(hist, 1) + np.roll(hist, -1)) + np.roll(hist, 2) + np.roll(hist, -2)) / 16
    peak = hist.max()
    if peak <= 0:
        return []
    left, right = np.roll(hist, 1), np.roll(hist, -1)
    out = []
    for b in np.flatnonzero((hist > left) & (hist > right) & (hist >= p.peak_ratio * peak)):
        denom = left[b] - 2 * hist[b] + right[b]
        frac = 0.5 * (left[b] - right[b]) / denom if denom != 0 else 0.0
        out.append(((b + frac) % nb) * 2 * np.pi / nb)
    return out


def _descriptor(mag, ang, r, c, sigma, angle, p: SiftParams) -> np.ndarray | None:
    h, w = mag.shape
    d, nb = p.descriptor_width, p.descriptor_bins
    bin_width = 3 * sigma
    rad = int(round(bin_width * math.sqrt(2) * (d + 1) * 0.5))
    rad = min(rad, int(math.hypot(h, w)))
    r0, r1 = max(1, r - rad), min(h - 1, r + rad + 1)
    c0, c1 = max(1, c - rad), min(w - 1, c + rad + 1)
    if r0 >= r1 or c0 >= c1:
        return None
    yy, xx = np.mgrid[r0:r1, c0:c1]
    dy, dx = (yy - r).ravel(), (xx - c).ravel()
    cos_a, sin_a = math.cos(angle), math.sin(angle)
    # sample offsets in the keypoint frame, in units of histogram cells
    rot_c = (cos_a * dx + sin_a * dy) / bin_width
    rot_r = (-sin_a * dx + cos_a * dy) / bin_width
    rb = rot_r + d / 2 - 0.5
    cb = rot_c + d / 2 - 0.5
    keep = (rb > -1) & (rb < d) & (cb > -1) & (cb < d)
    if not np.any(keep):
        return None
    rb, cb = rb[keep], cb[keep]
    m = mag[r0:r1, c0:c1].ravel()[keep]
    theta = (ang[r0:r1, c0:c1].ravel()[keep] - angle) % (2 * np.pi)
    ob = theta * nb / (2 * np.pi)
    m = m * np.exp(-(rot_r[keep] ** 2 + rot_c[keep] ** 2) / (0.5 * d * d))

    r_i, c_i, o_i = np.floor(rb).astype(int), np.floor(cb).astype(int), np.floor(ob).astype(int)
    fr, fc, fo = rb - r_i, cb - c_i, ob - o_i
    hist = np.zeros((d + 2, d + 2, nb))
    for dr, wr in ((0, 1 - fr), (1, fr)):
        for dc, wc in ((0, 1 - fc), (1, fc)):
            for do, wo in ((0, 1 - fo), (1, fo)):
                np.add.at(hist, (r_i + 1 + dr, c_i + 1 + dc, (o_i + do) % nb), m * wr * wc * wo)
    vec = hist[1:-1, 1:-1, :].ravel()
    norm = np.linalg.norm(vec)
    if norm <= 1e-12:
        return None
    vec = np.minimum(vec / norm, p.descriptor_clip)
    vec /= np.linalg.norm(vec)
    return vec.astype(np.float32)


def extract_keypoints(image: PixelBuffer | np.ndarray, params: SiftParams = SiftParams()) -> list[Keypoint]:
    """Detect keypoints in ``image``; inputs smaller than 16x16 yield none.

    Output is sorted by (y, x, scale, orientation) and fully deterministic.
    """
    gray = image.gray() if isinstance(image, PixelBuffer) else np.asarray(image, dtype=np.float32)
    if gray.ndim != 2 or min(gray.shape) < MIN_SIDE:
        return []
    gray = gray.astype(np.float32) / 255.0
    height, width = gray.shape
    up = 2.0 if params.upsample else 1.0
    threshold = 0.5 * params.contrast_threshold / params.intervals

    found: dict[tuple, Keypoint] = {}
    for o, layers in enumerate(_gaussian_pyramid(gray, params)):
        dog = np.stack([b - a for a, b in zip(layers, layers[1:])])
        n_layers, h, w = dog.shape
        if h <= 2 * params.border or w <= 2 * params.border:
            continue
        mx = ndimage.maximum_filter(dog, size=3, mode="nearest")
        mn = ndimage.minimum_filter(dog, size=3, mode="nearest")
        ext = ((dog == mx) & (dog > threshold)) | ((dog == mn) & (dog < -threshold))
        ext[0] = ext[-1] = False
        b = params.border
        ext[:, :b] = ext[:, h - b:] = False
        ext[:, :, :b] = ext[:, :, w - b:] = False
        cand = np.argwhere(ext)
        if cand.size == 0:
            continue
        pos, off, contrast = _refine(dog, cand, params)
        keep = np.abs(contrast) * params.intervals >= params.contrast_threshold
        pos, off, contrast = pos[keep], off[keep], contrast[keep]
        keep = _edge_ok(dog, pos, params.edge_ratio)
        pos, off, contrast = pos[keep], off[keep], contrast[keep]

        grads = {}
        for (s, r, c), (os_, or_, oc), resp in zip(pos, off, contrast):
            s, r, c = int(s), int(r), int(c)
            sigma_oct = params.sigma * 2 ** ((s + os_) / params.intervals)
            if s not in grads:
                grads[s] = _gradients(layers[s])
            mag, ang = grads[s]
            # octave pixel -> upsampled base pixel -> input pixel (cv2 resize centers)
            scale_o = 2.0 ** o
            x = ((c + oc) * scale_o + 0.5) / up - 0.5 if up > 1 else (c + oc) * scale_o
            y = ((r + or_) * scale_o + 0.5) / up - 0.5 if up > 1 else (r + or_) * scale_o
            if not (0 <= x <= width - 1 and 0 <= y <= height - 1):
                continue
            kp_scale = sigma_oct * scale_o / up
            for angle in _orientations(mag, ang, r, c, sigma_oct, params):
                desc = _descriptor(mag, ang, r, c, sigma_oct, angle, params)
                if desc is None:
                    continue
                desc.setflags(write=False)
                key = (round(x, 4), round(y, 4), round(kp_scale, 4), round(angle, 4))
                if key not in found:
                    found[key] = Keypoint(float(x), float(y), float(kp_scale), float(angle),
                                          desc, float(abs(resp)))
    return [found[k] for k in sorted(found, key=lambda k: (k[1], k[0], k[2], k[3]))]


def descriptor_matrix(keypoints: list[Keypoint]) -> np.ndarray:
    if not keypoints:
        return np.zeros((0, DESCRIPTOR_LENGTH), dtype=np.float32)
    return np.stack([k.descriptor for k in keypoints])


def positions(keypoints: list[Keypoint]) -> np.ndarray:
    if not keypoints:
        return np.zeros((0, 2))
    return np.array([(k.x, k.y) for k in keypoints], dtype=np.float64)
