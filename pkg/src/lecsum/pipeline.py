"""End-to-end summarization of one segment and the run configuration."""
from __future__ import annotations

import configparser
import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from lecsum import compose, ingest, layout, rank, select
from lecsum.compose import GridSpec
from lecsum.core import (DistanceMatrix, ImageObject, ImportanceVector, LecsumError, PixelBuffer,
                         SchemaError, Summary, TransitionFrame, METHODS)
from lecsum.ingest import FrameSequence, TransitionConfig
from lecsum.layout import LayoutConfig, TextAnnotation
from lecsum.simile import cache
from lecsum.simile.similarity import SimilarityConfig, build_distance_matrix, with_keypoints

logger = logging.getLogger(__name__)


class NoObjectsError(LecsumError):
    pass


@dataclass(frozen=True)
class RunConfig:
    transition: TransitionConfig = field(default_factory=TransitionConfig)
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    similarity: SimilarityConfig = field(default_factory=SimilarityConfig)
    grid: GridSpec = field(default_factory=GridSpec)
    m: int = 4
    method: str = "greedy"

    def __post_init__(self):
        if self.m < 1:
            raise SchemaError("m", "must be >= 1")
        if self.method not in METHODS:
            raise SchemaError("method", f"must be one of {METHODS}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})


_SECTIONS = {"transition": TransitionConfig, "layout": LayoutConfig,
             "similarity": SimilarityConfig, "grid": GridSpec}


def _coerce(raw: str, default, where: str):
    try:
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(int(v) for v in raw.replace(" ", "").split(","))
    except ValueError as exc:
        raise SchemaError(where, f"cannot parse {raw!r}") from exc
    return raw


def load_run_config(path: str | Path) -> RunConfig:
    """Read an INI file: sections transition / layout / similarity / grid / select.

    Keys are the dataclass field names; ``[select]`` takes ``m`` and ``method``.
    Unknown sections or keys are errors.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as f:
            parser.read_file(f)
    except (OSError, configparser.Error) as exc:
        raise SchemaError("config", str(exc)) from exc
    parts = {}
    top = {}
    for section in parser.sections():
        if section == "select":
            for key, raw in parser[section].items():
                if key == "m":
                    top["m"] = _coerce(raw, 0, "select.m")
                elif key == "method":
                    top["method"] = raw.strip()
                else:
                    raise SchemaError(f"select.{key}", "unknown key")
            continue
        if section not in _SECTIONS:
            raise SchemaError(section, "unknown config section")
        cls = _SECTIONS[section]
        defaults = cls()
        names = {f.name for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in parser[section].items():
            if key not in names:
                raise SchemaError(f"{section}.{key}", "unknown key")
            kwargs[key] = _coerce(raw, getattr(defaults, key), f"{section}.{key}")
        parts[section] = cls(**kwargs)
    return RunConfig(**parts, **top)


@dataclass
class SegmentResult:
    segment_id: str
    transitions: list[TransitionFrame]
    masked: list[TransitionFrame]
    objects: list[ImageObject]
    distance: DistanceMatrix
    importance: ImportanceVector
    summary: Summary
    frame: PixelBuffer


def summarize_frames(frames: FrameSequence, cfg: RunConfig = RunConfig(), segment_id: str = "",
                     annotations: dict[int, TextAnnotation] | None = None, workers: int = 1,
                     cache_dir: str | Path | None = None) -> SegmentResult:
    """Transition frames, text masking, object extraction and tracking, distances,
    importance, selection and composition for one segment."""
    transitions = ingest.detect_transitions(frames, cfg.transition)
    durations = ingest.frame_durations(transitions, frames.end_s)
    if annotations is not None:
        unknown = sorted(set(annotations) - set(range(len(transitions))))
        if unknown:
            logger.warning("text annotations for frames %s ignored: only %d transition frames",
                           unknown, len(transitions))
        masked = [layout.mask_text_regions(f, annotations.get(f.index, TextAnnotation(f.index)), cfg.layout)
                  for f in transitions]
    else:
        masked = [layout.mask_text_regions(f, None, cfg.layout) for f in transitions]
    boxes = [layout.extract_image_objects(f, cfg.layout) for f in masked]
    objects = layout.track_objects(masked, boxes, durations, cfg.layout, cfg.similarity, segment_id)
    if not objects:
        raise NoObjectsError("no image objects found in any transition frame")

    matrix = None
    cache_path = None
    if cache_dir is not None:
        key = cache.cache_key(objects, cfg.similarity, segment_id)
        cache_path = Path(cache_dir) / f"{key}.json"
        hit = cache.load(cache_path, key)
        if hit is not None:
            kps, matrix = hit
            objects = [o.with_keypoints(k) for o, k in zip(objects, kps)]
    objects = with_keypoints(objects, workers)
    if matrix is None:
        matrix = build_distance_matrix(objects, cfg.similarity, segment_id, workers)
        if cache_path is not None:
            cache.save(cache_path, cache_path.stem, objects, matrix)

    importance = rank.importance_vector(objects)
    problem = select.SelectionProblem(matrix, importance, cfg.m, segment_id)
    summary = select.solve(problem, cfg.method)
    frame = compose.compose_grid([objects[i].pixels for i in summary.selected], cfg.grid)
    logger.info("segment %r: %d transitions, %d objects, selected %s (objective %.4f)",
                segment_id, len(transitions), len(objects), summary.selected, summary.objective)
    return SegmentResult(segment_id, transitions, masked, objects, matrix, importance, summary, frame)


def _json(path: Path, doc) -> None:
    compose.atomic_write(path, (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode())


def write_result(result: SegmentResult, out_dir: str | Path, cfg: RunConfig,
                 diagnostics: bool = True, inputs: dict | None = None) -> None:
    out = Path(out_dir)
    compose.write_summary_artifacts(result.summary, result.frame, out)
    _json(out / "run.json", {"segment_id": result.segment_id, "config": cfg.to_dict(), "inputs": inputs or {}})
    if not diagnostics:
        return
    diag = out / "diagnostics"
    crops = diag / "objects"
    crops.mkdir(parents=True, exist_ok=True)
    _json(diag / "distance_matrix.json", result.distance.to_dict())
    _json(diag / "importance.json", result.importance.to_dict())
    _json(diag / "transitions.json", [
        {"index": f.index, "timestamp_s": f.timestamp_s, "text_regions": [b.to_dict() for b in f.text_regions]}
        for f in result.masked])
    _json(diag / "objects.json", [
        {"id": o.id, "source_frame": o.source_frame, "bbox": o.bbox.to_dict(), "duration_s": o.duration_s,
         "keypoints": o.keypoint_count, "file": f"objects/object_{o.id:03d}.png"}
        for o in result.objects])
    for o in result.objects:
        compose.atomic_write(crops / f"object_{o.id:03d}.png", compose.png_bytes(o.pixels))


def write_frames(frames: list[tuple[float, PixelBuffer]], out_dir: str | Path, end_s: float | None = None) -> Path:
    """Write frames as PNGs plus a timing.json sidecar readable by ``ingest.load_frame_directory``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    timing = {}
    for k, (t, px) in enumerate(frames):
        name = f"frame_{k:05d}.png"
        compose.atomic_write(out / name, compose.png_bytes(px))
        timing[name] = t
    if end_s is not None:
        timing["segment_end"] = end_s
    (out / ingest.TIMING_FILE).write_text(json.dumps(timing, indent=2, sort_keys=True) + "\n")
    return out

