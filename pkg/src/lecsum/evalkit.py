"""Survey ground truth and scoring of algorithm summaries against it.

Survey file layout::

    {"segments": [{"segment_id": str, "n_images": int, "duration_s": float (optional),
                   "responses": [{"participant_id": str, "selected": [int x 4],
                                  "similar": {"<not selected id>": "<selected id>"},
                                  "quality": 1-4, "familiarity": 1-4}]}]}

Ratings run from 1 ("Very Good" / "Very Familiar") to 4 ("Poor" / "Not at all Familiar").
"""
from __future__ import annotations

import csv
import io
import json
import statistics
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from lecsum.core import SchemaError, Summary

SUMMARY_SIZE = 4
FORMULATIONS = ("top4", "all", "top4_grouped", "all_grouped")
CONSENSUS_MIN_VOTES = 3
RATINGS = (1, 2, 3, 4)


@dataclass(frozen=True)
class SurveyResponse:
    participant_id: str
    segment_id: str
    selected: frozenset[int]
    similar: Mapping[int, int] = field(default_factory=dict)
    quality: int | None = None
    familiarity: int | None = None


@dataclass(frozen=True)
class SurveySegment:
    segment_id: str
    n_images: int
    responses: tuple[SurveyResponse, ...]
    duration_s: float | None = None


@dataclass(frozen=True)
class Survey:
    segments: tuple[SurveySegment, ...]

    @property
    def responses(self) -> list[SurveyResponse]:
        return [r for s in self.segments for r in s.responses]

    def segment(self, segment_id: str) -> SurveySegment:
        for s in self.segments:
            if s.segment_id == segment_id:
                return s
        raise KeyError(segment_id)


def _int(value, where: str) -> int:
    if isinstance(value, bool):
        raise SchemaError(where, f"expected an integer, got {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, str) and value.strip().lstrip("-").isdigit():
        return int(value)
    raise SchemaError(where, f"expected an integer, got {value!r}")


def _rating(value, where: str) -> int:
    v = _int(value, where)
    if v not in RATINGS:
        raise SchemaError(where, f"rating must be 1-4, got {v}")
    return v


def parse_response(doc: dict, segment_id: str, n: int, where: str) -> SurveyResponse:
    if not isinstance(doc, dict):
        raise SchemaError(where, "expected an object")
    for key in ("participant_id", "selected"):
        if key not in doc:
            raise SchemaError(f"{where}.{key}", "missing")
    if not isinstance(doc["selected"], list):
        raise SchemaError(f"{where}.selected", "expected a list")
    selected = [_int(v, f"{where}.selected") for v in doc["selected"]]
    if len(set(selected)) != len(selected):
        raise SchemaError(f"{where}.selected", "ids must be distinct")
    if len(selected) != min(SUMMARY_SIZE, n):
        raise SchemaError(f"{where}.selected", f"expected {min(SUMMARY_SIZE, n)} ids, got {len(selected)}")
    if any(not 0 <= s < n for s in selected):
        raise SchemaError(f"{where}.selected", f"ids must lie in [0, {n})")
    raw_similar = doc.get("similar", {}) or {}
    if not isinstance(raw_similar, dict):
        raise SchemaError(f"{where}.similar", "expected an object")
    similar = {}
    for k, v in raw_similar.items():
        x, y = _int(k, f"{where}.similar"), _int(v, f"{where}.similar[{k}]")
        if not 0 <= x < n:
            raise SchemaError(f"{where}.similar", f"image {x} out of range")
        if x in selected:
            raise SchemaError(f"{where}.similar", f"image {x} is selected and cannot be marked similar")
        if y not in selected:
            raise SchemaError(f"{where}.similar[{k}]", f"image {y} is not among the selected images")
        similar[x] = y
    quality = _rating(doc["quality"], f"{where}.quality") if doc.get("quality") is not None else None
    familiarity = (_rating(doc["familiarity"], f"{where}.familiarity")
                   if doc.get("familiarity") is not None else None)
    return SurveyResponse(str(doc["participant_id"]), segment_id, frozenset(selected), similar,
                          quality, familiarity)


def parse_survey(doc) -> Survey:
    if not isinstance(doc, dict) or not isinstance(doc.get("segments"), list):
        raise SchemaError("segments", "expected {\"segments\": [...]}")
    segments = []
    seen = set()
    for si, seg in enumerate(doc["segments"]):
        where = f"segments[{si}]"
        if not isinstance(seg, dict):
            raise SchemaError(where, "expected an object")
        for key in ("segment_id", "n_images", "responses"):
            if key not in seg:
                raise SchemaError(f"{where}.{key}", "missing")
        sid = str(seg["segment_id"])
        if sid in seen:
            raise SchemaError(f"{where}.segment_id", f"duplicate segment {sid!r}")
        seen.add(sid)
        n = _int(seg["n_images"], f"{where}.n_images")
        if n < 1:
            raise SchemaError(f"{where}.n_images", "must be >= 1")
        if not isinstance(seg["responses"], list):
            raise SchemaError(f"{where}.responses", "expected a list")
        responses = tuple(parse_response(r, sid, n, f"{where}.responses[{ri}]")
                          for ri, r in enumerate(seg["responses"]))
        duration = seg.get("duration_s")
        segments.append(SurveySegment(sid, n, responses, None if duration is None else float(duration)))
    return Survey(tuple(segments))


def load_survey(path: str | Path) -> Survey:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError("<root>", f"not valid JSON ({exc.msg})") from exc
    return parse_survey(doc)


def dataset_stats(survey: Survey) -> dict:
    """Min / max / average / median of segment duration (minutes) and image count."""
    def describe(values):
        return {"min": min(values), "max": max(values), "average": statistics.fmean(values),
                "median": statistics.median(values)}
    out = {"segments": len(survey.segments), "images": describe([s.n_images for s in survey.segments])}
    durations = [s.duration_s / 60 for s in survey.segments if s.duration_s is not None]
    if durations:
        out["duration_min"] = describe(durations)
    return out


# ---- grouping and ground truth ----

@dataclass(frozen=True)
class ImageGroups:
    """A partition of image ids; a group is named by its smallest member."""

    groups: tuple[frozenset[int], ...]

    def __post_init__(self):
        members = [i for g in self.groups for i in g]
        if len(members) != len(set(members)):
            raise SchemaError("groups", "groups must be disjoint")
        object.__setattr__(self, "groups", tuple(sorted(self.groups, key=min)))

    @property
    def n(self) -> int:
        return sum(len(g) for g in self.groups)

    def group_of(self, image: int) -> int:
        for g in self.groups:
            if image in g:
                return min(g)
        raise KeyError(image)

    def members(self, group: int) -> frozenset[int]:
        for g in self.groups:
            if min(g) == group:
                return g
        raise KeyError(group)

    @classmethod
    def singletons(cls, n: int) -> "ImageGroups":
        return cls(tuple(frozenset([i]) for i in range(n)))


def build_groups(responses: Iterable[SurveyResponse], n: int) -> ImageGroups:
    """Transitive closure of every "X was similar to Y" statement, pooled over participants."""
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for r in responses:
        for x, y in r.similar.items():
            if not (0 <= x < n and 0 <= y < n):
                raise SchemaError("similar", f"statement {x}~{y} references an id >= {n}")
            rx, ry = find(x), find(y)
            if rx != ry:
                parent[max(rx, ry)] = min(rx, ry)
    out: dict[int, set] = {}
    for i in range(n):
        out.setdefault(find(i), set()).add(i)
    return ImageGroups(tuple(frozenset(g) for g in out.values()))


@dataclass(frozen=True)
class GroundTruth:
    formulation: str
    targets: frozenset[int]

    def __post_init__(self):
        if self.formulation not in FORMULATIONS:
            raise SchemaError("formulation", f"must be one of {FORMULATIONS}")
        if not self.targets:
            raise SchemaError("targets", "must not be empty")

    @property
    def grouped(self) -> bool:
        return self.formulation.endswith("_grouped")


def selection_counts(responses: Iterable[SurveyResponse]) -> Counter:
    c: Counter = Counter()
    for r in responses:
        c.update(r.selected)
    return c


def _top(counts: Mapping[int, int], k: int) -> frozenset[int]:
    ranked = sorted((i for i, v in counts.items() if v > 0), key=lambda i: (-counts[i], i))
    return frozenset(ranked[:k])


def ground_truth(responses: list[SurveyResponse], formulation: str, groups: ImageGroups | None = None) -> GroundTruth:
    """Target images (or groups, for the grouped formulations) from participant choices.

    Top-4 ranks by selection count, then ascending id; a group's count is the
    sum of its members' counts.
    """
    if not responses:
        raise SchemaError("responses", "need at least one response")
    counts = selection_counts(responses)
    if formulation in ("top4", "all"):
        if formulation == "top4":
            return GroundTruth(formulation, _top(counts, SUMMARY_SIZE))
        return GroundTruth(formulation, frozenset(i for i, v in counts.items() if v > 0))
    if formulation not in FORMULATIONS:
        raise SchemaError("formulation", f"must be one of {FORMULATIONS}")
    if groups is None:
        raise SchemaError("groups", f"{formulation} needs image groups")
    gcounts: Counter = Counter()
    for i, v in counts.items():
        gcounts[groups.group_of(i)] += v
    if formulation == "top4_grouped":
        return GroundTruth(formulation, _top(gcounts, SUMMARY_SIZE))
    return GroundTruth(formulation, frozenset(g for g, v in gcounts.items() if v > 0))


@dataclass(frozen=True)
class ScoreReport:
    accuracy: float
    precision: float
    recall: float
    f1: float

    def as_dict(self) -> dict:
        return {"accuracy": self.accuracy, "precision": self.precision, "recall": self.recall, "f1": self.f1}


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def score(summary: Summary, gt: GroundTruth, groups: ImageGroups | None, n: int) -> ScoreReport:
    """Accuracy, precision, recall and F1 of a summary against a ground truth.

    Ungrouped: confusion counts over the segment's n images. Grouped: a selected
    image is a hit when its group is a target (precision over the selected
    images), recall counts target groups hit, and accuracy is one minus
    (off-target selections + uncovered target groups) / n, which equals the
    ungrouped accuracy when every group is a singleton.
    """
    selected = set(summary.selected)
    if any(not 0 <= s < n for s in selected):
        raise SchemaError("selected", f"summary ids must lie in [0, {n})")
    if not gt.grouped:
        targets = set(gt.targets)
        tp = len(selected & targets)
        fp = len(selected - targets)
        fn = len(targets - selected)
        tn = n - tp - fp - fn
        p = tp / (tp + fp) if selected else 0.0
        r = tp / (tp + fn) if targets else 0.0
        return ScoreReport((tp + tn) / n, p, r, _f1(p, r))
    if groups is None:
        raise SchemaError("groups", "grouped scoring needs image groups")
    targets = set(gt.targets)
    sel_groups = [groups.group_of(s) for s in sorted(selected)]
    hits = sum(g in targets for g in sel_groups)
    p = hits / len(sel_groups) if sel_groups else 0.0
    covered = len(targets & set(sel_groups))
    r = covered / len(targets)
    # one error per off-target selection and one per target group left uncovered
    errors = (len(sel_groups) - hits) + (len(targets) - covered)
    accuracy = max(0, n - errors) / n
    return ScoreReport(accuracy, p, r, _f1(p, r))


def score_all(summary: Summary, segment: SurveySegment) -> dict[str, ScoreReport]:
    groups = build_groups(segment.responses, segment.n_images)
    return {f: score(summary, ground_truth(list(segment.responses), f, groups), groups, segment.n_images)
            for f in FORMULATIONS}


# ---- custom metrics ----

def _check_coverage(summaries: Mapping[str, Summary], survey: Survey) -> None:
    missing = [s.segment_id for s in survey.segments if s.segment_id not in summaries]
    if missing:
        raise SchemaError("summaries", f"no summary for segments {missing}")


def orphan_rate(summaries: Mapping[str, Summary], survey: Survey) -> dict:
    """Over all algorithm-selected images: share picked by no participant, and share
    picked by no participant and grouped with no participant-picked image."""
    _check_coverage(summaries, survey)
    total = unselected = orphans = 0
    for seg in survey.segments:
        groups = build_groups(seg.responses, seg.n_images)
        picked = set().union(*(r.selected for r in seg.responses)) if seg.responses else set()
        for img in summaries[seg.segment_id].selected:
            total += 1
            if img in picked:
                continue
            unselected += 1
            if not (groups.members(groups.group_of(img)) & picked):
                orphans += 1
    if total == 0:
        return {"strict_unselected": None, "orphan": None, "images": 0}
    return {"strict_unselected": unselected / total, "orphan": orphans / total, "images": total}


def consensus_miss(summaries: Mapping[str, Summary], survey: Survey,
                   min_votes: int = CONSENSUS_MIN_VOTES) -> dict:
    """Of images picked by at least ``min_votes`` participants: share the algorithm
    missed, and share missed with no grouped substitute in the summary.

    Both values are None when no image reaches ``min_votes``.
    """
    _check_coverage(summaries, survey)
    universe = missed = missed_adjusted = 0
    for seg in survey.segments:
        groups = build_groups(seg.responses, seg.n_images)
        counts = selection_counts(seg.responses)
        chosen = set(summaries[seg.segment_id].selected)
        chosen_groups = {groups.group_of(s) for s in chosen}
        for img, votes in counts.items():
            if votes < min_votes:
                continue
            universe += 1
            if img in chosen:
                continue
            missed += 1
            if groups.group_of(img) not in chosen_groups:
                missed_adjusted += 1
    if universe == 0:
        return {"strict": None, "similarity_adjusted": None, "images": 0}
    return {"strict": missed / universe, "similarity_adjusted": missed_adjusted / universe, "images": universe}


def _distribution(values: list[int]) -> dict[int, float]:
    if not values:
        return {}
    c = Counter(values)
    return {k: c[k] / len(values) for k in sorted(c)}


def rating_summary(survey: Survey) -> dict:
    """Share of each quality and familiarity rating, and of each segment's best quality rating."""
    quality = [r.quality for r in survey.responses if r.quality is not None]
    if not quality:
        raise SchemaError("quality", "no rated responses")
    best = [min(r.quality for r in s.responses if r.quality is not None)
            for s in survey.segments if any(r.quality is not None for r in s.responses)]
    familiarity = [r.familiarity for r in survey.responses if r.familiarity is not None]
    return {"quality_distribution": _distribution(quality),
            "best_per_segment_distribution": _distribution(best),
            "familiarity_distribution": _distribution(familiarity)}


# ---- reports ----

def evaluate(survey: Survey, summaries: Mapping[str, Summary]) -> dict:
    """Full report: per-segment and segment-averaged scores for every formulation,
    custom metrics and rating summaries."""
    _check_coverage(summaries, survey)
    per_segment = {}
    for seg in survey.segments:
        if not seg.responses:
            continue
        per_segment[seg.segment_id] = {f: r.as_dict() for f, r in score_all(summaries[seg.segment_id], seg).items()}
    mean = {}
    for f in FORMULATIONS:
        rows = [v[f] for v in per_segment.values()]
        mean[f] = {k: (statistics.fmean(r[k] for r in rows) if rows else None)
                   for k in ("accuracy", "precision", "recall", "f1")}
    report = {
        "segments": len(per_segment),
        "mean": mean,
        "per_segment": per_segment,
        "orphan_rate": orphan_rate(summaries, survey),
        "consensus_miss": consensus_miss(summaries, survey),
    }
    if any(r.quality is not None for r in survey.responses):
        report["ratings"] = {k: {str(r): v for r, v in d.items()} for k, d in rating_summary(survey).items()}
    return report


def report_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["segment_id", "formulation", "accuracy", "precision", "recall", "f1"])
    for sid in sorted(report["per_segment"]):
        for f in FORMULATIONS:
            r = report["per_segment"][sid][f]
            w.writerow([sid, f] + [repr(r[k]) for k in ("accuracy", "precision", "recall", "f1")])
    for f in FORMULATIONS:
        r = report["mean"][f]
        w.writerow(["__mean__", f] + [repr(r[k]) for k in ("accuracy", "precision", "recall", "f1")])
    return buf.getvalue()
