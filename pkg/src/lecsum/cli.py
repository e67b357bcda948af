"""Command line: ``lecsum summarize | evaluate | oracle-check``.

Exit codes: 0 success, 1 a stage failed (message on stderr), 2 bad config or usage.

A frames directory holds still frames pre-extracted from the video, either
named by timestamp in seconds (``12.5.png``) or listed in a ``timing.json``
sidecar mapping file name to seconds (optional ``"segment_end"`` key).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from lecsum import compose, evalkit, ingest, layout, pipeline, select
from lecsum.core import METHODS, LecsumError, SchemaError, Summary, deserialize_summary

logger = logging.getLogger("lecsum")


class ConfigError(LecsumError):
    pass


def _parse_range(text: str) -> tuple[int, int]:
    try:
        a, b = (int(v) for v in text.split(".."))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a..b, got {text!r}") from None
    if not 1 <= a <= b:
        raise argparse.ArgumentTypeError(f"need 1 <= a <= b, got {text!r}")
    return a, b


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lecsum", description="Visual summaries of lecture-video segments.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("summarize", help="summarize one segment from a directory of frames")
    s.add_argument("frames_dir")
    s.add_argument("out_dir")
    s.add_argument("--config", help="INI file with [transition] [layout] [similarity] [grid] [select] sections")
    s.add_argument("--method", choices=METHODS)
    s.add_argument("--m", type=int, help="summary size")
    s.add_argument("--text-annotations", help="OCR sidecar JSON with text boxes per transition frame")
    s.add_argument("--segment-id", help="defaults to the frames directory name")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--cache-dir", help="reuse keypoints and distances across runs")
    s.add_argument("--no-diagnostics", action="store_true")

    e = sub.add_parser("evaluate", help="score summaries against survey ground truth")
    e.add_argument("survey_file")
    e.add_argument("summaries_dir", help="holds <name>/summary.json (summarize output) or <name>.summary.json files")
    e.add_argument("--out", default=".", help="directory for report.json and report.csv")
    e.add_argument("--formulation", choices=evalkit.FORMULATIONS, action="append",
                   help="restrict printed means to these formulations (all are written)")

    o = sub.add_parser("oracle-check", help="compare greedy with the exhaustive optimum on random instances")
    o.add_argument("--instances", type=int, default=200)
    o.add_argument("--n-range", type=_parse_range, default=(6, 12))
    o.add_argument("--m", type=int, default=4)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--mode", choices=sorted(select.GENERATORS), default="metric")
    o.add_argument("--out", help="directory for report.json and failing instances")
    return ap


def cmd_summarize(args) -> int:
    try:
        cfg = pipeline.load_run_config(args.config) if args.config else pipeline.RunConfig()
        cfg = cfg.replace(method=args.method, m=args.m)
        if args.workers < 1:
            raise SchemaError("workers", "must be >= 1")
    except SchemaError as exc:
        raise ConfigError(str(exc)) from exc
    annotations = layout.load_text_annotations(args.text_annotations) if args.text_annotations else None
    frames_dir = Path(args.frames_dir)
    segment_id = args.segment_id or frames_dir.resolve().name
    frames = ingest.load_frame_directory(frames_dir)
    t0 = time.perf_counter()
    result = pipeline.summarize_frames(frames, cfg, segment_id, annotations, args.workers, args.cache_dir)
    inputs = {"frames": len(frames.entries), "transitions": len(result.transitions),
              "objects": len(result.objects), "text_annotations": bool(annotations)}
    pipeline.write_result(result, args.out_dir, cfg, not args.no_diagnostics, inputs)
    logger.info("summarized %s in %.2fs", segment_id, time.perf_counter() - t0)
    print(f"{segment_id}: selected {list(result.summary.selected)} of {len(result.objects)} "
          f"objects, objective {result.summary.objective:.6f} -> {Path(args.out_dir) / 'summary.png'}")
    return 0


def load_summaries(directory: str | Path) -> dict[str, Summary]:
    root = Path(directory)
    if not root.is_dir():
        raise LecsumError(f"summaries directory {root} does not exist")
    out = {}
    paths = sorted(root.glob("*.summary.json")) + sorted(root.glob("*/summary.json"))
    for p in paths:
        s = deserialize_summary(p.read_text())
        if s.segment_id in out:
            raise SchemaError(str(p), f"second summary for segment {s.segment_id!r}")
        out[s.segment_id] = s
    return out


def cmd_evaluate(args) -> int:
    survey = evalkit.load_survey(args.survey_file)
    summaries = load_summaries(args.summaries_dir)
    missing = [s.segment_id for s in survey.segments if s.segment_id not in summaries]
    if missing:
        print("missing summaries for segments: " + ", ".join(missing), file=sys.stderr)
        return 1
    report = evalkit.evaluate(survey, summaries)
    report["dataset"] = evalkit.dataset_stats(survey)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    compose.atomic_write(out / "report.json", (json.dumps(report, indent=2, sort_keys=True) + "\n").encode())
    compose.atomic_write(out / "report.csv", evalkit.report_csv(report).encode())
    for f in args.formulation or evalkit.FORMULATIONS:
        r = report["mean"][f]
        if r["f1"] is None:
            print(f"{f:>13}: no rated segments")
            continue
        print(f"{f:>13}: accuracy {r['accuracy']:.3f} precision {r['precision']:.3f} "
              f"recall {r['recall']:.3f} f1 {r['f1']:.3f}")
    return 0


def oracle_check(instances: int, n_range: tuple[int, int], m: int, seed: int, mode: str) -> tuple[dict, list]:
    """Greedy versus exhaustive on seeded instances; returns the report and the failing problems."""
    gen = select.GENERATORS[mode]
    rng = np.random.default_rng(seed)
    ratios, failures = [], []
    for k in range(instances):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        problem = gen(rng, n, m)
        g = select.greedy_select(problem).objective
        opt = select.exhaustive_select(problem).objective
        ratio = 1.0 if g == opt else (g / opt if opt > 0 else float("inf"))
        ratios.append(ratio)
        if g != opt:
            failures.append((k, problem, g, opt))
    r = np.array(ratios)
    finite = r[np.isfinite(r)]
    report = {
        "mode": mode, "instances": instances, "n_range": list(n_range), "m": m, "seed": seed,
        "exact_match_rate": float(np.mean(r == 1.0)) if instances else None,
        "within_1_5": float(np.mean(r <= 1.5)) if instances else None,
        "mean_ratio": float(finite.mean()) if finite.size else None,
        "max_ratio": float(r.max()) if instances else None,
        "failures": len(failures),
    }
    return report, failures


def cmd_oracle_check(args) -> int:
    if args.m < 1 or args.instances < 0:
        raise ConfigError("oracle-check needs --m >= 1 and --instances >= 0")
    report, failures = oracle_check(args.instances, args.n_range, args.m, args.seed, args.mode)
    if args.out:
        out = Path(args.out)
        (out / "failures").mkdir(parents=True, exist_ok=True)
        for k, problem, g, opt in failures:
            doc = select.instance_to_dict(problem)
            doc.update({"instance": k, "greedy_objective": g, "optimal_objective": opt})
            compose.atomic_write(out / "failures" / f"instance_{k:05d}.json", (json.dumps(doc) + "\n").encode())
        compose.atomic_write(out / "report.json", (json.dumps(report, indent=2, sort_keys=True) + "\n").encode())
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


COMMANDS = {"summarize": cmd_summarize, "evaluate": cmd_evaluate, "oracle-check": cmd_oracle_check}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except LecsumError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
