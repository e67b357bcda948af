"""Write a synthetic slide deck as a frames directory ready for ``lecsum summarize``.

    python scripts/make_synthetic_deck.py out/deck --kind slides --ocr
"""
import argparse
import json
from pathlib import Path

from lecsum import pipeline, synth


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir")
    ap.add_argument("--kind", choices=["slides", "diagrams", "fig1"], default="slides")
    ap.add_argument("--count", type=int, default=30, help="diagram count for --kind diagrams")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--ocr", action="store_true", help="also write ocr.json next to the frames (slides only)")
    args = ap.parse_args()

    if args.kind == "slides":
        deck = synth.slide_deck(**({"seed": args.seed} if args.seed is not None else {}))
        frames = deck["frames"]
    elif args.kind == "diagrams":
        deck = synth.diagram_deck(args.count, **({"seed": args.seed} if args.seed is not None else {}))
        frames = deck["frames"]
    else:
        deck = synth.fig1_segment(**({"seed": args.seed} if args.seed is not None else {}))
        frames = deck["samples"]
    out = pipeline.write_frames(frames, args.out_dir, deck["end_s"])
    print(f"wrote {len(frames)} frames to {out}")

    if args.ocr:
        if args.kind != "slides":
            ap.error("--ocr only applies to --kind slides")
        # one entry per slide, in the order the transition frames come out
        ann = [{"frame_index": k, "boxes": [b.to_dict() for b in boxes]} for k, boxes in enumerate(deck["text"])]
        path = Path(args.out_dir).parent / f"{Path(args.out_dir).name}_ocr.json"
        path.write_text(json.dumps(ann, indent=2) + "\n")
        print(f"wrote text annotations to {path}")


if __name__ == "__main__":
    main()
