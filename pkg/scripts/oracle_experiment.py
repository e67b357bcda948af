"""Greedy versus exhaustive selection across instance families and sizes.

Prints one row per (mode, n range): exact-match rate, share within 1.5x, mean
and worst ratio. ``--out`` also saves the rows as JSON.
"""
import argparse
import json
import time

from lecsum.cli import oracle_check


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=200)
    ap.add_argument("--m", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--modes", nargs="+", default=["planted", "metric", "uniform"])
    ap.add_argument("--ranges", nargs="+", default=["6..8", "9..12", "13..16"])
    ap.add_argument("--out")
    args = ap.parse_args()

    rows = []
    print(f"{'mode':>8} {'n':>7} {'exact':>6} {'<=1.5x':>7} {'mean':>6} {'worst':>6} {'secs':>5}")
    for mode in args.modes:
        for text in args.ranges:
            a, b = (int(v) for v in text.split(".."))
            t0 = time.perf_counter()
            rep, _ = oracle_check(args.instances, (a, b), args.m, args.seed, mode)
            rep["seconds"] = time.perf_counter() - t0
            rows.append(rep)
            print(f"{mode:>8} {text:>7} {rep['exact_match_rate']:6.3f} {rep['within_1_5']:7.3f} "
                  f"{rep['mean_ratio']:6.3f} {rep['max_ratio']:6.3f} {rep['seconds']:5.1f}")
    if args.out:
        with open(args.out, "w") as f:
            json.dump(rows, f, indent=2)


if __name__ == "__main__":
    main()
