"""Choosing the m representative images.

The objective is minimax: minimize, over images left out of the summary,
the largest importance-weighted distance to the nearest summary image.
Three solvers share it: a greedy removal heuristic, exhaustive enumeration
(the reference optimum for small instances), and a k-medoid baseline.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from lecsum.core import DistanceMatrix, ImportanceVector, LecsumError, SchemaError, Summary

EXHAUSTIVE_LIMIT = 10_000_000
_CHUNK = 20_000


class InstanceTooLargeError(LecsumError):
    pass


@dataclass(frozen=True)
class SelectionProblem:
    D: DistanceMatrix
    I: ImportanceVector
    m: int = 4
    segment_id: str = ""

    def __post_init__(self):
        if len(self.I) != self.D.n:
            raise SchemaError("importance", f"length {len(self.I)} != matrix size {self.D.n}")
        if self.m < 1:
            raise SchemaError("m", "must be >= 1")

    @property
    def n(self) -> int:
        return self.D.n

    @property
    def k(self) -> int:
        """Effective summary size."""
        return min(self.m, self.n)

    @classmethod
    def from_arrays(cls, distance, importance, m: int = 4, segment_id: str = "") -> "SelectionProblem":
        return cls(DistanceMatrix(np.asarray(distance, dtype=np.float64)),
                   ImportanceVector(np.asarray(importance, dtype=np.float64)), m, segment_id)


def objective(problem: SelectionProblem, S: Iterable[int]) -> float:
    """max over i not in S of I[i] * min over r in S of D[i, r]; 0 when S covers everything."""
    S = sorted(set(int(s) for s in S))
    if not S:
        raise SchemaError("S", "summary set must not be empty")
    if S[0] < 0 or S[-1] >= problem.n:
        raise SchemaError("S", f"ids must lie in [0, {problem.n})")
    D, I = problem.D.values, problem.I.values
    rest = np.setdiff1d(np.arange(problem.n), S)
    if rest.size == 0:
        return 0.0
    return float((I[rest] * D[np.ix_(rest, S)].min(axis=1)).max())


def _summary(problem: SelectionProblem, selected: Iterable[int], method: str) -> Summary:
    sel = tuple(sorted(int(s) for s in selected))
    return Summary(problem.segment_id, sel, objective(problem, sel), method)


def greedy_select(problem: SelectionProblem) -> Summary:
    """Start from every image; repeatedly drop the one that is cheapest to lose.

    Dropping image k costs I[k] * D[k, p], p being k's nearest other member of
    the current summary. Ties go to the smaller id. Each round is O(n^2).
    """
    D, I = problem.D.values, problem.I.values
    n = problem.n
    in_s = np.ones(n, dtype=bool)
    big = np.inf
    while in_s.sum() > problem.k:
        members = np.flatnonzero(in_s)
        sub = D[np.ix_(members, members)].copy()
        np.fill_diagonal(sub, big)
        cost = I[members] * sub.min(axis=1)
        # argmin returns the first minimum, i.e. the smallest id
        in_s[members[int(np.argmin(cost))]] = False
    return _summary(problem, np.flatnonzero(in_s), "greedy")


def _batch_objectives(D: np.ndarray, I: np.ndarray, combos: np.ndarray) -> np.ndarray:
    # members contribute D[i, i] = 0, so the max over all images equals the max over non-members
    nearest = D[:, combos].min(axis=2)
    return (I[:, None] * nearest).max(axis=0)


def exhaustive_select(problem: SelectionProblem, limit: int = EXHAUSTIVE_LIMIT) -> Summary:
    """Enumerate every k-subset in lexicographic order; the first optimum wins ties."""
    n, k = problem.n, problem.k
    total = math.comb(n, k)
    if total > limit:
        raise InstanceTooLargeError(f"C({n}, {k}) = {total} subsets exceeds the limit of {limit}")
    D, I = problem.D.values, problem.I.values
    best_val, best = math.inf, None
    it = itertools.combinations(range(n), k)
    while True:
        chunk = np.array(list(itertools.islice(it, _CHUNK)), dtype=np.int64)
        if chunk.size == 0:
            break
        vals = _batch_objectives(D, I, chunk)
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val, best = float(vals[j]), chunk[j]
    return _summary(problem, best, "exhaustive")


def kmedoid_select(problem: SelectionProblem) -> Summary:
    """Partition around medoids on D, seeded with the k most important images.

    Each round applies the single medoid/non-medoid swap that most reduces the
    total distance of images to their nearest medoid; stops when none helps.
    """
    D, I = problem.D.values, problem.I.values
    n, k = problem.n, problem.k
    order = sorted(range(n), key=lambda i: (-I[i], i))
    medoids = sorted(order[:k])

    def total(meds) -> float:
        return float(D[:, meds].min(axis=1).sum())

    current = total(medoids)
    while True:
        best_gain, best_swap = 1e-12, None
        for pos, _ in enumerate(medoids):
            for h in range(n):
                if h in medoids:
                    continue
                trial = medoids[:pos] + [h] + medoids[pos + 1:]
                gain = current - total(trial)
                if gain > best_gain:
                    best_gain, best_swap = gain, trial
        if best_swap is None:
            break
        medoids = sorted(best_swap)
        current = total(medoids)
    return _summary(problem, medoids, "kmedoid")


SOLVERS = {"greedy": greedy_select, "exhaustive": exhaustive_select, "kmedoid": kmedoid_select}


def solve(problem: SelectionProblem, method: str = "greedy") -> Summary:
    try:
        solver = SOLVERS[method]
    except KeyError:
        raise SchemaError("method", f"unknown method {method!r}; choose from {sorted(SOLVERS)}") from None
    return solver(problem)


def cluster_assignment(problem: SelectionProblem, medoids: Iterable[int]) -> list[int]:
    """Index of each image's nearest medoid (first on ties)."""
    meds = list(medoids)
    return [meds[int(j)] for j in np.argmin(problem.D.values[:, meds], axis=1)]


# ---- instance files and generators for the oracle harness ----

def instance_to_dict(problem: SelectionProblem) -> dict:
    return {"n": problem.n, "m": problem.m, "importance": problem.I.values.tolist(),
            "distance": problem.D.values.tolist()}


def instance_from_dict(doc: dict) -> SelectionProblem:
    for key in ("n", "m", "importance", "distance"):
        if key not in doc:
            raise SchemaError(key, "missing")
    problem = SelectionProblem.from_arrays(doc["distance"], doc["importance"], int(doc["m"]))
    if problem.n != doc["n"]:
        raise SchemaError("n", f"declares {doc['n']} but matrix is {problem.n}x{problem.n}")
    return problem


def save_instance(problem: SelectionProblem, path: str | Path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(problem)) + "\n")


def load_instance(path: str | Path) -> SelectionProblem:
    return instance_from_dict(json.loads(Path(path).read_text()))


def _importance(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.uniform(0.0, 1.0, n).clip(1e-6, 1.0)


def planted_instance(rng: np.random.Generator, n: int, m: int = 4, intra_max: float = 0.1,
                     inter_min: float = 0.8, shared_intra: bool = True,
                     importance_min: float | None = None) -> SelectionProblem:
    """m well-separated clusters; every cluster gets at least one member.

    By default members of a cluster are interchangeable (one intra-cluster
    distance per cluster) and importances lie in [intra_max / inter_min, 1],
    so leaving a cluster uncovered always costs more than any in-cluster
    choice. Under those two conditions one-per-cluster is optimal and greedy
    removal provably finds it. ``shared_intra=False`` or a smaller
    ``importance_min`` give harder variants where that guarantee lapses.
    """
    if n < m:
        raise SchemaError("n", "need at least one image per cluster")
    labels = np.concatenate([np.arange(m), rng.integers(0, m, n - m)])
    rng.shuffle(labels)
    D = rng.uniform(inter_min, 1.0, (n, n))
    same = labels[:, None] == labels[None, :]
    if shared_intra:
        intra = rng.uniform(0.01, intra_max, m)
        D = np.where(same, intra[labels][:, None], D)
    else:
        D = np.where(same, rng.uniform(0.0, intra_max, (n, n)), D)
    D = np.triu(D, 1)
    D = D + D.T
    lo = intra_max / inter_min if importance_min is None else importance_min
    I = rng.uniform(lo, 1.0, n).clip(1e-6, 1.0)
    return SelectionProblem.from_arrays(D, I, m)


def metric_instance(rng: np.random.Generator, n: int, m: int = 4, dim: int = 2) -> SelectionProblem:
    """Images as uniform points in a unit cube; distance is Euclidean scaled into [0, 1]."""
    P = rng.uniform(0.0, 1.0, (n, dim))
    D = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=-1) / math.sqrt(dim)
    D = np.triu(D, 1)
    D = D + D.T
    return SelectionProblem.from_arrays(D, _importance(rng, n), m)


def uniform_instance(rng: np.random.Generator, n: int, m: int = 4) -> SelectionProblem:
    """Independent uniform distances: no geometric structure at all."""
    D = np.triu(rng.uniform(0.0, 1.0, (n, n)), 1)
    D = D + D.T
    return SelectionProblem.from_arrays(D, _importance(rng, n), m)


GENERATORS = {"planted": planted_instance, "metric": metric_instance, "uniform": uniform_instance}
