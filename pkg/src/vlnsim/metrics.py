"""Navigation metrics: online trajectory scores and offline action-prediction scores.

Online, per episode: navigation error (NE), path length (PL), oracle
success, success (within the radius AND the last predicted action is stop),
success weighted by path length (SPL), and coverage weighted by length
score (CLS). Aggregates are unweighted means over episodes.

Offline (teacher-forced): pooled token accuracy, macro F1 over the union of
observed expert/predicted classes, and conservative success rate (CSR, the
fraction of episodes whose full predicted sequence matches the expert
exactly).

All "distance to goal" quantities use geodesic (walkable) distance by
default; a single ``distance`` switch flips proximity computations to
straight-line Euclidean for sensitivity checks. The optimal-length term in
SPL is always the geodesic start-goal distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .navgraph import NavGraph
from .simulator import STOP, EpisodeRecord, EpisodeSpec

DEFAULT_SUCCESS_RADIUS_M = 3.0

GEODESIC = "geodesic"
EUCLIDEAN = "euclidean"


class MetricsError(ValueError):
    pass


def _proximity(graph: NavGraph, a: str, b: str, distance: str) -> float:
    if distance == GEODESIC:
        return graph.geodesic(a, b)
    if distance == EUCLIDEAN:
        return graph.straight_line(a, b)
    raise MetricsError(f"unknown distance mode {distance!r}")


@dataclass(frozen=True)
class EpisodeScore:
    """Per-episode online components, prior to aggregation."""

    pl_m: float
    ne_m: float
    oracle_success: bool
    success: bool
    spl: float
    cls: float
    gt_geodesic_m: float  # shortest start-goal distance, used for bucketing


@dataclass(frozen=True)
class OnlineScore:
    """Aggregated online metrics; fractions are in [0, 1]."""

    pl_m: float
    ne_m: float
    osr: float
    sr: float
    spl: float
    cls: float

    def to_dict(self) -> dict:
        return {
            "pl_m": self.pl_m,
            "ne_m": self.ne_m,
            "osr": self.osr,
            "sr": self.sr,
            "spl": self.spl,
            "cls": self.cls,
        }


@dataclass(frozen=True)
class OfflineScore:
    accuracy: float
    macro_f1: float
    csr: float

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "macro_f1": self.macro_f1, "csr": self.csr}


def path_length(graph: NavGraph, path: Sequence[str]) -> float:
    """Length of a node walk; raises when a hop is not a graph edge."""
    if not path:
        raise MetricsError("empty path")
    return graph.path_length(path)


def cls_score(
    pred_path: Sequence[str],
    ref_path: Sequence[str],
    graph: NavGraph,
    threshold_m: float = DEFAULT_SUCCESS_RADIUS_M,
    distance: str = GEODESIC,
) -> float:
    """Coverage weighted by length score between a predicted and reference walk.

    Path coverage is the mean over reference nodes of exp(-d/threshold)
    with d the distance to the nearest predicted node; the length score
    compares the predicted path length against the coverage-expected
    length. Identical paths score exactly 1.
    """
    if not pred_path or not ref_path:
        raise MetricsError("CLS requires nonempty paths")
    coverage = 0.0
    for r in ref_path:
        nearest = min(_proximity(graph, r, v, distance) for v in pred_path)
        coverage += math.exp(-nearest / threshold_m)
    coverage /= len(ref_path)
    expected = coverage * path_length(graph, ref_path)
    pl_pred = path_length(graph, pred_path)
    if expected == 0.0:
        length_score = 1.0 if pl_pred == 0.0 else 0.0
    else:
        length_score = expected / (expected + abs(expected - pl_pred))
    return coverage * length_score


def score_online(
    record: EpisodeRecord,
    spec: EpisodeSpec,
    success_radius_m: float = DEFAULT_SUCCESS_RADIUS_M,
    distance: str = GEODESIC,
) -> EpisodeScore:
    """Score one executed episode against its spec."""
    graph = spec.graph
    nodes = record.nodes
    if not nodes:
        raise MetricsError("record has no visited nodes")
    pl = path_length(graph, nodes)
    ne = _proximity(graph, nodes[-1], spec.goal, distance)
    oracle = any(
        _proximity(graph, v, spec.goal, distance) <= success_radius_m for v in nodes
    )
    stopped_last = bool(record.actions) and record.actions[-1] == STOP
    success = ne <= success_radius_m and stopped_last
    optimal = graph.geodesic(nodes[0], spec.goal)
    if not success:
        spl = 0.0
    elif optimal == 0.0:
        spl = 1.0
    else:
        spl = optimal / max(pl, optimal)
    cls_val = cls_score(
        nodes, spec.gt_path, graph, threshold_m=success_radius_m, distance=distance
    )
    return EpisodeScore(
        pl_m=pl,
        ne_m=ne,
        oracle_success=oracle,
        success=success,
        spl=spl,
        cls=cls_val,
        gt_geodesic_m=graph.geodesic(spec.start, spec.goal),
    )


def aggregate_online(scores: Sequence[EpisodeScore]) -> OnlineScore:
    """Unweighted means over episodes; order-independent."""
    if not scores:
        raise MetricsError("cannot aggregate an empty score list")
    n = len(scores)
    return OnlineScore(
        pl_m=sum(s.pl_m for s in scores) / n,
        ne_m=sum(s.ne_m for s in scores) / n,
        osr=sum(1.0 for s in scores if s.oracle_success) / n,
        sr=sum(1.0 for s in scores if s.success) / n,
        spl=sum(s.spl for s in scores) / n,
        cls=sum(s.cls for s in scores) / n,
    )


def macro_f1(gold: Sequence[str], pred: Sequence[str]) -> float:
    """Unweighted mean F1 over the union of observed gold/predicted classes."""
    if len(gold) != len(pred):
        raise MetricsError(f"label length mismatch: {len(gold)} vs {len(pred)}")
    classes = sorted(set(gold) | set(pred))
    if not classes:
        raise MetricsError("no labels to score")
    f1s = []
    for c in classes:
        tp = sum(1 for g, p in zip(gold, pred) if g == c and p == c)
        fp = sum(1 for g, p in zip(gold, pred) if g != c and p == c)
        fn = sum(1 for g, p in zip(gold, pred) if g == c and p != c)
        denom = 2 * tp + fp + fn
        f1s.append(2 * tp / denom if denom else 0.0)
    return sum(f1s) / len(f1s)


def score_offline(
    episode_pairs: Sequence[tuple[Sequence[str], Sequence[str]]],
) -> OfflineScore:
    """Score teacher-forced predictions against expert action sequences.

    ``episode_pairs`` holds one (expert, predicted) list pair per episode;
    the lists must be aligned step by step. Accuracy pools all steps;
    macro F1 pools all labels; CSR requires a full-sequence exact match.
    """
    if not episode_pairs:
        raise MetricsError("cannot score an empty episode list")
    all_gold: list[str] = []
    all_pred: list[str] = []
    exact = 0
    for i, (gold, pred) in enumerate(episode_pairs):
        if len(gold) != len(pred):
            raise MetricsError(
                f"episode {i}: expert/predicted length mismatch"
                f" ({len(gold)} vs {len(pred)})"
            )
        all_gold.extend(gold)
        all_pred.extend(pred)
        if list(gold) == list(pred):
            exact += 1
    total = len(all_gold)
    if total == 0:
        raise MetricsError("no steps to score")
    accuracy = sum(1 for g, p in zip(all_gold, all_pred) if g == p) / total
    return OfflineScore(
        accuracy=accuracy,
        macro_f1=macro_f1(all_gold, all_pred),
        csr=exact / len(episode_pairs),
    )


@dataclass(frozen=True)
class BucketStat:
    """Success rate within one ground-truth-length bucket.

    ``sr`` is None for empty buckets - never reported as zero.
    """

    lo_m: float  # -inf for the underflow bucket
    hi_m: float  # +inf for the overflow bucket
    count: int
    sr: Optional[float]

    def to_dict(self) -> dict:
        return {
            "lo_m": None if math.isinf(self.lo_m) else self.lo_m,
            "hi_m": None if math.isinf(self.hi_m) else self.hi_m,
            "count": self.count,
            "sr": self.sr,
        }


def sr_by_path_length(
    records: Sequence[EpisodeRecord],
    specs: Sequence[EpisodeSpec],
    bucket_edges: Sequence[float],
    success_radius_m: float = DEFAULT_SUCCESS_RADIUS_M,
    scores: Optional[Sequence[EpisodeScore]] = None,
) -> list[BucketStat]:
    """Success rate bucketed by the geodesic start-goal distance.

    ``bucket_edges`` must be strictly increasing; the result covers the
    whole line with an underflow bucket below the first edge, half-open
    [lo, hi) interior buckets, and an overflow bucket from the last edge.
    """
    edges = list(bucket_edges)
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise MetricsError("bucket edges must be strictly increasing")
    if len(records) != len(specs):
        raise MetricsError("records/specs length mismatch")
    if scores is None:
        scores = [
            score_online(r, s, success_radius_m=success_radius_m)
            for r, s in zip(records, specs)
        ]
    bounds = [(-math.inf, edges[0])] if edges else []
    bounds += list(zip(edges, edges[1:]))
    if edges:
        bounds.append((edges[-1], math.inf))
    if not bounds:
        bounds = [(-math.inf, math.inf)]
    counts = [0] * len(bounds)
    successes = [0] * len(bounds)
    for sc in scores:
        length = sc.gt_geodesic_m
        for i, (lo, hi) in enumerate(bounds):
            if lo <= length < hi:
                counts[i] += 1
                successes[i] += 1 if sc.success else 0
                break
    return [
        BucketStat(
            lo_m=lo,
            hi_m=hi,
            count=counts[i],
            sr=(successes[i] / counts[i]) if counts[i] else None,
        )
        for i, (lo, hi) in enumerate(bounds)
    ]
