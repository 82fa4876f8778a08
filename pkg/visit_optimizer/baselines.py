"""Point-wise baselines: nearest POI (NN) and most checked-in POI (NCI).

Both select every candidate stay-point that has at least one candidate POI,
resolve overlapping stay-points with an overlap policy, and report POI indexes
into the same nearest-first candidate lists the joint problem uses.
"""

from __future__ import annotations

import logging
from typing import Callable, Sequence

from .defaults import OVERLAP_POLICIES
from .errors import InvalidConfig
from .features import candidate_hits
from .geo import PoiDatabase
from .models import CandidateSet, FeatureParams, Poi, PopularityTable, Solution, StayPoint
from .solvers.problem import resolve_visits

logger = logging.getLogger(__name__)

Chooser = Callable[[Sequence[tuple[Poi, float]]], int]


def resolve_overlaps(
    stay_points: Sequence[StayPoint],
    overlap_pairs: frozenset[tuple[int, int]],
    eligible: Sequence[int],
    policy: str = "earliest",
) -> list[int]:
    """Greedily keep eligible stay-points in policy order, dropping any that overlap a kept one.

    "earliest" orders by (bt, index); "longest" by (-stay time, bt, index).
    """
    if policy not in OVERLAP_POLICIES:
        raise InvalidConfig(f"unknown overlap policy {policy!r}")
    if policy == "earliest":
        order = sorted(eligible, key=lambda i: (stay_points[i].bt, i))
    else:
        order = sorted(eligible, key=lambda i: (-stay_points[i].st, stay_points[i].bt, i))

    kept: list[int] = []
    for i in order:
        if any((min(i, j), max(i, j)) in overlap_pairs for j in kept):
            continue
        kept.append(i)
    return sorted(kept)


def _assign_pointwise(
    candidate_set: CandidateSet,
    db: PoiDatabase,
    params: FeatureParams,
    choose: Chooser,
    *,
    backend: str,
    overlap_policy: str,
) -> Solution:
    sps = candidate_set.stay_points
    hits = [candidate_hits(db, sp, params) for sp in sps]
    eligible = [i for i, h in enumerate(hits) if h]
    kept = resolve_overlaps(sps, candidate_set.overlap_pairs, eligible, overlap_policy)
    selected = [(i, choose(hits[i])) for i in kept]
    logger.debug(f"📌 {backend}: {len(selected)} of {len(sps)} stay-point(s) assigned")
    return Solution(
        selected=tuple(selected),
        objective=0.0,
        visits=resolve_visits(sps, [[poi for poi, _ in h] for h in hits], selected),
        backend=backend,
        mode="pointwise",
    )


def _nearest(hits: Sequence[tuple[Poi, float]]) -> int:
    return min(range(len(hits)), key=lambda k: (hits[k][1], hits[k][0].id))


def assign_nn(
    candidate_set: CandidateSet,
    db: PoiDatabase,
    params: FeatureParams,
    *,
    overlap_policy: str = "earliest",
) -> Solution:
    """Pair each kept stay-point with its distance-nearest POI."""
    return _assign_pointwise(candidate_set, db, params, _nearest, backend="nn", overlap_policy=overlap_policy)


def assign_nci(
    candidate_set: CandidateSet,
    db: PoiDatabase,
    pop: PopularityTable,
    params: FeatureParams,
    *,
    overlap_policy: str = "earliest",
) -> Solution:
    """Pair each kept stay-point with its most checked-in POI (ties: nearer, then smaller id)."""

    def most_popular(hits: Sequence[tuple[Poi, float]]) -> int:
        return min(range(len(hits)), key=lambda k: (-pop.count(hits[k][0].id), hits[k][1], hits[k][0].id))

    return _assign_pointwise(candidate_set, db, params, most_popular, backend="nci", overlap_policy=overlap_policy)


__all__ = ["assign_nci", "assign_nn", "resolve_overlaps"]
