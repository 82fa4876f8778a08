"""Centroid-radius stay-point extraction.

One pass over the session: a cluster grows while each new point lies within
theta_dist of the cluster's running centroid. The point that breaks the radius
rule closes the cluster, which is kept when it lasted at least theta_time, and
opens the next cluster. Cluster boundaries therefore do not depend on
theta_time.
"""

from __future__ import annotations

import logging
from typing import Iterable, Sequence

from .errors import InvalidConfig
from .geo import geo_distance, stay_point_attributes
from .models import CandidateSet, ExtractionParams, Session, StayPoint

logger = logging.getLogger(__name__)


def extract_stay_points(session: Session, params: ExtractionParams) -> list[StayPoint]:
    """Stay-points of one parameter setting, in temporal order, pairwise disjoint."""
    pts = session.points
    n = len(pts)
    out: list[StayPoint] = []
    i = 0
    while i < n:
        clng, clat = pts[i].lng, pts[i].lat
        count = 1
        j = i + 1
        while j < n and geo_distance((clng, clat), (pts[j].lng, pts[j].lat)) <= params.theta_dist:
            count += 1
            clng += (pts[j].lng - clng) / count
            clat += (pts[j].lat - clat) / count
            j += 1
        if pts[j - 1].ts - pts[i].ts >= params.theta_time:
            out.append(stay_point_attributes(session, i, j - 1))
        i = j
    logger.debug(
        f"📍 {session.id}: {len(out)} stay-point(s) at "
        f"(θ_dist={params.theta_dist:g} m, θ_time={params.theta_time:g} s)"
    )
    return out


def overlaps(a: StayPoint, b: StayPoint) -> bool:
    """True iff the two spans share at least one track-point."""
    return a.start <= b.end and b.start <= a.end


def overlap_pairs(stay_points: Sequence[StayPoint]) -> frozenset[tuple[int, int]]:
    """All (i, j), i < j, whose spans overlap. Expects spans sorted by start."""
    pairs: set[tuple[int, int]] = set()
    for i, a in enumerate(stay_points):
        for j in range(i + 1, len(stay_points)):
            b = stay_points[j]
            if b.start > a.end:
                break
            if overlaps(a, b):
                pairs.add((i, j))
    return frozenset(pairs)


def extract_candidates(session: Session, param_sets: Iterable[ExtractionParams]) -> CandidateSet:
    """Union of the stay-points of every parameter set, de-duplicated on identical spans."""
    sets = list(param_sets)
    if not sets:
        raise InvalidConfig("extract_candidates needs at least one parameter set")
    by_span: dict[tuple[int, int], StayPoint] = {}
    for params in sets:
        for sp in extract_stay_points(session, params):
            by_span.setdefault(sp.span, sp)
    ordered = tuple(by_span[k] for k in sorted(by_span))
    pairs = overlap_pairs(ordered)
    if len(sets) > 1:
        logger.debug(
            f"🧮 {session.id}: {len(ordered)} candidate(s) from {len(sets)} parameter sets, "
            f"{len(pairs)} overlapping pair(s)"
        )
    return CandidateSet(stay_points=ordered, overlap_pairs=pairs)
