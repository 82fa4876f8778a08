"""Geodesy, session construction and the POI database.

Haversine distance on a sphere of radius 6,371,000 m; POI radius queries go
through a haversine BallTree and are re-checked with `geo_distance` so the
result set is exact.
"""

from __future__ import annotations

import datetime as dt
import logging
import math
from typing import Iterable, Iterator, Sequence

import numpy as np
from sklearn.neighbors import BallTree

from .defaults import DEFAULT_TZ_OFFSET_MINUTES, EARTH_RADIUS_M
from .errors import EmptySession, IndexOutOfRange
from .models import Poi, Session, StayPoint, TrackPoint
from .utils import day_bounds

logger = logging.getLogger(__name__)

LngLat = tuple[float, float]


# ----------------------------- distances -----------------------------

def geo_distance(a: LngLat, b: LngLat) -> float:
    """Great-circle distance in meters between two (lng, lat) pairs."""
    lng1, lat1 = a
    lng2, lat2 = b
    lat1_rad = math.radians(lat1)
    lat2_rad = math.radians(lat2)
    dlat = math.radians(lat2 - lat1)
    dlon = math.radians(lng2 - lng1)

    h = math.sin(dlat / 2) ** 2 + math.cos(lat1_rad) * math.cos(lat2_rad) * math.sin(dlon / 2) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def geo_distances(center: LngLat, lngs: np.ndarray, lats: np.ndarray) -> np.ndarray:
    """Vectorized `geo_distance` from one center to many points."""
    lng0, lat0 = center
    lat0_rad = np.radians(lat0)
    lats_rad = np.radians(lats)
    dlat = np.radians(np.asarray(lats) - lat0)
    dlon = np.radians(np.asarray(lngs) - lng0)
    h = np.sin(dlat / 2) ** 2 + np.cos(lat0_rad) * np.cos(lats_rad) * np.sin(dlon / 2) ** 2
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def offset_meters(origin: LngLat, east_m: float, north_m: float) -> LngLat:
    """Move `origin` by a small local east/north displacement."""
    lng, lat = origin
    dlat = math.degrees(north_m / EARTH_RADIUS_M)
    dlng = math.degrees(east_m / (EARTH_RADIUS_M * math.cos(math.radians(lat))))
    return (lng + dlng, lat + dlat)


# ----------------------------- sessions -----------------------------

def build_session(
    points: Iterable[TrackPoint],
    day: dt.date,
    *,
    session_id: str | None = None,
    tz_offset_minutes: int = DEFAULT_TZ_OFFSET_MINUTES,
) -> Session:
    """Keep the points of local `day` and sort them (stable) by timestamp.

    Raises:
        EmptySession: no point falls within [day 00:00:00, day 23:59:59].
    """
    lo, hi = day_bounds(day, tz_offset_minutes)
    raw = list(points)
    kept = sorted((p for p in raw if lo <= p.ts <= hi), key=lambda p: p.ts)
    if len(kept) < len(raw):
        logger.debug(f"🗓️ Dropped {len(raw) - len(kept)} point(s) outside {day.isoformat()}")
    if not kept:
        raise EmptySession(f"no track-points on {day.isoformat()}")
    return Session(id=session_id or day.isoformat(), points=tuple(kept), day=day)


def session_arrays(session: Session) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(lngs, lats, ts) columns of a session."""
    pts = session.points
    lngs = np.fromiter((p.lng for p in pts), dtype=float, count=len(pts))
    lats = np.fromiter((p.lat for p in pts), dtype=float, count=len(pts))
    ts = np.fromiter((p.ts for p in pts), dtype=np.int64, count=len(pts))
    return lngs, lats, ts


def stay_point_attributes(session: Session, i: int, j: int) -> StayPoint:
    """Center, begin/end time and stay time of the span [i, j] (0-based, inclusive)."""
    n = len(session.points)
    if not 0 <= i <= j < n:
        raise IndexOutOfRange(f"span [{i}, {j}] invalid for a session of {n} points")
    members = session.points[i : j + 1]
    size = j - i + 1
    lng = math.fsum(p.lng for p in members) / size
    lat = math.fsum(p.lat for p in members) / size
    return StayPoint(
        start=i,
        end=j,
        lng=lng,
        lat=lat,
        bt=session.points[i].ts,
        et=session.points[j].ts,
    )


# ----------------------------- POI database -----------------------------

class PoiDatabase:
    """Common plus personal POIs with exact radius queries.

    Immutable once built; `merged` returns a new database.
    """

    __slots__ = ("_pois", "_by_id", "_tree", "_ids")

    def __init__(self, pois: Iterable[Poi] = ()):
        ordered = sorted(pois, key=lambda p: p.id)
        by_id: dict[str, Poi] = {}
        for p in ordered:
            if p.id in by_id:
                raise ValueError(f"duplicate POI id {p.id!r}")
            by_id[p.id] = p
        self._pois: tuple[Poi, ...] = tuple(ordered)
        self._by_id = by_id
        self._ids = [p.id for p in ordered]
        if ordered:
            coords = np.radians([[p.lat, p.lng] for p in ordered])
            self._tree: BallTree | None = BallTree(coords, metric="haversine")
        else:
            self._tree = None

    def __len__(self) -> int:
        return len(self._pois)

    def __iter__(self) -> Iterator[Poi]:
        return iter(self._pois)

    def __contains__(self, poi_id: object) -> bool:
        return poi_id in self._by_id

    def __repr__(self) -> str:
        personal = sum(1 for p in self._pois if p.source == "personal")
        return f"PoiDatabase(pois={len(self._pois)}, personal={personal})"

    def get(self, poi_id: str) -> Poi:
        return self._by_id[poi_id]

    @property
    def pois(self) -> tuple[Poi, ...]:
        return self._pois

    def categories(self) -> list[str]:
        return sorted({p.cat for p in self._pois})

    def by_source(self, source: str) -> "PoiDatabase":
        return PoiDatabase(p for p in self._pois if p.source == source)

    def merged(self, other: "PoiDatabase | Sequence[Poi]") -> "PoiDatabase":
        """Union of two databases; ids must not collide."""
        return PoiDatabase([*self._pois, *other])

    def radius_query(self, center: LngLat, radius: float) -> list[tuple[Poi, float]]:
        return radius_query(self, center, radius)

    def _candidate_indexes(self, center: LngLat, radius: float) -> np.ndarray:
        if self._tree is None:
            return np.empty(0, dtype=int)
        lng, lat = center
        # Inflated search radius; exact filtering happens in radius_query.
        r = radius / EARTH_RADIUS_M * (1.0 + 1e-9) + 1e-12
        (idx,) = self._tree.query_radius(np.radians([[lat, lng]]), r=r)
        return idx


def radius_query(db: PoiDatabase, center: LngLat, radius: float) -> list[tuple[Poi, float]]:
    """POIs within `radius` meters of `center`, nearest first (ties by id)."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    hits: list[tuple[Poi, float]] = []
    for idx in db._candidate_indexes(center, radius):
        poi = db.pois[int(idx)]
        d = geo_distance(center, (poi.lng, poi.lat))
        if d <= radius:
            hits.append((poi, d))
    hits.sort(key=lambda h: (h[1], h[0].id))
    return hits
