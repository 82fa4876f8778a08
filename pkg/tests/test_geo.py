import datetime as dt

import numpy as np
import pytest

from visit_optimizer.errors import EmptySession, IndexOutOfRange
from visit_optimizer.geo import (
    PoiDatabase,
    build_session,
    geo_distance,
    geo_distances,
    offset_meters,
    radius_query,
    stay_point_attributes,
)
from visit_optimizer.models import Poi, Session, TrackPoint
from visit_optimizer.utils import day_bounds

DAY = dt.date(2024, 1, 15)


class TestGeoDistance:
    def test_identity(self):
        assert geo_distance((139.70, 35.68), (139.70, 35.68)) == 0.0

    def test_latitude_step(self):
        assert geo_distance((0.0, 0.0), (0.0, 0.001)) == pytest.approx(111.19, abs=0.05)

    def test_longitude_step_at_equator(self):
        assert geo_distance((0.0, 0.0), (0.001, 0.0)) == pytest.approx(111.19, abs=0.05)

    def test_symmetry_and_triangle_inequality(self):
        rng = np.random.default_rng(42)
        for _ in range(500):
            a, b, c = (tuple(rng.uniform([-180, -85], [180, 85])) for _ in range(3))
            assert geo_distance(a, b) == pytest.approx(geo_distance(b, a), abs=1e-9)
            assert geo_distance(a, c) <= geo_distance(a, b) + geo_distance(b, c) + 1e-6

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(7)
        lngs = rng.uniform(139.6, 139.8, 200)
        lats = rng.uniform(35.6, 35.8, 200)
        center = (139.7, 35.7)
        expected = [geo_distance(center, (x, y)) for x, y in zip(lngs, lats)]
        np.testing.assert_allclose(geo_distances(center, lngs, lats), expected, rtol=1e-12, atol=1e-9)

    def test_offset_meters_round_trip_distance(self):
        moved = offset_meters((139.7, 35.68), 300.0, 400.0)
        assert geo_distance((139.7, 35.68), moved) == pytest.approx(500.0, rel=1e-3)


class TestBuildSession:
    def test_sorts_points(self):
        lo, _ = day_bounds(DAY, 0)
        pts = [TrackPoint(10, 20, lo + 30), TrackPoint(10, 20, lo + 10), TrackPoint(10, 20, lo + 20)]
        session = build_session(pts, DAY)
        assert [p.ts for p in session.points] == [lo + 10, lo + 20, lo + 30]
        assert session.day == DAY

    def test_keeps_only_the_day(self):
        lo, hi = day_bounds(DAY, 0)
        pts = [TrackPoint(10, 20, lo - 1), TrackPoint(10, 20, lo), TrackPoint(10, 20, hi), TrackPoint(10, 20, hi + 1)]
        session = build_session(pts, DAY, session_id="u01_2024-01-15")
        assert [p.ts for p in session.points] == [lo, hi]
        assert session.id == "u01_2024-01-15"

    def test_timezone_offset_moves_the_day(self):
        lo_utc, _ = day_bounds(DAY, 0)
        # 23:30 UTC on the previous day is 08:30 in UTC+09:00.
        pts = [TrackPoint(10, 20, lo_utc - 1800)]
        assert len(build_session(pts, DAY, tz_offset_minutes=540)) == 1
        with pytest.raises(EmptySession):
            build_session(pts, DAY)

    def test_empty_input(self):
        with pytest.raises(EmptySession):
            build_session([], DAY)


class TestStayPointAttributes:
    def test_single_point(self):
        session = Session(id="s", points=(TrackPoint(10, 20, 100),))
        sp = stay_point_attributes(session, 0, 0)
        assert (sp.lng, sp.lat, sp.bt, sp.et, sp.st) == (10, 20, 100, 100, 0)

    def test_two_points(self):
        session = Session(id="s", points=(TrackPoint(10, 20, 100), TrackPoint(12, 22, 160)))
        sp = stay_point_attributes(session, 0, 1)
        assert sp.lng == pytest.approx(11.0)
        assert sp.lat == pytest.approx(21.0)
        assert (sp.bt, sp.et, sp.st) == (100, 160, 60)

    @pytest.mark.parametrize("i,j", [(1, 0), (-1, 0), (0, 2)])
    def test_invalid_span(self, i, j):
        session = Session(id="s", points=(TrackPoint(10, 20, 100), TrackPoint(12, 22, 160)))
        with pytest.raises(IndexOutOfRange):
            stay_point_attributes(session, i, j)


class TestRadiusQuery:
    def test_poi_at_center(self):
        poi = Poi(id="x", name="", cat="cafe", lng=139.7, lat=35.68)
        assert radius_query(PoiDatabase([poi]), (139.7, 35.68), 100.0) == [(poi, 0.0)]

    def test_radius_cut(self):
        center = (139.7, 35.68)
        near = offset_meters(center, 50.0, 0.0)
        far = offset_meters(center, 600.0, 0.0)
        db = PoiDatabase(
            [
                Poi(id="near", name="", cat="cafe", lng=near[0], lat=near[1]),
                Poi(id="far", name="", cat="cafe", lng=far[0], lat=far[1]),
            ]
        )
        hits = radius_query(db, center, 500.0)
        assert [p.id for p, _ in hits] == ["near"]
        assert hits[0][1] == pytest.approx(50.0, rel=1e-3)

    def test_empty_db(self):
        assert radius_query(PoiDatabase(), (139.7, 35.68), 500.0) == []

    def test_nonpositive_radius(self):
        with pytest.raises(ValueError):
            radius_query(PoiDatabase(), (139.7, 35.68), 0.0)

    def test_matches_brute_force_scan(self):
        rng = np.random.default_rng(3)
        pois = [
            Poi(id=f"p{x:04d}", name="", cat="cafe", lng=float(lng), lat=float(lat))
            for x, (lng, lat) in enumerate(zip(rng.uniform(139.68, 139.72, 1000), rng.uniform(35.66, 35.70, 1000)))
        ]
        db = PoiDatabase(pois)
        for _ in range(20):
            center = (float(rng.uniform(139.68, 139.72)), float(rng.uniform(35.66, 35.70)))
            radius = float(rng.uniform(50, 800))
            expected = sorted(
                ((p, geo_distance(center, (p.lng, p.lat))) for p in pois if geo_distance(center, (p.lng, p.lat)) <= radius),
                key=lambda h: (h[1], h[0].id),
            )
            assert radius_query(db, center, radius) == expected


class TestPoiDatabase:
    def test_duplicate_ids_rejected(self):
        poi = Poi(id="x", name="", cat="cafe", lng=139.7, lat=35.68)
        with pytest.raises(ValueError):
            PoiDatabase([poi, poi])

    def test_merged_and_sources(self):
        common = PoiDatabase([Poi(id="c", name="", cat="cafe", lng=139.7, lat=35.68)])
        merged = common.merged([Poi(id="h", name="", cat="home", lng=139.7, lat=35.68, source="personal")])
        assert len(merged) == 2 and "h" in merged
        assert [p.id for p in merged.by_source("personal")] == ["h"]
        assert merged.categories() == ["cafe", "home"]
