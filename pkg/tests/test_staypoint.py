import numpy as np
import pytest

from visit_optimizer.errors import InvalidConfig
from visit_optimizer.geo import offset_meters
from visit_optimizer.models import ExtractionParams, Session, TrackPoint
from visit_optimizer.staypoint import extract_candidates, extract_stay_points, overlap_pairs, overlaps

from conftest import ORIGIN, stay_point


def session_of(coords, times) -> Session:
    return Session(id="s", points=tuple(TrackPoint(lng=c[0], lat=c[1], ts=int(t)) for c, t in zip(coords, times)))


def stationary(n: int, step: int, at=ORIGIN, t0: int = 0) -> tuple[list, list]:
    return [at] * n, [t0 + step * x for x in range(n)]


def random_walk(rng: np.random.Generator, n: int = 400) -> Session:
    """Alternating dwell and move phases with a few meters of jitter."""
    coords, times = [], []
    here, clock = ORIGIN, 0
    while len(coords) < n:
        for _ in range(int(rng.integers(5, 80))):
            jitter = offset_meters(here, float(rng.normal(0, 8)), float(rng.normal(0, 8)))
            coords.append(jitter)
            times.append(clock)
            clock += 10
        here = offset_meters(here, float(rng.uniform(-400, 400)), float(rng.uniform(-400, 400)))
    return session_of(coords[:n], times[:n])


class TestExtractStayPoints:
    def test_stationary_trace(self):
        coords, times = stationary(101, 3)
        sps = extract_stay_points(session_of(coords, times), ExtractionParams(100, 180))
        assert len(sps) == 1
        assert sps[0].st == 300
        assert sps[0].span == (0, 100)

    def test_too_short_for_threshold(self):
        coords, times = stationary(101, 3)
        assert extract_stay_points(session_of(coords, times), ExtractionParams(100, 1800)) == []

    def test_two_clusters_joined_by_movement(self):
        a, b = ORIGIN, offset_meters(ORIGIN, 1000.0, 0.0)
        coords = [a] * 21 + [offset_meters(ORIGIN, 250.0 * s, 0.0) for s in (1, 2, 3)] + [b] * 21
        times = [10 * x for x in range(len(coords))]
        sps = extract_stay_points(session_of(coords, times), ExtractionParams(100, 180))
        assert [sp.span for sp in sps] == [(0, 20), (24, 44)]
        assert (sps[0].lng, sps[0].lat) == pytest.approx(a)
        assert (sps[1].lng, sps[1].lat) == pytest.approx(b)
        assert [sp.st for sp in sps] == [200, 200]

    def test_empty_session(self):
        assert extract_stay_points(Session(id="s", points=()), ExtractionParams()) == []

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            ExtractionParams(0, 180)

    def test_parse_param_set(self):
        assert ExtractionParams.parse("200,900") == ExtractionParams(200.0, 900.0)
        with pytest.raises(ValueError):
            ExtractionParams.parse("200")


class TestExtractionProperties:
    @pytest.mark.parametrize("seed", range(10))
    def test_disjoint_and_long_enough(self, seed):
        session = random_walk(np.random.default_rng(seed))
        params = ExtractionParams(100, 180)
        sps = extract_stay_points(session, params)
        for a, b in zip(sps, sps[1:]):
            assert a.end < b.start
        assert all(sp.st >= params.theta_time for sp in sps)
        assert all(sp.st == sp.et - sp.bt for sp in sps)
        assert all(sp.bt == session.points[sp.start].ts and sp.et == session.points[sp.end].ts for sp in sps)

    @pytest.mark.parametrize("seed", range(10))
    def test_recall_never_drops_with_shorter_threshold(self, seed):
        session = random_walk(np.random.default_rng(100 + seed))
        long_ = extract_stay_points(session, ExtractionParams(100, 900))
        short = extract_stay_points(session, ExtractionParams(100, 180))
        for sp in long_:
            assert any(o.start <= sp.start and sp.end <= o.end for o in short)


class TestCandidates:
    def test_single_param_set_matches_extraction(self):
        session = random_walk(np.random.default_rng(5))
        params = ExtractionParams(100, 180)
        cset = extract_candidates(session, [params])
        assert list(cset.stay_points) == extract_stay_points(session, params)
        assert cset.overlap_pairs == frozenset()

    def test_two_param_sets_overlap(self):
        # 850 s at A, then 140 s at B 150 m away: only the wide radius merges both.
        b = offset_meters(ORIGIN, 150.0, 0.0)
        coords = [ORIGIN] * 86 + [b] * 15
        times = [10 * x for x in range(len(coords))]
        session = session_of(coords, times)
        cset = extract_candidates(session, [ExtractionParams(100, 180), ExtractionParams(200, 900)])
        assert [sp.span for sp in cset.stay_points] == [(0, 85), (0, 100)]
        assert cset.overlap_pairs == frozenset({(0, 1)})

    def test_identical_spans_deduplicated(self):
        coords, times = stationary(101, 3)
        cset = extract_candidates(session_of(coords, times), [ExtractionParams(100, 180), ExtractionParams(200, 180)])
        assert len(cset) == 1

    def test_needs_a_param_set(self):
        with pytest.raises(InvalidConfig):
            extract_candidates(Session(id="s", points=()), [])


class TestOverlaps:
    @pytest.mark.parametrize(
        "a,b,expected",
        [((1, 5), (5, 9), True), ((1, 4), (5, 9), False), ((2, 8), (3, 4), True)],
    )
    def test_examples(self, a, b, expected):
        x, y = stay_point(*a), stay_point(*b)
        assert overlaps(x, y) is expected
        assert overlaps(y, x) is expected

    def test_reflexive(self):
        x = stay_point(3, 7)
        assert overlaps(x, x)

    def test_pairs_over_sorted_spans(self):
        sps = [stay_point(0, 4), stay_point(2, 6), stay_point(5, 9), stay_point(10, 12)]
        assert overlap_pairs(sps) == frozenset({(0, 1), (1, 2)})
