import datetime as dt
import logging

import numpy as np
import pytest

from visit_optimizer.errors import InvalidConfig, IoError
from visit_optimizer.evaluation import score_extraction
from visit_optimizer.features import visit_centers
from visit_optimizer.geo import geo_distances
from visit_optimizer.models import AnnotatedSession, ExtractionParams, Poi
from visit_optimizer.staypoint import extract_stay_points
from visit_optimizer.synthgen import (
    CorpusGenerator,
    DependencyMotif,
    SyntheticUser,
    WorldConfig,
    _plan_categories,
    export_corpus,
    generate_users,
    generate_world,
    perturb,
)
from visit_optimizer.utils import day_bounds

from conftest import ORIGIN

SMALL = WorldConfig(seed=3, n_pois=120, n_users=2, n_sessions=3)


@pytest.fixture(scope="module")
def small_corpus():
    return CorpusGenerator(logger=logging.getLogger("tests.synthgen"), config=SMALL).generate()


class TestWorldConfig:
    def test_dict_round_trip(self):
        cfg = WorldConfig(seed=9, dependency_motifs=(DependencyMotif("cafe", "park", 0.5),), area=(1.0, 2.0, 3.0, 4.0))
        assert WorldConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_key(self):
        with pytest.raises(InvalidConfig):
            WorldConfig.from_dict({"n_poi": 10})

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"spurious_stop_rate": 1.5},
            {"gps_noise_sigma": -1.0},
            {"n_users": 0},
            {"area": (1.0, 0.0, 0.0, 1.0)},
            {"start_date": "15/01/2024"},
            {"min_visit_seconds": 10, "visit_floor": 60},
        ],
    )
    def test_invalid_values(self, kwargs):
        with pytest.raises(InvalidConfig):
            WorldConfig(**kwargs)

    def test_motif_probability(self):
        with pytest.raises(InvalidConfig):
            DependencyMotif("cafe", "park", 1.2)


def test_perturb_matches_gaussian_spread():
    rng = np.random.default_rng(0)
    noisy = np.array(perturb(rng, [ORIGIN] * 10_000, 12.0))
    d = geo_distances(ORIGIN, noisy[:, 0], noisy[:, 1])
    # P(r <= 20) for isotropic noise of 12 m per axis
    assert abs(float(np.mean(d <= 20.0)) - 0.7506) < 0.02


def test_perturb_without_noise_is_identity():
    pts = [ORIGIN, (139.71, 35.69)]
    assert perturb(np.random.default_rng(0), pts, 0.0) == pts


class TestWorld:
    def test_pois_inside_area(self):
        db, pop = generate_world(SMALL)
        min_lng, min_lat, max_lng, max_lat = SMALL.area
        assert len(db) == SMALL.n_pois
        assert all(min_lng <= p.lng <= max_lng and min_lat <= p.lat <= max_lat for p in db)
        assert set(db.categories()) <= set(SMALL.categories)
        assert all(pop.count(p.id) >= 0 for p in db)

    def test_users_get_personal_places(self):
        db, _ = generate_world(SMALL)
        users, merged = generate_users(db, SMALL)
        assert [u.id for u in users] == ["u01", "u02"]
        assert len(merged) == len(db) + 2 * len(users)
        for u in users:
            assert merged.get(u.home.id).source == "personal"
            for habit in u.habits:
                assert sum(habit.values()) == pytest.approx(1.0)

    def test_seeded(self):
        a, _ = generate_world(SMALL)
        b, _ = generate_world(SMALL)
        c, _ = generate_world(WorldConfig(seed=4, n_pois=120))
        assert a.pois == b.pois
        assert a.pois != c.pois


def test_motif_tail_follows_head_later():
    home = Poi(id="h", name="", cat="home", lng=ORIGIN[0], lat=ORIGIN[1], source="personal")
    user = SyntheticUser(
        id="u01",
        index=0,
        home=home,
        office=home,
        habits=tuple({"cafe": 0.5, "park": 0.5} for _ in range(4)),
        favorites={"cafe": ("p1",), "park": ("p2",)},
        motifs=(DependencyMotif("cafe", "park", 1.0),),
        works=False,
    )
    config = WorldConfig(visits_per_session=(3.0, 1.0))
    rng = np.random.default_rng(11)
    depart = day_bounds(dt.date(2024, 1, 15), 0)[0] + 8 * 3600
    for _ in range(100):
        plan = _plan_categories(rng, user, config, depart)
        assert plan
        for pos, cat in enumerate(plan):
            if cat == "cafe":
                assert "park" in plan[pos + 2 :]


class TestCorpus:
    def test_shape(self, small_corpus):
        assert set(small_corpus.sessions) == {"u01", "u02"}
        assert all(len(s) == SMALL.n_sessions for s in small_corpus.sessions.values())

    def test_sessions_are_well_formed(self, small_corpus):
        for sessions in small_corpus.sessions.values():
            for ann in sessions:
                lo, hi = day_bounds(ann.session.day, SMALL.tz_offset_minutes)
                ts = [p.ts for p in ann.session.points]
                assert ts == sorted(ts)
                assert lo <= ts[0] and ts[-1] <= hi
                visits = sorted(ann.visits, key=lambda v: v.bt)
                for a, b in zip(visits, visits[1:]):
                    assert a.et < b.bt
                assert all(v.poi_id in small_corpus.db for v in ann.visits)

    def test_generation_is_seeded(self, small_corpus, log):
        again = CorpusGenerator(logger=log, config=SMALL).generate()
        assert again.sessions == small_corpus.sessions

    def test_noiseless_visits_are_all_extracted(self, log):
        config = WorldConfig(
            seed=5, n_pois=150, n_users=1, n_sessions=3, gps_noise_sigma=0.0, spurious_stop_rate=0.0,
            min_visit_seconds=900,
        )
        corpus = CorpusGenerator(logger=log, config=config).generate()
        params = ExtractionParams(100.0, 180.0)
        for ann in corpus.sessions["u01"]:
            long_visits = tuple(v for v in ann.visits if v.et - v.bt >= params.theta_time)
            scored = AnnotatedSession(session=ann.session, visits=long_visits)
            conf = score_extraction(
                extract_stay_points(ann.session, params), long_visits, visit_centers(scored, corpus.db)
            )
            assert conf.fn == 0


class TestExport:
    def test_manifest_lists_every_file(self, small_corpus, tmp_path, log):
        manifest = export_corpus(small_corpus, tmp_path, SMALL, logger=log)
        files = manifest["files"]
        assert "pois.json" in files and "popularity.json" in files
        assert sum(f.startswith("trajectories/") for f in files) == 6
        assert sum(f.startswith("annotations/") for f in files) == 2
        assert "manifest.json" not in files
        assert all((tmp_path / f).is_file() for f in files)
        assert (tmp_path / "manifest.json").is_file()
        assert manifest["users"] == ["u01", "u02"]

    def test_export_is_byte_stable(self, small_corpus, tmp_path, log):
        export_corpus(small_corpus, tmp_path / "a", SMALL, logger=log)
        export_corpus(small_corpus, tmp_path / "b", SMALL, logger=log)
        for f in sorted((tmp_path / "a").rglob("*")):
            if f.is_file():
                assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()

    def test_unwritable_destination(self, small_corpus, tmp_path, log):
        blocker = tmp_path / "file"
        blocker.write_text("x", encoding="utf-8")
        with pytest.raises(IoError):
            export_corpus(small_corpus, blocker / "out", SMALL, logger=log)
