import datetime as dt
import math

import numpy as np
import pytest

from visit_optimizer.defaults import DEFAULT_CATEGORY_LABELS
from visit_optimizer.errors import EmptyTraining, InvalidConfig
from visit_optimizer.features import (
    FeatureBank,
    category_pair_features,
    compute_feature_vectors,
    length_feature,
    lognormal_density,
    stay_point_features,
    stay_poi_features,
    train_feature_bank,
    visit_centers,
)
from visit_optimizer.geo import PoiDatabase
from visit_optimizer.models import AnnotatedSession, ExtractionParams, FeatureParams, Poi, Session, TrackPoint, VisitRecord
from visit_optimizer.staypoint import extract_candidates

from conftest import ORIGIN, PLACE_CATS, make_bank, place, stay_point, toy_corpus, toy_session

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class TestStayPointFeatures:
    def test_exponential_stay_time_closed_form(self):
        params = FeatureParams(lam=1.0 / 30.0)
        sp = stay_point(0, 10, bt=0, et=1800)
        (_, x1), (_, xbar1) = stay_point_features(make_bank(), params, sp)
        assert x1 == pytest.approx(1.0 - math.exp(-1.0), abs=1e-6)
        assert xbar1 == pytest.approx(math.exp(-1.0), abs=1e-6)

    def test_center_gaussian(self):
        bank = make_bank(sig_centers=(ORIGIN,))
        (x0, _), (xbar0, _) = stay_point_features(bank, FeatureParams(), stay_point(0, 1))
        assert x0 == pytest.approx(1.0)
        assert xbar0 == pytest.approx(0.0)

    def test_no_trained_centers(self):
        (x0, _), (xbar0, _) = stay_point_features(make_bank(), FeatureParams(), stay_point(0, 1))
        assert (x0, xbar0) == (0.0, 1.0)

    def test_estimated_lambda_wins(self):
        bank = make_bank(lam=1.0 / 60.0)
        (_, x1), _ = stay_point_features(bank, FeatureParams(), stay_point(0, 1, bt=0, et=3600))
        assert x1 == pytest.approx(1.0 - math.exp(-1.0))


class TestLogNormal:
    def test_density_peak_example(self):
        bank = make_bank(lognorm={"cafe": (0.0, 1.0)})
        assert lognormal_density(bank, FeatureParams(), "cafe", 60) == pytest.approx(INV_SQRT_2PI, abs=1e-6)

    def test_matches_closed_form(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            nu, tau, minutes = rng.uniform(-1, 5), rng.uniform(0.05, 3.0), rng.uniform(0.5, 600)
            bank = make_bank(lognorm={"c": (float(nu), float(tau))})
            expected = math.exp(-((math.log(minutes) - nu) ** 2) / (2 * tau)) / (minutes * math.sqrt(2 * math.pi * tau))
            assert lognormal_density(bank, FeatureParams(), "c", minutes * 60) == pytest.approx(expected, abs=1e-6)

    def test_unseen_category_and_zero_stay(self):
        bank = make_bank(lognorm={"cafe": (0.0, 1.0)})
        assert lognormal_density(bank, FeatureParams(), "gym", 600) == 0.0
        assert lognormal_density(bank, FeatureParams(unseen_lognorm_density=0.5), "gym", 600) == 0.5
        assert lognormal_density(bank, FeatureParams(), "cafe", 0) == 0.0

    def test_single_sample_variance_floor(self):
        bank = make_bank(lognorm={"cafe": (0.0, 0.0)})
        floored = make_bank(lognorm={"cafe": (0.0, 0.25)})
        assert lognormal_density(bank, FeatureParams(), "cafe", 60) == lognormal_density(
            floored, FeatureParams(), "cafe", 60
        )

    def test_fit_recovers_parameters(self):
        rng = np.random.default_rng(11)
        nu, tau = math.log(30.0), 0.5
        minutes = rng.lognormal(nu, math.sqrt(tau), size=10_000)
        db = PoiDatabase([Poi(id="c", name="", cat="cafe", lng=ORIGIN[0], lat=ORIGIN[1])])
        sessions = []
        for s in range(20):
            clock = 0
            visits = []
            for m in minutes[s * 500 : (s + 1) * 500]:
                seconds = max(1, int(round(m * 60)))
                visits.append(VisitRecord(bt=clock, et=clock + seconds, poi_id="c"))
                clock += seconds + 1
            session = Session(id=f"s{s}", points=(TrackPoint(ORIGIN[0], ORIGIN[1], 0),))
            sessions.append(AnnotatedSession(session=session, visits=tuple(visits)))
        bank = train_feature_bank(sessions, db, FeatureParams(transition_scope="next"))
        fit_nu, fit_tau = bank.lognorm["cafe"]
        assert fit_nu == pytest.approx(nu, abs=0.05)
        assert fit_tau == pytest.approx(tau, abs=0.1)


class TestPairFeatures:
    def test_smoothing_only(self):
        bank = make_bank(categories=tuple(DEFAULT_CATEGORY_LABELS[:10]))
        x0, x1 = category_pair_features(bank, FeatureParams(beta=0.01), "cafe", "park")
        assert x0 == pytest.approx(0.1)
        assert x1 == 0.0

    def test_transition_rows_sum_to_one(self, toy_db):
        bank = train_feature_bank(toy_corpus(3), toy_db)
        params = FeatureParams()
        for ck in bank.categories:
            total = math.fsum(category_pair_features(bank, params, ck, cl)[0] for cl in bank.categories)
            assert total == pytest.approx(1.0, abs=1e-9)

    def test_cooccurrence_ratio(self):
        bank = make_bank(
            session_cats=(frozenset({"cafe", "park"}), frozenset({"cafe"}), frozenset({"park", "gym"})),
            categories=("cafe", "gym", "park"),
        )
        _, x1 = category_pair_features(bank, FeatureParams(), "cafe", "park")
        assert x1 == pytest.approx(1.0 / 4.0)
        _, x1_union = category_pair_features(bank, FeatureParams(jaccard_union=True), "cafe", "park")
        assert x1_union == pytest.approx(1.0 / 3.0)


class TestLengthFeature:
    def test_density_peak(self):
        assert length_feature(make_bank(mu_y=4.0, sigma2_y=1.0), 4) == pytest.approx(INV_SQRT_2PI, abs=1e-6)

    def test_matches_closed_form(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            mu, var, m = rng.uniform(0, 10), rng.uniform(0.1, 9), int(rng.integers(0, 20))
            expected = math.exp(-((m - mu) ** 2) / (2 * var)) / math.sqrt(2 * math.pi * var)
            bank = make_bank(mu_y=float(mu), sigma2_y=float(var))
            assert length_feature(bank, m) == pytest.approx(expected, abs=1e-6)

    def test_zero_variance_is_a_point_mass(self):
        bank = make_bank(mu_y=3.0, sigma2_y=0.0)
        assert [length_feature(bank, m) for m in range(6)] == [0.0, 0.0, 0.0, 1.0, 0.0, 0.0]

    def test_negative_length(self):
        with pytest.raises(ValueError):
            length_feature(make_bank(mu_y=1.0, sigma2_y=1.0), -1)


class TestTraining:
    def test_statistics_on_toy_corpus(self, toy_db):
        bank = train_feature_bank(toy_corpus(2), toy_db)
        assert len(bank.sig_centers) == 6
        assert bank.f_poi == pytest.approx({"a0": 1 / 3, "a1": 1 / 3, "a2": 1 / 3})
        # Visits begin at 08:00, 08:20 and 08:40 UTC: all in the morning window.
        assert bank.f_cat_time[1] == pytest.approx({c: 1 / 3 for c in PLACE_CATS})
        assert bank.f_cat_time[0] == {}
        assert (bank.mu_y, bank.sigma2_y) == (3.0, 0.0)
        # "all" scope: cafe -> daycare, cafe -> park, daycare -> park per session.
        assert bank.transitions == {"cafe": {"daycare": 2, "park": 2}, "daycare": {"park": 2}}
        assert bank.cat_out == {"cafe": 4, "daycare": 2}
        assert set(bank.categories) == {"bank", *PLACE_CATS}

    def test_next_scope(self, toy_db):
        bank = train_feature_bank([toy_session()], toy_db, FeatureParams(transition_scope="next"))
        assert bank.transitions == {"cafe": {"daycare": 1}, "daycare": {"park": 1}}

    def test_estimate_lambda(self, toy_db):
        bank = train_feature_bank([toy_session()], toy_db, FeatureParams(estimate_lambda=True))
        assert bank.lam == pytest.approx(1.0 / 9.5)

    def test_empty_training(self, toy_db):
        with pytest.raises(EmptyTraining):
            train_feature_bank([], toy_db)

    def test_unknown_poi(self):
        with pytest.raises(InvalidConfig):
            train_feature_bank([toy_session()], PoiDatabase())

    def test_visit_centers_fall_back_to_poi(self, toy_db):
        ann = toy_session()
        outside = VisitRecord(bt=0, et=10, poi_id="b1")
        assert visit_centers(ann, toy_db, [outside]) == [(toy_db.get("b1").lng, toy_db.get("b1").lat)]

    def test_bank_json_round_trip(self, toy_db):
        bank = train_feature_bank(toy_corpus(2), toy_db)
        assert FeatureBank.from_dict(bank.to_dict()) == bank


class TestFeatureVectors:
    def test_shapes_on_toy_session(self, toy_db):
        ann = toy_session()
        bank = train_feature_bank([ann], toy_db)
        cset = extract_candidates(ann.session, [ExtractionParams()])
        fv = compute_feature_vectors(cset, bank, FeatureParams(), toy_db)
        assert fv.n_sp == 3
        assert fv.x_s.shape == (3, 2) and fv.x_sbar.shape == (3, 2)
        assert [x.shape for x in fv.x_v] == [(2, 3)] * 3
        assert sorted(fv.x_t) == [(0, 1), (0, 2), (1, 2)]
        assert sum(arr[..., 0].size for arr in fv.x_t.values()) == 12
        assert fv.x_y.shape == (4,)
        np.testing.assert_allclose(fv.x_s + fv.x_sbar, 1.0)
        assert [hits[0][0].id for hits in fv.candidates] == ["a0", "a1", "a2"]

    def test_stay_poi_features_use_time_window_tables(self, toy_db):
        ann = toy_session()
        bank = train_feature_bank([ann], toy_db)
        sp = stay_point(0, 19, at=place(0), bt=ann.visits[0].bt, et=ann.visits[0].et)
        x0, x1, _ = stay_poi_features(bank, FeatureParams(), sp, toy_db.get("a0"))
        assert x0 == pytest.approx(1.0 / 3.0)
        assert x1 == pytest.approx(1.0 / 3.0)
        # Same stay in the evening window: only the (1 - alpha) share is left.
        evening = stay_point(0, 19, at=place(0), bt=ann.visits[0].bt + 12 * 3600, et=ann.visits[0].et + 12 * 3600)
        x0, _, _ = stay_poi_features(bank, FeatureParams(), evening, toy_db.get("a0"))
        assert x0 == pytest.approx(0.1 / 3.0)

    def test_overlapping_pairs_have_no_pair_features(self, toy_db):
        ann = toy_session()
        bank = train_feature_bank([ann], toy_db)
        session = ann.session
        cset = extract_candidates(session, [ExtractionParams(100, 180), ExtractionParams(1500, 180)])
        fv = compute_feature_vectors(cset, bank, FeatureParams(), toy_db)
        for i, j in cset.overlap_pairs:
            assert (i, j) not in fv.x_t


def test_day_is_irrelevant_to_features(toy_db):
    a = toy_session()
    b = toy_session(a.session.day + dt.timedelta(days=7))
    bank = train_feature_bank([a], toy_db)
    fa = compute_feature_vectors(extract_candidates(a.session, [ExtractionParams()]), bank, FeatureParams(), toy_db)
    fb = compute_feature_vectors(extract_candidates(b.session, [ExtractionParams()]), bank, FeatureParams(), toy_db)
    np.testing.assert_allclose(fa.x_s, fb.x_s)
    for x, y in zip(fa.x_v, fb.x_v):
        np.testing.assert_allclose(x, y)
