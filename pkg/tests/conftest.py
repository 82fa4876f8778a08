"""Shared fixtures: a three-place toy world, hand-made banks and random problems."""

from __future__ import annotations

import datetime as dt
import json
import logging
from pathlib import Path

import numpy as np
import pytest

from visit_optimizer.features import FeatureBank
from visit_optimizer.geo import PoiDatabase, offset_meters
from visit_optimizer.models import AnnotatedSession, Poi, Session, StayPoint, TrackPoint, VisitRecord
from visit_optimizer.solvers import AssignmentProblem
from visit_optimizer.staypoint import overlap_pairs
from visit_optimizer.utils import day_bounds

ORIGIN = (139.70, 35.68)
DAY = dt.date(2024, 1, 15)
PLACE_CATS = ("cafe", "daycare", "park")


def place(x: int) -> tuple[float, float]:
    """Toy place x sits 1 km east of place x - 1."""
    return offset_meters(ORIGIN, 1000.0 * x, 0.0)


def toy_pois() -> list[Poi]:
    """Two POIs per place: one on the spot, one 30 m north of it."""
    pois = []
    for x, cat in enumerate(PLACE_CATS):
        lng, lat = place(x)
        north = offset_meters((lng, lat), 0.0, 30.0)
        pois.append(Poi(id=f"a{x}", name=f"A{x}", cat=cat, lng=lng, lat=lat))
        pois.append(Poi(id=f"b{x}", name=f"B{x}", cat="bank", lng=north[0], lat=north[1]))
    return pois


def toy_session(day: dt.date = DAY, user: str = "u01", *, dwell: int = 20, step: int = 30) -> AnnotatedSession:
    """Stationary at each place for `dwell` samples, jumping between places.

    Every stay is annotated with the on-the-spot POI of its place.
    """
    start = day_bounds(day, 0)[0] + 8 * 3600
    points: list[TrackPoint] = []
    visits: list[VisitRecord] = []
    clock = start
    for x in range(len(PLACE_CATS)):
        lng, lat = place(x)
        bt = clock
        for _ in range(dwell):
            points.append(TrackPoint(lng=lng, lat=lat, ts=clock))
            clock += step
        visits.append(VisitRecord(bt=bt, et=clock - step, poi_id=f"a{x}"))
        clock += 600
    session = Session(id=f"{user}_{day.isoformat()}", points=tuple(points), day=day)
    return AnnotatedSession(session=session, visits=tuple(visits), user_id=user)


def toy_corpus(n_sessions: int, user: str = "u01") -> list[AnnotatedSession]:
    return [toy_session(DAY + dt.timedelta(days=d), user) for d in range(n_sessions)]


def write_toy_files(root: Path, users: dict[str, int]) -> dict[str, Path]:
    """Write pois.json, trajectories/ and annotations/ for `users` = {user: sessions}."""
    root.mkdir(parents=True, exist_ok=True)
    pois = [
        {"id": p.id, "name": p.name, "cat": p.cat, "lng": p.lng, "lat": p.lat, "source": p.source}
        for p in toy_pois()
    ]
    (root / "pois.json").write_text(json.dumps(pois), encoding="utf-8")
    (root / "popularity.json").write_text(json.dumps({p["id"]: 1 for p in pois}), encoding="utf-8")
    traj = root / "trajectories"
    ann = root / "annotations"
    traj.mkdir(exist_ok=True)
    ann.mkdir(exist_ok=True)
    for user, n in users.items():
        doc = {}
        for a in toy_corpus(n, user):
            lines = [json.dumps({"lng": p.lng, "lat": p.lat, "ts": p.ts}) for p in a.session.points]
            (traj / f"{a.id}.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
            doc[a.id] = [{"bt": v.bt, "et": v.et, "poi_id": v.poi_id} for v in a.visits]
        (ann / f"{user}.json").write_text(json.dumps(doc), encoding="utf-8")
    return {
        "pois": root / "pois.json",
        "popularity": root / "popularity.json",
        "trajectories": traj,
        "annotations": ann,
    }


def make_bank(**overrides) -> FeatureBank:
    """A FeatureBank with empty statistics; override any field."""
    values = dict(
        sig_centers=(),
        f_poi={},
        f_poi_time=({}, {}, {}, {}),
        f_cat={},
        f_cat_time=({}, {}, {}, {}),
        lognorm={},
        cat_out={},
        transitions={},
        session_cats=(),
        mu_y=0.0,
        sigma2_y=0.0,
        categories=(),
    )
    values.update(overrides)
    return FeatureBank(**values)


def stay_point(start: int, end: int, *, at: tuple[float, float] = ORIGIN, bt: int = 0, et: int | None = None) -> StayPoint:
    return StayPoint(start=start, end=end, lng=at[0], lat=at[1], bt=bt, et=bt + 60 if et is None else et)


def random_problem(
    rng: np.random.Generator,
    *,
    max_sp: int = 6,
    max_k: int = 4,
    pair_scale: float = 1.0,
) -> AssignmentProblem:
    """Random instance with coefficients in [0, 1] and random (possibly overlapping) spans."""
    n = int(rng.integers(0, max_sp + 1))
    starts = np.sort(rng.integers(0, 30, size=n))
    spans = sorted((int(s), int(s + rng.integers(0, 8))) for s in starts)
    sps = tuple(stay_point(s, e, bt=10 * s, et=10 * e + 1) for s, e in spans)
    ks = [int(rng.integers(0, max_k + 1)) for _ in range(n)]
    candidates = tuple(
        tuple(Poi(id=f"p{i}_{k}", name="", cat="c", lng=ORIGIN[0], lat=ORIGIN[1]) for k in range(ks[i]))
        for i in range(n)
    )
    pairs = overlap_pairs(sps)
    pair_t = {
        (i, j): rng.random((ks[i], ks[j])) * pair_scale
        for i in range(n)
        for j in range(i + 1, n)
        if ks[i] and ks[j] and (i, j) not in pairs
    }
    return AssignmentProblem(
        stay_points=sps,
        candidates=candidates,
        distances=tuple(tuple(0.0 for _ in c) for c in candidates),
        unary_s=rng.random(n),
        unary_sbar=rng.random(n),
        unary_v=tuple(rng.random(k) for k in ks),
        pair_t=pair_t,
        len_y=rng.random(n + 1),
        overlap_pairs=pairs,
    )


def labelled_problem(rng: np.random.Generator, *, n_stops: int = 3, max_k: int = 3, n_labels: int = 3) -> AssignmentProblem:
    """Stops made of nested spans, with category-style labels and quantized coefficients.

    Pair terms come from one label table, so equal labels give equal pair rows;
    coefficients are multiples of 0.25 so exact ties are common.
    """
    spans: list[tuple[int, int]] = []
    for c in range(n_stops):
        b = 10 * c
        spans += [(b, b + 4), (b + 1, b + 3)][: int(rng.integers(1, 3))]
    if n_stops > 1 and rng.random() < 0.5:
        spans.append((2, 13))
    spans.sort()
    n = len(spans)
    sps = tuple(stay_point(s, e, bt=10 * s, et=10 * e + 1) for s, e in spans)
    ks = [int(rng.integers(0, max_k + 1)) for _ in range(n)]
    labels = tuple(rng.integers(0, n_labels, size=k) for k in ks)
    table = rng.integers(0, 3, size=(n_labels, n_labels)) * 0.25
    candidates = tuple(
        tuple(Poi(id=f"p{i}_{k}", name="", cat=f"c{labels[i][k]}", lng=ORIGIN[0], lat=ORIGIN[1]) for k in range(ks[i]))
        for i in range(n)
    )
    pairs = overlap_pairs(sps)
    pair_t = {
        (i, j): table[labels[i][:, None], labels[j][None, :]]
        for i in range(n)
        for j in range(i + 1, n)
        if ks[i] and ks[j] and (i, j) not in pairs
    }
    return AssignmentProblem(
        stay_points=sps,
        candidates=candidates,
        distances=tuple(tuple(0.0 for _ in c) for c in candidates),
        unary_s=rng.integers(0, 3, size=n) * 0.25,
        unary_sbar=rng.integers(0, 3, size=n) * 0.25,
        unary_v=tuple(rng.integers(0, 3, size=k) * 0.25 for k in ks),
        pair_t=pair_t,
        len_y=rng.integers(-2, 3, size=n + 1) * 0.25,
        overlap_pairs=pairs,
        labels=labels,
    )


@pytest.fixture
def toy_db() -> PoiDatabase:
    return PoiDatabase(toy_pois())


@pytest.fixture
def log() -> logging.Logger:
    return logging.getLogger("tests.visit_optimizer")
