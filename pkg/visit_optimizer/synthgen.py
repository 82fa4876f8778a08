"""Synthetic POI worlds, users and annotated day traces.

A user leaves home in the morning, visits a handful of places chosen from
per-time-window category habits and personal favorite POIs, and returns home.
Movement between places is straight-line at walking speed and sampled every
few seconds; every track-point receives isotropic Gaussian noise. Dependency
motifs plant a non-consecutive (head ... tail) category pattern. Spurious
unannotated pauses on movement legs act as extraction distractors.

All randomness comes from numpy generators seeded by (seed, stream, user, day),
so users and days can be generated independently and in any order.
"""

from __future__ import annotations

import datetime as dt
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .defaults import (
    DEFAULT_AREA,
    DEFAULT_CATEGORY_LABELS,
    DEFAULT_CATEGORY_STAY_MINUTES,
    DEFAULT_GPS_NOISE_SIGMA,
    DEFAULT_SAMPLE_INTERVAL,
    DEFAULT_START_DATE,
    DEFAULT_TZ_OFFSET_MINUTES,
    DEFAULT_VISIT_FLOOR,
    DEFAULT_WALK_SPEED,
    N_TIME_WINDOWS,
)
from .errors import InvalidConfig
from .geo import LngLat, PoiDatabase, build_session, geo_distance, offset_meters
from .models import AnnotatedSession, Poi, PopularityTable, Session, TrackPoint, VisitRecord
from .utils import day_bounds, time_window

logger = logging.getLogger(__name__)

_WORLD, _USER, _DAY = 0, 1, 2


@dataclass(slots=True, frozen=True)
class DependencyMotif:
    """When a `head` visit happens, a `tail` visit follows later that day with `probability`."""

    head: str
    tail: str
    probability: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.probability <= 1.0:
            raise InvalidConfig(f"motif probability must lie in [0, 1], got {self.probability}")


@dataclass(slots=True, frozen=True)
class WorldConfig:
    """Knobs of a synthetic corpus.

    Attributes:
        area: (min_lng, min_lat, max_lng, max_lat).
        spurious_stop_rate: Probability that a session contains one unannotated pause.
        visits_per_session: (mean, variance) of the number of out-of-home visits.
        home_padding_minutes: Annotated home stay before leaving and after returning.
        min_hop_meters: Minimum distance between consecutive visited places.
    """

    seed: int = 0
    n_pois: int = 400
    area: tuple[float, float, float, float] = DEFAULT_AREA
    n_categories: int = 10
    gps_noise_sigma: float = DEFAULT_GPS_NOISE_SIGMA
    spurious_stop_rate: float = 0.3
    visits_per_session: tuple[float, float] = (4.0, 2.0)
    n_sessions: int = 20
    n_users: int = 3
    dependency_motifs: tuple[DependencyMotif, ...] = (DependencyMotif("daycare", "daycare", 0.9),)
    n_hotspots: int = 6
    hotspot_fraction: float = 0.6
    hotspot_sigma_m: float = 300.0
    favorites_per_category: int = 2
    sample_interval: int = DEFAULT_SAMPLE_INTERVAL
    walk_speed: float = DEFAULT_WALK_SPEED
    visit_floor: int = DEFAULT_VISIT_FLOOR
    min_visit_seconds: int = DEFAULT_VISIT_FLOOR
    stay_sigma: float = 0.4
    spurious_minutes: tuple[float, float] = (3.0, 10.0)
    min_hop_meters: float = 250.0
    home_padding_minutes: float = 30.0
    start_date: str = DEFAULT_START_DATE
    tz_offset_minutes: int = DEFAULT_TZ_OFFSET_MINUTES

    def __post_init__(self) -> None:
        min_lng, min_lat, max_lng, max_lat = self.area
        if not (-180 <= min_lng < max_lng <= 180 and -90 <= min_lat < max_lat <= 90):
            raise InvalidConfig(f"invalid area {self.area}")
        if self.n_pois < 1:
            raise InvalidConfig("n_pois must be >= 1")
        if not 1 <= self.n_categories <= len(DEFAULT_CATEGORY_LABELS):
            raise InvalidConfig(f"n_categories must lie in [1, {len(DEFAULT_CATEGORY_LABELS)}]")
        if self.gps_noise_sigma < 0:
            raise InvalidConfig("gps_noise_sigma must be >= 0")
        if not 0.0 <= self.spurious_stop_rate <= 1.0:
            raise InvalidConfig("spurious_stop_rate must lie in [0, 1]")
        if self.visits_per_session[0] < 0 or self.visits_per_session[1] < 0:
            raise InvalidConfig("visits_per_session mean and variance must be >= 0")
        if self.n_sessions < 1 or self.n_users < 1:
            raise InvalidConfig("n_sessions and n_users must be >= 1")
        if self.sample_interval < 1 or self.walk_speed <= 0:
            raise InvalidConfig("sample_interval must be >= 1 s and walk_speed > 0")
        if self.visit_floor < 1 or self.min_visit_seconds < self.visit_floor:
            raise InvalidConfig("visit_floor must be >= 1 s and min_visit_seconds >= visit_floor")
        if self.n_hotspots < 1 or not 0.0 <= self.hotspot_fraction <= 1.0:
            raise InvalidConfig("n_hotspots must be >= 1 and hotspot_fraction within [0, 1]")
        try:
            dt.date.fromisoformat(self.start_date)
        except ValueError:
            raise InvalidConfig(f"start_date must be YYYY-MM-DD, got {self.start_date!r}") from None

    @property
    def categories(self) -> list[str]:
        return DEFAULT_CATEGORY_LABELS[: self.n_categories]

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "WorldConfig":
        """Build from a JSON object; unknown keys raise InvalidConfig."""
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(raw) - known)
        if unknown:
            raise InvalidConfig(f"unknown world config key(s): {', '.join(unknown)}")
        values = dict(raw)
        for key in ("area", "visits_per_session", "spurious_minutes"):
            if key in values:
                values[key] = tuple(values[key])
        if "dependency_motifs" in values:
            values["dependency_motifs"] = tuple(
                DependencyMotif(m["head"], m["tail"], float(m["probability"])) for m in values["dependency_motifs"]
            )
        return cls(**values)

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["area"] = list(self.area)
        out["visits_per_session"] = list(self.visits_per_session)
        out["spurious_minutes"] = list(self.spurious_minutes)
        out["dependency_motifs"] = [asdict(m) for m in self.dependency_motifs]
        return out


@dataclass(slots=True, frozen=True)
class SyntheticUser:
    """A simulated person.

    Attributes:
        habits: Per six-hour window, category -> preference (sums to 1).
        favorites: Category -> POI ids the user habitually picks, most preferred first.
    """

    id: str
    index: int
    home: Poi
    office: Poi
    habits: tuple[dict[str, float], ...]
    favorites: dict[str, tuple[str, ...]]
    motifs: tuple[DependencyMotif, ...] = ()
    works: bool = True


@dataclass(slots=True)
class SyntheticCorpus:
    db: PoiDatabase
    popularity: PopularityTable
    users: list[SyntheticUser]
    sessions: dict[str, list[AnnotatedSession]] = field(default_factory=dict)


def _rng(config: WorldConfig, *stream: int) -> np.random.Generator:
    return np.random.default_rng([config.seed, *stream])


def _clip_to_area(config: WorldConfig, point: LngLat) -> LngLat:
    min_lng, min_lat, max_lng, max_lat = config.area
    return (min(max(point[0], min_lng), max_lng), min(max(point[1], min_lat), max_lat))


def _uniform_point(rng: np.random.Generator, config: WorldConfig) -> LngLat:
    min_lng, min_lat, max_lng, max_lat = config.area
    return (float(rng.uniform(min_lng, max_lng)), float(rng.uniform(min_lat, max_lat)))


def perturb(rng: np.random.Generator, points: Sequence[LngLat], sigma: float) -> list[LngLat]:
    """Apply isotropic Gaussian noise of `sigma` meters to each point."""
    if sigma <= 0:
        return list(points)
    offsets = rng.normal(0.0, sigma, size=(len(points), 2))
    return [offset_meters(p, float(e), float(n)) for p, (e, n) in zip(points, offsets)]


# ----------------------------- world -----------------------------

def generate_world(config: WorldConfig) -> tuple[PoiDatabase, PopularityTable]:
    """Common POIs (clustered around hotspots) and heavy-tailed check-in counts."""
    rng = _rng(config, _WORLD)
    cats = config.categories
    hotspots = [_uniform_point(rng, config) for _ in range(config.n_hotspots)]

    pois: list[Poi] = []
    checkins: dict[str, int] = {}
    for i in range(config.n_pois):
        if rng.random() < config.hotspot_fraction:
            center = hotspots[int(rng.integers(len(hotspots)))]
            east, north = rng.normal(0.0, config.hotspot_sigma_m, size=2)
            lng, lat = _clip_to_area(config, offset_meters(center, float(east), float(north)))
        else:
            lng, lat = _uniform_point(rng, config)
        cat = cats[int(rng.integers(len(cats)))]
        poi = Poi(id=f"p{i:05d}", name=f"{cat.title()} #{i}", cat=cat, lng=lng, lat=lat)
        pois.append(poi)
        checkins[poi.id] = int(rng.pareto(1.2) * 10.0)

    logger.debug(f"🌍 World: {len(pois)} POIs in {len(cats)} categories around {len(hotspots)} hotspots")
    return PoiDatabase(pois), PopularityTable(checkins)


# ----------------------------- users -----------------------------

def generate_users(db: PoiDatabase, config: WorldConfig) -> tuple[list[SyntheticUser], PoiDatabase]:
    """Users with personal home/office POIs; returns them with the database extended by those POIs."""
    users: list[SyntheticUser] = []
    personal: list[Poi] = []
    cats = config.categories
    by_cat: dict[str, list[Poi]] = {c: [p for p in db if p.cat == c] for c in cats}

    for u in range(config.n_users):
        rng = _rng(config, _USER, u)
        uid = f"u{u + 1:02d}"
        home_at = _uniform_point(rng, config)
        office_at = _uniform_point(rng, config)
        for _ in range(100):
            if geo_distance(home_at, office_at) >= 4 * config.min_hop_meters:
                break
            office_at = _uniform_point(rng, config)
        home = Poi(id=f"{uid}-home", name=f"Home of {uid}", cat="home", lng=home_at[0], lat=home_at[1], source="personal")
        office = Poi(
            id=f"{uid}-office", name=f"Office of {uid}", cat="office", lng=office_at[0], lat=office_at[1], source="personal"
        )
        personal.extend([home, office])

        habits = []
        for _ in range(N_TIME_WINDOWS):
            prefs = rng.dirichlet(np.full(len(cats), 0.6))
            habits.append({c: float(w) for c, w in zip(cats, prefs)})

        # Favorites: a few POIs per category, preferring those near home.
        favorites: dict[str, tuple[str, ...]] = {}
        for c in cats:
            pool = [p for p in by_cat[c] if geo_distance(home_at, (p.lng, p.lat)) >= config.min_hop_meters]
            if not pool:
                continue
            dists = np.array([geo_distance(home_at, (p.lng, p.lat)) for p in pool])
            weights = np.exp(-dists / 1500.0)
            weights = weights / weights.sum()
            k = min(config.favorites_per_category, len(pool))
            picks = rng.choice(len(pool), size=k, replace=False, p=weights)
            favorites[c] = tuple(pool[int(x)].id for x in picks)

        users.append(
            SyntheticUser(
                id=uid,
                index=u,
                home=home,
                office=office,
                habits=tuple(habits),
                favorites=favorites,
                motifs=tuple(m for m in config.dependency_motifs if m.head in favorites and m.tail in favorites),
                works=bool(rng.random() < 0.8),
            )
        )
    return users, db.merged(personal)


# ----------------------------- days -----------------------------

def _stay_seconds(rng: np.random.Generator, config: WorldConfig, cat: str) -> int:
    median = DEFAULT_CATEGORY_STAY_MINUTES.get(cat, 20.0) * 60.0
    seconds = float(rng.lognormal(math.log(median), config.stay_sigma))
    seconds = max(seconds, float(config.min_visit_seconds))
    return int(math.ceil(seconds / config.sample_interval)) * config.sample_interval


def _plan_categories(rng: np.random.Generator, user: SyntheticUser, config: WorldConfig, depart: int) -> list[str]:
    """Ordered out-of-home categories for one day, motifs realized."""
    mean, var = config.visits_per_session
    n = max(1, int(round(rng.normal(mean, math.sqrt(var))))) if var > 0 else max(1, int(round(mean)))
    plan: list[str] = []
    pending: list[tuple[str, int]] = []  # (tail category, earliest position)
    clock = depart
    pos = 0
    while pos < n or pending:
        due = [x for x, (_, earliest) in enumerate(pending) if earliest <= pos]
        if due and (pos >= n - 1 or rng.random() < 0.5):
            cat = pending.pop(due[0])[0]
        else:
            w = time_window(clock, config.tz_offset_minutes)
            cats = [c for c in user.habits[w] if c in user.favorites]
            if not cats:
                break
            probs = np.array([user.habits[w][c] for c in cats])
            cat = cats[int(rng.choice(len(cats), p=probs / probs.sum()))]
            for motif in user.motifs:
                if cat == motif.head and rng.random() < motif.probability:
                    pending.append((motif.tail, pos + 2))
                    n = max(n, pos + 3)
        plan.append(cat)
        clock += _stay_seconds(rng, config, cat) + 600
        pos += 1
    if user.works and plan:
        plan.insert(len(plan) // 2, "office")
    return plan


def _pick_place(
    rng: np.random.Generator, db: PoiDatabase, user: SyntheticUser, cat: str, prev: LngLat, hop: float
) -> Poi | None:
    if cat == "office":
        return user.office if geo_distance(prev, (user.office.lng, user.office.lat)) >= hop else None
    far = [pid for pid in user.favorites.get(cat, ()) if geo_distance(prev, (db.get(pid).lng, db.get(pid).lat)) >= hop]
    if far:
        weights = np.array([1.0 / (1 + r) for r in range(len(far))])
        return db.get(far[int(rng.choice(len(far), p=weights / weights.sum()))])
    home = (user.home.lng, user.home.lat)
    others = sorted(
        (geo_distance(prev, (p.lng, p.lat)), p.id)
        for p in db
        if p.cat == cat and p.source == "common" and geo_distance(home, (p.lng, p.lat)) >= hop
    )
    others = [o for o in others if o[0] >= hop]
    return db.get(others[0][1]) if others else None


class _Trace:
    """Accumulates true positions and timestamps at a fixed sampling interval."""

    def __init__(self, start: int, interval: int, at: LngLat) -> None:
        self.interval = interval
        self.clock = start
        self.at = at
        self.positions: list[LngLat] = []
        self.times: list[int] = []

    def stay(self, seconds: int) -> tuple[int, int]:
        bt = self.clock
        for _ in range(max(1, seconds // self.interval + 1)):
            self.positions.append(self.at)
            self.times.append(self.clock)
            self.clock += self.interval
        return bt, self.times[-1]

    def walk(self, to: LngLat, speed: float, pause: tuple[float, int] | None = None) -> None:
        """Straight line to `to`; `pause` = (fraction of the leg, seconds) inserts a stop."""
        origin = self.at
        dist = geo_distance(origin, to)
        steps = max(1, int(math.ceil(dist / speed / self.interval)))
        paused = False
        for s in range(1, steps + 1):
            f = s / steps
            here = (origin[0] + (to[0] - origin[0]) * f, origin[1] + (to[1] - origin[1]) * f)
            self.positions.append(here)
            self.times.append(self.clock)
            self.clock += self.interval
            if pause is not None and not paused and f >= pause[0]:
                paused = True
                self.at = here
                self.stay(pause[1])
        self.at = to


def generate_user_days(
    db: PoiDatabase, user: SyntheticUser, config: WorldConfig
) -> list[tuple[Session, list[VisitRecord]]]:
    """One annotated day trace per session; annotations are the true visit intervals."""
    start_day = dt.date.fromisoformat(config.start_date)
    out = []
    for d in range(config.n_sessions):
        day = start_day + dt.timedelta(days=d)
        out.append(_generate_day(db, user, config, day, _rng(config, _DAY, user.index, d)))
    return out


def _generate_day(db: PoiDatabase, user: SyntheticUser, config: WorldConfig, day: dt.date, rng: np.random.Generator):
    lo, hi = day_bounds(day, config.tz_offset_minutes)
    depart = lo + int(rng.uniform(7 * 3600, 9 * 3600))
    padding = int(config.home_padding_minutes * 60)
    home_at = (user.home.lng, user.home.lat)
    interval = config.sample_interval

    plan = _plan_categories(rng, user, config, depart)
    trace = _Trace(depart - padding, interval, home_at)
    visits: list[VisitRecord] = []
    bt, et = trace.stay(padding)
    visits.append(VisitRecord(bt, et, user.home.id))

    places: list[tuple[Poi, LngLat]] = []
    prev = home_at
    for cat in plan:
        poi = _pick_place(rng, db, user, cat, prev, config.min_hop_meters)
        if poi is None:
            continue
        # Stand somewhere on the premises, within 15 m of the POI.
        angle, radius = rng.uniform(0, 2 * math.pi), rng.uniform(0, 15.0)
        spot = offset_meters((poi.lng, poi.lat), radius * math.cos(angle), radius * math.sin(angle))
        places.append((poi, spot))
        prev = (poi.lng, poi.lat)

    n_legs = len(places) + 1
    spurious_leg = -1
    if rng.random() < config.spurious_stop_rate:
        spurious_leg = int(rng.integers(n_legs))
    lo_min, hi_min = config.spurious_minutes

    def leg_pause(leg: int) -> tuple[float, int] | None:
        if leg != spurious_leg:
            return None
        return (float(rng.uniform(0.3, 0.7)), int(rng.uniform(lo_min, hi_min) * 60))

    latest = hi - padding - 3 * 3600
    for leg, (poi, spot) in enumerate(places):
        if trace.clock > latest:
            break
        trace.walk(spot, config.walk_speed, leg_pause(leg))
        bt, et = trace.stay(_stay_seconds(rng, config, poi.cat))
        visits.append(VisitRecord(bt, et, poi.id))

    trace.walk(home_at, config.walk_speed, leg_pause(n_legs - 1))
    remaining = hi - trace.clock
    bt, et = trace.stay(min(padding, max(0, remaining - interval)))
    if et - bt >= config.visit_floor:
        visits.append(VisitRecord(bt, et, user.home.id))

    noisy = perturb(rng, trace.positions, config.gps_noise_sigma)
    points = [TrackPoint(lng=p[0], lat=p[1], ts=t) for p, t in zip(noisy, trace.times) if t <= hi]
    session = build_session(
        points, day, session_id=f"{user.id}_{day.isoformat()}", tz_offset_minutes=config.tz_offset_minutes
    )
    return session, visits


# ----------------------------- corpus -----------------------------

class CorpusGenerator:
    """World, users and every user's days under one WorldConfig.

    Construct with:
        CorpusGenerator(logger=logger, config=WorldConfig(seed=7, n_users=3))
    """

    def __init__(self, *, logger: logging.Logger, config: WorldConfig) -> None:
        self.logger = logger
        self.config = config

    def generate(self) -> SyntheticCorpus:
        cfg = self.config
        self.logger.info(f"🚀 Generating {cfg.n_users} user(s) × {cfg.n_sessions} session(s) (seed {cfg.seed})...")
        world, popularity = generate_world(cfg)
        users, db = generate_users(world, cfg)
        corpus = SyntheticCorpus(db=db, popularity=popularity, users=users)
        for user in users:
            days = generate_user_days(db, user, cfg)
            corpus.sessions[user.id] = [
                AnnotatedSession(session=s, visits=tuple(v), user_id=user.id) for s, v in days
            ]
            n_visits = sum(len(v) for _, v in days)
            self.logger.debug(f"👤 {user.id}: {len(days)} session(s), {n_visits} annotated visit(s)")
        self.logger.info(f"✅ Generated {len(db)} POIs and {sum(len(s) for s in corpus.sessions.values())} sessions.")
        return corpus


def export_corpus(
    corpus: SyntheticCorpus,
    out_dir: str | Path,
    config: WorldConfig,
    *,
    logger: logging.Logger | None = None,
) -> dict[str, Any]:
    """Write POI, popularity, trajectory and annotation files plus manifest.json.

    Raises:
        IoError: the directory or a file cannot be written.
    """
    from .data_loader import DataLoader

    loader = DataLoader(logger or logging.getLogger(__name__))
    root = Path(out_dir)
    files: list[str] = []

    loader.write_pois(root / "pois.json", list(corpus.db))
    files.append("pois.json")
    loader.write_popularity(root / "popularity.json", corpus.popularity)
    files.append("popularity.json")
    for user_id, sessions in corpus.sessions.items():
        for ann in sessions:
            rel = f"trajectories/{ann.id}.jsonl"
            loader.write_trajectory(root / rel, ann.session)
            files.append(rel)
        rel = f"annotations/{user_id}.json"
        loader.write_annotations(root / rel, sessions)
        files.append(rel)

    manifest = {
        "seed": config.seed,
        "config": config.to_dict(),
        "users": [u.id for u in corpus.users],
        "files": sorted(files),
    }
    loader.write_json(root / "manifest.json", manifest)
    return manifest


__all__ = [
    "CorpusGenerator",
    "DependencyMotif",
    "SyntheticCorpus",
    "SyntheticUser",
    "WorldConfig",
    "export_corpus",
    "generate_user_days",
    "generate_users",
    "generate_world",
    "perturb",
]

