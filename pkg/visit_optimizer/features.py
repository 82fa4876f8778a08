"""Per-user feature training and the feature vectors of the joint objective.

Stay times enter every feature in minutes. Time windows split the local day
into four six-hour windows under the configured fixed UTC offset.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np
from scipy import stats

from .defaults import N_TIME_WINDOWS
from .errors import EmptyTraining, InvalidConfig
from .geo import PoiDatabase, geo_distances, radius_query
from .models import AnnotatedSession, CandidateSet, FeatureParams, Poi, StayPoint, VisitRecord
from .utils import time_window

logger = logging.getLogger(__name__)


# ----------------------------- trained statistics -----------------------------

@dataclass(slots=True, frozen=True)
class FeatureBank:
    """Everything learned from one user's annotated sessions.

    Attributes:
        sig_centers: (lng, lat) centers of the annotated significant locations.
        f_poi, f_cat: Visit frequencies per POI id / category (sum to 1).
        f_poi_time, f_cat_time: Same, per six-hour window of the visit's begin time.
        lognorm: Category -> (nu, tau): mean and variance of ln(stay minutes).
        cat_out: num(c): transitions leaving category c.
        transitions: num(c -> d).
        session_cats: Categories visited in each training session.
        mu_y, sigma2_y: Mean and (1/n) variance of visits per session.
        categories: The category universe C.
        lam: Exponential rate when estimated from data, else None.
    """

    sig_centers: tuple[tuple[float, float], ...]
    f_poi: dict[str, float]
    f_poi_time: tuple[dict[str, float], ...]
    f_cat: dict[str, float]
    f_cat_time: tuple[dict[str, float], ...]
    lognorm: dict[str, tuple[float, float]]
    cat_out: dict[str, int]
    transitions: dict[str, dict[str, int]]
    session_cats: tuple[frozenset[str], ...]
    mu_y: float
    sigma2_y: float
    categories: tuple[str, ...]
    lam: float | None = None
    _center_lngs: np.ndarray = field(init=False, repr=False, compare=False)
    _center_lats: np.ndarray = field(init=False, repr=False, compare=False)
    _cat_sessions: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_center_lngs", np.array([c[0] for c in self.sig_centers], dtype=float))
        object.__setattr__(self, "_center_lats", np.array([c[1] for c in self.sig_centers], dtype=float))
        per_cat: Counter[str] = Counter()
        for cats in self.session_cats:
            per_cat.update(cats)
        object.__setattr__(self, "_cat_sessions", dict(per_cat))

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    def sessions_with(self, cat: str) -> int:
        return self._cat_sessions.get(cat, 0)

    def sessions_with_both(self, a: str, b: str) -> int:
        return sum(1 for cats in self.session_cats if a in cats and b in cats)

    def nearest_center_distance(self, lng: float, lat: float) -> float:
        if not self.sig_centers:
            return math.inf
        return float(np.min(geo_distances((lng, lat), self._center_lngs, self._center_lats)))

    # -------- JSON --------
    def to_dict(self) -> dict[str, Any]:
        return {
            "sig_centers": [list(c) for c in self.sig_centers],
            "f_poi": self.f_poi,
            "f_poi_time": list(self.f_poi_time),
            "f_cat": self.f_cat,
            "f_cat_time": list(self.f_cat_time),
            "lognorm": {c: list(v) for c, v in self.lognorm.items()},
            "cat_out": self.cat_out,
            "transitions": self.transitions,
            "session_cats": [sorted(s) for s in self.session_cats],
            "mu_y": self.mu_y,
            "sigma2_y": self.sigma2_y,
            "categories": list(self.categories),
            "lam": self.lam,
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "FeatureBank":
        return cls(
            sig_centers=tuple((float(a), float(b)) for a, b in raw["sig_centers"]),
            f_poi={str(k): float(v) for k, v in raw["f_poi"].items()},
            f_poi_time=tuple({str(k): float(v) for k, v in w.items()} for w in raw["f_poi_time"]),
            f_cat={str(k): float(v) for k, v in raw["f_cat"].items()},
            f_cat_time=tuple({str(k): float(v) for k, v in w.items()} for w in raw["f_cat_time"]),
            lognorm={str(c): (float(v[0]), float(v[1])) for c, v in raw["lognorm"].items()},
            cat_out={str(k): int(v) for k, v in raw["cat_out"].items()},
            transitions={
                str(a): {str(b): int(n) for b, n in row.items()} for a, row in raw["transitions"].items()
            },
            session_cats=tuple(frozenset(s) for s in raw["session_cats"]),
            mu_y=float(raw["mu_y"]),
            sigma2_y=float(raw["sigma2_y"]),
            categories=tuple(raw["categories"]),
            lam=None if raw.get("lam") is None else float(raw["lam"]),
        )


def _normalized(counts: Counter[str]) -> dict[str, float]:
    total = sum(counts.values())
    if total == 0:
        return {}
    return {k: v / total for k, v in sorted(counts.items())}


def visit_centers(
    ann: AnnotatedSession, db: PoiDatabase, visits: Sequence[VisitRecord] | None = None
) -> list[tuple[float, float]]:
    """True center of each visit: mean of the session points inside [bt, et], else the POI.

    Raises:
        InvalidConfig: a visit references a POI missing from `db`.
    """
    pts = ann.session.points
    ts = np.fromiter((p.ts for p in pts), dtype=np.int64, count=len(pts))
    out: list[tuple[float, float]] = []
    for v in ann.visits if visits is None else visits:
        if v.poi_id not in db:
            raise InvalidConfig(f"visit in {ann.id} references unknown POI {v.poi_id!r}")
        lo, hi = np.searchsorted(ts, v.bt, "left"), np.searchsorted(ts, v.et, "right")
        if hi > lo:
            members = pts[lo:hi]
            out.append(
                (
                    math.fsum(p.lng for p in members) / len(members),
                    math.fsum(p.lat for p in members) / len(members),
                )
            )
        else:
            poi = db.get(v.poi_id)
            out.append((poi.lng, poi.lat))
    return out


def train_feature_bank(
    annotated_sessions: Sequence[AnnotatedSession],
    db: PoiDatabase,
    params: FeatureParams = FeatureParams(),
) -> FeatureBank:
    """Train every per-user statistic from annotated sessions.

    Raises:
        EmptyTraining: no annotated sessions were given.
        InvalidConfig: a visit references a POI missing from `db`.
    """
    if not annotated_sessions:
        raise EmptyTraining("cannot train features without annotated sessions")

    centers: list[tuple[float, float]] = []
    poi_counts: Counter[str] = Counter()
    cat_counts: Counter[str] = Counter()
    poi_time: list[Counter[str]] = [Counter() for _ in range(N_TIME_WINDOWS)]
    cat_time: list[Counter[str]] = [Counter() for _ in range(N_TIME_WINDOWS)]
    log_stays: dict[str, list[float]] = defaultdict(list)
    stay_minutes: list[float] = []
    cat_out: Counter[str] = Counter()
    transitions: dict[str, Counter[str]] = defaultdict(Counter)
    session_cats: list[frozenset[str]] = []
    visits_per_session: list[int] = []

    for ann in annotated_sessions:
        visits = sorted(ann.visits, key=lambda v: (v.bt, v.et))
        cats_seq: list[str] = []
        for v, center in zip(visits, visit_centers(ann, db, visits)):
            poi = db.get(v.poi_id)
            centers.append(center)

            w = time_window(v.bt, params.tz_offset_minutes)
            poi_counts[poi.id] += 1
            cat_counts[poi.cat] += 1
            poi_time[w][poi.id] += 1
            cat_time[w][poi.cat] += 1
            minutes = (v.et - v.bt) / 60.0
            stay_minutes.append(minutes)
            log_stays[poi.cat].append(math.log(minutes))
            cats_seq.append(poi.cat)

        for a, ca in enumerate(cats_seq):
            later = cats_seq[a + 1 : a + 2] if params.transition_scope == "next" else cats_seq[a + 1 :]
            for cb in later:
                transitions[ca][cb] += 1
                cat_out[ca] += 1
        session_cats.append(frozenset(cats_seq))
        visits_per_session.append(len(visits))

    lognorm: dict[str, tuple[float, float]] = {}
    for cat, logs in sorted(log_stays.items()):
        arr = np.asarray(logs, dtype=float)
        nu = float(np.mean(arr))
        tau = float(np.mean((arr - nu) ** 2))
        lognorm[cat] = (nu, tau)

    counts_arr = np.asarray(visits_per_session, dtype=float)
    lam = None
    if params.estimate_lambda and stay_minutes:
        lam = 1.0 / float(np.mean(stay_minutes))

    categories = tuple(sorted(set(db.categories()) | set(cat_counts)))
    bank = FeatureBank(
        sig_centers=tuple(centers),
        f_poi=_normalized(poi_counts),
        f_poi_time=tuple(_normalized(c) for c in poi_time),
        f_cat=_normalized(cat_counts),
        f_cat_time=tuple(_normalized(c) for c in cat_time),
        lognorm=lognorm,
        cat_out=dict(sorted(cat_out.items())),
        transitions={a: dict(sorted(row.items())) for a, row in sorted(transitions.items())},
        session_cats=tuple(session_cats),
        mu_y=float(np.mean(counts_arr)),
        sigma2_y=float(np.var(counts_arr)),
        categories=categories,
        lam=lam,
    )
    logger.debug(
        f"🧠 Trained features on {len(annotated_sessions)} session(s): {sum(poi_counts.values())} visits, "
        f"{len(lognorm)} categories with stay-time fits, μ_y={bank.mu_y:.2f}, σ²_y={bank.sigma2_y:.2f}"
    )
    return bank


# ----------------------------- single feature vectors -----------------------------

def stay_point_features(
    bank: FeatureBank, params: FeatureParams, sp: StayPoint
) -> tuple[tuple[float, float], tuple[float, float]]:
    """(x_s, x_sbar): nearest trained center Gaussian and exponential stay-time CDF."""
    d = bank.nearest_center_distance(sp.lng, sp.lat)
    x0 = 0.0 if math.isinf(d) else math.exp(-params.gamma * d * d)
    lam = bank.lam if bank.lam is not None else params.lam
    x1 = 1.0 - math.exp(-lam * sp.st / 60.0)
    return (x0, x1), (1.0 - x0, 1.0 - x1)


def lognormal_density(bank: FeatureBank, params: FeatureParams, cat: str, st_seconds: float) -> float:
    """Log-normal stay-time density of category `cat` at `st_seconds` (in minutes)."""
    fit = bank.lognorm.get(cat)
    if fit is None:
        return params.unseen_lognorm_density
    minutes = st_seconds / 60.0
    if minutes <= 0.0:
        return 0.0
    nu, tau = fit
    if tau <= 0.0:
        tau = params.lognorm_tau_floor
    return float(stats.lognorm.pdf(minutes, s=math.sqrt(tau), scale=math.exp(nu)))


def stay_poi_features(
    bank: FeatureBank, params: FeatureParams, sp: StayPoint, poi: Poi
) -> tuple[float, float, float]:
    """x_v: interpolated POI frequency, interpolated category frequency, stay-time density."""
    w = time_window(sp.bt, params.tz_offset_minutes)
    x0 = params.alpha1 * bank.f_poi_time[w].get(poi.id, 0.0) + (1.0 - params.alpha1) * bank.f_poi.get(
        poi.id, 0.0
    )
    x1 = params.alpha2 * bank.f_cat_time[w].get(poi.cat, 0.0) + (1.0 - params.alpha2) * bank.f_cat.get(
        poi.cat, 0.0
    )
    return (x0, x1, lognormal_density(bank, params, poi.cat, sp.st))


def category_pair_features(bank: FeatureBank, params: FeatureParams, ck: str, cl: str) -> tuple[float, float]:
    """Smoothed transition probability P(cl | ck) and the session co-occurrence ratio."""
    n_cats = max(1, bank.n_categories)
    num_kl = bank.transitions.get(ck, {}).get(cl, 0)
    x0 = (num_kl + params.beta) / (bank.cat_out.get(ck, 0) + params.beta * n_cats)

    both = bank.sessions_with_both(ck, cl)
    denom = bank.sessions_with(ck) + bank.sessions_with(cl)
    if params.jaccard_union:
        denom -= both
    x1 = both / denom if denom > 0 else 0.0
    return (x0, x1)


def poi_pair_features(bank: FeatureBank, params: FeatureParams, k: Poi, l: Poi) -> tuple[float, float]:
    """x_t for a visit to `k` followed (not necessarily immediately) by one to `l`."""
    return category_pair_features(bank, params, k.cat, l.cat)


def length_feature(bank: FeatureBank, m: int) -> float:
    """Gaussian density of the number of visits m; point mass when the variance is 0."""
    if m < 0:
        raise ValueError(f"sequence length must be non-negative, got {m}")
    if bank.sigma2_y <= 0.0:
        return 1.0 if m == math.floor(bank.mu_y + 0.5) else 0.0
    return float(stats.norm.pdf(m, loc=bank.mu_y, scale=math.sqrt(bank.sigma2_y)))


def candidate_hits(db: PoiDatabase, sp: StayPoint, params: FeatureParams) -> list[tuple[Poi, float]]:
    """(POI, meters) within the candidate radius, nearest `max_candidates` kept."""
    return radius_query(db, (sp.lng, sp.lat), params.candidate_radius)[: params.max_candidates]


def candidate_pois(db: PoiDatabase, sp: StayPoint, params: FeatureParams) -> list[Poi]:
    return [poi for poi, _ in candidate_hits(db, sp, params)]


# ----------------------------- whole-session feature arrays -----------------------------

@dataclass(slots=True, frozen=True)
class FeatureVectors:
    """Every feature of one candidate set, ready to be weighted.

    Attributes:
        candidates: Per stay-point, (POI, meters) candidates nearest first.
        x_s, x_sbar: Arrays of shape (n, 2).
        x_v: Per stay-point array of shape (K_i, 3).
        x_t: (i, j) -> array (K_i, K_j, 2), for i before j and non-overlapping,
            only when both have candidates.
        x_y: Array of shape (n + 1,), the length feature for m = 0..n.
        cat_ids: Per stay-point, the local category index of each candidate;
            every x_t block is a category-pair table indexed by these.
    """

    candidate_set: CandidateSet
    candidates: tuple[tuple[tuple[Poi, float], ...], ...]
    x_s: np.ndarray
    x_sbar: np.ndarray
    x_v: tuple[np.ndarray, ...]
    x_t: dict[tuple[int, int], np.ndarray]
    x_y: np.ndarray
    cat_ids: tuple[np.ndarray, ...] = ()

    @property
    def n_sp(self) -> int:
        return len(self.candidate_set.stay_points)


def compute_feature_vectors(
    candidate_set: CandidateSet,
    bank: FeatureBank,
    params: FeatureParams,
    db: PoiDatabase,
) -> FeatureVectors:
    """Create x^(s), x^(sbar), x^(v) per stay-point/candidate, then x^(t) and x^(y)."""
    sps = candidate_set.stay_points
    n = len(sps)
    x_s = np.zeros((n, 2))
    x_sbar = np.zeros((n, 2))
    x_v: list[np.ndarray] = []
    candidates: list[tuple[tuple[Poi, float], ...]] = []

    for i, sp in enumerate(sps):
        xs, xsbar = stay_point_features(bank, params, sp)
        x_s[i] = xs
        x_sbar[i] = xsbar
        hits = tuple(candidate_hits(db, sp, params))
        candidates.append(hits)
        x_v.append(
            np.array([stay_poi_features(bank, params, sp, poi) for poi, _ in hits], dtype=float).reshape(
                len(hits), 3
            )
        )

    # Category-level pair table over the categories that actually occur.
    local_cats = sorted({poi.cat for hits in candidates for poi, _ in hits})
    cat_index = {c: a for a, c in enumerate(local_cats)}
    table = np.zeros((len(local_cats), len(local_cats), 2))
    for a, ca in enumerate(local_cats):
        for b, cb in enumerate(local_cats):
            table[a, b] = category_pair_features(bank, params, ca, cb)
    cat_ids = [np.array([cat_index[poi.cat] for poi, _ in hits], dtype=int) for hits in candidates]

    x_t: dict[tuple[int, int], np.ndarray] = {}
    overlapping = candidate_set.overlap_pairs
    for i in range(n):
        if not candidates[i]:
            continue
        for j in range(i + 1, n):
            if not candidates[j] or (i, j) in overlapping:
                continue
            x_t[(i, j)] = table[cat_ids[i][:, None], cat_ids[j][None, :]]

    x_y = np.array([length_feature(bank, m) for m in range(n + 1)], dtype=float)
    return FeatureVectors(
        candidate_set=candidate_set,
        candidates=tuple(candidates),
        x_s=x_s,
        x_sbar=x_sbar,
        x_v=tuple(x_v),
        x_t=x_t,
        x_y=x_y,
        cat_ids=tuple(cat_ids),
    )


def pooled_sessions(groups: Iterable[Sequence[AnnotatedSession]]) -> list[AnnotatedSession]:
    """Concatenate several users' sessions (mixed-setting training)."""
    return [s for group in groups for s in group]
