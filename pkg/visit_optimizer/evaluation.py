"""Metrics and experiment drivers.

- match_and_score / score_extraction: per-session confusions.
- grid_search_weights: training-set F1 over the weight grid.
- run_cross_validation / run_mixed / run_sequential: per-user reports.
- sweep_extraction: extraction thresholds against annotated visits.
- time_solver: mean solve time per stay-point count.
"""

from __future__ import annotations

import concurrent.futures
import logging
import math
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import psutil

from .defaults import (
    MATCH_CENTER_METERS,
    SEQUENTIAL_WARMUP_SESSIONS,
    SWEEP_THETA_DIST,
    SWEEP_THETA_TIME,
    WEIGHT_DIMS,
)
from .errors import EmptyTraining, InvalidConfig, TooFewSessions
from .features import FeatureBank, FeatureVectors, compute_feature_vectors, train_feature_bank, visit_centers
from .geo import PoiDatabase, geo_distance
from .models import (
    AnnotatedSession,
    ExtractionParams,
    FeatureParams,
    PopularityTable,
    RunConfig,
    Solution,
    StayPoint,
    VisitRecord,
    WeightVector,
    weight_grid,
)
from .pipeline import SessionAssigner
from .solvers import get_solver, problem_from_features
from .staypoint import extract_candidates, extract_stay_points
from .utils import stable_hash

logger = logging.getLogger(__name__)


# ----------------------------- confusions -----------------------------

@dataclass(slots=True, frozen=True)
class Confusion:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError(f"confusion counts must be non-negative: {self}")

    def __add__(self, other: "Confusion") -> "Confusion":
        return Confusion(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else 0.0

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 0.0

    @property
    def f1(self) -> float:
        denom = 2 * self.tp + self.fp + self.fn
        return 2 * self.tp / denom if denom else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def total(confusions: Sequence[Confusion]) -> Confusion:
    out = Confusion()
    for c in confusions:
        out = out + c
    return out


def match_and_score(predicted: Solution, truth: Sequence[VisitRecord]) -> Confusion:
    """Score predicted visits against one session's annotations.

    A prediction matches the annotation whose [bt, et] contains its middle
    timestamp. Matched with the right POI is a TP; wrong POI, no match, or an
    annotation already claimed by an earlier prediction is an FP. Annotations
    matched by nothing are FNs.
    """
    ordered_truth = sorted(truth, key=lambda v: (v.bt, v.et, v.poi_id))
    claimed = [False] * len(ordered_truth)
    tp = fp = 0
    for pred in sorted(predicted.visits, key=lambda v: (v.mid_ts, v.bt, v.et, v.poi_id)):
        mid = pred.mid_ts
        hit = next((x for x, v in enumerate(ordered_truth) if v.bt <= mid <= v.et), None)
        if hit is None or claimed[hit]:
            fp += 1
            continue
        claimed[hit] = True
        if ordered_truth[hit].poi_id == pred.poi_id:
            tp += 1
        else:
            fp += 1
    return Confusion(tp=tp, fp=fp, fn=claimed.count(False))


def score_extraction(
    stay_points: Sequence[StayPoint],
    truth: Sequence[VisitRecord],
    truth_centers: Sequence[tuple[float, float]],
    *,
    max_center_m: float = MATCH_CENTER_METERS,
) -> Confusion:
    """TP_sp when a stay-point contains an annotated midpoint and lies within `max_center_m` of its center."""
    if len(truth) != len(truth_centers):
        raise ValueError("truth and truth_centers must be aligned")
    claimed = [False] * len(truth)
    tp = fp = 0
    for sp in sorted(stay_points, key=lambda s: (s.bt, s.et)):
        hit = None
        for x, v in enumerate(truth):
            if claimed[x] or not (sp.bt <= v.mid_ts <= sp.et):
                continue
            if geo_distance((sp.lng, sp.lat), truth_centers[x]) <= max_center_m:
                hit = x
                break
        if hit is None:
            fp += 1
        else:
            claimed[hit] = True
            tp += 1
    return Confusion(tp=tp, fp=fp, fn=claimed.count(False))


# ----------------------------- reports -----------------------------

@dataclass(slots=True, frozen=True)
class SessionScore:
    session_id: str
    confusion: Confusion
    seconds: float = 0.0
    n_sp: int = 0


@dataclass(slots=True, frozen=True)
class EvalReport:
    """One user × method result.

    Micro figures pool the confusions of every evaluated session; macro F1 is
    the mean of per-session F1.
    """

    user_id: str
    method: str
    mode: str
    sessions: tuple[SessionScore, ...] = ()
    skipped: str | None = None

    @property
    def confusion(self) -> Confusion:
        return total([s.confusion for s in self.sessions])

    @property
    def precision(self) -> float:
        return self.confusion.precision

    @property
    def recall(self) -> float:
        return self.confusion.recall

    @property
    def f1(self) -> float:
        return self.confusion.f1

    @property
    def macro_f1(self) -> float:
        if not self.sessions:
            return 0.0
        return math.fsum(s.confusion.f1 for s in self.sessions) / len(self.sessions)

    @property
    def mean_seconds(self) -> float:
        if not self.sessions:
            return 0.0
        return math.fsum(s.seconds for s in self.sessions) / len(self.sessions)

    def to_dict(self, *, include_timing: bool = True) -> dict[str, Any]:
        out: dict[str, Any] = {
            "user": self.user_id,
            "method": self.method,
            "mode": self.mode,
            "skipped": self.skipped,
            "micro": self.confusion.to_dict(),
            "macro_f1": self.macro_f1,
            "sessions": [
                {"id": s.session_id, "n_sp": s.n_sp, **s.confusion.to_dict()}
                | ({"seconds": s.seconds} if include_timing else {})
                for s in self.sessions
            ],
        }
        if include_timing:
            out["mean_seconds"] = self.mean_seconds
        return out


@dataclass(slots=True, frozen=True)
class CorpusSummary:
    """Per-method corpus figures: micro pools every user, macro averages per-user F1."""

    method: str
    mode: str
    users: int
    skipped: int
    confusion: Confusion
    macro_f1: float

    @property
    def micro_f1(self) -> float:
        return self.confusion.f1

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "mode": self.mode,
            "users": self.users,
            "skipped": self.skipped,
            "micro": self.confusion.to_dict(),
            "macro_f1": self.macro_f1,
        }


def aggregate_reports(reports: Sequence[EvalReport]) -> list[CorpusSummary]:
    """Merge per-user reports by (method, mode), in first-seen order."""
    groups: dict[tuple[str, str], list[EvalReport]] = defaultdict(list)
    for r in reports:
        groups[(r.method, r.mode)].append(r)
    out = []
    for (method, mode), group in groups.items():
        done = [r for r in group if r.skipped is None]
        macro = math.fsum(r.f1 for r in done) / len(done) if done else 0.0
        out.append(
            CorpusSummary(
                method=method,
                mode=mode,
                users=len(done),
                skipped=len(group) - len(done),
                confusion=total([r.confusion for r in done]),
                macro_f1=macro,
            )
        )
    return out


# ----------------------------- weight search -----------------------------

@dataclass(slots=True, frozen=True)
class GridSearchResult:
    weights: WeightVector
    f1: float
    evaluations: int


def _score_weights(
    prepared: Sequence[tuple[FeatureVectors, tuple[VisitRecord, ...]]],
    flat: tuple[float, ...],
    backend: str,
) -> Confusion:
    solver = get_solver(backend)
    weights = WeightVector.from_flat(flat)
    conf = Confusion()
    for fv, visits in prepared:
        conf = conf + match_and_score(solver.solve(problem_from_features(fv, weights)), visits)
    return conf


def _score_weight_batch(batch: list[tuple[float, ...]], ctx: dict[str, Any]) -> list[tuple[int, Confusion]]:
    """Worker: score a batch of (grid position, flat weights) pairs."""
    return [(pos, _score_weights(ctx["prepared"], flat, ctx["backend"])) for pos, flat in batch]


def grid_search(
    train: Sequence[AnnotatedSession],
    db: PoiDatabase,
    params: FeatureParams,
    param_sets: Sequence[ExtractionParams],
    candidate_grid: Sequence[float],
    backend: str,
    *,
    bank: FeatureBank | None = None,
    n_jobs: int = 1,
    batch_size: int = 64,
    log: logging.Logger | None = None,
) -> GridSearchResult:
    """Pick the weight vector with the highest training micro-F1.

    Vectors are tried in lexicographic order of ascending grid values and
    replace the incumbent only when strictly better.
    """
    log = log or logger
    if not train:
        raise EmptyTraining("grid search needs at least one training session")
    values = sorted(set(float(v) for v in candidate_grid))
    if not values:
        raise InvalidConfig("empty weight grid")
    if len(values) == 1:
        return GridSearchResult(WeightVector.from_flat([values[0]] * sum(WEIGHT_DIMS.values())), float("nan"), 0)

    bank = bank or train_feature_bank(train, db, params)
    prepared = [
        (compute_feature_vectors(extract_candidates(ann.session, param_sets), bank, params, db), ann.visits)
        for ann in train
    ]
    grid = [(pos, w.flat()) for pos, w in enumerate(weight_grid(values))]

    scored: list[Confusion | None] = [None] * len(grid)
    if n_jobs > 1 and len(grid) > batch_size:
        batches = [grid[i : i + batch_size] for i in range(0, len(grid), batch_size)]
        ctx = {"prepared": prepared, "backend": backend}
        with ProcessPoolExecutor(max_workers=n_jobs) as executor:
            futures = [executor.submit(_score_weight_batch, batch, ctx) for batch in batches]
            for fut in concurrent.futures.as_completed(futures):
                for pos, conf in fut.result():
                    scored[pos] = conf
    else:
        for pos, flat in grid:
            scored[pos] = _score_weights(prepared, flat, backend)

    best_pos, best_f1 = 0, float("-inf")
    for pos, conf in enumerate(scored):
        assert conf is not None
        if conf.f1 > best_f1:
            best_pos, best_f1 = pos, conf.f1
    best = WeightVector.from_flat(grid[best_pos][1])
    log.debug(f"🔍 Grid search: {len(grid):,} vectors on {len(train)} session(s), best F1={best_f1:.4f}")
    return GridSearchResult(best, best_f1, len(grid))


def grid_search_weights(
    train: Sequence[AnnotatedSession],
    candidate_grid: Sequence[float],
    backend: str,
    *,
    db: PoiDatabase,
    params: FeatureParams = FeatureParams(),
    param_sets: Sequence[ExtractionParams] = (ExtractionParams(),),
    bank: FeatureBank | None = None,
    n_jobs: int = 1,
) -> WeightVector:
    return grid_search(
        train, db, params, param_sets, candidate_grid, backend, bank=bank, n_jobs=n_jobs
    ).weights


# ----------------------------- model fitting -----------------------------

def fit_assigner(
    train: Sequence[AnnotatedSession],
    db: PoiDatabase,
    config: RunConfig,
    *,
    method: str,
    popularity: PopularityTable | None = None,
    weights: WeightVector | None = None,
    log: logging.Logger | None = None,
) -> SessionAssigner:
    """Train whatever `method` needs on `train` and return a ready assigner.

    Fixed `weights` skip the grid search.
    """
    log = log or logger
    common: dict[str, Any] = dict(
        logger=log,
        db=db,
        params=config.features,
        param_sets=config.param_sets,
        method=method,
        backend=config.backend,
        popularity=popularity,
        overlap_policy=config.overlap_policy,
    )
    if method in ("nn", "nci"):
        return SessionAssigner(**common)

    bank = train_feature_bank(train, db, config.features)
    if weights is None:
        backend = "chain" if method == "chain" else config.backend
        weights = grid_search(
            train,
            db,
            config.features,
            config.param_sets,
            config.grid,
            backend,
            bank=bank,
            n_jobs=config.n_jobs,
            log=log,
        ).weights
    return SessionAssigner(bank=bank, weights=weights, **common)


def _evaluate_sessions(assigner: SessionAssigner, sessions: Sequence[AnnotatedSession]) -> list[SessionScore]:
    out = []
    for ann in sessions:
        result = assigner.assign(ann.session)
        out.append(
            SessionScore(
                session_id=ann.id,
                confusion=match_and_score(result.solution, ann.visits),
                seconds=result.seconds,
                n_sp=result.n_sp,
            )
        )
    return out


# ----------------------------- drivers -----------------------------

def fold_assignment(session_ids: Sequence[str], folds: int, seed: int) -> list[int]:
    """Fold index per session: order by seeded hash, then deal round-robin."""
    order = sorted(range(len(session_ids)), key=lambda x: (stable_hash(seed, session_ids[x]), session_ids[x]))
    out = [0] * len(session_ids)
    for pos, x in enumerate(order):
        out[x] = pos % folds
    return out


def run_cross_validation(
    user_data: Sequence[AnnotatedSession],
    folds: int,
    config: RunConfig,
    *,
    db: PoiDatabase,
    method: str = "je",
    popularity: PopularityTable | None = None,
    weights: WeightVector | None = None,
    extra_training: Sequence[AnnotatedSession] = (),
    user_id: str = "",
    log: logging.Logger | None = None,
) -> EvalReport:
    """Session-level k-fold cross-validation for one user.

    `extra_training` (other users' sessions) is added to every training split.

    Raises:
        InvalidConfig: folds < 2.
        TooFewSessions: fewer sessions than folds.
    """
    log = log or logger
    if folds < 2:
        raise InvalidConfig(f"folds must be >= 2, got {folds}")
    if len(user_data) < folds:
        raise TooFewSessions(f"{len(user_data)} session(s) cannot fill {folds} folds")

    assignment = fold_assignment([a.id for a in user_data], folds, config.seed)
    scores: dict[int, SessionScore] = {}
    for fold in range(folds):
        test_idx = [x for x, f in enumerate(assignment) if f == fold]
        train = [a for x, a in enumerate(user_data) if assignment[x] != fold] + list(extra_training)
        assigner = fit_assigner(train, db, config, method=method, popularity=popularity, weights=weights, log=log)
        for x, score in zip(test_idx, _evaluate_sessions(assigner, [user_data[x] for x in test_idx])):
            scores[x] = score
        log.debug(f"📊 {user_id or 'user'} fold {fold + 1}/{folds}: {len(test_idx)} test session(s)")

    mode = "cv-mixed" if extra_training else "cv"
    return EvalReport(
        user_id=user_id, method=method, mode=mode, sessions=tuple(scores[x] for x in sorted(scores))
    )


def run_mixed(
    users: Mapping[str, Sequence[AnnotatedSession]],
    folds: int,
    config: RunConfig,
    *,
    db: PoiDatabase,
    method: str = "je",
    popularity: PopularityTable | None = None,
    weights: WeightVector | None = None,
    log: logging.Logger | None = None,
) -> dict[str, EvalReport]:
    """Cross-validation where each user's training splits also hold every other user's sessions."""
    log = log or logger
    out: dict[str, EvalReport] = {}
    for user_id, sessions in users.items():
        others = [a for other, group in users.items() if other != user_id for a in group]
        try:
            out[user_id] = run_cross_validation(
                sessions,
                folds,
                config,
                db=db,
                method=method,
                popularity=popularity,
                weights=weights,
                extra_training=others,
                user_id=user_id,
                log=log,
            )
        except TooFewSessions as exc:
            log.warning(f"⚠️ Skipping {user_id}: {exc}")
            out[user_id] = EvalReport(user_id=user_id, method=method, mode="cv-mixed", skipped=str(exc))
    return out


def run_sequential(
    user_data: Sequence[AnnotatedSession],
    config: RunConfig,
    *,
    db: PoiDatabase,
    method: str = "je",
    popularity: PopularityTable | None = None,
    weights: WeightVector | None = None,
    warmup: int = SEQUENTIAL_WARMUP_SESSIONS,
    user_id: str = "",
    log: logging.Logger | None = None,
) -> EvalReport:
    """Train on the first `warmup` days, then evaluate each next day and fold it into training.

    Raises:
        TooFewSessions: fewer than warmup + 1 sessions.
    """
    log = log or logger
    if len(user_data) < warmup + 1:
        raise TooFewSessions(f"sequential evaluation needs at least {warmup + 1} sessions, got {len(user_data)}")
    ordered = sorted(user_data, key=lambda a: (a.session.day is None, a.session.day or 0, a.id))

    scores: list[SessionScore] = []
    for x in range(warmup, len(ordered)):
        assigner = fit_assigner(ordered[:x], db, config, method=method, popularity=popularity, weights=weights, log=log)
        scores.extend(_evaluate_sessions(assigner, [ordered[x]]))
    log.debug(f"📊 {user_id or 'user'}: {len(scores)} sequential evaluation(s)")
    return EvalReport(user_id=user_id, method=method, mode="seq", sessions=tuple(scores))


@dataclass(slots=True, frozen=True)
class SweepRow:
    params: ExtractionParams
    confusion: Confusion

    def to_dict(self) -> dict[str, Any]:
        return {
            "theta_dist": self.params.theta_dist,
            "theta_time": self.params.theta_time,
            **self.confusion.to_dict(),
        }


def sweep_extraction(
    sessions: Sequence[AnnotatedSession],
    db: PoiDatabase,
    *,
    theta_dists: Sequence[float] = SWEEP_THETA_DIST,
    theta_times: Sequence[float] = SWEEP_THETA_TIME,
) -> list[SweepRow]:
    """Extraction precision/recall for every (θ_dist, θ_time) pair, pooled over sessions."""
    centers = [visit_centers(ann, db) for ann in sessions]
    rows = []
    for dist in theta_dists:
        for secs in theta_times:
            params = ExtractionParams(theta_dist=dist, theta_time=secs)
            conf = Confusion()
            for ann, cs in zip(sessions, centers):
                conf = conf + score_extraction(extract_stay_points(ann.session, params), ann.visits, cs)
            rows.append(SweepRow(params=params, confusion=conf))
    return rows


# ----------------------------- timing -----------------------------

@dataclass(slots=True)
class TimingReport:
    backend: str
    buckets: dict[int, float] = field(default_factory=dict)
    counts: dict[int, int] = field(default_factory=dict)
    rss_mb: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "backend": self.backend,
            "mean_seconds_by_n_sp": {str(k): v for k, v in sorted(self.buckets.items())},
            "sessions_by_n_sp": {str(k): v for k, v in sorted(self.counts.items())},
            "rss_mb": self.rss_mb,
        }


def resident_memory_mb() -> float:
    return psutil.Process().memory_info().rss / (1024 * 1024)


def time_solver(
    sessions: Sequence[FeatureVectors],
    backend: str,
    weights: WeightVector | None = None,
    *,
    log: logging.Logger | None = None,
) -> TimingReport:
    """Mean wall-clock solve time per stay-point count; the first solve is a discarded warm-up."""
    log = log or logger
    report = TimingReport(backend=backend)
    if not sessions:
        return report
    solver = get_solver(backend)
    weights = weights or WeightVector.ones()
    solver.solve(problem_from_features(sessions[0], weights))

    samples: dict[int, list[float]] = defaultdict(list)
    for fv in sessions:
        t0 = time.perf_counter()
        solver.solve(problem_from_features(fv, weights))
        samples[fv.n_sp].append(time.perf_counter() - t0)
    report.buckets = {n: math.fsum(v) / len(v) for n, v in sorted(samples.items())}
    report.counts = {n: len(v) for n, v in sorted(samples.items())}
    report.rss_mb = resident_memory_mb()
    log.debug(f"⏱️ Timed {len(sessions)} session(s) on {backend}: {len(report.buckets)} bucket(s)")
    return report
