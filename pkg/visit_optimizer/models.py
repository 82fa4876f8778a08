"""Models for the Visit Optimizer.

This module defines the dataclasses shared by extraction, feature training,
solving, the point-wise baselines and evaluation. Everything here is immutable
after construction.

Index conventions: stay-point spans are 0-based inclusive index pairs into the
owning session's point list.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Iterator

from .defaults import (
    DEFAULT_ALPHA1,
    DEFAULT_ALPHA2,
    DEFAULT_BACKEND,
    DEFAULT_BETA,
    DEFAULT_CANDIDATE_RADIUS,
    DEFAULT_FOLDS,
    DEFAULT_GAMMA,
    DEFAULT_LAMBDA,
    DEFAULT_LOGNORM_TAU_FLOOR,
    DEFAULT_MAX_CANDIDATES,
    DEFAULT_SEED,
    DEFAULT_THETA_DIST,
    DEFAULT_THETA_TIME,
    DEFAULT_TRANSITION_SCOPE,
    DEFAULT_TZ_OFFSET_MINUTES,
    DEFAULT_UNSEEN_LOGNORM_DENSITY,
    DEFAULT_WEIGHT_GRID,
    WEIGHT_DIMS,
)


# ========= Raw positioning data =========


@dataclass(slots=True, frozen=True)
class TrackPoint:
    """A single positioning sample.

    Attributes:
        lng: Longitude in degrees.
        lat: Latitude in degrees.
        ts: Integer seconds since the Unix epoch.
    """

    lng: float
    lat: float
    ts: int

    def __post_init__(self) -> None:
        if not -180.0 <= self.lng <= 180.0:
            raise ValueError(f"longitude out of range: {self.lng}")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")


@dataclass(slots=True, frozen=True)
class Session:
    """One calendar day of ordered track-points for one user."""

    id: str
    points: tuple[TrackPoint, ...]
    day: dt.date | None = None

    def __len__(self) -> int:
        return len(self.points)

    def __repr__(self) -> str:
        return f"Session(id='{self.id}', day={self.day}, points={len(self.points)})"


@dataclass(slots=True, frozen=True)
class StayPoint:
    """A contiguous track-point span [start, end] of a session.

    Attributes:
        start, end: Inclusive 0-based indexes into the session's points.
        lng, lat: Unweighted mean of the member coordinates.
        bt, et: Timestamps of the first and last member.
    """

    start: int
    end: int
    lng: float
    lat: float
    bt: int
    et: int

    @property
    def st(self) -> int:
        """Stay time in seconds."""
        return self.et - self.bt

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)

    @property
    def mid_ts(self) -> float:
        return (self.bt + self.et) / 2.0


# ========= Places and ground truth =========


@dataclass(slots=True, frozen=True)
class Poi:
    """A named, categorized, geolocated place.

    `source` records provenance: "common" database or the user's "personal" one.
    """

    id: str
    name: str
    cat: str
    lng: float
    lat: float
    source: str = "common"

    def __post_init__(self) -> None:
        if not self.cat:
            raise ValueError(f"POI {self.id!r} has an empty category")
        if self.source not in ("common", "personal"):
            raise ValueError(f"POI {self.id!r} has unknown source {self.source!r}")


@dataclass(slots=True, frozen=True)
class VisitRecord:
    """Ground-truth visit: the user was at `poi_id` during [bt, et]."""

    bt: int
    et: int
    poi_id: str

    def __post_init__(self) -> None:
        if self.bt >= self.et:
            raise ValueError(f"visit interval must satisfy bt < et, got [{self.bt}, {self.et}]")

    @property
    def mid_ts(self) -> float:
        return (self.bt + self.et) / 2.0


@dataclass(slots=True, frozen=True)
class AnnotatedSession:
    """A session together with its (pairwise non-overlapping) visit annotations."""

    session: Session
    visits: tuple[VisitRecord, ...]
    user_id: str = ""

    @property
    def id(self) -> str:
        return self.session.id


@dataclass(slots=True, frozen=True)
class PopularityTable:
    """Check-in counts per POI id (missing ids count as zero)."""

    checkins: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        bad = {k: v for k, v in self.checkins.items() if v < 0}
        if bad:
            raise ValueError(f"check-in counts must be non-negative: {bad}")

    def count(self, poi_id: str) -> int:
        return self.checkins.get(poi_id, 0)


# ========= Extraction =========


@dataclass(slots=True, frozen=True)
class ExtractionParams:
    """Stay-point extraction thresholds: radius in meters, minimum duration in seconds."""

    theta_dist: float = DEFAULT_THETA_DIST
    theta_time: float = DEFAULT_THETA_TIME

    def __post_init__(self) -> None:
        if self.theta_dist <= 0 or self.theta_time <= 0:
            raise ValueError(
                f"extraction thresholds must be positive, got ({self.theta_dist}, {self.theta_time})"
            )

    @classmethod
    def parse(cls, text: str) -> "ExtractionParams":
        """Parse a "dist,time" pair as given to --param-set."""
        try:
            dist, time = (float(x) for x in text.split(","))
        except ValueError:
            raise ValueError(f"expected 'dist,time', got {text!r}") from None
        return cls(theta_dist=dist, theta_time=time)


@dataclass(slots=True, frozen=True)
class CandidateSet:
    """Stay-point candidates of one session and their overlapping pairs L.

    Pairs in `overlap_pairs` are stored with the smaller index first.
    """

    stay_points: tuple[StayPoint, ...]
    overlap_pairs: frozenset[tuple[int, int]] = frozenset()

    def __len__(self) -> int:
        return len(self.stay_points)


# ========= Features and weights =========


@dataclass(slots=True, frozen=True)
class FeatureParams:
    """Feature-computation knobs.

    Attributes:
        gamma: Gaussian accuracy for the nearest-center feature (1/m^2).
        lam: Exponential rate for the stay-time feature (per minute).
        alpha1, alpha2: Interpolation weights of the time-window tables.
        beta: Additive smoothing of the category transition probability.
        candidate_radius: POI candidate search radius in meters.
        max_candidates: Cap on candidates per stay-point (nearest kept).
        lognorm_tau_floor: Variance used for single-sample categories.
        unseen_lognorm_density: Density returned for categories never visited.
        jaccard_union: Use |A|+|B|-|A∩B| instead of |A|+|B| as denominator.
        transition_scope: "all" counts every later visit, "next" only the next one.
        estimate_lambda: Replace `lam` by 1 / mean annotated stay minutes at training.
        tz_offset_minutes: Fixed UTC offset for time windows.
    """

    gamma: float = DEFAULT_GAMMA
    lam: float = DEFAULT_LAMBDA
    alpha1: float = DEFAULT_ALPHA1
    alpha2: float = DEFAULT_ALPHA2
    beta: float = DEFAULT_BETA
    candidate_radius: float = DEFAULT_CANDIDATE_RADIUS
    max_candidates: int = DEFAULT_MAX_CANDIDATES
    lognorm_tau_floor: float = DEFAULT_LOGNORM_TAU_FLOOR
    unseen_lognorm_density: float = DEFAULT_UNSEEN_LOGNORM_DENSITY
    jaccard_union: bool = False
    transition_scope: str = DEFAULT_TRANSITION_SCOPE
    estimate_lambda: bool = False
    tz_offset_minutes: int = DEFAULT_TZ_OFFSET_MINUTES

    def __post_init__(self) -> None:
        if self.gamma <= 0 or self.lam <= 0 or self.beta <= 0:
            raise ValueError("gamma, lambda and beta must be strictly positive")
        if not (0.0 <= self.alpha1 <= 1.0 and 0.0 <= self.alpha2 <= 1.0):
            raise ValueError("alpha1 and alpha2 must lie in [0, 1]")
        if self.candidate_radius <= 0 or self.max_candidates < 1:
            raise ValueError("candidate_radius must be positive and max_candidates >= 1")
        if self.transition_scope not in ("all", "next"):
            raise ValueError(f"unknown transition scope {self.transition_scope!r}")


@dataclass(slots=True, frozen=True)
class WeightVector:
    """Non-negative weights (w_s, w_sbar, w_v, w_t, w_y) of the joint objective."""

    w_s: tuple[float, float] = (1.0, 1.0)
    w_sbar: tuple[float, float] = (1.0, 1.0)
    w_v: tuple[float, float, float] = (1.0, 1.0, 1.0)
    w_t: tuple[float, float] = (1.0, 1.0)
    w_y: tuple[float] = (1.0,)

    def __post_init__(self) -> None:
        for name, dim in WEIGHT_DIMS.items():
            values = getattr(self, name)
            if len(values) != dim:
                raise ValueError(f"{name} must have {dim} entries, got {len(values)}")
            if any(v < 0 for v in values):
                raise ValueError(f"{name} must be non-negative, got {values}")

    def flat(self) -> tuple[float, ...]:
        return (*self.w_s, *self.w_sbar, *self.w_v, *self.w_t, *self.w_y)

    @classmethod
    def from_flat(cls, values: "list[float] | tuple[float, ...]") -> "WeightVector":
        total = sum(WEIGHT_DIMS.values())
        if len(values) != total:
            raise ValueError(f"expected {total} weights, got {len(values)}")
        vals = [float(v) for v in values]
        parts: dict[str, tuple[float, ...]] = {}
        pos = 0
        for name, dim in WEIGHT_DIMS.items():
            parts[name] = tuple(vals[pos : pos + dim])
            pos += dim
        return cls(**parts)  # type: ignore[arg-type]

    @classmethod
    def ones(cls) -> "WeightVector":
        return cls()


def weight_grid(values: "list[float] | tuple[float, ...] | set[float]") -> Iterator[WeightVector]:
    """All |values|^W weight vectors in lexicographic order of ascending values."""
    ordered = sorted(set(float(v) for v in values))
    for combo in product(ordered, repeat=sum(WEIGHT_DIMS.values())):
        yield WeightVector.from_flat(combo)


# ========= Solutions =========


@dataclass(slots=True, frozen=True)
class PredictedVisit:
    """A selected (stay-point, POI) pair resolved to timestamps and ids."""

    sp_index: int
    poi_index: int
    poi_id: str
    bt: int
    et: int
    lng: float
    lat: float

    @property
    def mid_ts(self) -> float:
        return (self.bt + self.et) / 2.0


@dataclass(slots=True, frozen=True)
class Solution:
    """Selected (stay-point index, POI index) pairs and their objective.

    Attributes:
        selected: Pairs sorted by stay-point index.
        objective: Objective value under `mode` scoring ("full", "chain"),
            or 0.0 for point-wise baselines (mode "pointwise").
        visits: The same selection resolved against the candidate lists.
        backend: Name of the method that produced it.
    """

    selected: tuple[tuple[int, int], ...]
    objective: float
    visits: tuple[PredictedVisit, ...] = ()
    backend: str = ""
    mode: str = "full"

    def assignment(self, n_sp: int) -> tuple[int, ...]:
        """Per stay-point POI index, -1 where not selected."""
        out = [-1] * n_sp
        for i, k in self.selected:
            out[i] = k
        return tuple(out)


# ========= Run configuration =========


@dataclass(slots=True, frozen=True)
class RunConfig:
    """Everything one CLI invocation needs; built from defaults, file, then flags."""

    poi_db: Path | None = None
    trajectories: Path | None = None
    annotations: Path | None = None
    popularity: Path | None = None
    bank: Path | None = None
    weights: Path | None = None
    output: Path = Path("out")
    param_sets: tuple[ExtractionParams, ...] = (ExtractionParams(),)
    features: FeatureParams = FeatureParams()
    backend: str = DEFAULT_BACKEND
    method: str = "je"
    methods: tuple[str, ...] = ("je",)
    weight_source: str = "grid-search"  # "file" | "grid-search"
    grid: tuple[float, ...] = tuple(DEFAULT_WEIGHT_GRID)
    eval_mode: str = "cv"  # "cv" | "seq" | "sweep"
    setting: str = "personalized"  # "personalized" | "mixed"
    folds: int = DEFAULT_FOLDS
    seed: int = DEFAULT_SEED
    tz_offset_minutes: int = DEFAULT_TZ_OFFSET_MINUTES
    overlap_policy: str = "earliest"
    n_jobs: int = 1

    def __post_init__(self) -> None:
        from .defaults import BACKENDS, METHODS, OVERLAP_POLICIES, WEIGHT_SOURCES
        from .errors import InvalidConfig

        if self.backend not in BACKENDS:
            raise InvalidConfig(f"unknown backend {self.backend!r}; expected one of {BACKENDS}")
        for m in (self.method, *self.methods):
            if m not in METHODS:
                raise InvalidConfig(f"unknown method {m!r}; expected one of {METHODS}")
        if self.weight_source not in WEIGHT_SOURCES:
            raise InvalidConfig(f"unknown weight source {self.weight_source!r}")
        if self.weight_source == "file" and self.weights is None:
            raise InvalidConfig("weight source 'file' requires a weights path")
        if self.weight_source == "grid-search" and self.weights is not None:
            raise InvalidConfig("a weights path conflicts with weight source 'grid-search'")
        if self.eval_mode not in ("cv", "seq", "sweep"):
            raise InvalidConfig(f"unknown evaluation mode {self.eval_mode!r}")
        if self.setting not in ("personalized", "mixed"):
            raise InvalidConfig(f"unknown setting {self.setting!r}")
        if self.overlap_policy not in OVERLAP_POLICIES:
            raise InvalidConfig(f"unknown overlap policy {self.overlap_policy!r}")
        if not self.param_sets:
            raise InvalidConfig("at least one extraction parameter set is required")
        if self.folds < 2:
            raise InvalidConfig(f"folds must be >= 2, got {self.folds}")
        if not self.grid or any(g < 0 for g in self.grid):
            raise InvalidConfig("weight grid must be a non-empty set of non-negative values")
