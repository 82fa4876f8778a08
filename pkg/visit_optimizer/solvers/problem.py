"""The 0-1 assignment problem: coefficients, scoring and constraint checks.

Variables are implicit. A selection is a list of (stay-point index, POI index)
pairs; s_i, s̄_i, v_ik, t_ijkl and y_m are all recovered from it, which keeps
the pairwise linearization tight by construction.

Scoring of a selection:

    Σ_unselected unary_sbar[i] + Σ_selected (unary_s[i] + unary_v[i][k])
        + Σ pair_t[(i, j)][k, l] + len_y[m]

where the pair sum runs over every ordered selected pair ("full" mode) or
only over consecutively selected stay-points ("chain" mode).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np

from ..features import FeatureBank, FeatureVectors, compute_feature_vectors
from ..geo import PoiDatabase
from ..models import (
    CandidateSet,
    FeatureParams,
    Poi,
    PredictedVisit,
    Solution,
    StayPoint,
    WeightVector,
)

logger = logging.getLogger(__name__)

OBJECTIVE_TOLERANCE = 1e-9


@dataclass(slots=True, frozen=True)
class AssignmentProblem:
    """One session's joint selection/assignment instance.

    Attributes:
        stay_points: Candidate stay-points in temporal order.
        candidates: Per stay-point, candidate POIs nearest first.
        distances: Meters from each stay-point to each of its candidates.
        unary_s, unary_sbar: Shape (n,), selected / not-selected scores.
        unary_v: Per stay-point, shape (K_i,).
        pair_t: (i, j) -> shape (K_i, K_j); only i before j, non-overlapping,
            both with candidates.
        len_y: Shape (n + 1,).
        overlap_pairs: L, as (i, j) with i < j.
        labels: Optional per stay-point label of each candidate. When set,
            pair_t[(i, j)][k, l] depends only on (labels[i][k], labels[j][l])
            and pair_t holds every non-overlapping pair with candidates.
    """

    stay_points: tuple[StayPoint, ...]
    candidates: tuple[tuple[Poi, ...], ...]
    distances: tuple[tuple[float, ...], ...]
    unary_s: np.ndarray
    unary_sbar: np.ndarray
    unary_v: tuple[np.ndarray, ...]
    pair_t: dict[tuple[int, int], np.ndarray]
    len_y: np.ndarray
    overlap_pairs: frozenset[tuple[int, int]]
    labels: tuple[np.ndarray, ...] | None = None

    @property
    def n_sp(self) -> int:
        return len(self.stay_points)

    @property
    def k_counts(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.candidates)

    @property
    def n_pair_entries(self) -> int:
        return sum(int(arr.size) for arr in self.pair_t.values())

    def search_space(self) -> int:
        """Π (K_i + 1): the number of assignment vectors, feasible or not."""
        return math.prod(k + 1 for k in self.k_counts)

    def overlap_neighbors(self) -> list[list[int]]:
        """For each stay-point, the later stay-points it overlaps."""
        out: list[list[int]] = [[] for _ in range(self.n_sp)]
        for i, j in sorted(self.overlap_pairs):
            out[i].append(j)
        return out

    def __repr__(self) -> str:
        return (
            f"AssignmentProblem(n_sp={self.n_sp}, candidates={sum(self.k_counts)}, "
            f"pair_entries={self.n_pair_entries}, overlaps={len(self.overlap_pairs)})"
        )

    def to_dict(self) -> dict[str, Any]:
        """Plain-JSON view; pass through `utils.dumps_exact` for 17-digit floats."""
        return {
            "n_sp": self.n_sp,
            "stay_points": [
                {
                    "span": [sp.start, sp.end],
                    "lng": sp.lng,
                    "lat": sp.lat,
                    "bt": sp.bt,
                    "et": sp.et,
                    "st": sp.st,
                }
                for sp in self.stay_points
            ],
            "candidates": [[poi.id for poi in cands] for cands in self.candidates],
            "unary_s": [float(v) for v in self.unary_s],
            "unary_sbar": [float(v) for v in self.unary_sbar],
            "unary_v": [[float(v) for v in arr] for arr in self.unary_v],
            "pair_t": {
                f"{i},{j}": [[float(v) for v in row] for row in arr] for (i, j), arr in sorted(self.pair_t.items())
            },
            "len_y": [float(v) for v in self.len_y],
            "overlap_pairs": [list(p) for p in sorted(self.overlap_pairs)],
        }


# ----------------------------- construction -----------------------------

def problem_from_features(fv: FeatureVectors, weights: WeightVector) -> AssignmentProblem:
    """Weight precomputed feature arrays into objective coefficients."""
    w_s = np.asarray(weights.w_s, dtype=float)
    w_sbar = np.asarray(weights.w_sbar, dtype=float)
    w_v = np.asarray(weights.w_v, dtype=float)
    w_t = np.asarray(weights.w_t, dtype=float)
    w_y = float(weights.w_y[0])

    problem = AssignmentProblem(
        stay_points=fv.candidate_set.stay_points,
        candidates=tuple(tuple(poi for poi, _ in hits) for hits in fv.candidates),
        distances=tuple(tuple(d for _, d in hits) for hits in fv.candidates),
        unary_s=fv.x_s @ w_s,
        unary_sbar=fv.x_sbar @ w_sbar,
        unary_v=tuple(x @ w_v for x in fv.x_v),
        pair_t={key: x @ w_t for key, x in fv.x_t.items()},
        len_y=fv.x_y * w_y,
        overlap_pairs=fv.candidate_set.overlap_pairs,
        labels=fv.cat_ids or None,
    )
    _check_finite(problem)
    return problem


def build_problem(
    candidate_set: CandidateSet,
    bank: FeatureBank,
    params: FeatureParams,
    weights: WeightVector,
    db: PoiDatabase,
) -> AssignmentProblem:
    """Compute features for every candidate and weight them into problem P."""
    problem = problem_from_features(compute_feature_vectors(candidate_set, bank, params, db), weights)
    logger.debug(f"🧩 Built {problem!r}")
    return problem


def _check_finite(p: AssignmentProblem) -> None:
    arrays: list[np.ndarray] = [p.unary_s, p.unary_sbar, p.len_y, *p.unary_v, *p.pair_t.values()]
    for arr in arrays:
        if arr.size and not np.all(np.isfinite(arr)):
            raise ValueError("objective coefficients must be finite")


# ----------------------------- scoring -----------------------------

def score_assignment(p: AssignmentProblem, selected: Sequence[tuple[int, int]], mode: str = "full") -> float:
    """Objective of a selection under "full" or "chain" pair scoring."""
    if mode not in ("full", "chain"):
        raise ValueError(f"unknown scoring mode {mode!r}")
    chosen = sorted(selected)
    picked = {i: k for i, k in chosen}
    terms: list[float] = []
    for i in range(p.n_sp):
        k = picked.get(i)
        if k is None:
            terms.append(float(p.unary_sbar[i]))
        else:
            terms.append(float(p.unary_s[i]))
            terms.append(float(p.unary_v[i][k]))

    if mode == "full":
        links = [(a, b) for x, a in enumerate(chosen) for b in chosen[x + 1 :]]
    else:
        links = list(zip(chosen, chosen[1:]))
    for (i, k), (j, l) in links:
        arr = p.pair_t.get((i, j))
        if arr is not None:
            terms.append(float(arr[k, l]))

    terms.append(float(p.len_y[len(chosen)]))
    return math.fsum(terms)


def make_solution(
    p: AssignmentProblem,
    selected: Iterable[tuple[int, int]],
    *,
    backend: str,
    mode: str = "full",
) -> Solution:
    """Resolve a selection into a Solution scored under `mode`."""
    chosen = tuple(sorted((int(i), int(k)) for i, k in selected))
    objective = 0.0 if mode == "pointwise" else score_assignment(p, chosen, mode)
    return Solution(
        selected=chosen,
        objective=objective,
        visits=resolve_visits(p.stay_points, p.candidates, chosen),
        backend=backend,
        mode=mode,
    )


def resolve_visits(
    stay_points: Sequence[StayPoint],
    candidates: Sequence[Sequence[Poi]],
    selected: Iterable[tuple[int, int]],
) -> tuple[PredictedVisit, ...]:
    out = []
    for i, k in selected:
        sp = stay_points[i]
        poi = candidates[i][k]
        out.append(
            PredictedVisit(sp_index=i, poi_index=k, poi_id=poi.id, bt=sp.bt, et=sp.et, lng=sp.lng, lat=sp.lat)
        )
    return tuple(out)


# ----------------------------- constraints -----------------------------

def verify_solution(p: AssignmentProblem, sol: Solution) -> bool:
    """Check every constraint of P on the variables implied by `sol.selected`.

    With one POI per selected stay-point, v, t and y follow from s, so what can
    break is the candidate range, a repeated stay-point or an overlapping pair.
    The objective is re-derived for "full" and "chain" solutions and must match
    within 1e-9; point-wise solutions carry no objective.
    """
    n = p.n_sp
    k_counts = p.k_counts
    s = np.zeros(n, dtype=int)
    for i, k in sol.selected:
        if not (0 <= i < n and 0 <= k < k_counts[i]):
            logger.debug(f"⚠️ Selection ({i}, {k}) is outside the candidate lists")
            return False
        s[i] += 1

    # s_i + s̄_i = 1 and Σ_k v_ik = s_i both fail exactly when a stay-point repeats.
    if np.any(s > 1):
        logger.debug("⚠️ A stay-point is selected more than once")
        return False

    for i, j in p.overlap_pairs:
        if s[i] + s[j] > 1:
            logger.debug(f"⚠️ Overlapping stay-points {i} and {j} both selected")
            return False

    if sol.mode in ("full", "chain"):
        expected = score_assignment(p, sol.selected, sol.mode)
        if not math.isclose(sol.objective, expected, rel_tol=OBJECTIVE_TOLERANCE, abs_tol=OBJECTIVE_TOLERANCE):
            logger.debug(f"⚠️ Objective {sol.objective!r} does not match recomputed {expected!r}")
            return False
    return True


def solution_to_dict(sol: Solution) -> dict[str, Any]:
    return {
        "backend": sol.backend,
        "mode": sol.mode,
        "objective": float(sol.objective),
        "selected": [list(pair) for pair in sol.selected],
        "visits": [
            {
                "sp_index": v.sp_index,
                "poi_index": v.poi_index,
                "poi_id": v.poi_id,
                "bt": v.bt,
                "et": v.et,
                "lng": v.lng,
                "lat": v.lat,
            }
            for v in sol.visits
        ],
    }
