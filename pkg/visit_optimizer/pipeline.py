"""Per-session assignment wiring shared by the CLI and the evaluation drivers.

extract candidates -> (features -> problem -> solver) | point-wise baseline
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Sequence

from .baselines import assign_nci, assign_nn
from .errors import InvalidConfig
from .features import FeatureBank, FeatureVectors, compute_feature_vectors
from .geo import PoiDatabase
from .models import (
    CandidateSet,
    ExtractionParams,
    FeatureParams,
    PopularityTable,
    Session,
    Solution,
    WeightVector,
)
from .solvers import AssignmentProblem, get_solver, problem_from_features
from .staypoint import extract_candidates


@dataclass(slots=True, frozen=True)
class AssignmentResult:
    """One session's output: candidates, the solved problem (joint methods) and timing."""

    session_id: str
    candidate_set: CandidateSet
    solution: Solution
    seconds: float
    problem: AssignmentProblem | None = None

    @property
    def n_sp(self) -> int:
        return len(self.candidate_set)


class SessionAssigner:
    """Runs one method over sessions.

    Methods:
        je    : full joint objective with `backend` (exhaustive | bnb | chain).
        chain : chain-restricted objective (always the DP backend).
        nn    : nearest POI.
        nci   : most checked-in POI; needs a popularity table.

    Construct with:
        SessionAssigner(logger=logger, db=db, params=params, param_sets=[...],
                        method="je", backend="bnb", bank=bank, weights=weights)
    """

    def __init__(
        self,
        *,
        logger: logging.Logger,
        db: PoiDatabase,
        params: FeatureParams,
        param_sets: Sequence[ExtractionParams],
        method: str = "je",
        backend: str = "bnb",
        bank: FeatureBank | None = None,
        weights: WeightVector | None = None,
        popularity: PopularityTable | None = None,
        overlap_policy: str = "earliest",
    ) -> None:
        self.logger = logger
        self.db = db
        self.params = params
        self.param_sets = tuple(param_sets)
        self.method = method
        self.backend = "chain" if method == "chain" else backend
        self.bank = bank
        self.weights = weights or WeightVector.ones()
        self.popularity = popularity
        self.overlap_policy = overlap_policy

        if method in ("je", "chain") and bank is None:
            raise InvalidConfig(f"method {method!r} needs a trained feature bank")
        if method == "nci" and popularity is None:
            raise InvalidConfig("method 'nci' needs a popularity table")
        if method not in ("je", "chain", "nn", "nci"):
            raise InvalidConfig(f"unknown method {method!r}")
        self.solver = get_solver(self.backend, logger=logger) if method in ("je", "chain") else None

    @property
    def is_joint(self) -> bool:
        return self.solver is not None

    def candidates(self, session: Session) -> CandidateSet:
        return extract_candidates(session, self.param_sets)

    def features(self, candidate_set: CandidateSet) -> FeatureVectors:
        assert self.bank is not None
        return compute_feature_vectors(candidate_set, self.bank, self.params, self.db)

    def assign(self, session: Session) -> AssignmentResult:
        """Extract, build and solve (or apply a baseline) for one session."""
        cset = self.candidates(session)
        if not self.is_joint:
            return self._assign_pointwise(session.id, cset)
        return self.assign_features(session.id, self.features(cset))

    def assign_features(
        self, session_id: str, fv: FeatureVectors, weights: WeightVector | None = None
    ) -> AssignmentResult:
        """Solve from precomputed features; timing covers weighting and solving."""
        assert self.solver is not None
        t0 = time.perf_counter()
        problem = problem_from_features(fv, weights or self.weights)
        solution = self.solver.solve(problem)
        seconds = time.perf_counter() - t0
        self.logger.debug(
            f"✅ {session_id}: {len(solution.selected)} of {problem.n_sp} selected "
            f"(objective {solution.objective:.4f}, {seconds:.3f}s)"
        )
        return AssignmentResult(
            session_id=session_id,
            candidate_set=fv.candidate_set,
            solution=solution,
            seconds=seconds,
            problem=problem,
        )

    def _assign_pointwise(self, session_id: str, cset: CandidateSet) -> AssignmentResult:
        t0 = time.perf_counter()
        if self.method == "nn":
            solution = assign_nn(cset, self.db, self.params, overlap_policy=self.overlap_policy)
        else:
            assert self.popularity is not None
            solution = assign_nci(cset, self.db, self.popularity, self.params, overlap_policy=self.overlap_policy)
        return AssignmentResult(
            session_id=session_id,
            candidate_set=cset,
            solution=solution,
            seconds=time.perf_counter() - t0,
        )
