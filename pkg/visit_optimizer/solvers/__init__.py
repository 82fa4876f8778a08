from __future__ import annotations

import logging

from .bnb import BranchAndBoundSolver, solve_bnb
from .chain import ChainSolver, solve_chain_dp
from .exhaustive import ExhaustiveSolver, solve_exhaustive
from .problem import (
    AssignmentProblem,
    build_problem,
    make_solution,
    problem_from_features,
    score_assignment,
    solution_to_dict,
    verify_solution,
)

Solver = ExhaustiveSolver | BranchAndBoundSolver | ChainSolver

SOLVERS: dict[str, type[Solver]] = {
    "exhaustive": ExhaustiveSolver,
    "bnb": BranchAndBoundSolver,
    "chain": ChainSolver,
}


def get_solver(backend: str, *, logger: logging.Logger | None = None) -> Solver:
    """Instantiate the solver registered under `backend`."""
    try:
        cls = SOLVERS[backend]
    except KeyError:
        raise ValueError(f"unknown backend {backend!r}; expected one of {sorted(SOLVERS)}") from None
    return cls(logger=logger)


__all__ = [
    "AssignmentProblem",
    "BranchAndBoundSolver",
    "ChainSolver",
    "ExhaustiveSolver",
    "SOLVERS",
    "Solver",
    "build_problem",
    "get_solver",
    "make_solution",
    "problem_from_features",
    "score_assignment",
    "solution_to_dict",
    "solve_bnb",
    "solve_chain_dp",
    "solve_exhaustive",
    "verify_solution",
]
