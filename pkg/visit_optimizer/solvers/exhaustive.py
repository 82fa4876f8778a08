"""Exhaustive search over every assignment vector (small-instance oracle).

Every feasible selection is scored under the full objective. Among selections
within TIE_EPS of the best, the one whose sorted (stay-point, POI) tuple is
lexicographically smallest is returned; the empty selection sorts first.
"""

from __future__ import annotations

import logging

from ..defaults import EXHAUSTIVE_GUARD, TIE_EPS
from ..errors import TooLarge
from ..models import Solution
from .problem import AssignmentProblem, make_solution


class ExhaustiveSolver:
    """Depth-first enumeration with overlap pruning.

    Construct with:
        ExhaustiveSolver(logger=logger, guard=10_000_000)
    """

    name = "exhaustive"

    def __init__(self, *, logger: logging.Logger | None = None, guard: int = EXHAUSTIVE_GUARD) -> None:
        self.logger = logger or logging.getLogger(__name__)
        self.guard = int(guard)

    def solve(self, p: AssignmentProblem) -> Solution:
        space = p.search_space()
        if space > self.guard:
            raise TooLarge(f"exhaustive search over {space:,} assignments exceeds the guard of {self.guard:,}")

        n = p.n_sp
        k_counts = p.k_counts
        overlaps = [set() for _ in range(n)]
        for i, j in p.overlap_pairs:
            overlaps[j].add(i)

        best_score = float("-inf")
        best: list[tuple[int, int]] = []
        chosen: list[tuple[int, int]] = []
        visited = 0

        def descend(i: int, score: float) -> None:
            nonlocal best_score, best, visited
            if i == n:
                visited += 1
                total = score + float(p.len_y[len(chosen)])
                if total > best_score + TIE_EPS or (total >= best_score - TIE_EPS and chosen < best):
                    best_score = total
                    best = list(chosen)
                return

            descend(i + 1, score + float(p.unary_sbar[i]))

            if k_counts[i] == 0 or any(c in overlaps[i] for c, _ in chosen):
                return
            base = score + float(p.unary_s[i])
            for k in range(k_counts[i]):
                gain = float(p.unary_v[i][k])
                for c, kc in chosen:
                    arr = p.pair_t.get((c, i))
                    if arr is not None:
                        gain += float(arr[kc, k])
                chosen.append((i, k))
                descend(i + 1, base + gain)
                chosen.pop()

        descend(0, 0.0)
        self.logger.debug(f"🔍 Exhaustive: {visited:,} feasible assignments of {space:,}; best={best_score:.6f}")
        return make_solution(p, best, backend=self.name, mode="full")


def solve_exhaustive(p: AssignmentProblem, *, guard: int = EXHAUSTIVE_GUARD) -> Solution:
    return ExhaustiveSolver(guard=guard).solve(p)
