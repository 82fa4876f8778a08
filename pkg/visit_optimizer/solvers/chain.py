"""First-order chain restriction solved exactly by dynamic programming.

Pair terms count only between consecutively selected stay-points. The DP runs
backwards over states (last selected stay-point j, its POI l, number selected
m); future[j][l, m] is the best chain gain still to come, len_y included.
Because candidates are ordered by span start, a chain whose consecutive
members do not overlap is pairwise non-overlapping.

The selection is rebuilt forwards: stop as soon as stopping is optimal,
otherwise take the smallest (stay-point, POI) that still reaches the optimum.
Among chain optima within TIE_EPS this yields the lexicographically smallest
sorted selection.
"""

from __future__ import annotations

import logging

import numpy as np

from ..defaults import TIE_EPS
from ..models import Solution
from .problem import AssignmentProblem, make_solution


class ChainSolver:
    """Vectorized backward DP over (j, l, m)."""

    name = "chain"

    def __init__(self, *, logger: logging.Logger | None = None) -> None:
        self.logger = logger or logging.getLogger(__name__)

    def solve(self, p: AssignmentProblem) -> Solution:
        n = p.n_sp
        k_counts = p.k_counts
        len_y = np.asarray(p.len_y, dtype=float)
        gain0 = [p.unary_s[j] - p.unary_sbar[j] + p.unary_v[j] for j in range(n)]

        live = [j for j in range(n) if k_counts[j]]
        successors = {j: [i for i in live if i > j and (j, i) not in p.overlap_pairs] for j in live}

        future: dict[int, np.ndarray] = {}
        for j in reversed(live):
            # Stopping after (j, l) as the m-th selection scores len_y[m].
            cur = np.repeat(len_y[None, :], k_counts[j], axis=0)
            for i in successors[j]:
                pair = self._pair(p, j, i)
                # (K_j, K_i, n): continue with (i, k) as selection m + 1.
                ext = gain0[i][:, None] + future[i][:, 1:]
                cur[:, :n] = np.maximum(cur[:, :n], (pair[:, :, None] + ext[None, :, :]).max(axis=1))
            future[j] = cur

        top = float(len_y[0])
        for i in live:
            top = max(top, float(np.max(gain0[i] + future[i][:, 1])))

        selected: list[tuple[int, int]] = []
        target = top
        last: tuple[int, int] | None = None
        while float(len_y[len(selected)]) < target - TIE_EPS:
            m = len(selected)
            step = self._next_step(p, live, successors, gain0, future, last, m, target)
            if step is None:
                break
            i, k = step
            selected.append((i, k))
            target = float(future[i][k, m + 1])
            last = (i, k)

        self.logger.debug(f"🔗 Chain DP over {n} stay-point(s): {len(selected)} selected")
        return make_solution(p, selected, backend=self.name, mode="chain")

    @staticmethod
    def _pair(p: AssignmentProblem, j: int, i: int) -> np.ndarray:
        pair = p.pair_t.get((j, i))
        return pair if pair is not None else np.zeros((p.k_counts[j], p.k_counts[i]))

    def _next_step(
        self,
        p: AssignmentProblem,
        live: list[int],
        successors: dict[int, list[int]],
        gain0: list[np.ndarray],
        future: dict[int, np.ndarray],
        last: tuple[int, int] | None,
        m: int,
        target: float,
    ) -> tuple[int, int] | None:
        """Smallest (i, k) after `last` whose continuation still reaches `target`."""
        for i in live if last is None else successors[last[0]]:
            values = gain0[i] + future[i][:, m + 1]
            if last is not None:
                values = values + self._pair(p, last[0], i)[last[1]]
            hits = np.flatnonzero(values >= target - TIE_EPS)
            if hits.size:
                return i, int(hits[0])
        return None


def solve_chain_dp(p: AssignmentProblem) -> Solution:
    return ChainSolver().solve(p)
