"""Exact depth-first branch-and-bound for the full objective.

Stay-points are decided in temporal (index) order. A node either selects the
next selectable stay-point with one of its POIs or skips it; POI children are
tried in order of their optimistic gain, the skip child last. The incumbent
starts from the chain-DP selection, polished by single stay-point moves and
scored under the full objective.

Gains are measured against the all-skipped baseline Σ unary_sbar. Every
option (u, k) gets a static pair optimism P[u, k]: the best total of
max_l pair_t[(u, w)][k, l] over a feasible set of later stay-points w. The
bound of a node is a weighted interval-chain DP over the undecided
stay-points, each weighted by

    max_k gain0[u, k] + acc[u, k] + P[u, k]

where acc holds the exact pair terms with already-selected stay-points, plus
the best len_y[m] still reachable.

When the problem carries candidate labels, pair terms depend on labels only:

- options of mutually overlapping stay-points with identical overlap
  neighbourhoods (nested spans of one stop) collapse to the best option per
  label;
- the remaining gain below a node depends only on the multiset of selected
  labels and the still-blocked stay-points, so upper bounds are memoized
  under that key.

Ties within TIE_EPS resolve to the lexicographically smallest sorted selection,
as in the exhaustive oracle.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from typing import Sequence

import numpy as np

from ..defaults import TIE_EPS
from ..models import Solution
from .chain import ChainSolver
from .problem import AssignmentProblem, make_solution, score_assignment

NEG = float("-inf")
MAX_POLISH_PASSES = 20


class BranchAndBoundSolver:
    """Construct with `BranchAndBoundSolver(logger=logger)`; call `solve(problem)`."""

    name = "bnb"

    def __init__(
        self,
        *,
        logger: logging.Logger | None = None,
        warm_start: bool = True,
        memo: bool = True,
    ) -> None:
        self.logger = logger or logging.getLogger(__name__)
        self.warm_start = warm_start
        self.memo = memo
        self.nodes = 0
        self.pruned = 0

    def solve(self, p: AssignmentProblem) -> Solution:
        n = p.n_sp
        k_counts = p.k_counts
        base = float(np.sum(p.unary_sbar)) if n else 0.0
        len_y = [float(v) for v in p.len_y]
        gain0 = [np.asarray(p.unary_s[u] - p.unary_sbar[u] + p.unary_v[u], dtype=float) for u in range(n)]

        options = collapse_options(p, gain0)
        nxt = first_compatible(p)
        optimism = pair_optimism(p, options, nxt)

        later_pairs: list[list[int]] = [[] for _ in range(n)]
        for i, j in sorted(p.pair_t):
            later_pairs[i].append(j)
        later_rows = [np.array(ws, dtype=int) for ws in later_pairs]
        overlap_later = p.overlap_neighbors()

        width = max(k_counts, default=0)
        static = np.full((n, max(width, 1)), NEG)
        for u in range(n):
            if options[u].size:
                static[u, options[u]] = gain0[u][options[u]] + optimism[u][options[u]]
        acc = np.zeros_like(static)
        blocked = [0] * n
        blocked_mask = 0
        chosen: list[tuple[int, int]] = []
        chosen_labels: list[int] = []
        suffix = [NEG] * (n + 1)

        labels = p.labels if self.memo else None
        memo: dict[tuple, float] | None = {} if labels is not None else None

        best: list[tuple[int, int]] = []
        best_score = NEG
        if self.warm_start:
            best = polish(p, list(ChainSolver(logger=self.logger).solve(p).selected), gain0)
            best_score = score_assignment(p, best, "full")
        self.nodes = 0
        self.pruned = 0

        def rest_bound(d: int) -> float:
            """Optimistic remaining gain for undecided stay-points d..n-1."""
            weights = (static[d:] + acc[d:]).max(axis=1).tolist()
            suffix[n] = NEG
            selectable = 0
            for u in range(n - 1, d - 1, -1):
                w = weights[u - d]
                if blocked[u] or w == NEG:
                    suffix[u] = suffix[u + 1]
                    continue
                selectable += 1
                cont = suffix[nxt[u]]
                val = w + cont if cont > 0.0 else w
                suffix[u] = val if val > suffix[u + 1] else suffix[u + 1]
            m0 = len(chosen)
            return max(suffix[d], 0.0) + max(len_y[m0 : m0 + selectable + 1])

        def prunable(bound: float) -> bool:
            if bound < best_score - TIE_EPS:
                return True
            return bound <= best_score + TIE_EPS and not may_precede(chosen, best)

        def descend(d: int, gain: float) -> float:
            """Explore below the node; return an upper bound on its remaining gain."""
            nonlocal best, best_score, blocked_mask
            while d < n and (blocked[d] or not options[d].size):
                d += 1
            self.nodes += 1
            if d == n:
                tail = len_y[len(chosen)]
                total = base + gain + tail
                if total > best_score + TIE_EPS or (total >= best_score - TIE_EPS and chosen < best):
                    best_score = total
                    best = list(chosen)
                return tail

            key = None
            cached = None
            if memo is not None:
                key = (d, tuple(sorted(chosen_labels)), blocked_mask >> d)
                cached = memo.get(key)
                if cached is not None and prunable(base + gain + cached):
                    self.pruned += 1
                    return cached
            rest = rest_bound(d)
            if cached is not None:
                rest = min(rest, cached)
            if prunable(base + gain + rest):
                self.pruned += 1
                return rest

            upper = NEG
            local = gain0[d] + acc[d, : k_counts[d]]
            opts = options[d]
            order = opts[np.argsort(-(local[opts] + optimism[d][opts]), kind="stable")]
            for k in order.tolist():
                delta = float(local[k])
                chosen.append((d, k))
                if labels is not None:
                    chosen_labels.append(int(labels[d][k]))
                saved = acc[later_rows[d]].copy()
                for w in later_pairs[d]:
                    acc[w, : k_counts[w]] += p.pair_t[(d, w)][k]
                for w in overlap_later[d]:
                    blocked[w] += 1
                    blocked_mask |= 1 << w
                upper = max(upper, delta + descend(d + 1, gain + delta))
                for w in overlap_later[d]:
                    blocked[w] -= 1
                    if not blocked[w]:
                        blocked_mask &= ~(1 << w)
                acc[later_rows[d]] = saved
                if labels is not None:
                    chosen_labels.pop()
                chosen.pop()
            upper = max(upper, descend(d + 1, gain))

            if key is not None:
                memo[key] = min(upper, cached) if cached is not None else upper
            return upper

        descend(0, 0.0)
        kept = sum(int(o.size) for o in options)
        self.logger.debug(
            f"🌳 B&B over {n} stay-point(s), {kept}/{sum(k_counts)} option(s): "
            f"{self.nodes:,} nodes, {self.pruned:,} pruned, best={best_score:.6f}"
        )
        return make_solution(p, best, backend=self.name, mode="full")


def may_precede(prefix: Sequence[tuple[int, int]], best: Sequence[tuple[int, int]]) -> bool:
    """Whether some completion of `prefix` sorts before `best`."""
    for a, b in zip(prefix, best):
        if a != b:
            return a < b
    return len(prefix) < len(best)


def first_compatible(p: AssignmentProblem) -> list[int]:
    """For each stay-point, the first later index that does not overlap it (n if none)."""
    n = p.n_sp
    out = [n] * n
    for u in range(n):
        w = u + 1
        while w < n and (u, w) in p.overlap_pairs:
            w += 1
        out[u] = w
    return out


def collapse_options(p: AssignmentProblem, gain0: Sequence[np.ndarray]) -> list[np.ndarray]:
    """POI indices worth branching on, per stay-point.

    Without labels every POI is kept. With labels, stay-points that overlap each
    other and every other stay-point alike are interchangeable apart from their
    unary gains, so only the best option per label survives; near-ties keep
    the smallest (stay-point, POI).
    """
    n = p.n_sp
    k_counts = p.k_counts
    if p.labels is None:
        return [np.arange(k, dtype=int) for k in k_counts]

    live = [u for u in range(n) if k_counts[u]]
    closed = {u: {u} for u in live}
    for i, j in p.overlap_pairs:
        if i in closed and j in closed:
            closed[i].add(j)
            closed[j].add(i)

    groups: dict[frozenset[int], list[int]] = defaultdict(list)
    for u in live:
        groups[frozenset(closed[u])].append(u)

    kept: list[list[int]] = [[] for _ in range(n)]
    for hood, members in groups.items():
        lo, hi = min(members), max(members)
        # Pair orientation must agree for every outsider, i.e. none sits between members.
        if any(w not in hood for w in live if lo < w < hi):
            parts = [[u] for u in members]
        else:
            parts = [members]
        for part in parts:
            by_label: dict[int, list[tuple[float, int, int]]] = defaultdict(list)
            for u in part:
                for k in range(k_counts[u]):
                    by_label[int(p.labels[u][k])].append((float(gain0[u][k]), u, k))
            for entries in by_label.values():
                top = max(g for g, _, _ in entries)
                owner, k = min((u, k) for g, u, k in entries if g >= top - TIE_EPS)
                kept[owner].append(k)
    return [np.array(sorted(ks), dtype=int) for ks in kept]


def pair_optimism(
    p: AssignmentProblem, options: Sequence[np.ndarray], nxt: Sequence[int]
) -> list[np.ndarray]:
    """P[u][k]: best sum of optimistic pair terms over a feasible later chain."""
    n = p.n_sp
    k_counts = p.k_counts
    out = [np.zeros(k) for k in k_counts]
    for u in range(n):
        if not options[u].size:
            continue
        suffix: list[np.ndarray | None] = [None] * (n + 1)
        for w in range(n - 1, u, -1):
            suffix[w] = suffix[w + 1]
            arr = p.pair_t.get((u, w))
            if arr is None or not options[w].size:
                continue
            val = arr[:, options[w]].max(axis=1)
            cont = suffix[nxt[w]]
            if cont is not None:
                val = val + np.maximum(cont, 0.0)
            suffix[w] = val if suffix[w] is None else np.maximum(suffix[w], val)
        if suffix[u + 1] is not None:
            out[u] = np.maximum(suffix[u + 1], 0.0)
    return out


def polish(
    p: AssignmentProblem, selected: list[tuple[int, int]], gain0: Sequence[np.ndarray]
) -> list[tuple[int, int]]:
    """Improve a feasible selection by re-deciding one stay-point at a time.

    A move drops the stay-point's overlapping neighbours, then picks its best
    POI (or none) against the rest; moves are kept only when the full
    objective improves by more than TIE_EPS.
    """
    n = p.n_sp
    k_counts = p.k_counts
    neighbours: list[set[int]] = [set() for _ in range(n)]
    for i, j in p.overlap_pairs:
        neighbours[i].add(j)
        neighbours[j].add(i)

    current = dict(selected)
    score = score_assignment(p, sorted(current.items()), "full")
    for _ in range(MAX_POLISH_PASSES):
        moved = False
        for u in range(n):
            if not k_counts[u]:
                continue
            rest = {i: k for i, k in current.items() if i != u and i not in neighbours[u]}
            values = gain0[u].copy()
            for i, k in rest.items():
                arr = p.pair_t.get((i, u)) if i < u else p.pair_t.get((u, i))
                if arr is not None:
                    values += arr[k, :] if i < u else arr[:, k]
            trial = dict(rest)
            trial[u] = int(np.argmax(values))
            for cand in (trial, rest):
                cand_score = score_assignment(p, sorted(cand.items()), "full")
                if cand_score > score + TIE_EPS:
                    current, score, moved = cand, cand_score, True
                    break
        if not moved:
            break
    return sorted(current.items())


def solve_bnb(p: AssignmentProblem) -> Solution:
    return BranchAndBoundSolver().solve(p)
