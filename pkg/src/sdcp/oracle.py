"""Exact reference allocations and the error metric.

All functions work on tabulated miss curves: ``curves[p, s]`` is the expected
miss intensity of provider ``p`` holding ``s`` slots, for ``s = 0..K``.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from sdcp.workload import miss_curve

BRUTE_FORCE_LIMIT = 10**6


@dataclass(frozen=True)
class MissCurveSet:
    curves: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.curves, dtype=float)
        if c.ndim != 2:
            raise ValueError("curves must be a (P, K+1) table")
        object.__setattr__(self, "curves", c)

    @property
    def P(self):
        return self.curves.shape[0]

    @property
    def K(self):
        return self.curves.shape[1] - 1

    def total(self, alloc):
        """Overall miss intensity ``sum_p L_p(alloc_p)``."""
        alloc = np.asarray(alloc, dtype=np.int64)
        return float(self.curves[np.arange(self.P), alloc].sum())

    def gains(self):
        """``gains[p, s] = L_p(s) - L_p(s+1)``: saving from the (s+1)-th slot."""
        return self.curves[:, :-1] - self.curves[:, 1:]


def curves_from_workloads(workloads, K):
    return MissCurveSet(np.vstack([miss_curve(w, K) for w in workloads]))


def greedy_optimal(curves, budget):
    """Integer-optimal allocation by adding slots one at a time.

    Each slot goes to the provider whose miss intensity drops the most;
    ties go to the lowest provider index.  Exact for separable convex
    curves.
    """
    if not 0 <= budget <= curves.K:
        raise ValueError(f"budget must lie in [0, {curves.K}], got {budget}")
    gains = curves.gains().tolist()
    alloc = [0] * curves.P
    if budget == 0:
        return np.zeros(curves.P, dtype=np.int64)
    K = curves.K
    heap = [(-gains[p][0], p) for p in range(curves.P)]
    heapq.heapify(heap)
    for _ in range(budget):
        _, p = heapq.heappop(heap)
        alloc[p] += 1
        s = alloc[p]
        heapq.heappush(heap, (-gains[p][s] if s < K else math.inf, p))
    return np.array(alloc, dtype=np.int64)


@lru_cache(maxsize=64)
def _compositions(P, budget):
    # all nonnegative integer vectors of length P with sum <= budget,
    # in lexicographic order
    return np.array(list(_weak_le(P, budget)), dtype=np.int64).reshape(-1, P)


def _weak_le(P, budget):
    if P == 1:
        for s in range(budget + 1):
            yield (s,)
        return
    for first in range(budget + 1):
        for rest in _weak_le(P - 1, budget - first):
            yield (first,) + rest


def brute_force_optimal(curves, budget):
    """Exhaustive minimizer of the total miss intensity over ``sum <= budget``.

    Ties resolve to the lexicographically smallest allocation.  Refuses
    instances with more than ``BRUTE_FORCE_LIMIT`` candidates.
    """
    if not 0 <= budget <= curves.K:
        raise ValueError(f"budget must lie in [0, {curves.K}], got {budget}")
    if math.comb(budget + curves.P, curves.P) > BRUTE_FORCE_LIMIT:
        raise ValueError("instance too large for brute force")
    cands = _compositions(curves.P, budget)
    totals = curves.curves[np.arange(curves.P), cands].sum(axis=1)
    best = totals.min()
    # argmin over a lexicographically ordered table picks the smallest tie
    return cands[int(np.flatnonzero(totals == best)[0])].copy()


def interpolant_minimizer(curves, budget_real, grid=1 / 64):
    """Minimize the piecewise-linear interpolant of the curves on ``sum = budget_real``.

    The budget is handed out in increments of ``grid`` slots, each to the
    provider with the steepest descent on its current unit segment (ties to
    the lowest index).  Marginal costs are nondecreasing along each
    segment chain, so the greedy is exact.  ``1 / grid`` must be an
    integer.
    """
    steps_per_slot = Fraction(1) / Fraction(grid).limit_denominator(10**6)
    if steps_per_slot.denominator != 1:
        raise ValueError("grid must divide 1")
    n = int(steps_per_slot)
    units = round(budget_real * n)
    if units < 0 or units > curves.K * n:
        raise ValueError("budget outside the tabulated range")
    gains = curves.gains()
    pos = np.zeros(curves.P, dtype=np.int64)
    heap = [(-gains[p, 0], p) for p in range(curves.P)]
    heapq.heapify(heap)
    remaining = units
    while remaining:
        _, p = heapq.heappop(heap)
        # p keeps the best key for the rest of its unit segment (constant
        # slope, and equal slopes elsewhere have a larger index), so the
        # per-increment greedy would spend the whole segment on p
        take = min(n - pos[p] % n, remaining)
        pos[p] += take
        remaining -= take
        seg = pos[p] // n
        nxt = gains[p, seg] if seg < curves.K else -math.inf
        heapq.heappush(heap, (-nxt, p))
    return pos / n


def error_metric(theta, theta_opt, K):
    """Normalized sup-norm distance ``max_p |theta_p - theta_opt_p| / K``."""
    theta = np.asarray(theta, dtype=float)
    theta_opt = np.asarray(theta_opt, dtype=float)
    if theta.shape != theta_opt.shape:
        raise ValueError("allocation lengths differ")
    return float(np.max(np.abs(theta - theta_opt))) / K


def uniform_allocation(P, K):
    """``floor(K/P)`` slots each, the remainder to the first providers."""
    if P < 1:
        raise ValueError("P must be >= 1")
    base, extra = divmod(int(K), P)
    alloc = np.full(P, base, dtype=np.int64)
    alloc[:extra] += 1
    return alloc
