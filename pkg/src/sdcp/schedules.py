"""Step-size sequences for the projected update.

Three sequences are provided:

* ``RECIPROCAL``: ``a_k = a / k``.
* ``MODERATE``: ``a_k = a_{k-1} * (1 - 1/(1 + M + k)) ** (1/2 + nu)``.
* ``CONDITIONAL``: constant during a bootstrap phase, then a linear descent
  from ``a`` to ``b = a * b_ratio`` that is accelerated (halved) whenever the
  slot's miss ratio falls at or below the 5th percentile of the ones seen so
  far, then a slowly vanishing tail ``a_{k-1} * (1 - 1/(1 + k)) ** (1/2 + nu)``.

The initial value ``a`` is derived from the first update vector so that the
first move has a size of about ``K'/P`` slots.  With a reinitialization period
the whole sequence restarts from the update vector of the slot that crosses a
period boundary.

Schedule state is a small mutable record; ``next_step`` advances it in place
and also returns it for convenience.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

# wall-clock phase lengths used to derive k_bs and M from the slot length
BOOTSTRAP_DURATION = 360.0
ADAPTIVE_DURATION = 3600.0


class ScheduleKind(str, Enum):
    RECIPROCAL = "reciprocal"
    MODERATE = "moderate"
    CONDITIONAL = "conditional"


@dataclass(frozen=True)
class ScheduleConfig:
    kind: ScheduleKind = ScheduleKind.CONDITIONAL
    nu: float = 0.01
    M: int = 360
    k_bs: int = 36
    b_ratio: float = 0.1
    reinit_period: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ScheduleKind(self.kind))
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not 0 < self.b_ratio < 1:
            raise ValueError(f"b_ratio must lie in (0, 1), got {self.b_ratio}")
        if self.k_bs < 1 or self.M <= self.k_bs:
            raise ValueError(
                f"need 1 <= k_bs < M, got k_bs={self.k_bs}, M={self.M}")
        if self.reinit_period is not None and not self.reinit_period > 0:
            raise ValueError("reinit_period must be positive")

    @classmethod
    def for_slot_length(cls, T, kind=ScheduleKind.CONDITIONAL,
                        bootstrap=BOOTSTRAP_DURATION,
                        adaptive=ADAPTIVE_DURATION, **kwargs):
        """Build a config whose phase ends are wall-clock durations.

        ``k_bs`` and ``M`` are the number of whole slots of length ``T``
        fitting in ``bootstrap`` and ``adaptive`` seconds, clamped so that
        ``1 <= k_bs < M``.
        """
        k_bs = max(1, int(bootstrap // T))
        M = max(k_bs + 1, int(adaptive // T))
        return cls(kind=kind, k_bs=k_bs, M=M, **kwargs)


@dataclass
class ScheduleState:
    a_current: float
    k: int
    a_init: float
    b: float
    init_time: float = 0.0
    miss_ratio_history: list = field(default_factory=list)
    # same values as miss_ratio_history, kept sorted for percentile queries
    _sorted_history: list = field(default_factory=list, repr=False)


def initial_step(cfg, g1, budget, P):
    g1 = np.asarray(g1, dtype=float)
    if cfg.kind is ScheduleKind.CONDITIONAL:
        norm = np.abs(g1).sum()
        scale = budget / P * (P / norm) if norm > 0 else None
    else:
        norm = math.sqrt(float(g1 @ g1))
        scale = budget / P / norm if norm > 0 else None
    # a zero first update carries no scale information
    return 1.0 if scale is None or scale <= 0 else scale


def init_from_first_update(cfg, g1, budget, P, sim_time=0.0):
    """Start a schedule from the first update vector ``g1``.

    Reciprocal and Moderate use ``a = (K'/P) / ||g1||_2``; Conditional uses
    ``a = (P / ||g1||_1) * (K'/P)``.  A zero ``g1`` gives ``a = 1``.
    """
    a = initial_step(cfg, g1, budget, P)
    return ScheduleState(a_current=a, k=1, a_init=a, b=a * cfg.b_ratio,
                         init_time=sim_time)


def nearest_rank_percentile(sorted_values, q):
    """Nearest-rank ``q``-th percentile (``q`` in percent) of sorted data."""
    n = len(sorted_values)
    rank = max(1, -(-q * n // 100))
    return sorted_values[rank - 1]


def next_step(state, cfg, miss_ratio_k):
    """Return ``(a_k, state)`` for the current iteration ``state.k``.

    ``miss_ratio_k`` is the miss ratio measured during this iteration; it is
    compared against the history (Conditional adaptive phase only) and then
    appended to it.  The state is advanced in place.
    """
    if not 0.0 <= miss_ratio_k <= 1.0:
        raise ValueError(f"miss ratio must lie in [0, 1], got {miss_ratio_k}")
    k = state.k
    a_prev = state.a_current
    if k == 1:
        a_k = state.a_init
    elif cfg.kind is ScheduleKind.RECIPROCAL:
        a_k = state.a_init / k
    elif cfg.kind is ScheduleKind.MODERATE:
        a_k = a_prev * (1 - 1 / (1 + cfg.M + k)) ** (0.5 + cfg.nu)
    elif k <= cfg.k_bs:
        a_k = state.a_init
    elif k <= cfg.M:
        m5 = nearest_rank_percentile(state._sorted_history, 5)
        a_tilde = a_prev - (a_prev - state.b) / (cfg.M - k + 1)
        if miss_ratio_k <= m5:
            a_k = max(min(a_prev / 2, a_tilde), state.b)
        else:
            a_k = a_tilde
    else:
        a_k = a_prev * (1 - 1 / (1 + k)) ** (0.5 + cfg.nu)

    state.a_current = a_k
    state.miss_ratio_history.append(miss_ratio_k)
    bisect.insort(state._sorted_history, miss_ratio_k)
    state.k = k + 1
    return a_k, state


def maybe_reinitialize(state, cfg, sim_time, next_g, budget, P):
    """Restart the schedule if ``sim_time`` crossed a reinit boundary.

    Boundaries are the multiples of ``cfg.reinit_period``; the restart uses
    ``next_g`` as the first update vector and clears the miss-ratio history.
    """
    tau = cfg.reinit_period
    if tau is None or math.isinf(tau):
        return state
    if math.floor(sim_time / tau) > math.floor(state.init_time / tau):
        return init_from_first_update(cfg, next_g, budget, P, sim_time=sim_time)
    return state
