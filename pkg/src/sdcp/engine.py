"""Time-slot simulation of the partitioning algorithm and its baselines."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from sdcp.allocation import (
    FEASIBILITY_TOL,
    check_integer,
    check_virtual,
    compute_update,
    make_test_allocations,
    project_simplex,
    reduced_budget,
    sample_perturbation,
    sdcp_step,
)
from sdcp.oracle import curves_from_workloads, error_metric, greedy_optimal
from sdcp.schedules import (
    ScheduleConfig,
    init_from_first_update,
    maybe_reinitialize,
    next_step,
)
from sdcp.workload import (
    CpWorkload,
    OnOffModel,
    advance_catalog,
    build_workloads,
    init_catalog,
    sample_requests_misses,
    zipf_popularity,
)


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class ExperimentConfig:
    cp_shares: tuple
    K: int
    T: float = 10.0
    horizon: float = 3600.0
    total_rate: float = 100.0
    catalog_size: int = 10**5
    alpha: float = 0.8
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    nonstationary: OnOffModel | None = None
    seed: int = 0
    replications: int = 1
    initial_allocation: str | tuple = "uniform"

    def __post_init__(self):
        object.__setattr__(self, "cp_shares",
                           tuple(float(s) for s in self.cp_shares))
        if not isinstance(self.initial_allocation, str):
            object.__setattr__(self, "initial_allocation",
                               tuple(float(x) for x in self.initial_allocation))
        self.validate()

    @property
    def P(self):
        return len(self.cp_shares)

    def validate(self):
        shares = np.asarray(self.cp_shares)
        if shares.size < 1:
            raise ConfigError("cp_shares", "at least one provider required")
        if np.any(shares < 0) or abs(shares.sum() - 1) > 1e-9:
            raise ConfigError("cp_shares",
                              f"must be nonnegative and sum to 1, got {shares.sum():g}")
        if int(self.K) != self.K or self.K < 0:
            raise ConfigError("K", f"must be a nonnegative integer, got {self.K}")
        if self.K < padded_P(self.P) / 2:
            raise ConfigError("K", "must be at least P/2")
        if not self.T > 0:
            raise ConfigError("T", "slot length must be positive")
        if not self.horizon >= self.T:
            raise ConfigError("horizon", "must be at least one slot long")
        if self.total_rate < 0:
            raise ConfigError("total_rate", "must be nonnegative")
        if self.catalog_size < self.P:
            raise ConfigError("catalog_size", "need at least one object per provider")
        if self.alpha < 0:
            raise ConfigError("alpha", "must be nonnegative")
        if self.replications < 1:
            raise ConfigError("replications", "must be >= 1")
        init = self.initial_allocation
        if isinstance(init, str):
            if init != "uniform":
                raise ConfigError("initial_allocation",
                                  f"expected 'uniform' or a vector, got {init!r}")
        elif len(init) != self.P or min(init) < 0:
            raise ConfigError("initial_allocation",
                              f"expected {self.P} nonnegative values")

    def with_overrides(self, **kwargs):
        return replace(self, **kwargs)


def padded_P(P):
    """Provider count after adding a zero-rate provider to make it even."""
    return P + P % 2


@dataclass
class SlotRecord:
    k: int
    sim_time: float
    theta: np.ndarray
    theta_plus: np.ndarray
    theta_minus: np.ndarray
    y_plus: np.ndarray
    y_minus: np.ndarray
    g_hat: np.ndarray
    a_k: float
    miss_ratio: float
    error: float


@dataclass
class Trace:
    records: list
    label: str = "sdcp"
    seed: int = 0

    @property
    def P(self):
        return self.records[0].theta.size

    def _window(self, since, until):
        return [r for r in self.records
                if (since is None or r.sim_time > since)
                and (until is None or r.sim_time <= until)]

    def mean_miss_ratio(self, since=None, until=None):
        """Average per-slot miss ratio over slots ending in ``(since, until]``."""
        recs = self._window(since, until)
        return float(np.mean([r.miss_ratio for r in recs]))

    def mean_error(self, since=None, until=None):
        recs = self._window(since, until)
        return float(np.mean([r.error for r in recs]))

    def average_allocation(self):
        """Component-wise average of the allocation over all slots."""
        return np.mean([r.theta for r in self.records], axis=0)

    @property
    def summary(self):
        return {
            "miss_ratio": self.mean_miss_ratio(),
            "error": self.mean_error(),
            "average_allocation": self.average_allocation(),
        }


def make_workloads(cfg):
    real = build_workloads(cfg.cp_shares, cfg.total_rate, cfg.catalog_size,
                           cfg.alpha)
    if cfg.P % 2:
        # a fictitious provider that never receives requests keeps P even
        real.append(CpWorkload(rate=0.0, popularity=zipf_popularity(1, cfg.alpha)))
    return real


def _pad(vec, P):
    out = np.zeros(P)
    out[:len(vec)] = vec
    return out


def initial_theta(cfg):
    P = padded_P(cfg.P)
    budget = reduced_budget(cfg.K, P)
    if cfg.initial_allocation == "uniform":
        return np.full(P, budget / P)
    v = _pad(cfg.initial_allocation, P)
    return project_simplex(v + (budget - v.sum()) / P, budget)


class _Environment:
    """Workloads plus the matching optimal allocation, kept in sync."""

    def __init__(self, cfg, rng):
        self.cfg = cfg
        self.model = None
        self.workloads = make_workloads(cfg)
        if cfg.nonstationary is not None:
            self.model = cfg.nonstationary
            self.workloads = init_catalog(self.model, self.workloads, rng)
        self._refresh_opt()

    def _refresh_opt(self):
        self.opt = greedy_optimal(curves_from_workloads(self.workloads, self.cfg.K),
                                  self.cfg.K)

    def advance(self, rng):
        if self.model is None:
            return
        new = advance_catalog(self.model, self.workloads, self.cfg.T, rng)
        if any(a is not b for a, b in zip(new, self.workloads)):
            self.workloads = new
            self._refresh_opt()


def _miss_ratio(requests, misses):
    total = requests.sum()
    return float(misses.sum() / total) if total > 0 else 0.0


def n_slots(cfg):
    return int(math.floor(cfg.horizon / cfg.T + 1e-9))


def run_experiment(cfg, seed=None, check=True):
    """Run the partitioning algorithm for ``floor(horizon / T)`` slots.

    Every slot: draw a perturbation, build the two test allocations,
    measure each for ``T/2``, form the update vector, take the scheduled
    projected step, possibly restart the schedule, and advance the catalog
    when churn is on.  The schedule is created from the first slot's update
    vector before the first step is taken.

    With ``check`` set the feasibility invariants are re-asserted each slot.
    """
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    P = padded_P(cfg.P)
    K = cfg.K
    budget = reduced_budget(K, P)
    half = cfg.T / 2
    sched = cfg.schedule
    env = _Environment(cfg, rng)
    theta = initial_theta(cfg)
    state = None
    records = []
    for k in range(1, n_slots(cfg) + 1):
        d = sample_perturbation(P, rng)
        plus, minus = make_test_allocations(theta, d)
        req_p, miss_p = sample_requests_misses(env.workloads, plus, half, rng)
        req_m, miss_m = sample_requests_misses(env.workloads, minus, half, rng)
        y_plus, y_minus = miss_p / half, miss_m / half
        g = compute_update(y_plus - y_minus, d)
        m = _miss_ratio(req_p + req_m, miss_p + miss_m)
        if state is None:
            state = init_from_first_update(sched, g, budget, P)
        a_k, state = next_step(state, sched, m)
        theta_next = sdcp_step(theta, g, a_k, budget)
        sim_time = k * cfg.T
        state = maybe_reinitialize(state, sched, sim_time, g, budget, P)
        if check:
            check_integer(plus, K)
            check_integer(minus, K)
            check_virtual(theta_next, budget)
            if abs(g.sum()) > FEASIBILITY_TOL:
                raise AssertionError(f"update vector sums to {g.sum()!r}")
        records.append(SlotRecord(
            k=k, sim_time=sim_time, theta=theta, theta_plus=plus,
            theta_minus=minus, y_plus=y_plus, y_minus=y_minus, g_hat=g,
            a_k=a_k, miss_ratio=m, error=error_metric(theta, env.opt, K)))
        env.advance(rng)
        theta = theta_next
    return Trace(records, label=sched.kind.value, seed=seed)


def run_baseline(cfg, alloc, seed=None, label="baseline"):
    """Measure a fixed integer allocation with the same slot structure.

    ``alloc`` may omit the fictitious provider added for odd ``P``.
    Records carry ``a_k = 0`` and a zero update vector.
    """
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    P = padded_P(cfg.P)
    alloc = _pad(alloc, P).astype(np.int64)
    check_integer(alloc, cfg.K)
    half = cfg.T / 2
    env = _Environment(cfg, rng)
    theta = alloc.astype(float)
    zeros = np.zeros(P)
    records = []
    for k in range(1, n_slots(cfg) + 1):
        req_p, miss_p = sample_requests_misses(env.workloads, alloc, half, rng)
        req_m, miss_m = sample_requests_misses(env.workloads, alloc, half, rng)
        records.append(SlotRecord(
            k=k, sim_time=k * cfg.T, theta=theta, theta_plus=alloc,
            theta_minus=alloc, y_plus=miss_p / half, y_minus=miss_m / half,
            g_hat=zeros, a_k=0.0,
            miss_ratio=_miss_ratio(req_p + req_m, miss_p + miss_m),
            error=error_metric(theta, env.opt, cfg.K)))
        env.advance(rng)
    return Trace(records, label=label, seed=seed)


def optimal_allocation(cfg):
    """Integer-optimal allocation for the configured stationary workload."""
    workloads = make_workloads(cfg)
    return greedy_optimal(curves_from_workloads(workloads, cfg.K), cfg.K)


@dataclass(frozen=True)
class Aggregate:
    mean: float
    ci_low: float
    ci_high: float
    n: int

    @property
    def half_width(self):
        return (self.ci_high - self.ci_low) / 2


def confidence_interval(values, level=0.95):
    """Mean and Student-t confidence interval; degenerate for one sample."""
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    n = values.size
    if n < 2:
        return Aggregate(mean, mean, mean, n)
    sem = values.std(ddof=1) / math.sqrt(n)
    h = float(stats.t.ppf(0.5 + level / 2, n - 1) * sem)
    return Aggregate(mean, mean - h, mean + h, n)


def _run_one(args):
    kind, cfg, seed, alloc, label = args
    if kind == "sdcp":
        return run_experiment(cfg, seed=seed)
    return run_baseline(cfg, alloc, seed=seed, label=label)


def run_replications(cfg, alloc=None, label="baseline", jobs=1, seeds=None,
                     metric=None):
    """Run ``cfg.replications`` independent runs with seeds ``seed + i``.

    Without ``alloc`` each run is the algorithm; with it, a fixed-allocation
    baseline.  ``metric`` maps a trace to the scalar aggregated into the
    confidence interval (default: its mean miss ratio).

    Returns
    -------
    traces : list of Trace
    aggregate : Aggregate
    """
    if seeds is None:
        seeds = [cfg.seed + i for i in range(cfg.replications)]
    kind = "sdcp" if alloc is None else "baseline"
    tasks = [(kind, cfg, s, alloc, label) for s in seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            traces = list(pool.map(_run_one, tasks))
    else:
        traces = [_run_one(t) for t in tasks]
    metric = metric or (lambda tr: tr.mean_miss_ratio())
    return traces, confidence_interval([metric(tr) for tr in traces])
