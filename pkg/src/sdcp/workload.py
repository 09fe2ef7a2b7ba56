"""Synthetic content-provider demand.

Each provider owns a disjoint sub-catalog whose object popularity follows a
Zipf law and receives requests as a Poisson process.  A provider given
``s`` slots caches its ``s`` most popular (active) objects, so its expected
miss intensity is ``rate * (1 - cumulative popularity of the top s)``.

Measurements do not simulate individual objects: per half-slot the request
count is Poisson and the miss count binomial with the exact per-request
miss probability, which has the same distribution as an ideally placed
cache.

In nonstationary mode every object alternates between ON and OFF periods
with exponential durations; only ON objects attract requests.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class Popularity:
    probs: np.ndarray
    alpha: float

    @property
    def n_objects(self):
        return self.probs.size


def zipf_popularity(n, alpha):
    """Zipf request probabilities ``p_i ~ (i+1) ** -alpha`` for ``n`` objects."""
    if n < 1:
        raise ValueError(f"catalog size must be >= 1, got {n}")
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    w = np.arange(1, n + 1, dtype=float) ** -float(alpha)
    return Popularity(probs=w / w.sum(), alpha=float(alpha))


@dataclass(frozen=True)
class CpWorkload:
    """Demand of one content provider.

    ``rate`` is in requests per second.  ``active_mask`` marks the objects
    currently ON (``None`` means all of them, the stationary case).
    ``weight`` is the provider's request share with its full catalog ON;
    it is only used to rescale rates under churn.
    """
    rate: float
    popularity: Popularity
    active_mask: np.ndarray | None = None
    weight: float = 0.0
    _cache: tuple = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError(f"request rate must be nonnegative, got {self.rate}")

    @property
    def n_objects(self):
        return self.popularity.n_objects

    def _stats(self):
        # (hit cdf, active popularity mass); independent of the rate
        if self._cache is None:
            probs = self.popularity.probs
            if self.active_mask is not None:
                probs = probs[self.active_mask]
            cdf = np.zeros(probs.size + 1)
            np.cumsum(probs, out=cdf[1:])
            total = float(cdf[-1])
            if total > 0:
                cdf /= total
                cdf[-1] = 1.0
            else:
                cdf[:] = 1.0
            object.__setattr__(self, "_cache", (cdf, total))
        return self._cache

    def hit_cdf(self):
        """``hit_cdf()[s]``: probability that a request hits the top ``s`` objects."""
        return self._stats()[0]

    @property
    def active_mass(self):
        """Popularity mass of the ON objects (1 for a fully active catalog)."""
        return 1.0 if self.active_mask is None else self._stats()[1]

    def with_rate(self, rate):
        """Copy with a new request rate, sharing the cached popularity tables."""
        out = replace(self, rate=rate)
        object.__setattr__(out, "_cache", self._cache)
        return out

    def miss_probability(self, slots):
        cdf = self.hit_cdf()
        return 1.0 - cdf[min(int(slots), cdf.size - 1)]


def miss_intensity(w, slots):
    """Expected misses per second of provider ``w`` holding ``slots`` slots.

    Slot counts beyond the (active) catalog are clamped: the whole catalog
    is cached and the result is 0.
    """
    if slots < 0:
        raise ValueError("slot count must be nonnegative")
    return w.rate * w.miss_probability(slots)


def miss_curve(w, K):
    """Vector ``[L(0), ..., L(K)]`` of expected miss intensities."""
    cdf = w.hit_cdf()
    s = np.minimum(np.arange(K + 1), cdf.size - 1)
    return w.rate * (1.0 - cdf[s])


def build_workloads(shares, total_rate, catalog_size, alpha):
    """Split a catalog into equal disjoint Zipf sub-catalogs, one per provider.

    The first ``catalog_size % P`` providers get one extra object.
    """
    shares = np.asarray(shares, dtype=float)
    P = shares.size
    base, extra = divmod(int(catalog_size), P)
    out = []
    for p, share in enumerate(shares):
        n = base + (1 if p < extra else 0)
        out.append(CpWorkload(rate=total_rate * share,
                              popularity=zipf_popularity(max(n, 1), alpha),
                              weight=share))
    return out


def sample_requests_misses(workloads, alloc, duration, rng):
    """Draw request and miss counts for each provider over ``duration`` seconds."""
    rates = np.array([w.rate for w in workloads])
    pmiss = np.array([w.miss_probability(s) for w, s in zip(workloads, alloc)])
    requests = rng.poisson(rates * duration)
    misses = rng.binomial(requests, np.clip(pmiss, 0.0, 1.0))
    return requests, misses


def measure_miss_rates(workloads, alloc, duration, rng):
    """Measured miss rate (misses per second) of each provider under ``alloc``."""
    if not duration > 0:
        raise ValueError("measurement duration must be positive")
    _, misses = sample_requests_misses(workloads, alloc, duration, rng)
    return misses / duration


@dataclass(frozen=True)
class OnOffModel:
    mean_on: float
    mean_off: float
    target_total_rate: float

    def __post_init__(self):
        if not (self.mean_on > 0 and self.mean_off > 0):
            raise ValueError("mean ON and OFF durations must be positive")
        if self.target_total_rate < 0:
            raise ValueError("target rate must be nonnegative")

    @property
    def on_fraction(self):
        return self.mean_on / (self.mean_on + self.mean_off)

    def flip_probabilities(self, dt):
        """Probabilities ``(on->off, off->on)`` of being in the other state after ``dt``.

        Exact for the two-state continuous-time chain, multiple flips
        within ``dt`` included.
        """
        r_off, r_on = 1.0 / self.mean_on, 1.0 / self.mean_off
        total = r_off + r_on
        mix = -np.expm1(-total * dt)
        return r_off / total * mix, r_on / total * mix


def rescale_rates(model, workloads):
    """Set provider rates so active demand sums to ``model.target_total_rate``.

    Each provider's raw demand is its weight times the popularity mass of
    its ON objects.
    """
    raw = [w.weight * w.active_mass for w in workloads]
    total = sum(raw)
    scale = model.target_total_rate / total if total > 0 else 0.0
    return [w.with_rate(r * scale) for w, r in zip(workloads, raw)]


def init_catalog(model, workloads, rng):
    """Draw each object's initial ON/OFF state from the stationary law."""
    out = []
    for w in workloads:
        mask = rng.random(w.n_objects) < model.on_fraction
        out.append(replace(w, active_mask=mask))
    return rescale_rates(model, out)


def _pick(mask, state, count, rng):
    """``count`` distinct indices drawn uniformly among those with ``mask == state``."""
    if count == 0:
        return np.empty(0, dtype=np.int64)
    n_match = np.count_nonzero(mask) if state else mask.size - np.count_nonzero(mask)
    if 4 * count > n_match:
        return rng.choice(np.flatnonzero(mask == state), size=count, replace=False)
    # few flips among many candidates: rejection sampling is uniform and
    # avoids scanning the whole mask
    chosen = set()
    while len(chosen) < count:
        for i in rng.integers(0, mask.size, size=2 * count).tolist():
            if mask[i] == state and i not in chosen:
                chosen.add(i)
                if len(chosen) == count:
                    break
    return np.fromiter(chosen, dtype=np.int64, count=count)


def advance_catalog(model, workloads, dt, rng):
    """Advance every object's ON/OFF state by ``dt`` seconds.

    Returns new workloads; providers whose active set did not change are
    passed through as the same objects.  Rates are rescaled whenever any
    object flipped.
    """
    if dt <= 0:
        return list(workloads)
    p_off, p_on = model.flip_probabilities(dt)
    out = []
    changed = False
    for w in workloads:
        mask = w.active_mask
        if mask is None:
            mask = np.ones(w.n_objects, dtype=bool)
        n_on = int(np.count_nonzero(mask))
        to_off = rng.binomial(n_on, p_off)
        to_on = rng.binomial(mask.size - n_on, p_on)
        if to_off == 0 and to_on == 0:
            out.append(w)
            continue
        flip_off = _pick(mask, True, to_off, rng)
        flip_on = _pick(mask, False, to_on, rng)
        mask = mask.copy()
        mask[flip_off] = False
        mask[flip_on] = True
        out.append(replace(w, active_mask=mask))
        changed = True
    return rescale_rates(model, out) if changed else out
