"""Core arithmetic of stochastic dynamic cache partitioning.

The algorithm keeps a real-valued *virtual* allocation ``theta`` on the
scaled simplex ``{x >= 0, sum(x) = K'}`` with ``K' = K - P/2``.  Each time
slot it rounds ``theta`` to the centre of its unit hypercube, perturbs the
centre by a random zero-sum +/-1 vector to get two integer test allocations,
measures per-provider miss rates under each, and moves ``theta`` along the
resulting update vector before projecting back onto the simplex.

Vectors are plain numpy arrays.  The ``check_*`` helpers enforce the
invariants of each kind of vector and raise ``AllocationError`` on
violation.
"""
from __future__ import annotations

import numpy as np

FEASIBILITY_TOL = 1e-9


class AllocationError(ValueError):
    """An allocation vector violates its invariants."""


def reduced_budget(K, P):
    """Return ``K' = K - P/2``, the slots the virtual allocation spreads."""
    return K - P / 2


def check_virtual(theta, budget, tol=FEASIBILITY_TOL):
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1:
        raise AllocationError("virtual allocation must be a vector")
    if theta.size and theta.min() < 0:
        raise AllocationError(f"negative component in virtual allocation {theta}")
    if abs(theta.sum() - budget) > tol:
        raise AllocationError(
            f"virtual allocation sums to {theta.sum()!r}, expected {budget!r}")
    return theta


def check_integer(slots, K):
    slots = np.asarray(slots)
    if slots.ndim != 1 or slots.dtype.kind not in "iu":
        raise AllocationError("integer allocation must be an integer vector")
    if slots.size and slots.min() < 0:
        raise AllocationError(f"negative slot count in {slots}")
    if slots.sum() > K:
        raise AllocationError(f"allocation {slots} uses more than {K} slots")
    return slots


def check_perturbation(d):
    d = np.asarray(d)
    if d.ndim != 1 or not np.all((d == 1) | (d == -1)):
        raise AllocationError("perturbation entries must be -1 or +1")
    if d.sum() != 0:
        raise AllocationError("perturbation vector must sum to zero")
    return d


def sample_perturbation(P, rng):
    """Draw a zero-sum +/-1 vector uniformly at random.

    Every one of the ``C(P, P/2)`` vectors with exactly ``P/2`` entries equal
    to +1 is equally likely.

    Parameters
    ----------
    P : int
        Number of providers; must be even and at least 2.
    rng : numpy.random.Generator
        Source of randomness.
    """
    if P < 2 or P % 2:
        raise ValueError(f"P must be even and >= 2, got {P}")
    half = P // 2
    d = np.empty(P, dtype=np.int64)
    d[:half] = 1
    d[half:] = -1
    return rng.permutation(d)


def center_point(theta):
    """Centre of the unit hypercube containing ``theta``: ``floor(theta) + 1/2``."""
    return np.floor(theta) + 0.5


def make_test_allocations(theta, d):
    """Return the pair of integer allocations probed during one slot.

    ``theta_plus = center_point(theta) + d/2`` and
    ``theta_minus = center_point(theta) - d/2``.  For ``theta`` on the
    reduced simplex both are nonnegative and use at most ``K' + P/2 = K``
    slots.
    """
    base = np.floor(theta).astype(np.int64)
    up = (np.asarray(d) > 0).astype(np.int64)
    return base + up, base + (1 - up)


def compute_update(delta_y, d):
    """Update vector ``dy * d - (dy . d / P) * 1``.

    ``delta_y`` holds the per-provider difference between the miss rates
    measured under the plus and the minus allocation.  The result sums to
    zero, so a step along it stays on the hyperplane ``sum = K'``.
    """
    delta_y = np.asarray(delta_y, dtype=float)
    d = np.asarray(d, dtype=float)
    if delta_y.shape != d.shape:
        raise ValueError("delta_y and d must have the same length")
    h = delta_y * d
    return h - h.sum() / h.size


def project_simplex(v, budget):
    """Euclidean projection of ``v`` onto ``{x >= 0, sum(x) = budget}``.

    Sort-based: with ``u`` sorted in decreasing order, the threshold is
    ``tau = (sum(u[:r]) - budget) / r`` for the largest ``r`` such that
    ``u[r-1] > tau``; the projection is ``max(v - tau, 0)``.

    Points already feasible to within rounding are returned unchanged,
    which makes the projection exactly idempotent.

    Parameters
    ----------
    v : array_like
        Point to project.  Upstream callers pass points on the hyperplane,
        but any finite vector is accepted.
    budget : float
        Simplex scale ``K'``; must be nonnegative.

    Returns
    -------
    numpy.ndarray
    """
    if budget < 0:
        raise ValueError(f"budget must be nonnegative, got {budget}")
    v = np.asarray(v, dtype=float)
    tol = max(1e-10, 64 * np.finfo(float).eps * abs(budget))
    if v.min() >= 0 and abs(v.sum() - budget) <= tol:
        return v.copy()
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - budget
    r = np.arange(1, v.size + 1)
    active = np.nonzero(u * r > css)[0]
    # empty only when budget == 0; the threshold then zeroes everything
    rho = active[-1] if active.size else 0
    tau = css[rho] / (rho + 1)
    return np.maximum(v - tau, 0.0)


def sdcp_step(theta, g_hat, a_k, budget):
    """One projected update ``project_simplex(theta - a_k * g_hat)``.

    A zero update returns ``theta`` unchanged.
    """
    if not a_k > 0:
        raise ValueError(f"step size must be positive, got {a_k}")
    g_hat = np.asarray(g_hat, dtype=float)
    if not g_hat.any():
        return np.array(theta, dtype=float)
    return project_simplex(theta - a_k * g_hat, budget)
