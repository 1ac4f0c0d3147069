"""
Closed-form costs for scenarios where capacity never binds, and for the two-slot adversary.
These do not touch the LP solver, so they check it from the outside.
"""

from __future__ import annotations

from typing import Dict

import numpy as np

from src.model import CloudConfig, DeadlineMode, PriceTrace, WorkloadTrace, window_end


def capacity_is_slack(cloud: CloudConfig, work: WorkloadTrace) -> bool:
    """Every slot can absorb all D+1 releases that may target it."""
    return float(work.released.max()) <= float(cloud.capacity.min()) / (cloud.horizon + 1) + 1e-12


def window_min_cost(cloud: CloudConfig, prices: PriceTrace, work: WorkloadTrace,
                    mode: DeadlineMode = DeadlineMode.UNIFORM) -> float:
    """Offline optimum when capacity is slack: each release runs at the cheapest (site, slot) of its window."""
    T, D = work.T, cloud.horizon
    beta = prices.beta[:, :T]
    total = float(cloud.alpha.sum()) * T
    cheapest_per_slot = beta.min(axis=0)
    for t in range(T):
        if mode == DeadlineMode.NONUNIFORM:
            classes = work.released_by_deadline
            for d in range(classes.shape[0]):
                if classes[d, t] > 0:
                    last = window_end(t, min(d, D), T)
                    total += classes[d, t] * cheapest_per_slot[t:last + 1].min()
        else:
            total += work.released[t] * cheapest_per_slot[t:window_end(t, D, T) + 1].min()
    return total


def greedy_cost(cloud: CloudConfig, prices: PriceTrace, work: WorkloadTrace) -> float:
    """Greedy cost when every release fits in one data center."""
    beta = prices.beta[:, :work.T]
    return float(cloud.alpha.sum()) * work.T + float(work.released @ beta.min(axis=0))


def adversary_costs(case: int, horizon: int, capacity: float, ratio: float = 3.0,
                    cheap: float = 1.0, expensive: float = 100.0) -> Dict[str, float]:
    """
    Costs on adversarial_case for D >= 2. The online pipeline with exact prices defers the first
    release to the cheap slot; in case 1 the second release then has only expensive slots left.
    """
    assert horizon >= 2
    first = ratio * cheap
    if case == 1:
        return {
            "offline": capacity * (first + cheap),
            "greedy": capacity * (first + expensive),
            "online": capacity * (cheap + expensive),
        }
    return {"offline": capacity * cheap, "greedy": capacity * first, "online": capacity * cheap}


def competitive_ratio(costs: Dict[str, float]) -> float:
    return costs["online"] / costs["offline"]


def random_instance(rng: np.random.Generator):
    """Small instance with a few free migration pairs; releases always fit their windows."""
    n = int(rng.integers(1, 4))
    T = int(rng.integers(2, 13))
    D = int(rng.integers(0, 4))
    capacity = rng.integers(5, 20, size=n).astype(float)
    rate = rng.integers(0, 3, size=(n, n)).astype(float)
    np.fill_diagonal(rate, 0.0)
    cloud = CloudConfig(capacity, np.zeros(n), rate, D)
    beta = rng.integers(1, 10, size=(n, T)).astype(float)
    limit = float(capacity.sum()) / (D + 1)
    released = np.round(rng.uniform(0.0, limit, size=T), 2)
    return cloud, PriceTrace(beta), WorkloadTrace(released)
