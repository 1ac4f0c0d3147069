"""
Offline optimum with full knowledge of prices and releases.

Two formulations share the same release constraints:
  - the full program over x[i, d, t] and z[i, j, d, t], as the migration-aware offline problem;
  - an aggregated program without migration over a[t, d] (release t run at t+d) and y[i, s],
    which has the same optimum because optimal offline plans never migrate.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

import numpy as np

from config.settings import TOLERANCES
from src.errors import DomainError, InfeasibleError
from src.lp_solver import LinearProgram, LpBuilder, LpSolution, OPTIMAL, INFEASIBLE, solve
from src.model import (
    CloudConfig, CostLedger, DeadlineMode, PriceTrace, SchedulerState, WorkloadTrace,
    clamp_slack, window_end,
)

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class OfflinePlan:
    x: np.ndarray          # (n, D+1, T)
    z: np.ndarray          # (n, n, D+1, T)
    y: np.ndarray          # (n, T)
    objective: float
    config: CloudConfig
    beta: np.ndarray       # (n, T) prices the plan was optimized for

    @property
    def horizon(self) -> int:
        return self.config.horizon

    @property
    def T(self) -> int:
        return self.y.shape[1]

    @property
    def migration_cost(self) -> float:
        rate = self.config.migration_rate.copy()
        np.fill_diagonal(rate, 0.0)
        return float((rate[:, :, None, None] * clamp_slack(self.z)).sum())

    def ledger(self) -> CostLedger:
        return CostLedger.from_tensors(self.config, self.beta, self.y, self.z)

    def to_state(self) -> SchedulerState:
        """Plan tensors as a SchedulerState whose executed load follows the plan rule."""
        state = SchedulerState.for_config(self.config, self.T, online=False)
        state.x[...] = self.x
        state.z[...] = self.z
        state.y[...] = self.y
        state.w[:, :self.T] = self.y
        state.u[:, :self.T] = self.y
        return state

    def to_dict(self) -> Dict:
        return {
            "objective": self.objective,
            "migration_cost": self.migration_cost,
            "executed": self.y.tolist(),
        }


def _check_inputs(config: CloudConfig, prices: PriceTrace, work: WorkloadTrace, mode: DeadlineMode):
    if prices.n != config.n:
        raise DomainError(f"price trace has {prices.n} locations, cloud has {config.n}")
    if prices.T < work.T:
        raise DomainError(f"price trace covers {prices.T} slots, workload needs {work.T}")
    if mode == DeadlineMode.NONUNIFORM and not work.is_nonuniform:
        raise DomainError("nonuniform mode needs released_by_deadline")


def _add_release_rows(builder: LpBuilder, t: int, classes: np.ndarray, last: int,
                      terms_at, mode: DeadlineMode):
    """
    Release balance for slot t. Uniform: everything released at t is placed somewhere in
    offsets 0..last. Nonuniform: by each offset d < last at least the classes due by d are
    placed, and the whole release by `last`.
    """
    total = float(classes.sum())
    if mode == DeadlineMode.NONUNIFORM:
        due = np.cumsum(classes)
        placed = []
        for d in range(last):
            placed.extend(terms_at(d))
            if due[d] > 0:
                builder.add_ge(list(placed), float(due[d]), name=f"due_{t}_{d}")
    all_terms = [term for d in range(last + 1) for term in terms_at(d)]
    builder.add_eq(all_terms, total, name=f"release_{t}")


def _build_full(config: CloudConfig, beta: np.ndarray, classes: np.ndarray, mode: DeadlineMode,
                with_migration: bool) -> LpBuilder:
    n, D = config.n, config.horizon
    T = classes.shape[1]
    builder = LpBuilder()
    builder.constant = float(config.alpha.sum() * T)

    for t in range(T):
        last = window_end(t, D, T) - t
        for d in range(last + 1):
            for i in range(n):
                builder.add_var(('x', i, d, t), cost=beta[i, t + d])
            if with_migration:
                for i in range(n):
                    for j in range(n):
                        if i != j:
                            cost = beta[j, t + d] - beta[i, t + d] + config.migration_rate[i, j]
                            builder.add_var(('z', i, j, d, t), cost=cost)
        _add_release_rows(builder, t, classes[:, t], last,
                          lambda d, t=t: [(('x', i, d, t), 1.0) for i in range(n)], mode)

    if with_migration:
        # migrations out of i for slot s decided by t never exceed assignments to i for s released by t
        for t in range(T):
            for d in range(window_end(t, D, T) - t + 1):
                for i in range(n):
                    moved, assigned = [], []
                    for k in range(D - d + 1):
                        r = t - k
                        if r < 0:
                            break
                        if builder.has(('x', i, d + k, r)):
                            assigned.append((('x', i, d + k, r), -1.0))
                            moved.extend((('z', i, j, d + k, r), 1.0) for j in range(n) if j != i)
                    builder.add_le(moved + assigned, 0.0, name=f"avail_{i}_{d}_{t}")

    for s in range(T):
        for i in range(n):
            terms = []
            for d in range(min(D, s) + 1):
                r = s - d
                if not builder.has(('x', i, d, r)):
                    continue
                terms.append((('x', i, d, r), 1.0))
                if with_migration:
                    for j in range(n):
                        if j != i:
                            terms.append((('z', j, i, d, r), 1.0))
                            terms.append((('z', i, j, d, r), -1.0))
            if terms:
                builder.add_le(terms, float(config.capacity[i]), name=f"cap_{i}_{s}")
    return builder


def _build_aggregated(config: CloudConfig, beta: np.ndarray, classes: np.ndarray,
                      mode: DeadlineMode) -> LpBuilder:
    n, D = config.n, config.horizon
    T = classes.shape[1]
    builder = LpBuilder()
    builder.constant = float(config.alpha.sum() * T)
    for t in range(T):
        last = window_end(t, D, T) - t
        for d in range(last + 1):
            builder.add_var(('a', t, d))
        _add_release_rows(builder, t, classes[:, t], last, lambda d, t=t: [(('a', t, d), 1.0)], mode)
    for s in range(T):
        for i in range(n):
            builder.add_var(('y', i, s), cost=beta[i, s], hi=config.capacity[i])
        terms = [(('y', i, s), 1.0) for i in range(n)]
        terms += [(('a', s - d, d), -1.0) for d in range(min(D, s) + 1) if builder.has(('a', s - d, d))]
        builder.add_eq(terms, 0.0, name=f"slot_{s}")
    return builder


def _prepare(config, prices, work, mode):
    mode = DeadlineMode.parse(mode)
    _check_inputs(config, prices, work, mode)
    classes = work.class_matrix(config.horizon, mode == DeadlineMode.NONUNIFORM)
    return mode, classes, prices.beta[:, :work.T]


def build_offline_lp(config: CloudConfig, prices: PriceTrace, work: WorkloadTrace,
                     mode: Union[str, DeadlineMode] = DeadlineMode.UNIFORM,
                     with_migration: bool = True) -> LinearProgram:
    """Full offline program over every x[i, d, t] and (optionally) z[i, j, d, t]."""
    mode, classes, beta = _prepare(config, prices, work, mode)
    return _build_full(config, beta, classes, mode, with_migration).build()


def find_infeasible_window(config: CloudConfig, work: WorkloadTrace,
                           mode: Union[str, DeadlineMode] = DeadlineMode.UNIFORM) -> Optional[Tuple[int, int]]:
    """
    First window [a, s] (ordered by s, then a) where the work that must run inside it
    exceeds the pooled capacity of its slots; None when every window fits.
    """
    mode = DeadlineMode.parse(mode)
    D, T = config.horizon, work.T
    classes = work.class_matrix(D, mode == DeadlineMode.NONUNIFORM)
    pooled = float(config.capacity.sum())
    # due[s] per release: class-d load of release t is due at window_end(t, d, T)
    due = np.zeros((T, T))
    for t in range(T):
        for d in range(D + 1):
            if classes[d, t] > 0:
                due[t, window_end(t, d, T)] += classes[d, t]
    for s in range(T):
        for a in range(s + 1):
            demand = due[a:s + 1, a:s + 1].sum()
            capacity = pooled * (s - a + 1)
            if demand > capacity + TOLERANCES.feasibility * max(1.0, capacity):
                return a, s
    return None


def _raise_infeasible(config, work, mode):
    window = find_infeasible_window(config, work, mode)
    if window is None:
        raise InfeasibleError("Offline LP reported infeasible", phase="offline")
    raise InfeasibleError("Released load exceeds the capacity of its window", slot=window[1],
                          phase="offline", window=window)


def _plan_from_aggregate(config, beta, builder, solution, T) -> Tuple[np.ndarray, np.ndarray]:
    n, D = config.n, config.horizon
    y = np.zeros((n, T))
    for s in range(T):
        for i in range(n):
            y[i, s] = builder.value(solution, ('y', i, s))
    y = clamp_slack(y)
    placed = np.zeros((D + 1, T))
    for t in range(T):
        for d in range(window_end(t, D, T) - t + 1):
            placed[d, t] = max(builder.value(solution, ('a', t, d)), 0.0)
    return _split_by_share(placed, y), y


def _split_by_share(placed: np.ndarray, y: np.ndarray) -> np.ndarray:
    """x[i, d, t] = placed[d, t] * y[i, t+d] / sum_i y[., t+d]."""
    n, T = y.shape
    width = placed.shape[0]
    pooled = y.sum(axis=0)
    x = np.zeros((n, width, T))
    for d in range(width):
        for t in range(T - d):
            s = t + d
            if placed[d, t] > 0 and pooled[s] > 0:
                x[:, d, t] = placed[d, t] * y[:, s] / pooled[s]
    return x


def _plan_from_full(config, builder, solution, T, with_migration) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    n, D = config.n, config.horizon
    x = np.zeros((n, D + 1, T))
    z = np.zeros((n, n, D + 1, T))
    for t in range(T):
        for d in range(window_end(t, D, T) - t + 1):
            for i in range(n):
                x[i, d, t] = builder.value(solution, ('x', i, d, t))
                if with_migration:
                    for j in range(n):
                        if j != i:
                            z[i, j, d, t] = builder.value(solution, ('z', i, j, d, t))
    x, z = clamp_slack(x), clamp_slack(z)
    return x, z, plan_executed_load(x, z)


def plan_executed_load(x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """y[i, s] = sum_d x[i, d, s-d] + migrations in - migrations out executing at s."""
    n, width, T = x.shape
    y = np.zeros((n, T))
    for d in range(width):
        if d >= T:
            break
        net = x[:, d, :T - d] + z[:, :, d, :T - d].sum(axis=0) - z[:, :, d, :T - d].sum(axis=1)
        y[:, d:] += net
    return clamp_slack(y)


def solve_offline(config: CloudConfig, prices: PriceTrace, work: WorkloadTrace,
                  mode: Union[str, DeadlineMode] = DeadlineMode.UNIFORM,
                  with_migration: bool = True, aggregate: bool = False) -> OfflinePlan:
    """
    Solve the offline problem. `aggregate=True` uses the slot-aggregated program (no migration)
    and spreads each slot's placed work across data centers in proportion to y.
    """
    mode, classes, beta = _prepare(config, prices, work, mode)
    T = work.T
    if aggregate:
        builder = _build_aggregated(config, beta, classes, mode)
    else:
        builder = _build_full(config, beta, classes, mode, with_migration)
    lp = builder.build()
    logger.info("=== Offline LP (%s, D=%d, %d variables, %d rows) ===", "aggregated" if aggregate else "full",
                config.horizon, lp.num_vars, lp.a_eq.shape[0] + lp.a_ub.shape[0])
    solution: LpSolution = solve(lp)
    logger.debug("offline LP status=%s objective=%s", solution.status, solution.objective)
    if solution.status == INFEASIBLE:
        _raise_infeasible(config, work, mode)
    if solution.status != OPTIMAL:
        raise InfeasibleError(f"Offline LP ended with status {solution.status}", phase="offline")

    if aggregate:
        x, y = _plan_from_aggregate(config, beta, builder, solution, T)
        z = np.zeros((config.n, config.n, config.horizon + 1, T))
    else:
        x, z, y = _plan_from_full(config, builder, solution, T, with_migration)
    plan = OfflinePlan(x, z, y, float(solution.objective), config, beta)
    logger.info("✓ Offline objective %.6f", plan.objective)
    return plan


def normalize_zero_migration(plan: OfflinePlan) -> OfflinePlan:
    """
    Equivalent plan without migration: same y, and each release keeps its execution offsets,
    spread over data centers in proportion to y. The objective drops by the migration cost.
    """
    if not np.any(plan.z > 0):
        return plan
    placed = plan.x.sum(axis=0)
    x = _split_by_share(placed, plan.y)
    z = np.zeros_like(plan.z)
    objective = plan.objective - plan.migration_cost
    return OfflinePlan(x, z, plan.y.copy(), objective, plan.config, plan.beta)
