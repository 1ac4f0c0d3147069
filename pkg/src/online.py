"""
Per-slot decisions of the online pipeline.

At slot t the window covers offsets k = 0..W-1 (slots t..t+W-1). Offset 0 is priced at the
announced price, offsets >= 1 at the predicted prices.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from config.settings import TIE_BREAK_PER_SLOT, TOLERANCES
from src.errors import AccountingError, DomainError, InfeasibleError
from src.lp_solver import LpBuilder, OPTIMAL, solve
from src.model import CloudConfig, DeadlineMode, SchedulerState, clamp_slack
from src.predictor import PricePrediction

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class DispatchDecision:
    x: np.ndarray               # (n, W): release of slot t run at t+d
    objective: float
    status: str = OPTIMAL

    @property
    def width(self) -> int:
        return self.x.shape[1]


@dataclass(eq=False)
class ReplanDecision:
    w: np.ndarray               # (n, W): planned execution for slots t..t+W-1
    z: Optional[np.ndarray]     # (n, n, W) migrations decided at t, or None
    objective: float
    status: str = OPTIMAL

    @property
    def width(self) -> int:
        return self.w.shape[1]

    def executed_plan(self) -> np.ndarray:
        """Planned load per data center and slot once this decision's migrations land."""
        if self.z is None:
            return self.w.copy()
        return self.w + self.z.sum(axis=0) - self.z.sum(axis=1)


def window_prices(current_beta: np.ndarray, prediction: Optional[PricePrediction], width: int) -> np.ndarray:
    """(n, width) prices: the announced one at offset 0, sampled predictions after."""
    current = np.asarray(current_beta, dtype=float)
    prices = np.zeros((current.shape[0], width))
    prices[:, 0] = current
    if width > 1:
        if prediction is None or prediction.horizon < width - 1:
            raise DomainError(f"prediction covers fewer than {width - 1} lookahead slots")
        prices[:, 1:] = prediction.sampled_beta[:, :width - 1]
    return prices


def _earliest_first(prices: np.ndarray) -> np.ndarray:
    """Prices nudged upward by slot offset so that ties resolve to the earliest slot."""
    scale = max(1.0, float(np.max(np.abs(prices), initial=0.0)))
    return prices + TIE_BREAK_PER_SLOT * scale * np.arange(prices.shape[1])[None, :]


def _release_classes(load: Union[float, Sequence[float]], width: int, mode: DeadlineMode) -> np.ndarray:
    """Class vector over offsets 0..width-1; uniform load all sits in the last class."""
    classes = np.zeros(width)
    if mode == DeadlineMode.UNIFORM or np.ndim(load) == 0:
        classes[-1] = float(np.sum(load))
        return classes
    load = np.asarray(load, dtype=float)
    keep = min(width, load.shape[0])
    classes[:keep] = load[:keep]
    classes[-1] += load[keep:].sum()
    return classes


def dispatch(config: CloudConfig, current_beta: np.ndarray, prediction: Optional[PricePrediction],
             pending: np.ndarray, load, mode: Union[str, DeadlineMode] = DeadlineMode.UNIFORM,
             slot: Optional[int] = None) -> DispatchDecision:
    """
    Split the slot-t release over data centers and deferral offsets. `pending` is the (n, W)
    load already scheduled for slots t..t+W-1; it shares each slot's capacity with the release.
    `load` is L_t, or the class vector L_{0..D, t} in nonuniform mode.
    """
    mode = DeadlineMode.parse(mode)
    pending = np.asarray(pending, dtype=float)
    n, width = pending.shape
    prices = window_prices(current_beta, prediction, width)
    classes = _release_classes(load, width, mode)
    if float(classes.sum()) <= 0:
        return DispatchDecision(np.zeros((n, width)), 0.0)

    costs = _earliest_first(prices)
    builder = LpBuilder()
    for i in range(n):
        for d in range(width):
            room = max(float(config.capacity[i] - pending[i, d]), 0.0)
            builder.add_var(('x', i, d), cost=costs[i, d], hi=room)
    if mode == DeadlineMode.NONUNIFORM:
        due = np.cumsum(classes)
        for d in range(width - 1):
            if due[d] > 0:
                builder.add_ge([(('x', i, k), 1.0) for i in range(n) for k in range(d + 1)], due[d],
                               name=f"due_{d}")
    builder.add_eq([(('x', i, d), 1.0) for i in range(n) for d in range(width)], float(classes.sum()),
                   name="release")
    solution = solve(builder.build())
    logger.debug("dispatch slot=%s status=%s objective=%s", slot, solution.status, solution.objective)
    if not solution.is_optimal:
        raise InfeasibleError(f"Release of {classes.sum():.6g} exceeds remaining window capacity",
                              slot=slot, phase="dispatch")
    x = clamp_slack(np.array([[builder.value(solution, ('x', i, d)) for d in range(width)] for i in range(n)]))
    return DispatchDecision(x, float((prices * x).sum()))


def _add_retiming_rows(builder: LpBuilder, i: int, u_row: np.ndarray):
    width = u_row.shape[0]
    prefix = np.cumsum(u_row)
    for s in range(width - 1):
        if prefix[s] > 0:
            builder.add_ge([(('w', i, r), 1.0) for r in range(s + 1)], float(prefix[s]), name=f"early_{i}_{s}")
    builder.add_eq([(('w', i, r), 1.0) for r in range(width)], float(prefix[-1]), name=f"total_{i}")


def replan_no_migration(config: CloudConfig, current_beta: np.ndarray, prediction: Optional[PricePrediction],
                        u: np.ndarray, slot: Optional[int] = None) -> ReplanDecision:
    """Retime each data center's pending work into earlier (cheaper) slots, capacity permitting."""
    u = clamp_slack(u)
    n, width = u.shape
    prices = window_prices(current_beta, prediction, width)
    costs = _earliest_first(prices)
    w = np.zeros((n, width))
    for i in range(n):
        if not np.any(u[i] > 0):
            continue
        builder = LpBuilder()
        for r in range(width):
            builder.add_var(('w', i, r), cost=costs[i, r], hi=config.capacity[i])
        _add_retiming_rows(builder, i, u[i])
        solution = solve(builder.build())
        logger.debug("replan slot=%s dc=%d status=%s objective=%s", slot, i, solution.status, solution.objective)
        if not solution.is_optimal:
            raise InfeasibleError("Pending work cannot be retimed within capacity", slot=slot,
                                  phase="replan", datacenter=i)
        w[i] = [builder.value(solution, ('w', i, r)) for r in range(width)]
    w = clamp_slack(w)
    return ReplanDecision(w, None, float(config.alpha.sum() * width + (prices * w).sum()))


def replan_with_migration(config: CloudConfig, current_beta: np.ndarray, prediction: Optional[PricePrediction],
                          u: np.ndarray, slot: Optional[int] = None) -> ReplanDecision:
    """
    One global program over every data center: retime pending work (w) and move it between
    data centers (z[i, j, k] executes at t+k), paying b_ij per unit moved.
    """
    u = clamp_slack(u)
    n, width = u.shape
    prices = window_prices(current_beta, prediction, width)
    if not np.any(u > 0):
        return ReplanDecision(np.zeros((n, width)), np.zeros((n, n, width)), float(config.alpha.sum() * width))

    costs = _earliest_first(prices)
    builder = LpBuilder()
    for i in range(n):
        for r in range(width):
            builder.add_var(('w', i, r), cost=costs[i, r])
    for i in range(n):
        for j in range(n):
            if i != j:
                for r in range(width):
                    builder.add_var(('z', i, j, r), cost=prices[j, r] - prices[i, r] + config.migration_rate[i, j])

    for i in range(n):
        _add_retiming_rows(builder, i, u[i])
    prefix = np.cumsum(u.sum(axis=0))
    for s in range(width - 1):
        if prefix[s] > 0:
            builder.add_ge([(('w', i, r), 1.0) for i in range(n) for r in range(s + 1)], float(prefix[s]),
                           name=f"early_all_{s}")
    builder.add_eq([(('w', i, r), 1.0) for i in range(n) for r in range(width)], float(prefix[-1]), name="total_all")

    for i in range(n):
        for r in range(width):
            out = [(('z', i, j, r), 1.0) for j in range(n) if j != i]
            builder.add_le(out + [(('w', i, r), -1.0)], 0.0, name=f"movable_{i}_{r}")
            terms = [(('w', i, r), 1.0)] + [(('z', j, i, r), 1.0) for j in range(n) if j != i]
            terms += [(('z', i, j, r), -1.0) for j in range(n) if j != i]
            builder.add_le(terms, float(config.capacity[i]), name=f"cap_{i}_{r}")

    solution = solve(builder.build())
    logger.debug("replan+migration slot=%s status=%s objective=%s", slot, solution.status, solution.objective)
    if not solution.is_optimal:
        raise InfeasibleError("Pending work cannot be placed within global capacity", slot=slot,
                              phase="replan_migration")
    w = np.array([[builder.value(solution, ('w', i, r)) for r in range(width)] for i in range(n)])
    z = np.zeros((n, n, width))
    for i in range(n):
        for j in range(n):
            if i != j:
                z[i, j] = [builder.value(solution, ('z', i, j, r)) for r in range(width)]
    w, z = clamp_slack(w), clamp_slack(z)
    decision = ReplanDecision(w, z, 0.0)
    rate = config.migration_rate.copy()
    np.fill_diagonal(rate, 0.0)
    decision.objective = float(config.alpha.sum() * width + (prices * decision.executed_plan()).sum()
                               + (rate[:, :, None] * z).sum())
    return decision


def apply_update_rule(state: SchedulerState, t: int, decision: DispatchDecision) -> np.ndarray:
    """
    Rebuild u for slots t..t+W-1: the previous decision's plan (its w plus the migrations it
    scheduled) plus the new release. Slot t+D was never planned, so it holds only x[:, D].
    Records x in the state and returns the u window.
    """
    width = decision.width
    state.x[:, :width, t] = decision.x
    window = state.previous_plan(t, width) + decision.x
    if np.any(window < -TOLERANCES.nonnegativity):
        worst = float(window.min())
        raise AccountingError(f"Pending work became negative ({worst:.3e}) at slot {t}")
    window = clamp_slack(window)
    state.u[:, t:t + width] = window
    return window


def record_replan(state: SchedulerState, t: int, decision: ReplanDecision):
    width = decision.width
    state.w[:, t:t + width] = decision.w
    if decision.z is not None:
        state.z[:, :, :width, t] = decision.z


def greedy_assign(config: CloudConfig, current_beta: np.ndarray, load: float,
                  slot: Optional[int] = None) -> np.ndarray:
    """Fill data centers in ascending price order (ties by index) up to capacity."""
    if load < 0:
        raise DomainError("released load must be nonnegative")
    total = float(config.capacity.sum())
    if load > total + TOLERANCES.feasibility * max(1.0, total):
        raise InfeasibleError(f"Release of {load:.6g} exceeds total capacity {total:.6g}", slot=slot, phase="greedy")
    y = np.zeros(config.n)
    remaining = float(load)
    for i in np.argsort(np.asarray(current_beta, dtype=float), kind="stable"):
        if remaining <= 0:
            break
        take = min(remaining, float(config.capacity[i]))
        y[i] = take
        remaining -= take
    return y
