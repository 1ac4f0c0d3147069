"""
Trace-driven slot engine. Runs one algorithm over (prices, workload), keeps the
SchedulerState, audits the result and fills the cost ledger.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from config.settings import TOLERANCES
from src.errors import DomainError, GlbError
from src.model import (
    CloudConfig, CostLedger, DeadlineMode, PriceTrace, SchedulerState, WorkloadTrace,
    executed_load, window_end,
)
from src.offline import solve_offline
from src.online import (
    apply_update_rule, dispatch, greedy_assign, record_replan, replan_no_migration, replan_with_migration,
)
from src.predictor import PredictionMode, PredictionModel, chebyshev_bound, predict_all, relative_error

logger = logging.getLogger(__name__)


class Algorithm(str, Enum):
    OFFLINE = "offline"
    GREEDY = "greedy"
    A = "A"
    A_EPS = "A_eps"
    A_EPS_M = "A_eps_m"

    @classmethod
    def parse(cls, value) -> 'Algorithm':
        if isinstance(value, cls):
            return value
        for alg in cls:
            if alg.value.lower() == str(value).strip().lower().replace("-", "_"):
                return alg
        raise DomainError(f"Unknown algorithm '{value}'; choose from {[a.value for a in cls]}")

    @property
    def is_online(self) -> bool:
        return self in (Algorithm.A, Algorithm.A_EPS, Algorithm.A_EPS_M)


@dataclass(frozen=True, eq=False)
class RunConfig:
    algorithm: Algorithm
    cloud: CloudConfig
    prices: PriceTrace
    work: WorkloadTrace
    prediction: PredictionModel = field(default_factory=PredictionModel)
    deadline_mode: DeadlineMode = DeadlineMode.UNIFORM
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, 'algorithm', Algorithm.parse(self.algorithm))
        object.__setattr__(self, 'deadline_mode', DeadlineMode.parse(self.deadline_mode))
        if self.prices.n != self.cloud.n:
            raise DomainError(f"price trace has {self.prices.n} locations, cloud has {self.cloud.n}")
        if self.prices.T < self.work.T:
            raise DomainError(f"price trace covers {self.prices.T} slots, workload needs {self.work.T}")
        if self.deadline_mode == DeadlineMode.NONUNIFORM and not self.work.is_nonuniform:
            raise DomainError("nonuniform deadline mode needs a workload split by deadline class")

    @property
    def horizon(self) -> int:
        return self.cloud.horizon

    def with_algorithm(self, algorithm) -> 'RunConfig':
        return replace(self, algorithm=Algorithm.parse(algorithm))

    def with_horizon(self, horizon: int) -> 'RunConfig':
        return replace(self, cloud=self.cloud.with_horizon(horizon))


@dataclass(frozen=True)
class Violation:
    kind: str
    slot: Optional[int]
    amount: float
    datacenter: Optional[int] = None
    message: str = ""

    def to_dict(self) -> Dict:
        return {"kind": self.kind, "slot": self.slot, "amount": self.amount,
                "datacenter": self.datacenter, "message": self.message}


@dataclass(frozen=True)
class DecisionRecord:
    slot: Optional[int]
    phase: str
    status: str
    objective: Optional[float]

    def to_dict(self) -> Dict:
        return {"slot": self.slot, "phase": self.phase, "status": self.status, "objective": self.objective}


@dataclass(eq=False)
class RunReport:
    algorithm: Algorithm
    horizon: int
    deadline_mode: DeadlineMode
    ledger: CostLedger
    executed: np.ndarray              # y (n, T)
    migrated: np.ndarray              # migrated volume per decision slot
    migration_matrix: np.ndarray      # total moved i -> j
    released_total: float
    violations: List[Violation]
    max_prediction_error: float
    max_sigma: float
    decision_log: List[DecisionRecord]
    duration_seconds: float
    label: str = ""
    locations: Sequence[str] = ()
    prediction: Optional[PredictionModel] = None

    @property
    def total_cost(self) -> float:
        return self.ledger.total

    @property
    def deadline_violations(self) -> int:
        return sum(1 for v in self.violations if v.kind == "deadline")

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def chebyshev(self) -> Optional[float]:
        if self.max_prediction_error <= 0:
            return None
        return chebyshev_bound(self.max_sigma, self.max_prediction_error)

    def to_dict(self) -> Dict:
        """Serializable report; the wall-clock duration is left out so reruns compare equal."""
        return {
            "label": self.label,
            "algorithm": self.algorithm.value,
            "horizon": self.horizon,
            "deadline_mode": self.deadline_mode.value,
            "prediction": self.prediction.to_dict() if self.prediction else None,
            "locations": list(self.locations),
            "totals": {
                "total": self.ledger.total,
                "energy": self.ledger.energy_total,
                "migration": self.ledger.migration_total,
            },
            "energy_by_datacenter": self.ledger.energy.sum(axis=1).tolist(),
            "released_total": self.released_total,
            "executed_total": float(self.executed.sum()),
            "max_prediction_error": self.max_prediction_error,
            "chebyshev_bound": self.chebyshev,
            "deadline_violations": self.deadline_violations,
            "violations": [v.to_dict() for v in self.violations],
            "per_slot": {
                "executed": self.executed.sum(axis=0).tolist(),
                "executed_by_datacenter": self.executed.tolist(),
                "migrated": self.migrated.tolist(),
                "cost": self.ledger.per_slot().tolist(),
            },
            "migration_matrix": self.migration_matrix.tolist(),
            "decision_log": [d.to_dict() for d in self.decision_log],
        }


def _run_offline(config: RunConfig, log: List[DecisionRecord]) -> SchedulerState:
    plan = solve_offline(config.cloud, config.prices, config.work, config.deadline_mode,
                         with_migration=False, aggregate=True)
    log.append(DecisionRecord(None, "offline", "optimal", plan.objective))
    return plan.to_state()


def _run_greedy(config: RunConfig, log: List[DecisionRecord]) -> SchedulerState:
    cloud, work = config.cloud, config.work
    state = SchedulerState.for_config(cloud, work.T, online=False)
    for t in range(work.T):
        y = greedy_assign(cloud, config.prices.beta[:, t], float(work.released[t]), slot=t)
        state.x[:, 0, t] = y
        state.u[:, t] = y
        state.w[:, t] = y
        state.y[:, t] = y
        log.append(DecisionRecord(t, "greedy", "optimal", float(config.prices.beta[:, t] @ y)))
    return state


def _run_online(config: RunConfig, log: List[DecisionRecord]):
    cloud, prices, work = config.cloud, config.prices, config.work
    D, T = cloud.horizon, work.T
    nonuniform = config.deadline_mode == DeadlineMode.NONUNIFORM
    model = config.prediction
    if config.algorithm == Algorithm.A:
        model = replace(model, mode=PredictionMode.ORACLE)
    replan = replan_with_migration if config.algorithm == Algorithm.A_EPS_M else replan_no_migration
    classes = work.class_matrix(D, nonuniform)
    state = SchedulerState.for_config(cloud, T, online=True)
    max_error, max_sigma = 0.0, 0.0

    for t in range(T):
        width = window_end(t, D, T) - t + 1
        prediction = None
        if width > 1:
            prediction = predict_all(model, prices, t, D, lookahead=width - 1)
            max_error = max(max_error, relative_error(prediction.sampled_beta, prices.beta[:, t + 1:t + width]))
            max_sigma = max(max_sigma, float(prediction.sigma.max()))
        current = prices.beta[:, t]

        load = classes[:, t] if nonuniform else float(work.released[t])
        pending = state.previous_plan(t, width)
        sent = dispatch(cloud, current, prediction, pending, load, config.deadline_mode, slot=t)
        log.append(DecisionRecord(t, "dispatch", sent.status, sent.objective))

        u = apply_update_rule(state, t, sent)
        plan = replan(cloud, current, prediction, u, slot=t)
        log.append(DecisionRecord(t, "replan", plan.status, plan.objective))
        record_replan(state, t, plan)

        for i in range(cloud.n):
            state.y[i, t] = executed_load(state, i, t)
    return state, max_error, max_sigma


def run(config: RunConfig) -> RunReport:
    """Run one algorithm end to end. Any infeasible phase aborts with InfeasibleError."""
    started = time.perf_counter()
    alg = config.algorithm
    logger.info("=== Run %s (D=%d, T=%d, %s) ===", alg.value, config.horizon, config.work.T,
                config.deadline_mode.value)
    log: List[DecisionRecord] = []
    max_error, max_sigma = 0.0, 0.0
    if alg == Algorithm.OFFLINE:
        state = _run_offline(config, log)
    elif alg == Algorithm.GREEDY:
        state = _run_greedy(config, log)
    else:
        state, max_error, max_sigma = _run_online(config, log)

    T = config.work.T
    ledger = CostLedger.from_tensors(config.cloud, config.prices.beta[:, :T], state.y, state.z)
    violations = audit(state, config.work, config.horizon, config.deadline_mode)
    for v in violations:
        logger.warning("audit: %s at slot %s (%.3e) %s", v.kind, v.slot, v.amount, v.message)
    report = RunReport(
        algorithm=alg,
        horizon=config.horizon,
        deadline_mode=config.deadline_mode,
        ledger=ledger,
        executed=state.read('y'),
        migrated=state.migrated_volume(),
        migration_matrix=state.migration_matrix(),
        released_total=float(config.work.released.sum()),
        violations=violations,
        max_prediction_error=max_error,
        max_sigma=max_sigma,
        decision_log=log,
        duration_seconds=time.perf_counter() - started,
        label=config.label,
        locations=config.cloud.names,
        prediction=config.prediction if alg.is_online else None,
    )
    logger.info("✓ %s total cost %.6f (energy %.6f, migration %.6f)", alg.value, ledger.total,
                ledger.energy_total, ledger.migration_total)
    return report


def _due_by_slot(work: WorkloadTrace, horizon: int, mode: DeadlineMode) -> np.ndarray:
    T = work.T
    classes = work.class_matrix(horizon, mode == DeadlineMode.NONUNIFORM)
    due = np.zeros(T)
    for t in range(T):
        for d in range(horizon + 1):
            if classes[d, t] > 0:
                due[window_end(t, d, T)] += classes[d, t]
    return due


def audit(state: SchedulerState, work: WorkloadTrace, horizon: int,
          mode: DeadlineMode = DeadlineMode.UNIFORM) -> List[Violation]:
    """
    Check nonnegativity, capacity, conservation and deadlines of a completed run.
    Reports violations; never raises for a bad state.
    """
    mode = DeadlineMode.parse(mode)
    violations: List[Violation] = []
    for name in SchedulerState.TENSORS:
        arr = getattr(state, name)
        for idx in np.argwhere(arr < -TOLERANCES.nonnegativity):
            idx = tuple(int(v) for v in idx)
            violations.append(Violation("nonnegativity", idx[-1], float(-arr[idx]), idx[0],
                                        f"{name}{list(idx)} is negative"))

    y = state.y
    for i, t in np.argwhere(y > state.capacity[:, None] + TOLERANCES.feasibility):
        violations.append(Violation("capacity", int(t), float(y[i, t] - state.capacity[i]), int(i),
                                    f"executed load above capacity {state.capacity[i]:g}"))

    released = float(work.released.sum())
    executed = float(y.sum())
    scale = max(1.0, released)
    if abs(executed - released) > TOLERANCES.objective_rel * scale:
        violations.append(Violation("conservation", None, executed - released,
                                    message=f"executed {executed:.9g} vs released {released:.9g}"))

    per_slot = y.sum(axis=0)
    done = np.cumsum(per_slot)
    due = np.cumsum(_due_by_slot(work, horizon, mode))
    arrived = np.cumsum(work.released)
    slack = TOLERANCES.objective_rel * scale

    shortfall = due - done
    s = 0
    while s < len(shortfall):
        if shortfall[s] > slack:
            start = s
            worst = shortfall[s]
            while s + 1 < len(shortfall) and shortfall[s + 1] > slack:
                s += 1
                worst = max(worst, shortfall[s])
            violations.append(Violation("deadline", start, float(worst),
                                        message=f"{worst:.6g} units past their deadline from slot {start}"))
        s += 1

    early = done - arrived
    for t in np.flatnonzero(early > slack):
        violations.append(Violation("causality", int(t), float(early[t]),
                                    message="executed before release"))
    return violations


@dataclass(frozen=True)
class SweepRow:
    deadline: int
    algorithm: Algorithm
    total_cost: Optional[float]
    reduction_vs_greedy_pct: Optional[float]
    deadline_violations: int = 0
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.deadline_violations == 0


@dataclass
class SweepTable:
    rows: List[SweepRow] = field(default_factory=list)

    def cell(self, deadline: int, algorithm) -> SweepRow:
        alg = Algorithm.parse(algorithm)
        for row in self.rows:
            if row.deadline == deadline and row.algorithm == alg:
                return row
        raise KeyError((deadline, alg.value))

    def totals(self, algorithm) -> List[Optional[float]]:
        alg = Algorithm.parse(algorithm)
        return [r.total_cost for r in self.rows if r.algorithm == alg]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{
            "deadline": r.deadline,
            "algorithm": r.algorithm.value,
            "total_cost": r.total_cost,
            "reduction_vs_greedy_pct": r.reduction_vs_greedy_pct,
            "error": r.error,
        } for r in self.rows], columns=["deadline", "algorithm", "total_cost", "reduction_vs_greedy_pct", "error"])


def _safe_run(config: RunConfig):
    try:
        return run(config)
    except Exception as e:
        logger.error("run %s D=%d failed: %s", config.algorithm.value, config.horizon, e)
        return e


def reduction_pct(greedy_total: float, total: float) -> float:
    if greedy_total == 0:
        return 0.0
    return 100.0 * (greedy_total - total) / greedy_total


def sweep(base: RunConfig, deadlines: Sequence[int], algorithms: Sequence, workers: int = 1) -> SweepTable:
    """
    Total cost for every (deadline, algorithm) cell and its reduction versus greedy.
    A failing cell becomes an error row; the other cells still run.
    """
    if not algorithms:
        raise DomainError("sweep needs at least one algorithm")
    if not deadlines:
        raise DomainError("sweep needs at least one deadline")
    algs = [Algorithm.parse(a) for a in algorithms]
    needed = list(dict.fromkeys([Algorithm.GREEDY] + algs))
    cells = [(D, alg) for D in deadlines for alg in needed]
    configs = [base.with_horizon(D).with_algorithm(alg) for D, alg in cells]
    logger.info("=== Sweep: %d deadlines x %d algorithms ===", len(deadlines), len(needed))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_safe_run, configs))
    else:
        results = [_safe_run(c) for c in configs]
    outcome = dict(zip(cells, results))

    table = SweepTable()
    for D in deadlines:
        greedy = outcome[(D, Algorithm.GREEDY)]
        for alg in algs:
            result = outcome[(D, alg)]
            if isinstance(result, Exception):
                table.rows.append(SweepRow(D, alg, None, None, error=f"{type(result).__name__}: {result}"))
                continue
            reduction = None if isinstance(greedy, Exception) else reduction_pct(greedy.total_cost, result.total_cost)
            table.rows.append(SweepRow(D, alg, result.total_cost, reduction, result.deadline_violations))
    logger.info("✓ Sweep finished: %d cells, %d failed", len(table.rows), sum(1 for r in table.rows if r.error))
    return table
