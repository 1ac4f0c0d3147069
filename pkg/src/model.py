"""
Domain types shared by every module: slots, cloud configuration, traces,
scheduler state and the cost ledger, plus the affine energy cost and the
linear migration cost.
"""
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import (
    DEFAULT_ALPHA, DEFAULT_CAPACITY, DEFAULT_SLOT_SECONDS, TOLERANCES,
)
from src.errors import AccountingError, DomainError

logger = logging.getLogger(__name__)

SECONDS_PER_DAY = 86400
EARTH_RADIUS_KM = 6371.0


class DeadlineMode(str, Enum):
    UNIFORM = "uniform"
    NONUNIFORM = "nonuniform"

    @classmethod
    def parse(cls, value) -> "DeadlineMode":
        try:
            return cls(value)
        except ValueError:
            raise DomainError(f"Unknown deadline mode '{value}'")


def window_end(t: int, horizon: int, T: int) -> int:
    """Last slot a release at t may run in; windows are truncated so all work ends by T-1."""
    return min(t + horizon, T - 1)


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in km."""
    dlat = np.radians(lat2 - lat1)
    dlon = np.radians(lon2 - lon1)
    a = (np.sin(dlat / 2) ** 2
         + np.cos(np.radians(lat1)) * np.cos(np.radians(lat2)) * np.sin(dlon / 2) ** 2)
    return float(EARTH_RADIUS_KM * 2 * np.arctan2(np.sqrt(a), np.sqrt(1 - a)))


@dataclass(frozen=True)
class SlotIndex:
    """Slot t of a run of length T with slot duration tau (seconds)."""
    t: int
    slot_length: float = DEFAULT_SLOT_SECONDS
    run_length: Optional[int] = None

    def __post_init__(self):
        if self.t < 0:
            raise DomainError(f"Slot index must be nonnegative, got {self.t}")
        if self.slot_length <= 0:
            raise DomainError(f"Slot length must be positive, got {self.slot_length}")
        if self.run_length is not None and self.t > self.run_length:
            raise DomainError(f"Slot {self.t} lies beyond run length {self.run_length}")

    @property
    def slots_per_day(self) -> int:
        return slots_per_day(self.slot_length)

    def day_frame_slot(self, start_slot: int = 0) -> int:
        """Position kappa of this slot within its 24-hour frame."""
        return (start_slot + self.t) % self.slots_per_day


def slots_per_day(slot_length: float) -> int:
    return max(1, int(round(SECONDS_PER_DAY / slot_length)))


@dataclass(frozen=True, eq=False)
class CloudConfig:
    """Data-center capacities M_i, fixed costs alpha_i, migration rates b_ij and horizon D."""
    capacity: np.ndarray
    alpha: np.ndarray
    migration_rate: np.ndarray
    horizon: int
    names: Tuple[str, ...] = ()

    def __post_init__(self):
        capacity = _frozen_array(self.capacity)
        alpha = _frozen_array(self.alpha)
        rate = _frozen_array(self.migration_rate)
        n = capacity.shape[0]
        if capacity.ndim != 1 or n == 0:
            raise DomainError("capacity must be a nonempty vector")
        if alpha.shape != (n,):
            raise DomainError(f"alpha must have shape ({n},), got {alpha.shape}")
        if rate.shape != (n, n):
            raise DomainError(f"migration_rate must have shape ({n}, {n}), got {rate.shape}")
        if np.any(capacity <= 0):
            raise DomainError("every capacity M_i must be positive")
        if np.any(alpha < 0):
            raise DomainError("alpha_i must be nonnegative")
        off_diagonal = ~np.eye(n, dtype=bool)
        if np.any(rate[off_diagonal] < 0) or not np.all(np.isfinite(rate[off_diagonal])):
            raise DomainError("migration rates b_ij must be finite and nonnegative")
        if int(self.horizon) != self.horizon or self.horizon < 0:
            raise DomainError(f"horizon D must be a nonnegative integer, got {self.horizon}")
        names = tuple(self.names) if self.names else tuple(f"dc{i}" for i in range(n))
        if len(names) != n:
            raise DomainError("one name per data center is required")
        object.__setattr__(self, 'capacity', capacity)
        object.__setattr__(self, 'alpha', alpha)
        object.__setattr__(self, 'migration_rate', rate)
        object.__setattr__(self, 'horizon', int(self.horizon))
        object.__setattr__(self, 'names', names)

    @property
    def n(self) -> int:
        return self.capacity.shape[0]

    def with_horizon(self, horizon: int) -> 'CloudConfig':
        return replace(self, horizon=horizon)

    def with_migration_rate(self, rate) -> 'CloudConfig':
        return replace(self, migration_rate=rate)

    @classmethod
    def uniform(cls, n: int, capacity: float = DEFAULT_CAPACITY, alpha: float = DEFAULT_ALPHA,
                migration_rate: float = 0.0, horizon: int = 0, names: Sequence[str] = ()) -> 'CloudConfig':
        rate = np.full((n, n), float(migration_rate))
        np.fill_diagonal(rate, 0.0)
        return cls(np.full(n, float(capacity)), np.full(n, float(alpha)), rate, horizon, tuple(names))

    @classmethod
    def from_locations(cls, sites: List[Dict], rate_per_1000km: float, capacity=DEFAULT_CAPACITY,
                       alpha=DEFAULT_ALPHA, horizon: int = 0) -> "CloudConfig":
        """Migration rates proportional to the great-circle distance between sites."""
        n = len(sites)
        rate = np.zeros((n, n))
        for i, a in enumerate(sites):
            for j, b in enumerate(sites):
                if i != j:
                    rate[i, j] = rate_per_1000km * haversine_km(a["lat"], a["lon"], b["lat"], b["lon"]) / 1000.0
        capacity = np.broadcast_to(np.asarray(capacity, dtype=float), (n,))
        alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (n,))
        return cls(capacity, alpha, rate, horizon, tuple(s["name"] for s in sites))

    def to_dict(self) -> Dict:
        return {
            "names": list(self.names),
            "capacity": self.capacity.tolist(),
            "alpha": self.alpha.tolist(),
            "migration_rate": self.migration_rate.tolist(),
            "horizon": self.horizon,
        }


@dataclass(frozen=True, eq=False)
class PriceTrace:
    """
    beta[i, t]: price at location i for run slot t.
    history[delta]: the full day chi - delta for every location, shape (n, slots in that day).
    start_slot is the day-frame position kappa of run slot 0.
    """
    beta: np.ndarray
    history: Dict[int, np.ndarray] = field(default_factory=dict)
    slot_length: float = DEFAULT_SLOT_SECONDS
    start_slot: int = 0
    locations: Tuple[str, ...] = ()
    day: int = 0
    clamped: int = 0

    def __post_init__(self):
        beta = _frozen_array(self.beta)
        if beta.ndim != 2:
            raise DomainError(f"beta must be a (locations, slots) matrix, got shape {beta.shape}")
        if not np.all(np.isfinite(beta)):
            raise DomainError("prices must be finite")
        n = beta.shape[0]
        history = {}
        for offset, series in (self.history or {}).items():
            arr = _frozen_array(series)
            if arr.ndim != 2 or arr.shape[0] != n:
                raise DomainError(f"history for day offset {offset} must have {n} rows")
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"history for day offset {offset} contains non-finite prices")
            history[int(offset)] = arr
        locations = tuple(self.locations) if self.locations else tuple(f"dc{i}" for i in range(n))
        if len(locations) != n:
            raise DomainError("one location name per price row is required")
        object.__setattr__(self, 'beta', beta)
        object.__setattr__(self, 'history', history)
        object.__setattr__(self, 'locations', locations)

    @property
    def n(self) -> int:
        return self.beta.shape[0]

    @property
    def T(self) -> int:
        return self.beta.shape[1]

    @property
    def slots_per_day(self) -> int:
        return slots_per_day(self.slot_length)

    def day_frame_slot(self, t: int) -> int:
        return (self.start_slot + t) % self.slots_per_day

    def history_for(self, offset: int) -> Optional[np.ndarray]:
        return self.history.get(offset)

    def recent(self, i: int, t: int, count: int) -> np.ndarray:
        """Up to `count` most recent prices at i ending with slot t, reaching into day chi-1 if needed."""
        current = self.beta[i, :t + 1]
        if current.shape[0] >= count:
            return current[current.shape[0] - count:]
        previous = self.history.get(1)
        if previous is None or self.start_slot != 0:
            return current
        needed = count - current.shape[0]
        return np.concatenate([previous[i, -needed:], current])

    def truncated(self, T: int) -> 'PriceTrace':
        return replace(self, beta=self.beta[:, :T])


@dataclass(frozen=True, eq=False)
class WorkloadTrace:
    """Released load L_t, optionally split by deadline class L_{d,t} (rows d = 0..D)."""
    released: np.ndarray
    released_by_deadline: Optional[np.ndarray] = None

    def __post_init__(self):
        released = _frozen_array(self.released)
        if released.ndim != 1:
            raise DomainError("released must be a vector")
        if np.any(released < 0) or not np.all(np.isfinite(released)):
            raise DomainError("released load must be finite and nonnegative")
        by_deadline = None
        if self.released_by_deadline is not None:
            by_deadline = _frozen_array(self.released_by_deadline)
            if by_deadline.ndim != 2 or by_deadline.shape[1] != released.shape[0]:
                raise DomainError("released_by_deadline must have shape (classes, T)")
            if np.any(by_deadline < 0):
                raise DomainError("class loads must be nonnegative")
            mismatch = np.abs(by_deadline.sum(axis=0) - released)
            if np.any(mismatch > TOLERANCES.feasibility * np.maximum(1.0, released)):
                raise DomainError("class loads must sum to the released load in every slot")
        object.__setattr__(self, 'released', released)
        object.__setattr__(self, 'released_by_deadline', by_deadline)

    @classmethod
    def from_classes(cls, by_deadline) -> 'WorkloadTrace':
        by_deadline = np.asarray(by_deadline, dtype=float)
        return cls(by_deadline.sum(axis=0), by_deadline)

    @property
    def T(self) -> int:
        return self.released.shape[0]

    @property
    def is_nonuniform(self) -> bool:
        return self.released_by_deadline is not None

    @property
    def max_deadline(self) -> Optional[int]:
        if self.released_by_deadline is None:
            return None
        return self.released_by_deadline.shape[0] - 1

    def class_matrix(self, horizon: int, nonuniform: bool) -> np.ndarray:
        """
        Loads by deadline class as a (horizon+1, T) matrix.
        Uniform runs put everything in class D; classes above D are tightened to D.
        """
        classes = np.zeros((horizon + 1, self.T))
        if not nonuniform or self.released_by_deadline is None:
            classes[horizon] = self.released
            return classes
        source = self.released_by_deadline
        keep = min(horizon + 1, source.shape[0])
        classes[:keep] = source[:keep]
        if source.shape[0] > horizon + 1:
            classes[horizon] += source[horizon + 1:].sum(axis=0)
        return classes

    def all_in_class(self, d: int) -> 'WorkloadTrace':
        by_deadline = np.zeros((d + 1, self.T))
        by_deadline[d] = self.released
        return WorkloadTrace(self.released, by_deadline)

    def truncated(self, T: int) -> 'WorkloadTrace':
        by_deadline = None if self.released_by_deadline is None else self.released_by_deadline[:, :T]
        return WorkloadTrace(self.released[:T], by_deadline)


def energy_cost(alpha, beta, y):
    """C_{i,t}(y) = alpha_i + beta_{i,t} * y; works elementwise on arrays."""
    if np.any(np.asarray(y) < 0):
        raise DomainError("executed load y must be nonnegative")
    if np.any(np.asarray(beta) < 0) or np.any(np.asarray(alpha) < 0):
        raise DomainError("cost parameters alpha and beta must be nonnegative")
    return alpha + beta * y


def migration_cost(b, z):
    """B_{i,j}(z) = b_ij * z; works elementwise on arrays."""
    if np.any(np.asarray(z) < 0):
        raise DomainError("migrated load z must be nonnegative")
    if np.any(np.asarray(b) < 0):
        raise DomainError("migration rate b must be nonnegative")
    return b * z


def clamp_slack(values: np.ndarray, slack: float = TOLERANCES.nonnegativity) -> np.ndarray:
    """Zero out solver noise in [-slack, 0); larger negatives are kept for the audit to see."""
    values = np.array(values, dtype=float, copy=True)
    values[(values < 0) & (values >= -slack)] = 0.0
    return values


def round_for_display(values: np.ndarray) -> np.ndarray:
    """Ceil-rounded assignment for reports; never fed back into computation."""
    return np.ceil(np.asarray(values) - TOLERANCES.feasibility).clip(min=0)


class SchedulerState:
    """
    Mutable tensors of one run. Indices: x[i, d, t], u[i, s], w[i, s],
    z[i, j, d, t] (decided at t, executed at t+d), y[i, t].
    `online` selects the executed-load rule: retimed plan plus landed migrations
    for online runs, summed assignments for plans (offline, greedy).
    """

    TENSORS = ('x', 'u', 'w', 'z', 'y')

    def __init__(self, capacity: np.ndarray, horizon: int, T: int, online: bool = True):
        n = len(capacity)
        width = horizon + 1
        self.capacity = np.asarray(capacity, dtype=float)
        self.horizon = horizon
        self.T = T
        self.online = online
        self.x = np.zeros((n, width, T))
        self.u = np.zeros((n, T + width))
        self.w = np.zeros((n, T + width))
        self.z = np.zeros((n, n, width, T))
        self.y = np.zeros((n, T))

    @classmethod
    def for_config(cls, config: CloudConfig, T: int, online: bool = True) -> 'SchedulerState':
        return cls(config.capacity, config.horizon, T, online)

    @property
    def n(self) -> int:
        return self.capacity.shape[0]

    def read(self, name: str) -> np.ndarray:
        if name not in self.TENSORS:
            raise KeyError(name)
        return clamp_slack(getattr(self, name))

    def previous_plan(self, t: int, width: int) -> np.ndarray:
        """
        Load the decision of slot t-1 leaves at each data center for slots t..t+width-1:
        planned w plus migrations in, minus migrations out.
        """
        plan = self.w[:, t:t + width].copy()
        if t == 0:
            return plan
        for k in range(width):
            offset = k + 1
            if offset > self.horizon:
                continue
            moves = self.z[:, :, offset, t - 1]
            plan[:, k] += moves.sum(axis=0) - moves.sum(axis=1)
        return plan

    def migrated_volume(self) -> np.ndarray:
        """Total load migrated per decision slot."""
        return self.z.sum(axis=(0, 1, 2))

    def migration_matrix(self) -> np.ndarray:
        """Total load moved from i to j over the run."""
        return self.z.sum(axis=(2, 3))


def executed_load(state: SchedulerState, i: int, t: int) -> float:
    """
    y_{i,t}. Online runs use w_{i,t} + sum_j z_{j,i,0,t} - sum_j z_{i,j,0,t};
    plans use sum_d x_{i,d,t-d} plus net migrations executing at t.
    """
    if state.online:
        y = state.w[i, t] + state.z[:, i, 0, t].sum() - state.z[i, :, 0, t].sum()
    else:
        y = 0.0
        for d in range(state.horizon + 1):
            r = t - d
            if r < 0:
                break
            y += state.x[i, d, r] + state.z[:, i, d, r].sum() - state.z[i, :, d, r].sum()
    if y < -TOLERANCES.nonnegativity:
        raise AccountingError(f"Executed load at data center {i}, slot {t} is negative ({y:.3e})")
    if y > state.capacity[i] + TOLERANCES.feasibility:
        raise AccountingError(
            f"Executed load at data center {i}, slot {t} exceeds capacity ({y} > {state.capacity[i]})")
    return max(float(y), 0.0)


@dataclass(frozen=True, eq=False)
class CostLedger:
    """Energy cost per data center and slot; migration cost per source data center and decision slot."""
    energy: np.ndarray
    migration: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'energy', _frozen_array(self.energy))
        object.__setattr__(self, 'migration', _frozen_array(self.migration))

    @property
    def energy_total(self) -> float:
        return float(self.energy.sum())

    @property
    def migration_total(self) -> float:
        return float(self.migration.sum())

    @property
    def total(self) -> float:
        return self.energy_total + self.migration_total

    def per_slot(self) -> np.ndarray:
        return self.energy.sum(axis=0) + self.migration.sum(axis=0)

    @classmethod
    def from_tensors(cls, config: CloudConfig, beta: np.ndarray, y: np.ndarray, z: np.ndarray) -> 'CostLedger':
        y = clamp_slack(y)
        z = clamp_slack(z)
        T = y.shape[1]
        energy = energy_cost(config.alpha[:, None], beta[:, :T], y)
        rate = config.migration_rate.copy()
        np.fill_diagonal(rate, 0.0)
        migration = migration_cost(rate[:, :, None, None], z).sum(axis=(1, 2))
        return cls(energy, migration)

    def recompute_error(self, config: CloudConfig, beta: np.ndarray, y: np.ndarray, z: np.ndarray) -> float:
        """Absolute difference between this ledger's total and an independent recomputation."""
        return abs(self.total - CostLedger.from_tensors(config, beta, y, z).total)

    def to_dict(self) -> Dict:
        return {
            "total": self.total,
            "energy_total": self.energy_total,
            "migration_total": self.migration_total,
            "energy_by_datacenter": self.energy.sum(axis=1).tolist(),
        }
