"""
Deterministic synthetic traces standing in for archived market prices and MapReduce job logs.

Prices come in three shapes: a diurnal curve per location (phase from the market's UTC offset),
a two-regime cheap/expensive square wave, and flat per-location prices. Workloads follow a
typical (A) or bursty (B) diurnal shape and can be split into the preset deadline classes.
"""
import json
import logging
import os
from dataclasses import dataclass, field, fields, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from config.presets import DEFAULT_SITES, MARKET_SITES, WORKLOAD_SHAPES, get_class_shares, get_cluster_preset, get_sites
from config.settings import (
    DEFAULT_CAPACITY, DEFAULT_MIGRATION_RATE_PER_1000KM, DEFAULT_SEED, DEFAULT_SLOT_SECONDS,
)
from src.errors import DomainError, IngestionError
from src.job_classifier import BYTES_PER_GB, JobRecord
from src.model import CloudConfig, DeadlineMode, PriceTrace, WorkloadTrace, slots_per_day
from src.predictor import HISTORY_OFFSETS, PredictionMode, PredictionModel
from src.simulator import RunConfig

logger = logging.getLogger(__name__)

PRICE_KINDS = ("diurnal", "two_regime", "flat")
WORKLOAD_KINDS = ("A", "B", "constant")

# Noise streams: one per (seed, stream, day offset)
_RUN_DAY, _HISTORY_DAY, _WORKLOAD, _JOBS = 0, 1, 2, 3


@dataclass(frozen=True)
class SynthesisSpec:
    """Everything needed to regenerate a (prices, workload) pair."""
    num_slots: int = 288
    slot_length: float = DEFAULT_SLOT_SECONDS
    sites: Tuple[str, ...] = DEFAULT_SITES
    price_kind: str = "diurnal"
    # diurnal
    base_price: float = 30.0
    amplitude: float = 10.0
    phase_from_utc: bool = True
    # two-regime
    low_price: float = 1.0
    high_price: float = 10.0
    cheap_fraction: float = 0.5
    shift: int = 0
    # flat
    flat_prices: Optional[Tuple[float, ...]] = None
    # cycle length in slots for the diurnal and two-regime shapes (defaults to one day)
    period: Optional[int] = None
    noise: float = 0.0
    history_noise: Optional[float] = None
    history_days: Tuple[int, ...] = HISTORY_OFFSETS
    workload_shape: str = "A"
    mean_load: float = 10.0
    classes: Optional[str] = None
    seed: int = DEFAULT_SEED
    capacity: float = DEFAULT_CAPACITY
    migration_rate_per_1000km: float = DEFAULT_MIGRATION_RATE_PER_1000KM

    def __post_init__(self):
        object.__setattr__(self, 'sites', tuple(self.sites))
        object.__setattr__(self, 'history_days', tuple(int(d) for d in self.history_days))
        if self.flat_prices is not None:
            object.__setattr__(self, 'flat_prices', tuple(float(p) for p in self.flat_prices))
        if self.num_slots < 1:
            raise DomainError("num_slots must be positive")
        if self.slot_length <= 0:
            raise DomainError("slot_length must be positive")
        if not self.sites:
            raise DomainError("at least one site is required")
        if self.price_kind not in PRICE_KINDS:
            raise DomainError(f"price_kind must be one of {PRICE_KINDS}, got '{self.price_kind}'")
        if self.workload_shape not in WORKLOAD_KINDS:
            raise DomainError(f"workload_shape must be one of {WORKLOAD_KINDS}, got '{self.workload_shape}'")
        if self.period is not None and self.period < 1:
            raise DomainError("period must be positive")
        if not 0.0 <= self.cheap_fraction <= 1.0:
            raise DomainError("cheap_fraction must lie in [0, 1]")
        if self.noise < 0 or (self.history_noise is not None and self.history_noise < 0):
            raise DomainError("noise levels must be nonnegative")
        if self.mean_load < 0:
            raise DomainError("mean_load must be nonnegative")
        if any(d < 1 for d in self.history_days):
            raise DomainError("history day offsets must be at least 1")
        if self.price_kind == "flat" and self.flat_prices is not None and len(self.flat_prices) != self.n:
            raise DomainError("flat_prices needs one price per site")
        if min(self.base_price, self.low_price, self.high_price) < 0:
            raise DomainError("prices must be nonnegative")

    @property
    def n(self) -> int:
        return len(self.sites)

    @property
    def cycle(self) -> int:
        return self.period or slots_per_day(self.slot_length)

    @classmethod
    def from_dict(cls, data: Dict) -> 'SynthesisSpec':
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise DomainError(f"unknown synthesis fields: {unknown}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str) -> 'SynthesisSpec':
        if not os.path.exists(path):
            raise IngestionError("file not found", path)
        try:
            with open(path, encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise IngestionError(f"JSON parse error: {e}", path, e.lineno) from e
        if not isinstance(data, dict):
            raise IngestionError("synthesis spec must be a JSON object", path)
        return cls.from_dict(data)

    def to_dict(self) -> Dict:
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        for key in ("sites", "history_days", "flat_prices"):
            if data[key] is not None:
                data[key] = list(data[key])
        return data

    def cloud(self, horizon: int = 0) -> CloudConfig:
        """Data centers at these sites; unknown site names get a uniform migration rate."""
        if all(name in MARKET_SITES for name in self.sites):
            return CloudConfig.from_locations(get_sites(self.sites), self.migration_rate_per_1000km,
                                              capacity=self.capacity, horizon=horizon)
        return CloudConfig.uniform(self.n, self.capacity, migration_rate=self.migration_rate_per_1000km,
                                   horizon=horizon, names=self.sites)


def _phase_slots(spec: SynthesisSpec, i: int) -> int:
    name = spec.sites[i]
    if not spec.phase_from_utc or name not in MARKET_SITES:
        return 0
    return int(round(MARKET_SITES[name]["utc_offset"] * 3600 / spec.slot_length))


def price_curve(spec: SynthesisSpec, kappa: np.ndarray) -> np.ndarray:
    """Noise-free prices (n, len(kappa)) at day-frame slots kappa."""
    kappa = np.asarray(kappa)
    curve = np.zeros((spec.n, kappa.shape[0]))
    for i in range(spec.n):
        if spec.price_kind == "flat":
            curve[i] = spec.flat_prices[i] if spec.flat_prices is not None else spec.base_price
        elif spec.price_kind == "diurnal":
            angle = 2 * np.pi * ((kappa + _phase_slots(spec, i)) % spec.cycle) / spec.cycle
            # cheapest at local midnight
            curve[i] = spec.base_price - spec.amplitude * np.cos(angle)
        else:
            position = (kappa - i * spec.shift) % spec.cycle
            cheap = position < spec.cheap_fraction * spec.cycle
            curve[i] = np.where(cheap, spec.low_price, spec.high_price)
    return curve


def _noisy(curve: np.ndarray, sigma: float, seed: int, stream: int, day: int) -> np.ndarray:
    if sigma <= 0:
        return curve
    rng = np.random.default_rng([seed, stream, day])
    return np.maximum(curve + rng.normal(0.0, sigma, size=curve.shape), 0.0)


def synthesize_prices(spec: SynthesisSpec) -> PriceTrace:
    per_day = slots_per_day(spec.slot_length)
    run_slots = np.arange(spec.num_slots) % per_day
    beta = _noisy(price_curve(spec, run_slots), spec.noise, spec.seed, _RUN_DAY, 0)
    history_sigma = spec.noise if spec.history_noise is None else spec.history_noise
    day_slots = np.arange(per_day)
    history = {
        offset: _noisy(price_curve(spec, day_slots), history_sigma, spec.seed, _HISTORY_DAY, offset)
        for offset in spec.history_days
    }
    return PriceTrace(beta, history, spec.slot_length, 0, spec.sites, max(spec.history_days, default=0))


def synthesize_workload(spec: SynthesisSpec) -> WorkloadTrace:
    T = spec.num_slots
    if spec.workload_shape == "constant":
        released = np.full(T, float(spec.mean_load))
    else:
        shape = WORKLOAD_SHAPES[spec.workload_shape]
        kappa = np.arange(T) % spec.cycle
        released = spec.mean_load * (1.0 - shape["peak_to_mean"] * np.cos(2 * np.pi * kappa / spec.cycle + np.pi / 3))
        rng = np.random.default_rng([spec.seed, _WORKLOAD])
        bursts = rng.random(T) < shape["burst_probability"]
        released = np.where(bursts, released * shape["burst_scale"], released)
    if spec.classes is None:
        return WorkloadTrace(released)
    return split_by_class(released, spec.classes)


def split_by_class(released: np.ndarray, workload: str = "A") -> WorkloadTrace:
    """Split each slot's load over deadline classes 1..10 in proportion to the preset cluster job counts."""
    shares = get_class_shares(workload)
    by_deadline = np.zeros((max(shares) + 1, len(released)))
    for d, share in shares.items():
        by_deadline[d] = share * np.asarray(released, dtype=float)
    # absorb float residue into the loosest class so rows sum exactly to the release
    by_deadline[max(shares)] = np.asarray(released, dtype=float) - by_deadline[:max(shares)].sum(axis=0)
    by_deadline = np.maximum(by_deadline, 0.0)
    return WorkloadTrace(by_deadline.sum(axis=0), by_deadline)


def synthesize_traces(spec: SynthesisSpec) -> Tuple[PriceTrace, WorkloadTrace]:
    prices = synthesize_prices(spec)
    work = synthesize_workload(spec)
    logger.info("✓ Synthesized %s prices (%d x %d) and %s workload (total %.3f)",
                spec.price_kind, prices.n, prices.T, spec.workload_shape, float(work.released.sum()))
    return prices, work


def adversarial_case(case: int, horizon: int, capacity: float = DEFAULT_CAPACITY, ratio: float = 3.0,
                     cheap: float = 1.0, expensive: float = 100.0) -> Tuple[CloudConfig, PriceTrace, WorkloadTrace]:
    """
    One data center over D+2 slots: slot 0 costs ratio * cheap, slot D is cheap, every other slot is
    expensive. Case 1 releases a full slot of work at slots 0 and 1; case 2 only at slot 0.
    An online scheduler that defers the first release to slot D has no cheap room left in case 1.
    """
    if case not in (1, 2):
        raise DomainError("adversarial case must be 1 or 2")
    if horizon < 1:
        raise DomainError("the adversarial instance needs a horizon of at least 1")
    if ratio < 1:
        raise DomainError("ratio must be at least 1")
    T = horizon + 2
    beta = np.full((1, T), float(expensive))
    beta[0, 0] = ratio * cheap
    beta[0, horizon] = cheap
    released = np.zeros(T)
    released[0] = capacity
    if case == 1:
        released[1] = capacity
    history = {offset: np.full((1, slots_per_day(DEFAULT_SLOT_SECONDS)), float(expensive)) for offset in HISTORY_OFFSETS}
    cloud = CloudConfig.uniform(1, capacity, horizon=horizon, names=("dc0",))
    return cloud, PriceTrace(beta, history, locations=("dc0",)), WorkloadTrace(released)


def preset_cluster_jobs(workload: str = "A", slot_length: float = DEFAULT_SLOT_SECONDS, num_slots: int = 288,
                   seed: int = DEFAULT_SEED, scale: float = 1.0) -> List[JobRecord]:
    """
    Job corpus with the preset cluster sizes: every job of a cluster carries exactly the cluster's mean
    byte volume, submit times are uniform over the run, and each job takes one slot.
    """
    if scale <= 0:
        raise DomainError("scale must be positive")
    rng = np.random.default_rng([seed, _JOBS])
    jobs: List[JobRecord] = []
    for row in get_cluster_preset(workload):
        count = max(1, int(round(row["jobs"] * scale)))
        submits = np.sort(rng.uniform(0.0, num_slots * slot_length, size=count))
        for submit in submits:
            jobs.append(JobRecord(float(submit), 1.0, row["gigabytes"] * BYTES_PER_GB, job_id=len(jobs)))
    return jobs


@dataclass(frozen=True, eq=False)
class Scenario:
    """One corpus entry: a cloud (carrying its horizon) with traces and a prediction model."""
    name: str
    kind: str
    cloud: CloudConfig
    prices: PriceTrace
    work: WorkloadTrace
    prediction: PredictionModel = field(default_factory=PredictionModel)
    deadline_mode: DeadlineMode = DeadlineMode.UNIFORM

    @property
    def horizon(self) -> int:
        return self.cloud.horizon

    def config(self, algorithm, horizon: Optional[int] = None) -> RunConfig:
        cloud = self.cloud if horizon is None else self.cloud.with_horizon(horizon)
        return RunConfig(algorithm, cloud, self.prices, self.work, self.prediction, self.deadline_mode, self.name)


# Migration rate far above every actual or predicted price gap in the noisy scenarios
NOISY_MIGRATION_RATE = 1e3
CORPUS_SLOTS = 48
CORPUS_CAPACITY = 50.0
# contended scenarios: per-site capacity below one slot's release, (D+1) releases within the total
CONTENDED_CAPACITY = 10.0
CONTENDED_LOADS = {1: 18.0, 3: 9.5}
CONTENDED_RATES = (0.0, 0.1, 0.5)


def _slack_workload(work: WorkloadTrace, capacity: float, horizon: int) -> WorkloadTrace:
    """Scale a workload so every release fits in capacity / (D+1)."""
    limit = capacity / (horizon + 1)
    peak = float(work.released.max())
    if peak <= limit:
        return work
    factor = limit / peak
    if work.is_nonuniform:
        return WorkloadTrace.from_classes(work.released_by_deadline * factor)
    return WorkloadTrace(work.released * factor)


def _from_spec(name: str, kind: str, spec: SynthesisSpec, horizon: int, prediction: PredictionModel,
               migration_rate: Optional[float] = None, nonuniform: bool = False, slack: bool = True) -> Scenario:
    prices, work = synthesize_traces(spec)
    if slack:
        work = _slack_workload(work, spec.capacity, horizon)
    if migration_rate is None:
        cloud = spec.cloud(horizon)
    else:
        cloud = CloudConfig.uniform(spec.n, spec.capacity, migration_rate=migration_rate,
                                    horizon=horizon, names=spec.sites)
    mode = DeadlineMode.NONUNIFORM if nonuniform else DeadlineMode.UNIFORM
    return Scenario(name, kind, cloud, prices, work, prediction, mode)


def scenario_corpus(seed: int = DEFAULT_SEED) -> List[Scenario]:
    """
    The bundled scenario set. Outside the contended kind, releases never exceed capacity / (D+1), so
    windows never compete for room. Flat scenarios have noise-free history, so their predictions are
    exact. Noisy scenarios use migration rates no price gap can beat.

    Contended scenarios overflow any single site every slot while (D+1) releases still fit in the
    total capacity, so every algorithm stays feasible and migration has something to gain.
    """
    base = SynthesisSpec(num_slots=CORPUS_SLOTS, capacity=CORPUS_CAPACITY, seed=seed, period=16)
    exact = PredictionModel(rng_seed=seed)
    sampled = PredictionModel(rng_seed=seed, mode=PredictionMode.SAMPLED)
    mean_only = PredictionModel(rng_seed=seed, mode=PredictionMode.MEAN_ONLY)
    scenarios: List[Scenario] = []

    flat = replace(base, price_kind="flat", workload_shape="A", mean_load=6.0)
    scenarios.append(_from_spec("flat-single", "flat", replace(flat, sites=("NYISO",), flat_prices=(5.0,)), 2, exact))
    scenarios.append(_from_spec("flat-spread", "flat", replace(flat, flat_prices=(3.0, 5.0, 7.0, 9.0)), 3, exact))
    scenarios.append(_from_spec("flat-tied", "flat", replace(flat, flat_prices=(4.0, 4.0, 6.0, 4.0)), 2, exact))
    scenarios.append(_from_spec("flat-bursty", "flat", replace(flat, workload_shape="B", flat_prices=(8.0, 2.0, 6.0, 4.0)),
                                5, exact))
    scenarios.append(_from_spec("flat-classes", "flat", replace(flat, classes="A", flat_prices=(3.0, 5.0, 7.0, 9.0)),
                                4, exact, nonuniform=True))
    scenarios.append(_from_spec("flat-noisy-history", "flat",
                                replace(flat, flat_prices=(10.0, 11.0, 12.0, 10.5), history_noise=3.0), 3, sampled,
                                migration_rate=NOISY_MIGRATION_RATE))

    diurnal = replace(base, price_kind="diurnal", base_price=30.0, amplitude=2.0, history_noise=4.0,
                      workload_shape="A", mean_load=5.0)
    for horizon in (1, 2, 4, 6):
        scenarios.append(_from_spec(f"diurnal-d{horizon}", "diurnal", diurnal, horizon, sampled,
                                    migration_rate=NOISY_MIGRATION_RATE))
    scenarios.append(_from_spec("diurnal-bursty", "diurnal", replace(diurnal, workload_shape="B"), 3, sampled,
                                migration_rate=NOISY_MIGRATION_RATE))
    scenarios.append(_from_spec("diurnal-classes", "diurnal", replace(diurnal, classes="B"), 4, sampled,
                                migration_rate=NOISY_MIGRATION_RATE, nonuniform=True))

    two_regime = replace(base, price_kind="two_regime", low_price=1.0, high_price=10.0, workload_shape="constant",
                         mean_load=3.0)
    scenarios.append(_from_spec("two-regime-aligned", "two_regime", two_regime, 4, mean_only,
                                migration_rate=NOISY_MIGRATION_RATE))
    for horizon, shift in ((1, 2), (3, 4), (7, 3)):
        scenarios.append(_from_spec(f"two-regime-d{horizon}-shift{shift}", "two_regime",
                                    replace(two_regime, shift=shift), horizon, mean_only,
                                    migration_rate=NOISY_MIGRATION_RATE))
    scenarios.append(_from_spec("two-regime-classes", "two_regime", replace(two_regime, classes="A", shift=4), 5,
                                mean_only, migration_rate=NOISY_MIGRATION_RATE, nonuniform=True))

    oracle = PredictionModel(rng_seed=seed, mode=PredictionMode.ORACLE)
    contended = replace(base, price_kind="diurnal", base_price=30.0, amplitude=10.0, history_noise=4.0,
                        workload_shape="constant", capacity=CONTENDED_CAPACITY)
    for horizon, load in CONTENDED_LOADS.items():
        spec = replace(contended, mean_load=load)
        for rate in CONTENDED_RATES:
            scenarios.append(_from_spec(f"contended-d{horizon}-b{rate:g}", "contended", spec, horizon, sampled,
                                        migration_rate=rate, slack=False))
        scenarios.append(_from_spec(f"contended-d{horizon}-oracle", "contended", spec, horizon, oracle,
                                    migration_rate=0.1, slack=False))

    for horizon in (2, 4):
        for case in (1, 2):
            cloud, prices, work = adversarial_case(case, horizon, CORPUS_CAPACITY)
            scenarios.append(Scenario(f"adversary-case{case}-d{horizon}", "adversarial", cloud, prices, work, oracle))
    return scenarios


def two_regime_reference(seed: int = DEFAULT_SEED) -> Scenario:
    """Four aligned data centers, M=50, three units per slot, 8 cheap (1) then 8 expensive (10) slots."""
    spec = SynthesisSpec(num_slots=CORPUS_SLOTS, capacity=CORPUS_CAPACITY, seed=seed, period=16,
                         price_kind="two_regime", low_price=1.0, high_price=10.0, workload_shape="constant",
                         mean_load=3.0)
    prices, work = synthesize_traces(spec)
    cloud = CloudConfig.uniform(spec.n, spec.capacity, migration_rate=NOISY_MIGRATION_RATE, names=spec.sites)
    return Scenario("two-regime-reference", "two_regime", cloud, prices, work,
                    PredictionModel(rng_seed=seed, mode=PredictionMode.MEAN_ONLY))


def corpus_by_name(seed: int = DEFAULT_SEED) -> Dict[str, Scenario]:
    return {s.name: s for s in scenario_corpus(seed)}
