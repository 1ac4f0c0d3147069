"""
CSV readers and writers for price traces, pre-aggregated workloads and job traces.

Loaders reject malformed input with the offending line number; nothing is imputed.
The only repair is clamping negative prices to 0, which is counted and logged.
"""
import logging
import os
import re
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config.settings import DEFAULT_SLOT_SECONDS
from src.errors import IngestionError
from src.job_classifier import JobRecord
from src.model import PriceTrace, WorkloadTrace

logger = logging.getLogger(__name__)

PRICE_COLUMNS = ["day", "slot", "location", "price"]
WORKLOAD_COLUMNS = ["slot", "load"]
CLASS_WORKLOAD_COLUMNS = ["slot", "deadline_class", "load"]
JOB_COLUMNS = ["submit_seconds", "length_slots", "map_bytes", "shuffle_bytes", "reduce_bytes", "preemptive"]

TRUE_FLAGS = {"1", "true", "yes", "y", "t"}
FALSE_FLAGS = {"0", "false", "no", "n", "f", ""}


def _read_table(path: str, expected: Sequence[Sequence[str]]) -> pd.DataFrame:
    """Read a CSV as strings and check its header against the accepted column lists."""
    if not os.path.exists(path):
        raise IngestionError("file not found", path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True, encoding="utf-8")
    except pd.errors.EmptyDataError as e:
        raise IngestionError("file is empty", path) from e
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        raise IngestionError(f"CSV parse error: {e}", path, int(match.group(1)) if match else None) from e
    except UnicodeDecodeError as e:
        raise IngestionError(f"file is not UTF-8: {e}", path) from e

    columns = [c.strip() for c in df.columns]
    if columns not in [list(e) for e in expected]:
        raise IngestionError(f"unexpected header {columns}; expected one of {[list(e) for e in expected]}", path, 1)
    df.columns = columns
    return df


def _line(row_index: int) -> int:
    # header is line 1
    return row_index + 2


def _parse(value, kind, path: str, row_index: int, column: str):
    text = "" if value is None or (isinstance(value, float) and np.isnan(value)) else str(value).strip()
    if text == "":
        raise IngestionError(f"missing value in column '{column}'", path, _line(row_index))
    try:
        parsed = kind(text)
    except ValueError:
        raise IngestionError(f"cannot parse {column}={text!r}", path, _line(row_index))
    if kind is float and not np.isfinite(parsed):
        raise IngestionError(f"{column} must be finite, got {text!r}", path, _line(row_index))
    return parsed


def load_price_csv(path: str, run_day: Optional[int] = None,
                   slot_length: float = DEFAULT_SLOT_SECONDS) -> PriceTrace:
    """
    Price CSV with header day,slot,location,price. The run day defaults to the last day
    in the file; earlier days become history at offset run_day - day.
    """
    df = _read_table(path, [PRICE_COLUMNS])
    if df.empty:
        raise IngestionError("no price rows", path)
    records = {}
    locations: List[str] = []
    clamped = 0
    for idx, row in enumerate(df.itertuples(index=False)):
        day = _parse(row.day, int, path, idx, "day")
        slot = _parse(row.slot, int, path, idx, "slot")
        location = "" if isinstance(row.location, float) else str(row.location).strip()
        price = _parse(row.price, float, path, idx, "price")
        if slot < 0:
            raise IngestionError(f"slot must be nonnegative, got {slot}", path, _line(idx))
        if not location:
            raise IngestionError("missing location", path, _line(idx))
        key = (day, slot, location)
        if key in records:
            raise IngestionError(f"duplicate price for day {day}, slot {slot}, location {location}", path, _line(idx))
        if price < 0:
            clamped += 1
            price = 0.0
        records[key] = price
        if location not in locations:
            locations.append(location)

    days = sorted({d for d, _, _ in records})
    run_day = days[-1] if run_day is None else run_day
    if run_day not in days:
        raise IngestionError(f"run day {run_day} not present", path)

    def day_matrix(day: int, from_zero: bool) -> Tuple[int, np.ndarray]:
        slots = sorted({s for d, s, _ in records if d == day})
        first = 0 if from_zero else slots[0]
        expected = list(range(first, slots[-1] + 1))
        if slots != expected:
            gaps = sorted(set(expected) - set(slots))
            raise IngestionError(f"day {day} is missing slots {gaps[:5]}", path)
        matrix = np.zeros((len(locations), len(expected)))
        for i, loc in enumerate(locations):
            for k, s in enumerate(expected):
                if (day, s, loc) not in records:
                    raise IngestionError(f"day {day}, slot {s} has no price for location {loc}", path)
                matrix[i, k] = records[(day, s, loc)]
        return first, matrix

    start_slot, beta = day_matrix(run_day, from_zero=False)
    history = {}
    for day in days:
        if day < run_day:
            history[run_day - day] = day_matrix(day, from_zero=True)[1]
    if clamped:
        logger.warning("Clamped %d negative prices to 0 in %s", clamped, path)
    logger.info("✓ Loaded prices: %d locations x %d slots, %d history days", len(locations), beta.shape[1], len(history))
    return PriceTrace(beta, history, slot_length, start_slot, tuple(locations), run_day, clamped)


def write_price_csv(trace: PriceTrace, path: str):
    rows = []
    for offset in sorted(trace.history, reverse=True):
        day = trace.history[offset]
        for k in range(day.shape[1]):
            for i, loc in enumerate(trace.locations):
                rows.append((trace.day - offset, k, loc, float(day[i, k])))
    for t in range(trace.T):
        for i, loc in enumerate(trace.locations):
            rows.append((trace.day, trace.start_slot + t, loc, float(trace.beta[i, t])))
    pd.DataFrame(rows, columns=PRICE_COLUMNS).to_csv(path, index=False)


def load_workload_csv(path: str) -> WorkloadTrace:
    """Workload CSV `slot,load`, or `slot,deadline_class,load` for a class split."""
    df = _read_table(path, [WORKLOAD_COLUMNS, CLASS_WORKLOAD_COLUMNS])
    by_class = "deadline_class" in df.columns
    values = {}
    for idx, row in enumerate(df.itertuples(index=False)):
        slot = _parse(row.slot, int, path, idx, "slot")
        d = _parse(row.deadline_class, int, path, idx, "deadline_class") if by_class else 0
        load = _parse(row.load, float, path, idx, "load")
        if slot < 0 or d < 0:
            raise IngestionError("slot and deadline_class must be nonnegative", path, _line(idx))
        if load < 0:
            raise IngestionError(f"load must be nonnegative, got {load}", path, _line(idx))
        if (slot, d) in values:
            raise IngestionError(f"duplicate row for slot {slot}" + (f", class {d}" if by_class else ""), path, _line(idx))
        values[(slot, d)] = load
    if not values:
        raise IngestionError("no workload rows", path)

    slots = sorted({s for s, _ in values})
    if slots != list(range(slots[-1] + 1)):
        gaps = sorted(set(range(slots[-1] + 1)) - set(slots))
        raise IngestionError(f"missing slots {gaps[:5]}", path)
    T = len(slots)
    if not by_class:
        return WorkloadTrace(np.array([values[(s, 0)] for s in range(T)]))
    classes = np.zeros((max(d for _, d in values) + 1, T))
    for (s, d), load in values.items():
        classes[d, s] = load
    return WorkloadTrace.from_classes(classes)


def write_workload_csv(work: WorkloadTrace, path: str, by_class: Optional[bool] = None):
    by_class = work.is_nonuniform if by_class is None else by_class
    if by_class:
        rows = [(t, d, float(work.released_by_deadline[d, t]))
                for t in range(work.T) for d in range(work.released_by_deadline.shape[0])]
        frame = pd.DataFrame(rows, columns=CLASS_WORKLOAD_COLUMNS)
    else:
        frame = pd.DataFrame({"slot": np.arange(work.T), "load": work.released})
    frame.to_csv(path, index=False)


def _parse_flag(value, path, idx) -> bool:
    text = str(value).strip().lower()
    if text in TRUE_FLAGS:
        return True
    if text in FALSE_FLAGS:
        return False
    raise IngestionError(f"cannot parse preemptive={value!r}", path, _line(idx))


def load_jobs_csv(path: str, slot_length: float = DEFAULT_SLOT_SECONDS,
                  num_slots: Optional[int] = None) -> Tuple[List[JobRecord], WorkloadTrace]:
    """
    Jobs CSV; every job adds its length (in slots) to the load of the slot it was submitted in.
    """
    df = _read_table(path, [JOB_COLUMNS])
    jobs: List[JobRecord] = []
    for idx, row in enumerate(df.itertuples(index=False)):
        submit = _parse(row.submit_seconds, float, path, idx, "submit_seconds")
        length = _parse(row.length_slots, float, path, idx, "length_slots")
        parts = [_parse(getattr(row, c), float, path, idx, c) for c in ("map_bytes", "shuffle_bytes", "reduce_bytes")]
        if submit < 0:
            raise IngestionError("submit_seconds must be nonnegative", path, _line(idx))
        if length <= 0:
            raise IngestionError(f"length_slots must be positive, got {length}", path, _line(idx))
        if min(parts) < 0:
            raise IngestionError("byte counts must be nonnegative", path, _line(idx))
        jobs.append(JobRecord(submit, length, float(sum(parts)), _parse_flag(row.preemptive, path, idx), job_id=idx))
    if not jobs:
        raise IngestionError("no job rows", path)

    slots = [int(job.submit_time // slot_length) for job in jobs]
    T = num_slots if num_slots is not None else max(slots) + 1
    if max(slots) >= T:
        raise IngestionError(f"job submitted in slot {max(slots)} beyond the {T} requested slots", path)
    released = np.zeros(T)
    for job, slot in zip(jobs, slots):
        released[slot] += job.size
    logger.info("✓ Loaded %d jobs into %d slots", len(jobs), T)
    return jobs, WorkloadTrace(released)


def write_jobs_csv(jobs: Iterable[JobRecord], path: str):
    rows = [(job.submit_time, job.size, job.bytes, 0.0, 0.0, int(job.preemptive)) for job in jobs]
    pd.DataFrame(rows, columns=JOB_COLUMNS).to_csv(path, index=False)
