"""
Job records, decomposition of long jobs into one-slot pieces, and k-means
classification of jobs into deadline classes by their total byte volume.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.cluster import KMeans

from config.settings import DEFAULT_KMEANS_CLUSTERS, DEFAULT_SEED, DEFAULT_SLOT_SECONDS, KMEANS_MAX_ITER
from src.errors import DomainError
from src.model import WorkloadTrace

logger = logging.getLogger(__name__)

BYTES_PER_GB = 1e9
CLUSTER_COLUMNS = ["cluster", "jobs", "gigabytes", "deadline_slots"]


@dataclass(frozen=True)
class JobRecord:
    submit_time: float          # seconds
    size: float                 # job length in slots
    bytes: float = 0.0          # map + shuffle + reduce
    preemptive: bool = False
    deadline_class: Optional[int] = None
    job_id: int = 0

    def __post_init__(self):
        if not self.size > 0:
            raise DomainError(f"job {self.job_id}: size must be positive, got {self.size}")
        if self.bytes < 0:
            raise DomainError(f"job {self.job_id}: bytes must be nonnegative")
        if self.submit_time < 0:
            raise DomainError(f"job {self.job_id}: submit time must be nonnegative")
        if self.deadline_class is not None and self.deadline_class < 0:
            raise DomainError(f"job {self.job_id}: deadline class must be nonnegative")

    @property
    def length_slots(self) -> int:
        return int(math.ceil(self.size))

    def with_deadline(self, deadline: int) -> 'JobRecord':
        return replace(self, deadline_class=int(deadline))

    def submit_slot(self, slot_length: float = DEFAULT_SLOT_SECONDS) -> int:
        return int(self.submit_time // slot_length)


@dataclass(frozen=True)
class JobPiece:
    """One slot of work from a decomposed job; `after` is the index of the piece it waits for."""
    release_slot: int
    size: float
    deadline: int
    index: int
    after: Optional[int] = None


def decompose_job(job: JobRecord, slot_length: float = DEFAULT_SLOT_SECONDS,
                  horizon: Optional[int] = None) -> List[JobPiece]:
    """
    Split a job of length l slots into l one-slot pieces.

    Preemptive jobs: every piece gets deadline floor(D/l) - 1, and pieces are released
    floor(D/l) slots apart. Non-preemptive jobs: the first piece gets deadline D - l,
    the rest deadline 0, each released right after its predecessor's latest finish.
    """
    D = job.deadline_class if horizon is None else horizon
    if D is None:
        raise DomainError(f"job {job.job_id} has no deadline; classify it or pass a horizon")
    if D < 0:
        raise DomainError("deadline must be nonnegative")
    length = job.length_slots
    t0 = job.submit_slot(slot_length)
    if length == 1:
        return [JobPiece(t0, float(job.size), int(D), 0)]
    if D < length - 1:
        raise DomainError(f"job {job.job_id} of {length} slots cannot finish within deadline {D}")

    sizes = []
    remaining = float(job.size)
    for _ in range(length):
        sizes.append(min(1.0, remaining))
        remaining -= sizes[-1]

    pieces = []
    if job.preemptive:
        step = max(D // length, 1)
        deadline = max(D // length - 1, 0)
        for k, size in enumerate(sizes):
            pieces.append(JobPiece(t0 + k * step, size, deadline, k, k - 1 if k else None))
    else:
        lead = max(D - length, 0)
        pieces.append(JobPiece(t0, sizes[0], lead, 0))
        for k in range(1, length):
            pieces.append(JobPiece(t0 + lead + k, sizes[k], 0, k, k - 1))
    return pieces


def jobs_to_workload(jobs: Sequence[JobRecord], slot_length: float = DEFAULT_SLOT_SECONDS,
                     horizon: Optional[int] = None, num_slots: Optional[int] = None) -> WorkloadTrace:
    """
    Nonuniform workload from (classified) jobs: each decomposed piece adds its size to
    class `deadline` at its release slot.
    """
    pieces = [p for job in jobs for p in decompose_job(job, slot_length, horizon)]
    if not pieces:
        raise DomainError("no jobs to convert")
    last_release = max(p.release_slot for p in pieces)
    T = num_slots if num_slots is not None else last_release + 1
    if last_release >= T:
        raise DomainError(f"a job piece is released in slot {last_release}, beyond the {T} requested slots")
    classes = np.zeros((max(p.deadline for p in pieces) + 1, T))
    for piece in pieces:
        classes[piece.deadline, piece.release_slot] += piece.size
    logger.info("✓ Converted %d jobs into %d pieces over %d slots", len(jobs), len(pieces), T)
    return WorkloadTrace.from_classes(classes)


@dataclass(frozen=True, eq=False)
class ClusterTable:
    """Clusters ordered by deadline (row c has deadline deadlines[c])."""
    centroids: np.ndarray       # over log10(1 + bytes)
    counts: np.ndarray
    total_bytes: np.ndarray
    deadlines: np.ndarray

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def mean_gigabytes(self) -> np.ndarray:
        counts = np.maximum(self.counts, 1)
        return self.total_bytes / counts / BYTES_PER_GB

    def rows(self) -> List[Dict]:
        mean_gb = self.mean_gigabytes
        return [
            {"cluster": c + 1, "jobs": int(self.counts[c]), "gigabytes": float(mean_gb[c]),
             "deadline_slots": int(self.deadlines[c])}
            for c in range(self.k)
        ]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows(), columns=CLUSTER_COLUMNS)


def job_features(jobs: Sequence[JobRecord]) -> np.ndarray:
    return np.log10(1.0 + np.array([job.bytes for job in jobs], dtype=float))


def _initial_centers(distinct: np.ndarray, k: int) -> np.ndarray:
    # midpoint of each of k equal-count groups of the sorted distinct values
    groups = np.array_split(distinct, k)
    return np.array([(g.min() + g.max()) / 2.0 for g in groups]).reshape(-1, 1)


def classify_jobs(jobs: Sequence[JobRecord], k: int = DEFAULT_KMEANS_CLUSTERS,
                  seed: int = DEFAULT_SEED) -> Tuple[ClusterTable, List[JobRecord]]:
    """
    One-dimensional k-means over log10(1 + bytes). Clusters sorted by descending job count
    (ties by ascending centroid) get deadlines 1..k; each job is returned with its deadline.
    """
    if not jobs:
        raise DomainError("no jobs to classify")
    if k < 1:
        raise DomainError(f"cluster count must be positive, got {k}")
    features = job_features(jobs)
    distinct = np.unique(features)
    if k > distinct.shape[0]:
        raise DomainError(f"cannot form {k} clusters from {distinct.shape[0]} distinct byte volumes")

    logger.info("=== Classifying %d jobs into %d clusters ===", len(jobs), k)
    kmeans = KMeans(n_clusters=k, init=_initial_centers(distinct, k), n_init=1,
                    max_iter=KMEANS_MAX_ITER, tol=0.0, algorithm="lloyd", random_state=seed)
    labels = kmeans.fit_predict(features.reshape(-1, 1))
    centroids = kmeans.cluster_centers_.ravel()
    counts = np.bincount(labels, minlength=k)
    volume = np.array([job.bytes for job in jobs], dtype=float)
    total_bytes = np.bincount(labels, weights=volume, minlength=k)

    order = sorted(range(k), key=lambda c: (-counts[c], centroids[c]))
    rank = np.empty(k, dtype=int)
    rank[order] = np.arange(k)
    table = ClusterTable(
        centroids=centroids[order],
        counts=counts[order],
        total_bytes=total_bytes[order],
        deadlines=np.arange(1, k + 1),
    )
    annotated = [job.with_deadline(rank[label] + 1) for job, label in zip(jobs, labels)]
    logger.info("✓ Cluster sizes: %s", ", ".join(str(int(c)) for c in table.counts))
    return table, annotated
