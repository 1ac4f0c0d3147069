"""
Exception hierarchy for the load-balancing library.
Infeasibility and unboundedness of a single LP are reported through
LpSolution.status; these exceptions are for callers that cannot continue.
"""
from typing import Optional, Tuple

import numpy as np


class GlbError(Exception):
    """Base class for every error raised by the library."""


class DomainError(GlbError, ValueError):
    """An argument is outside the domain of a cost or prediction function."""


class InfeasibleError(GlbError):
    """A scheduling phase has no feasible decision."""

    def __init__(self, message: str, slot: Optional[int] = None, phase: Optional[str] = None,
                 datacenter: Optional[int] = None, window: Optional[Tuple[int, int]] = None):
        self.slot = slot
        self.phase = phase
        self.datacenter = datacenter
        self.window = window
        where = []
        if phase:
            where.append(f"phase={phase}")
        if slot is not None:
            where.append(f"slot={slot}")
        if datacenter is not None:
            where.append(f"datacenter={datacenter}")
        if window is not None:
            where.append(f"window=[{window[0]}, {window[1]}]")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"{message}{suffix}")


class LpStalledError(GlbError):
    """Simplex iteration cap exceeded; carries the best feasible point found (or None)."""

    def __init__(self, iterations: int, best_point: Optional[np.ndarray] = None,
                 best_objective: Optional[float] = None):
        self.iterations = iterations
        self.best_point = best_point
        self.best_objective = best_objective
        super().__init__(f"Simplex stalled after {iterations} iterations")


class AccountingError(GlbError):
    """Internal bookkeeping produced an impossible value (negative load, over capacity)."""


class IngestionError(GlbError):
    """A trace file could not be read; carries the path and 1-based line number when known."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path:
            location = f"{path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        super().__init__(f"{location}{message}")


class PredictionError(GlbError):
    """Price prediction cannot be produced (empty history, horizon beyond trace)."""
