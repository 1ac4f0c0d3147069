import logging
import os
from dataclasses import dataclass

from dotenv import load_dotenv

load_dotenv()


@dataclass(frozen=True)
class Tolerances:
    """Numeric tolerances shared by every solver, check and audit."""
    feasibility: float = 1e-9
    objective_rel: float = 1e-6
    nonnegativity: float = 1e-12

    def objectives_match(self, a: float, b: float) -> bool:
        return abs(a - b) <= self.objective_rel * max(1.0, abs(a), abs(b))


TOLERANCES = Tolerances()

# Experimental defaults (5 minute spot-market slots, four sites)
DEFAULT_SLOT_SECONDS = 300
DEFAULT_NUM_DATACENTERS = 4
DEFAULT_CAPACITY = float(os.getenv('GLB_CAPACITY', 50.0))
DEFAULT_ALPHA = 0.0
DEFAULT_FILTER_K = (0.837, 0.0, 0.142)
DEFAULT_SEED = int(os.getenv('GLB_SEED', 20120215))
# Currency per unit load per 1000 km of great-circle distance
DEFAULT_MIGRATION_RATE_PER_1000KM = float(os.getenv('GLB_MIGRATION_RATE_PER_1000KM', 0.05))
DEFAULT_KMEANS_CLUSTERS = 10
KMEANS_MAX_ITER = 300

# Simplex
BLAND_AFTER_DEGENERATE_PIVOTS = 50
ITERATION_CAP_PER_VARIABLE = 10_000
# Online LPs prefer the earliest slot among equally priced ones (per slot offset, relative to price scale);
# kept above the simplex optimality tolerance
TIE_BREAK_PER_SLOT = 1e-8

DB_PATH = os.getenv('GLB_DB_PATH', 'runs.db')
LOG_LEVEL = os.getenv('GLB_LOG_LEVEL', 'INFO')

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def configure_logging(level: str = None):
    """Configure root logging once for the CLI and the dashboard."""
    level_name = (level or LOG_LEVEL).upper()
    logging.basicConfig(level=getattr(logging, level_name, logging.INFO), format=LOG_FORMAT)
    for noisy in ('sqlalchemy.engine', 'urllib3'):
        logging.getLogger(noisy).setLevel(logging.WARNING)
