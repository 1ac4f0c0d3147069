"""
Dense two-phase tableau simplex.

LinearProgram: minimize c.v + constant subject to
    a_eq v = b_eq, a_ub v <= b_ub, lo <= v <= hi.

The program is brought to standard form (A x = b, x >= 0, b >= 0):
finite lower bounds are shifted out, finite upper bounds become rows,
variables with only an upper bound are mirrored and free variables are split.
"""
import logging
import re
from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterable, List, Optional, Tuple

import numpy as np

from config.settings import BLAND_AFTER_DEGENERATE_PIVOTS, ITERATION_CAP_PER_VARIABLE, TOLERANCES
from src.errors import DomainError, LpStalledError

logger = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

PIVOT_TOL = 1e-9
RATIO_TIE_TOL = 1e-12
DEGENERATE_STEP = 1e-12


def _matrix(rows, ncols: int) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    if arr.size == 0:
        return np.zeros((0, ncols))
    return arr.reshape(-1, ncols)


@dataclass(eq=False)
class LinearProgram:
    c: np.ndarray
    a_eq: np.ndarray = None
    b_eq: np.ndarray = None
    a_ub: np.ndarray = None
    b_ub: np.ndarray = None
    lo: np.ndarray = None
    hi: np.ndarray = None
    constant: float = 0.0
    var_names: List[str] = field(default_factory=list)
    eq_names: List[str] = field(default_factory=list)
    ub_names: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.shape[0]
        self.a_eq = _matrix(self.a_eq if self.a_eq is not None else [], n)
        self.b_eq = np.asarray(self.b_eq if self.b_eq is not None else [], dtype=float).reshape(-1)
        self.a_ub = _matrix(self.a_ub if self.a_ub is not None else [], n)
        self.b_ub = np.asarray(self.b_ub if self.b_ub is not None else [], dtype=float).reshape(-1)
        self.lo = np.zeros(n) if self.lo is None else np.asarray(self.lo, dtype=float).reshape(-1)
        self.hi = np.full(n, np.inf) if self.hi is None else np.asarray(self.hi, dtype=float).reshape(-1)

        if self.a_eq.shape[0] != self.b_eq.shape[0] or self.a_ub.shape[0] != self.b_ub.shape[0]:
            raise DomainError("every constraint row needs exactly one right-hand side")
        if self.lo.shape[0] != n or self.hi.shape[0] != n:
            raise DomainError("bounds must have one entry per variable")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.a_eq)) and np.all(np.isfinite(self.a_ub))):
            raise DomainError("objective and constraint coefficients must be finite")
        if not (np.all(np.isfinite(self.b_eq)) and np.all(np.isfinite(self.b_ub))):
            raise DomainError("right-hand sides must be finite")
        if np.any(self.lo > self.hi) or np.any(self.lo == np.inf) or np.any(self.hi == -np.inf):
            raise DomainError("variable bounds must satisfy lo <= hi")
        if not self.var_names:
            self.var_names = [f"v{j}" for j in range(n)]
        if not self.eq_names:
            self.eq_names = [f"e{k}" for k in range(self.a_eq.shape[0])]
        if not self.ub_names:
            self.ub_names = [f"u{k}" for k in range(self.a_ub.shape[0])]

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]

    def max_violation(self, values: np.ndarray) -> float:
        """Largest absolute violation of any row or bound at `values`."""
        worst = 0.0
        if self.a_eq.shape[0]:
            worst = max(worst, float(np.max(np.abs(self.a_eq @ values - self.b_eq))))
        if self.a_ub.shape[0]:
            worst = max(worst, float(np.max(self.a_ub @ values - self.b_ub)))
        if values.shape[0]:
            worst = max(worst, float(np.max(self.lo - values)), float(np.max(values - self.hi)))
        return max(worst, 0.0)

    def objective_at(self, values: np.ndarray) -> float:
        return float(self.c @ values + self.constant)


@dataclass(eq=False)
class LpSolution:
    status: str
    values: Optional[np.ndarray] = None
    objective: Optional[float] = None
    iterations: int = 0
    duals_eq: Optional[np.ndarray] = None
    duals_ub: Optional[np.ndarray] = None

    @property
    def is_optimal(self) -> bool:
        return self.status == OPTIMAL


class LpBuilder:
    """
    Builds a LinearProgram from hashable variable keys, e.g. ('x', i, d, t).
    Terms are (key, coefficient) pairs; repeated keys are summed.
    """

    def __init__(self):
        self._index: Dict[Hashable, int] = {}
        self._keys: List[Hashable] = []
        self._cost: List[float] = []
        self._lo: List[float] = []
        self._hi: List[float] = []
        self._eq: List[Tuple[Dict[int, float], float, str]] = []
        self._ub: List[Tuple[Dict[int, float], float, str]] = []
        self.constant = 0.0

    def add_var(self, key: Hashable, cost: float = 0.0, lo: float = 0.0, hi: float = np.inf) -> int:
        if key in self._index:
            raise DomainError(f"variable {key!r} declared twice")
        self._index[key] = len(self._keys)
        self._keys.append(key)
        self._cost.append(float(cost))
        self._lo.append(float(lo))
        self._hi.append(float(hi))
        return self._index[key]

    def has(self, key: Hashable) -> bool:
        return key in self._index

    def index(self, key: Hashable) -> int:
        return self._index[key]

    @property
    def keys(self) -> List[Hashable]:
        return list(self._keys)

    def _row(self, terms: Iterable[Tuple[Hashable, float]]) -> Dict[int, float]:
        row: Dict[int, float] = {}
        for key, coef in terms:
            j = self._index[key]
            row[j] = row.get(j, 0.0) + float(coef)
        return row

    def add_eq(self, terms, rhs: float, name: str = None):
        self._eq.append((self._row(terms), float(rhs), name or f"e{len(self._eq)}"))

    def add_le(self, terms, rhs: float, name: str = None):
        self._ub.append((self._row(terms), float(rhs), name or f"u{len(self._ub)}"))

    def add_ge(self, terms, rhs: float, name: str = None):
        self.add_le([(key, -coef) for key, coef in terms], -rhs, name)

    @staticmethod
    def _dense(rows, n):
        a = np.zeros((len(rows), n))
        b = np.zeros(len(rows))
        for k, (row, rhs, _) in enumerate(rows):
            for j, coef in row.items():
                a[k, j] = coef
            b[k] = rhs
        return a, b

    def build(self) -> LinearProgram:
        n = len(self._keys)
        a_eq, b_eq = self._dense(self._eq, n)
        a_ub, b_ub = self._dense(self._ub, n)
        return LinearProgram(
            c=np.array(self._cost), a_eq=a_eq, b_eq=b_eq, a_ub=a_ub, b_ub=b_ub,
            lo=np.array(self._lo), hi=np.array(self._hi), constant=self.constant,
            var_names=[variable_name(k) for k in self._keys],
            eq_names=[name for _, _, name in self._eq],
            ub_names=[name for _, _, name in self._ub],
        )

    def value(self, solution: LpSolution, key: Hashable, default: float = 0.0) -> float:
        j = self._index.get(key)
        if j is None or solution.values is None:
            return default
        return float(solution.values[j])


def variable_name(key: Hashable) -> str:
    if isinstance(key, tuple):
        key = "_".join(str(part) for part in key)
    return re.sub(r"[^A-Za-z0-9_.]", "_", str(key))


class _IterationCapReached(Exception):
    pass


@dataclass
class _StandardForm:
    a: np.ndarray            # rows x columns, columns = structural | slack
    b: np.ndarray
    c: np.ndarray
    constant: float
    to_original: np.ndarray  # original vars x structural columns
    offset: np.ndarray
    n_struct: int
    basis_hint: List[Optional[int]]       # slack column usable as initial basis per row
    row_sign: np.ndarray                  # -1 where the row was negated
    row_kind: List[Tuple[str, int]]       # ('eq'|'ub'|'bound', original index)


def _standardize(lp: LinearProgram) -> _StandardForm:
    n = lp.num_vars
    offset = np.zeros(n)
    columns: List[Tuple[int, float]] = []
    bound_rows: List[Tuple[int, float]] = []
    for j in range(n):
        lo, hi = lp.lo[j], lp.hi[j]
        if np.isfinite(lo):
            offset[j] = lo
            columns.append((j, 1.0))
            if np.isfinite(hi):
                bound_rows.append((len(columns) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            columns.append((j, -1.0))
        else:
            columns.append((j, 1.0))
            columns.append((j, -1.0))

    n_struct = len(columns)
    to_original = np.zeros((n, n_struct))
    for col, (j, sign) in enumerate(columns):
        to_original[j, col] = sign

    a_eq = lp.a_eq @ to_original
    b_eq = lp.b_eq - lp.a_eq @ offset
    a_ub = lp.a_ub @ to_original
    b_ub = lp.b_ub - lp.a_ub @ offset
    a_bound = np.zeros((len(bound_rows), n_struct))
    b_bound = np.zeros(len(bound_rows))
    for k, (col, width) in enumerate(bound_rows):
        a_bound[k, col] = 1.0
        b_bound[k] = width

    m_eq, m_ub, m_bd = a_eq.shape[0], a_ub.shape[0], a_bound.shape[0]
    n_slack = m_ub + m_bd
    m = m_eq + n_slack
    a = np.zeros((m, n_struct + n_slack))
    a[:m_eq, :n_struct] = a_eq
    a[m_eq:m_eq + m_ub, :n_struct] = a_ub
    a[m_eq + m_ub:, :n_struct] = a_bound
    a[m_eq:, n_struct:] = np.eye(n_slack)
    b = np.concatenate([b_eq, b_ub, b_bound])

    row_kind = ([('eq', k) for k in range(m_eq)] + [('ub', k) for k in range(m_ub)]
                + [('bound', k) for k in range(m_bd)])
    basis_hint: List[Optional[int]] = [None] * m_eq + [n_struct + k for k in range(n_slack)]
    row_sign = np.ones(m)
    negative = b < 0
    a[negative] *= -1
    b[negative] *= -1
    row_sign[negative] = -1
    for r in np.flatnonzero(negative):
        basis_hint[r] = None

    c = np.concatenate([lp.c @ to_original, np.zeros(n_slack)])
    constant = lp.constant + float(lp.c @ offset)
    return _StandardForm(a, b, c, constant, to_original, offset, n_struct, basis_hint, row_sign, row_kind)


class _Tableau:
    """Simplex tableau: constraint rows with the rhs in the last column, plus one objective row."""

    def __init__(self, a: np.ndarray, b: np.ndarray, basis: List[int], iteration_cap: int):
        self.table = np.hstack([a, b[:, None]])
        self.basis = list(basis)
        self.obj = np.zeros(a.shape[1] + 1)
        self.iterations = 0
        self.iteration_cap = iteration_cap
        self.degenerate_run = 0
        self.opt_tol = TOLERANCES.feasibility

    @property
    def num_rows(self) -> int:
        return self.table.shape[0]

    def set_objective(self, cost: np.ndarray):
        obj = np.append(cost, 0.0)
        for r, j in enumerate(self.basis):
            if cost[j] != 0.0:
                obj -= cost[j] * self.table[r]
        self.obj = obj
        self.opt_tol = TOLERANCES.feasibility * max(1.0, float(np.max(np.abs(cost), initial=0.0)))

    def current_value(self) -> float:
        return -float(self.obj[-1])

    def _find_pivot_column(self, bland: bool) -> Optional[int]:
        reduced = self.obj[:-1]
        candidates = np.flatnonzero(reduced < -self.opt_tol)
        if candidates.size == 0:
            return None
        if bland:
            return int(candidates[0])
        return int(candidates[np.argmin(reduced[candidates])])

    def _find_pivot_row(self, col: int) -> Optional[Tuple[int, float]]:
        column = self.table[:, col]
        positive = np.flatnonzero(column > PIVOT_TOL)
        if positive.size == 0:
            return None
        ratios = self.table[positive, -1] / column[positive]
        best = float(ratios.min())
        ties = positive[ratios <= best + RATIO_TIE_TOL]
        row = min(ties, key=lambda r: self.basis[r])
        return int(row), best

    def _pivot(self, row: int, col: int):
        pivot_row = self.table[row] / self.table[row, col]
        self.table -= np.outer(self.table[:, col], pivot_row)
        self.table[row] = pivot_row
        self.obj -= self.obj[col] * pivot_row
        rhs = self.table[:, -1]
        rhs[rhs < 0] = 0.0
        self.basis[row] = col

    def optimize(self) -> str:
        while True:
            bland = self.degenerate_run >= BLAND_AFTER_DEGENERATE_PIVOTS
            col = self._find_pivot_column(bland)
            if col is None:
                return OPTIMAL
            found = self._find_pivot_row(col)
            if found is None:
                return UNBOUNDED
            if self.iterations >= self.iteration_cap:
                raise _IterationCapReached()
            row, step = found
            self._pivot(row, col)
            self.iterations += 1
            self.degenerate_run = self.degenerate_run + 1 if step <= DEGENERATE_STEP else 0

    def drive_out(self, first_artificial: int) -> List[int]:
        """Pivot artificial variables out of the basis; returns rows that are redundant."""
        redundant = []
        for r in range(self.num_rows):
            if self.basis[r] < first_artificial:
                continue
            entries = np.flatnonzero(np.abs(self.table[r, :first_artificial]) > PIVOT_TOL)
            if entries.size == 0:
                redundant.append(r)
                continue
            self._pivot(r, int(entries[0]))
        return redundant

    def drop(self, rows: List[int], first_artificial: int):
        keep = [r for r in range(self.num_rows) if r not in set(rows)]
        cols = list(range(first_artificial)) + [self.table.shape[1] - 1]
        self.table = self.table[np.ix_(keep, cols)]
        self.basis = [self.basis[r] for r in keep]
        self.obj = self.obj[cols]
        return keep


def _recover(std: _StandardForm, rows: List[int], basis: List[int], table_rhs: np.ndarray) -> np.ndarray:
    x = np.zeros(std.a.shape[1])
    if rows:
        basic = std.a[np.ix_(rows, basis)]
        try:
            x_basic = np.linalg.solve(basic, std.b[rows])
        except np.linalg.LinAlgError:
            x_basic = table_rhs
        x_basic[(x_basic < 0) & (x_basic >= -TOLERANCES.feasibility)] = 0.0
        x[basis] = x_basic
    return x


def _to_original(std: _StandardForm, x: np.ndarray) -> np.ndarray:
    return std.offset + std.to_original @ x[:std.n_struct]


def _duals(std: _StandardForm, lp: LinearProgram, rows: List[int], basis: List[int]):
    duals_eq = np.zeros(lp.a_eq.shape[0])
    duals_ub = np.zeros(lp.a_ub.shape[0])
    if not rows:
        return duals_eq, duals_ub
    basic = std.a[np.ix_(rows, basis)]
    try:
        y = np.linalg.solve(basic.T, std.c[basis])
    except np.linalg.LinAlgError:
        return duals_eq, duals_ub
    for value, r in zip(y, rows):
        kind, k = std.row_kind[r]
        if kind == 'eq':
            duals_eq[k] = value * std.row_sign[r]
        elif kind == 'ub':
            duals_ub[k] = value * std.row_sign[r]
    return duals_eq, duals_ub


def solve(lp: LinearProgram) -> LpSolution:
    """
    Solve `lp` to optimality. Infeasible and unbounded programs are reported through
    LpSolution.status; exceeding the iteration cap raises LpStalledError.
    """
    std = _standardize(lp)
    m, n_cols = std.a.shape
    iteration_cap = ITERATION_CAP_PER_VARIABLE * max(1, lp.num_vars)

    artificial_rows = [r for r in range(m) if std.basis_hint[r] is None]
    n_art = len(artificial_rows)
    a1 = np.hstack([std.a, np.zeros((m, n_art))])
    basis = list(std.basis_hint)
    for k, r in enumerate(artificial_rows):
        a1[r, n_cols + k] = 1.0
        basis[r] = n_cols + k
    tableau = _Tableau(a1, std.b.copy(), basis, iteration_cap)

    try:
        if n_art:
            phase_one_cost = np.concatenate([np.zeros(n_cols), np.ones(n_art)])
            tableau.set_objective(phase_one_cost)
            tableau.optimize()
            scale = max(1.0, float(np.max(np.abs(std.b), initial=0.0)))
            if tableau.current_value() > TOLERANCES.feasibility * scale:
                logger.debug("LP infeasible: phase one residual %.3e", tableau.current_value())
                return LpSolution(INFEASIBLE, iterations=tableau.iterations)
        redundant = tableau.drive_out(n_cols)
        rows = tableau.drop(redundant, n_cols)
        if redundant:
            logger.debug("Dropped %d redundant equality rows", len(redundant))

        tableau.set_objective(std.c)
        status = tableau.optimize()
    except _IterationCapReached:
        best_point, best_objective = None, None
        if tableau.table.shape[1] == n_cols + 1:
            x = np.zeros(n_cols)
            x[tableau.basis] = tableau.table[:, -1]
            best_point = _to_original(std, x)
            best_objective = lp.objective_at(best_point)
        raise LpStalledError(tableau.iterations, best_point, best_objective)

    if status == UNBOUNDED:
        logger.debug("LP unbounded after %d iterations", tableau.iterations)
        return LpSolution(UNBOUNDED, iterations=tableau.iterations)

    x = _recover(std, rows, tableau.basis, tableau.table[:, -1].copy())
    values = _to_original(std, x)
    duals_eq, duals_ub = _duals(std, lp, rows, tableau.basis)
    objective = lp.objective_at(values)
    logger.debug("LP optimal: objective %.9g, %d iterations", objective, tableau.iterations)
    return LpSolution(OPTIMAL, values, objective, tableau.iterations, duals_eq, duals_ub)


def _format_terms(coefs: np.ndarray, names: List[str]) -> str:
    parts = []
    for j in np.flatnonzero(coefs):
        coef = coefs[j]
        sign = "-" if coef < 0 else "+"
        parts.append(f"{sign} {abs(coef):.12g} {names[j]}")
    if not parts:
        return "0 " + names[0] if names else "0"
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def dump_lp(lp: LinearProgram) -> str:
    """Text dump in CPLEX LP format, readable by glpsol, HiGHS and CBC."""
    names = [variable_name(n) for n in lp.var_names]
    lines = ["\\ geographical load balancing LP", "Minimize"]
    objective = _format_terms(lp.c, names)
    if lp.constant:
        objective += f" + {lp.constant:.12g} constant"
    lines.append(f" obj: {objective}")
    lines.append("Subject To")
    for k in range(lp.a_eq.shape[0]):
        lines.append(f" {variable_name(lp.eq_names[k])}: {_format_terms(lp.a_eq[k], names)} = {lp.b_eq[k]:.12g}")
    for k in range(lp.a_ub.shape[0]):
        lines.append(f" {variable_name(lp.ub_names[k])}: {_format_terms(lp.a_ub[k], names)} <= {lp.b_ub[k]:.12g}")
    if lp.constant:
        lines.append(" fix_constant: constant = 1")
    lines.append("Bounds")
    for j, name in enumerate(names):
        lo, hi = lp.lo[j], lp.hi[j]
        if np.isinf(lo) and np.isinf(hi):
            lines.append(f" {name} free")
        elif np.isinf(hi):
            if lo != 0:
                lines.append(f" {name} >= {lo:.12g}")
        elif np.isinf(lo):
            lines.append(f" -inf <= {name} <= {hi:.12g}")
        else:
            lines.append(f" {lo:.12g} <= {name} <= {hi:.12g}")
    lines.append("End")
    return "\n".join(lines) + "\n"
